"""Synthetic scenes with known footprints and profiles.

A scene is a handful of buildings, each a footprint plus a roof recipe.
The clean mass models come from :func:`massfit.extrusion.extrude`; the
"photogrammetric" mesh is those models with floors and party walls
removed, cut into small triangles, jittered and punched with holes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely

from .extrusion import MassModel, extrude
from .geometry import Polygon2, TriMesh, heights_at, polygons_from_shapely
from .profiles import Profile

ROOFS = ("flat", "gable", "mansard", "hip")


@dataclass(frozen=True)
class BuildingSpec:
    """One building: footprint ring and roof recipe.

    ``flat`` walls rise to ``height``; ``gable`` and ``hip`` have walls to
    ``eaves`` and a ridge at ``height``; ``mansard`` breaks at ``eaves``,
    then climbs a steep lower pitch of run ``break_run`` to ``break_height``
    and a shallow upper pitch to ``height``.
    """

    footprint: tuple[tuple[float, float], ...]
    roof: str = "flat"
    height: float = 3.0
    eaves: float | None = None
    break_run: float = 1.0
    break_height: float | None = None

    def __post_init__(self):
        if self.roof not in ROOFS:
            raise ValueError(f"unknown roof {self.roof!r}; choose from {ROOFS}")
        if not self.height > 0:
            raise ValueError("height must be positive")
        if self.roof != "flat":
            if self.eaves is None or not 0 <= self.eaves < self.height:
                raise ValueError(f"{self.roof} roof needs 0 <= eaves < height")
        if self.roof == "mansard":
            bh = self.break_height
            if bh is None or not self.eaves < bh < self.height or self.break_run <= 0:
                raise ValueError("mansard needs eaves < break_height < height and break_run > 0")

    @classmethod
    def rect(cls, x0, y0, x1, y1, **kw) -> BuildingSpec:
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), **kw)

    @property
    def polygon(self) -> Polygon2:
        return Polygon2(np.array(self.footprint, float))

    def profiles(self) -> dict[int, Profile]:
        poly = self.polygon
        if self.roof == "flat":
            return {k: Profile.vertical(self.height) for k, _, _ in poly.edges()}
        rise = self.height - self.eaves
        if self.roof == "mansard":
            lower = (self.break_run, self.break_height - self.eaves)
            half = _inradius(poly)
            run = max(half - self.break_run, 1e-3)
            prof = Profile.pitched(self.eaves, [lower, (run, self.height - self.break_height)])
            return {k: prof for k, _, _ in poly.edges()}
        if self.roof == "hip":
            prof = Profile.pitched(self.eaves, [(_inradius(poly), rise)])
            return {k: prof for k, _, _ in poly.edges()}
        # gable: the long sides pitch up to a ridge, the short ends stay vertical
        lengths = {k: float(np.linalg.norm(b - a)) for k, a, b in poly.edges()}
        longest = max(lengths.values())
        half = _inradius(poly)
        out = {}
        for k, L in lengths.items():
            if L >= longest - 1e-9:
                out[k] = Profile.pitched(self.eaves, [(half, rise)])
            else:
                out[k] = Profile.vertical(self.height)
        return out

    def to_dict(self) -> dict:
        d = {"footprint": [list(p) for p in self.footprint], "roof": self.roof, "height": self.height}
        if self.eaves is not None:
            d["eaves"] = self.eaves
        if self.roof == "mansard":
            d["break_run"] = self.break_run
            d["break_height"] = self.break_height
        return d

    @classmethod
    def from_dict(cls, d: dict) -> BuildingSpec:
        if "rect" in d:
            x0, y0, x1, y1 = d["rect"]
            ring = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        else:
            ring = tuple(tuple(float(c) for c in p) for p in d["footprint"])
        keys = ("roof", "height", "eaves", "break_run", "break_height")
        return cls(ring, **{k: d[k] for k in keys if k in d})


def _inradius(poly: Polygon2) -> float:
    """Half the width of the footprint's narrowest direction (exact for rectangles)."""
    rect = poly.shape.minimum_rotated_rectangle
    c = np.asarray(rect.exterior.coords)[:4]
    return 0.5 * min(np.linalg.norm(c[1] - c[0]), np.linalg.norm(c[2] - c[1]))


@dataclass(frozen=True)
class SceneSpec:
    buildings: tuple[BuildingSpec, ...]
    sigma: float = 0.0
    dropout: float = 0.0
    target_edge: float = 0.3
    name: str = "scene"

    def __post_init__(self):
        if not self.buildings:
            raise ValueError("a scene needs at least one building")
        if self.sigma < 0 or not 0 <= self.dropout < 1 or self.target_edge <= 0:
            raise ValueError("need sigma >= 0, 0 <= dropout < 1 and target_edge > 0")
        shapes = [b.polygon.shape for b in self.buildings]
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                if shapes[i].intersection(shapes[j]).area > 1e-9:
                    raise ValueError(f"buildings {i} and {j} overlap")

    def to_json(self) -> str:
        d = {
            "name": self.name,
            "sigma": self.sigma,
            "dropout": self.dropout,
            "target_edge": self.target_edge,
            "buildings": [b.to_dict() for b in self.buildings],
        }
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> SceneSpec:
        d = json.loads(text)
        try:
            return cls(
                tuple(BuildingSpec.from_dict(b) for b in d["buildings"]),
                sigma=float(d.get("sigma", 0.0)),
                dropout=float(d.get("dropout", 0.0)),
                target_edge=float(d.get("target_edge", 0.3)),
                name=str(d.get("name", "scene")),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"invalid scene descriptor: {e}") from e


@dataclass
class SceneTruth:
    spec: SceneSpec
    seed: int
    footprints: list[Polygon2]
    profiles: list[dict[int, Profile]]
    models: list[MassModel]
    clean: TriMesh
    mesh: TriMesh = field(repr=False, default=None)

    @property
    def sigma(self) -> float:
        return self.spec.sigma

    @property
    def gis(self) -> list[Polygon2]:
        """What a map would show: touching buildings merged into one outline."""
        return polygons_from_shapely(shapely.union_all([p.shape for p in self.footprints]))

    @property
    def dropout(self) -> float:
        return self.spec.dropout


# ---------------------------------------------------------------- presets


def box_scene(sigma=0.05, dropout=0.1) -> SceneSpec:
    return SceneSpec((BuildingSpec.rect(0, 0, 10, 6, height=3.0),), sigma, dropout, name="box")


def terrace_scene(sigma=0.05, dropout=0.1) -> SceneSpec:
    """Two flat-roofed terraces; the party wall sits 6 m from the west end."""
    return SceneSpec(
        (
            BuildingSpec.rect(0, 0, 6, 8, height=6.0),
            BuildingSpec.rect(6, 0, 14, 8, height=9.0),
        ),
        sigma,
        dropout,
        name="terrace",
    )


def house_scene(sigma=0.05, dropout=0.1) -> SceneSpec:
    return SceneSpec(
        (BuildingSpec.rect(0, 0, 10, 7, roof="gable", height=6.0, eaves=3.5),),
        sigma,
        dropout,
        name="house",
    )


def block_scene(sigma=0.05, dropout=0.1) -> SceneSpec:
    """A row of a tall hall, a lower wing and a small shed.

    Their visible wall areas differ enough that raising the area threshold
    drops first the shed's end wall, then the wing's walls.
    """
    return SceneSpec(
        (
            BuildingSpec.rect(0, 0, 16, 10, height=8.0),
            BuildingSpec.rect(16, 0, 24, 10, height=4.0),
            BuildingSpec.rect(-3, 0, 0, 10, height=2.0),
        ),
        sigma,
        dropout,
        name="block",
    )


PRESETS = {"box": box_scene, "terrace": terrace_scene, "house": house_scene, "block": block_scene}


# ---------------------------------------------------------------- mesh making


def subdivide(V: np.ndarray, T: np.ndarray, target: float) -> tuple[np.ndarray, np.ndarray]:
    """Split every triangle into k^2 similar pieces, k = ceil(longest edge / target)."""
    outV, outT, off = [], [], 0
    c = V[T]
    longest = np.max(np.linalg.norm(c - np.roll(c, 1, axis=1), axis=2), axis=1)
    ks = np.maximum(1, np.ceil(longest / target - 1e-9)).astype(int)
    templates = {}
    for t, k in zip(T, ks):
        if k not in templates:
            ij = [(i, j) for i in range(k + 1) for j in range(k + 1 - i)]
            index = {p: n for n, p in enumerate(ij)}
            bary = np.array([(k - i - j, i, j) for i, j in ij], float) / k
            tris = []
            for i in range(k):
                for j in range(k - i):
                    tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
                    if i + j < k - 1:
                        tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
            templates[k] = (bary, np.array(tris))
        bary, tris = templates[k]
        outV.append(bary @ V[t])
        outT.append(tris + off)
        off += len(bary)
    return np.vstack(outV), np.vstack(outT)


def _hidden(models: Sequence[MassModel], owner: np.ndarray, V: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Triangles no camera could see: floors and faces buried in a neighbour."""
    c = V[T]
    cen = c.mean(axis=1)
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    hidden = cen[:, 2] < 1e-9
    probe = cen + 0.05 * n
    for k, m in enumerate(models):
        other = owner != k
        inside = shapely.contains_xy(m.footprint.shape, probe[:, 0], probe[:, 1])
        cand = other & inside & ~hidden
        if cand.any():
            h = heights_at(m.mesh, probe[cand, :2])
            idx = np.nonzero(cand)[0]
            hidden[idx] |= np.nan_to_num(h, nan=-np.inf) > probe[cand, 2]
    return hidden


def synth_generate(spec: SceneSpec, seed: int = 0) -> SceneTruth:
    """Extrude the scene, then degrade it into a noisy surface mesh."""
    models, profiles, footprints = [], [], []
    for k, b in enumerate(spec.buildings):
        prof = b.profiles()
        models.append(extrude(b.polygon, prof, h_cap=b.height, footprint_id=k))
        profiles.append(prof)
        footprints.append(b.polygon)
    clean = TriMesh.concatenate([m.mesh for m in models])
    owner = np.concatenate([np.full(m.n_triangles, k) for k, m in enumerate(models)])

    V, T = subdivide(clean.vertices, clean.triangles, spec.target_edge)
    # barycentric blends leave ulp-level noise; a nanometre grid removes it
    V = np.round(V, 9)
    owner = np.repeat(owner, [_count(clean.vertices[t], spec.target_edge) for t in clean.triangles])
    keep = ~_hidden(models, owner, V, T)
    fine = TriMesh.from_arrays(V, T[keep])

    rng = np.random.default_rng(seed)
    V = fine.vertices.copy()
    if spec.sigma > 0:
        V = V + rng.normal(0.0, spec.sigma, size=V.shape)
    T = fine.triangles
    if spec.dropout > 0:
        T = T[rng.random(len(T)) >= spec.dropout]
    mesh = TriMesh.from_arrays(V, T)
    return SceneTruth(spec, seed, footprints, profiles, models, clean, mesh)


def _count(tri: np.ndarray, target: float) -> int:
    longest = max(np.linalg.norm(tri[i] - tri[i - 1]) for i in range(3))
    k = max(1, math.ceil(longest / target - 1e-9))
    return k * k
