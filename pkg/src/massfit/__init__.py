"""massfit: watertight building mass models from photogrammetric meshes.

Horizontal slices of the mesh give candidate wall lines (sweep edges);
their lines fracture the ground plane, a small binary integer program
labels the pieces into footprints, per-edge profiles are fitted from the
mesh, and a procedural extrusion sweeps each footprint into a closed mass.
"""

__version__ = "0.1.0"

from .extrusion import ExtrusionError, MassModel, check_closed_manifold, extrude
from .fracture import Arrangement, DegenerateInput, classify_polygons, fracture_plane
from .geometry import HeightField, Polygon2, Segment2, TriMesh, height_field_query, slice_mesh_horizontal
from .io import InputError, load_inputs, read_geojson, read_obj, write_geojson, write_obj
from .metrics import ErrorGrid, RunStats, error_grid, mse, raindrop_check, segmentation_iou
from .pipeline import PipelineConfig, PipelineResult, StageError, export_outputs, run_pipeline
from .profiles import Profile, fit_edge_profile, simplify_profile
from .segmentation import EnergyParams, build_bip, evaluate_energy, footprints_from_labeling, solve
from .sweep import SweepEdge, cluster_contours, extract_contours, sweep_edges_from_clusters
from .synth import PRESETS, BuildingSpec, SceneSpec, SceneTruth, synth_generate


__all__ = [
    "ExtrusionError",
    "MassModel",
    "check_closed_manifold",
    "extrude",
    "Arrangement",
    "DegenerateInput",
    "classify_polygons",
    "fracture_plane",
    "HeightField",
    "Polygon2",
    "Segment2",
    "TriMesh",
    "height_field_query",
    "slice_mesh_horizontal",
    "InputError",
    "load_inputs",
    "read_geojson",
    "read_obj",
    "write_geojson",
    "write_obj",
    "ErrorGrid",
    "RunStats",
    "error_grid",
    "mse",
    "raindrop_check",
    "segmentation_iou",
    "PipelineConfig",
    "PipelineResult",
    "StageError",
    "export_outputs",
    "run_pipeline",
    "Profile",
    "fit_edge_profile",
    "simplify_profile",
    "EnergyParams",
    "build_bip",
    "evaluate_energy",
    "footprints_from_labeling",
    "solve",
    "SweepEdge",
    "cluster_contours",
    "extract_contours",
    "sweep_edges_from_clusters",
    "PRESETS",
    "BuildingSpec",
    "SceneSpec",
    "SceneTruth",
    "synth_generate",
]
