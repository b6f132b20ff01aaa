import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from massfit.pipeline import PipelineConfig, run_pipeline  # noqa: E402
from massfit.synth import PRESETS, synth_generate  # noqa: E402


@lru_cache(maxsize=None)
def scene(name: str, seed: int = 0):
    return synth_generate(PRESETS[name](), seed)


@lru_cache(maxsize=None)
def reconstruction(name: str, seed: int = 0, **overrides):
    t = scene(name, seed)
    return run_pipeline(t.mesh, t.gis, PipelineConfig().with_overrides(**overrides), name=name)


@pytest.fixture
def get_scene():
    return scene


@pytest.fixture
def get_reconstruction():
    return reconstruction
