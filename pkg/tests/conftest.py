import numpy as np
import pytest

from favmap.geom import Raster, Rect
from favmap.synthcity import ScenarioConfig, generate


@pytest.fixture
def small_scenario():
    """12x12 tiles at 15 m pixels: quick, mildly imbalanced."""
    cfg = ScenarioConfig(
        extent=Rect(0.0, -1800.0, 1800.0, 0.0),
        pixel_size=15.0,
        n_favelas=3,
        target_imbalance=6.0,
        seed=11,
    )
    return generate(cfg)


@pytest.fixture(scope="session")
def imbalanced_scenario():
    """24x24 tiles at roughly the study's 30:1 class imbalance."""
    cfg = ScenarioConfig(
        extent=Rect(0.0, -3600.0, 3600.0, 0.0),
        pixel_size=15.0,
        n_favelas=4,
        target_imbalance=30.0,
        seed=5,
    )
    return generate(cfg)


@pytest.fixture
def flat_raster():
    """Two constant bands on a 10x10 grid of 1 m pixels from (0, 0)."""
    return Raster(
        0.0, 0.0, 1.0,
        {"a": np.full((10, 10), 0.7), "b": np.full((10, 10), 0.2)},
    )
