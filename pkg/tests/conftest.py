from pathlib import Path

import numpy as np
import pytest
import yaml

from descentgen.physics import AircraftConfig

ROOT = Path(__file__).resolve().parents[1]


def load_cfg(name="B738", **over) -> AircraftConfig:
    raw = yaml.safe_load((ROOT / "configs" / f"{name}.yaml").read_text())
    raw.update(over)
    return AircraftConfig.from_dict(raw)


@pytest.fixture
def cfg():
    return load_cfg()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
