import numpy as np
import pytest

from myogest.synthetic import generate_synthetic_dataset


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two subjects, 3 rounds x 4 cycles x 7 gestures, short holds (fast)."""
    root = tmp_path_factory.mktemp("data") / "small"
    generate_synthetic_dataset(
        root,
        subjects=(1, 2),
        rounds=3,
        cycles=4,
        gestures=7,
        n_samples=120,
        rotations={2: 3},
        amplitudes={1: 40.0, 2: 34.0},
        noises={1: 3.0, 2: 4.5},
        seed=11,
    )
    return root


@pytest.fixture(scope="session")
def ninapro_dataset(tmp_path_factory):
    """One subject with 6 repetitions stored as cycles of round 1."""
    root = tmp_path_factory.mktemp("data") / "nina"
    generate_synthetic_dataset(
        root,
        schema="ninapro-converted",
        subjects=(1,),
        rounds=1,
        cycles=6,
        gestures=7,
        n_samples=120,
        seed=5,
    )
    return root
