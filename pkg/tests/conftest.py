import numpy as np
import pytest

from fiflab import InterpolationData, build_system


@pytest.fixture
def tent_data():
    return InterpolationData([0.0, 0.5, 1.0], [[0.0], [1.0], [0.0]])


@pytest.fixture
def tent_flat(tent_data):
    """Zero-scaling system whose fixed point is the exact tent."""
    return build_system(tent_data, [0.0, 0.0])


@pytest.fixture
def tent_rough(tent_data):
    return build_system(tent_data, [0.6, 0.6])


def random_system(rng, n_knots=None, dim=None, scaling_cap=0.7, min_gap=0.08):
    """Random valid affine system for ensemble tests."""
    if n_knots is None:
        n_knots = int(rng.integers(3, 7))
    if dim is None:
        dim = int(rng.integers(1, 4))
    while True:
        interior = np.sort(rng.random(n_knots - 2))
        knots = np.concatenate([[0.0], interior, [1.0]])
        if np.all(np.diff(knots) >= min_gap):
            break
    values = rng.standard_normal((n_knots, dim))
    scalings = rng.uniform(-scaling_cap, scaling_cap, n_knots - 1)
    data = InterpolationData(knots, values)
    return build_system(data, scalings)
