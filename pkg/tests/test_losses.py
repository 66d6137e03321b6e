import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtrack.losses import ClippedWindowLoss, Grid, LossConfig, clip, observation_loss
from nhtrack.simulator import pulse

GRID = Grid()
CFG = LossConfig(pulse_halfwidth=50, noise_scale=1.0)


def brute_loss(x, values, cfg, grid):
    total = 0.0
    for g, m in zip(range(grid.lo, grid.hi + 1), values):
        if abs(g - x) <= cfg.pulse_halfwidth:
            total += min(1 + cfg.noise_scale, max(m, -cfg.noise_scale))
    return -total


@pytest.mark.parametrize("y, expected", [(5.0, 2.0), (-3.0, -1.0), (0.3, 0.3)])
def test_clip(y, expected):
    assert clip(y, 1.0) == expected


def test_zero_frame():
    assert observation_loss(17.3, np.zeros(GRID.size), CFG, GRID) == 0.0


def test_matched_pulse():
    frame = pulse(GRID.cells, 20.0, 50)
    assert observation_loss(20.0, frame, CFG, GRID) == -101.0


def test_disjoint_pulse():
    frame = pulse(GRID.cells, -200.0, 50)
    assert observation_loss(100.0, frame, CFG, GRID) == 0.0


def test_frame_size_mismatch():
    with pytest.raises(ValueError):
        observation_loss(0.0, np.zeros(10), CFG, GRID)


def test_edge_truncation():
    frame = np.ones(GRID.size)
    assert observation_loss(500.0, frame, CFG, GRID) == -51.0
    assert observation_loss(-520.0, frame, CFG, GRID) == -31.0
    assert observation_loss(700.0, frame, CFG, GRID) == 0.0


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-560, 560),
    st.floats(0.1, 10),
    st.integers(0, 60),
    st.integers(0, 2**32 - 1),
)
def test_matches_brute_force_and_bounds(x, sigma, w, seed):
    cfg = LossConfig(w, sigma)
    grid = Grid(-100, 100) if abs(x) < 150 else GRID
    values = np.random.default_rng(seed).normal(0, 3 * sigma, grid.size)
    got = observation_loss(x, values, cfg, grid)
    assert got == pytest.approx(brute_loss(x, values, cfg, grid), abs=1e-9)
    assert -(2 * w + 1) * (1 + sigma) - 1e-9 <= got <= (2 * w + 1) * sigma + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(-200, 200), st.integers(-100, 100), st.integers(0, 2**32 - 1))
def test_shift_equivariance(x, d, seed):
    values = np.random.default_rng(seed).normal(0, 2, GRID.size)
    shifted = np.roll(values, d)
    a = observation_loss(float(x), values, CFG, GRID)
    b = observation_loss(float(x + d), shifted, CFG, GRID)
    assert a == pytest.approx(b, abs=1e-9)


def test_monotone_benefit():
    values = np.full(GRID.size, 0.2)
    before = observation_loss(0.0, values, CFG, GRID)
    values[GRID.size // 2 + 10] += 0.5
    assert observation_loss(0.0, values, CFG, GRID) == pytest.approx(before - 0.5, abs=1e-12)


def test_vectorised_states():
    values = np.random.default_rng(0).normal(0, 1, GRID.size)
    xs = np.array([[-300.5], [0.0], [12.25], [499.9]])
    got = ClippedWindowLoss(CFG, GRID)(xs, values)
    expected = [brute_loss(x, values, CFG, GRID) for x in xs[:, 0]]
    np.testing.assert_allclose(got, expected, atol=1e-9)
