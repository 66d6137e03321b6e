import numpy as np
import pytest

from nhtrack import tracker
from nhtrack.losses import ClippedWindowLoss, Grid, LossConfig
from nhtrack.simulator import SimConfig, simulate


def zero_loss(states, frame):
    return np.zeros(len(states))


def make_cfg(**kw):
    kw.setdefault("loss", ClippedWindowLoss(LossConfig(50, 1.0), Grid()))
    return tracker.TrackerConfig(**kw)


def test_init_in_box_with_uniform_weights():
    cfg = make_cfg(n_actions=500)
    st = tracker.init(cfg, np.random.default_rng(0))
    assert st.states.shape == (500, 1)
    assert np.all((st.states >= -500) & (st.states <= 500))
    assert np.all(st.regrets == 0)
    np.testing.assert_allclose(st.weights, 1 / 500)


def test_init_mean_clt():
    cfg = make_cfg(n_actions=10**5)
    st = tracker.init(cfg, np.random.default_rng(1))
    assert abs(st.states.mean()) <= 5


def test_single_action_weight():
    st = tracker.init(make_cfg(n_actions=1), np.random.default_rng(0))
    assert st.weights.tolist() == [1.0]


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        make_cfg(box_lo=(1.0,), box_hi=(1.0,))
    with pytest.raises(ValueError):
        make_cfg(resample_spread=-1.0)


@pytest.mark.parametrize(
    "states, weights, expected",
    [
        ([3.0, 9.0, -4.0], [1.0, 0.0, 0.0], 3.0),
        ([-2.0, 4.0, 10.0, 16.0], [0.25] * 4, 7.0),
        ([0.0, 10.0], [0.75, 0.25], 2.5),
    ],
)
def test_estimate(states, weights, expected):
    assert tracker.estimate(states, weights)[0] == pytest.approx(expected)


def test_single_action_estimate_is_its_state():
    cfg = make_cfg(n_actions=1)
    rng = np.random.default_rng(5)
    _, frames = simulate(SimConfig(horizon=10, seed=2), 0)
    st = tracker.init(cfg, rng)
    for fr in frames:
        before_states = st.states
        st, est = tracker.step(st, fr, cfg, rng)
        # the lone action is always deleted (regret 0) and replaced by a child;
        # the estimate is that child's state, which is then carried forward
        np.testing.assert_array_equal(est, st.states[0])
        assert st.weights.tolist() == [1.0]
        assert before_states.shape == st.states.shape


def test_identical_states_keep_shared_estimate():
    cfg = make_cfg(n_actions=8, resample_spread=0.0)
    rng = np.random.default_rng(0)
    _, frames = simulate(SimConfig(horizon=20, seed=1), 0)
    st = tracker.init(cfg, rng, states=np.full(8, 42.0))
    for fr in frames:
        st, est = tracker.step(st, fr, cfg, rng)
        assert est[0] == pytest.approx(42.0, abs=1e-12)
        np.testing.assert_allclose(st.weights, 1 / 8)
        assert np.ptp(st.regrets) == 0


def test_converges_to_zero_loss_action():
    target = 123.0

    def loss(states, frame):
        return np.where(np.abs(states[:, 0] - target) < 5.0, 0.0, 1.0)

    cfg = tracker.TrackerConfig(loss=loss, n_actions=50, resample_spread=4.0)
    rng = np.random.default_rng(7)
    start = np.linspace(-400, 400, 50)
    start[17] = target
    st = tracker.init(cfg, rng, states=start)
    for _ in range(60):
        st, est = tracker.step(st, None, cfg, rng)
    assert abs(est[0] - target) < 5.0


def test_population_containment_and_determinism():
    cfg = make_cfg(n_actions=100)
    _, frames = simulate(SimConfig(sigma_o=1.0, rho=0.1, horizon=60, seed=8), 1)

    def run(seed):
        rng = np.random.default_rng(seed)
        st = tracker.init(cfg, rng)
        ests = []
        for fr in frames:
            lo, hi = st.states.min(), st.states.max()
            st, est = tracker.step(st, fr, cfg, rng)
            assert st.n_actions == 100 and st.states.shape == (100, 1)
            assert st.weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all((st.weights == 0) == (st.regrets <= 0)) or not np.any(st.regrets > 0)
            ests.append(est[0])
        return np.array(ests)

    a, b = run(3), run(3)
    assert a.tobytes() == b.tobytes()


def test_estimate_within_current_action_hull():
    cfg = make_cfg(n_actions=30)
    rng = np.random.default_rng(2)
    _, frames = simulate(SimConfig(sigma_o=8.0, horizon=40, seed=2), 0)
    st = tracker.init(cfg, rng)
    for fr in frames:
        st, est = tracker.step(st, fr, cfg, rng)
        # identity dynamics: post-step states are the ones the estimate averaged
        assert st.states.min() - 1e-9 <= est[0] <= st.states.max() + 1e-9


def test_parent_probabilities():
    r = np.array([-1.0, 2.0, 0.0, 3.0])
    w = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_allclose(tracker.parent_probabilities(r, w), [0, 1 / 3, 0, 2 / 3])
    np.testing.assert_allclose(tracker.parent_probabilities(-np.abs(r), w), [0.25] * 4)
    np.testing.assert_allclose(tracker.parent_probabilities(r, np.array([1.0, 0, 0, 0])),
                               [0, 0.5, 0, 0.5])


def test_resample_single_survivor_is_everyones_parent():
    cfg = make_cfg(n_actions=5, resample_spread=1.0, loss=zero_loss)
    states = np.arange(5.0)[:, None] * 10
    regrets = np.array([-1.0, -1.0, 4.0, -1.0, -1.0])
    prev_w = np.array([0.0, 0.0, 1.0, 0.0, 0.0])
    _, child_r, parents = tracker.resample(
        [0, 1, 3, 4], states, prev_w, 0.0, np.array([0, 0, 7.0, 0, 0]), regrets, None,
        cfg, np.random.default_rng(0))
    assert parents.tolist() == [2, 2, 2, 2]
    np.testing.assert_allclose(child_r, (1 - 0.02) * 7.0)


def test_resample_no_positive_regret_draws_uniformly():
    cfg = make_cfg(n_actions=4, resample_spread=0.0, loss=zero_loss)
    states = np.arange(4.0)[:, None]
    regrets = np.full(4, -1.0)
    _, _, parents = tracker.resample(
        np.arange(4).repeat(5000), states, np.array([1.0, 0, 0, 0]), 0.0, np.zeros(4),
        regrets, None, cfg, np.random.default_rng(1))
    counts = np.bincount(parents, minlength=4) / parents.size
    np.testing.assert_allclose(counts, 0.25, atol=0.01)


def test_resample_jitter_std():
    cfg = make_cfg(n_actions=1, resample_spread=400.0, loss=zero_loss,
                   box_lo=(-1e9,), box_hi=(1e9,))
    children, _, _ = tracker.resample(
        np.zeros(10**5, dtype=int), np.zeros((1, 1)), np.ones(1), 0.0, np.ones(1), np.ones(1),
        None, cfg, np.random.default_rng(4))
    assert children.std() == pytest.approx(20.0, rel=0.02)


def test_children_clamped_to_box():
    cfg = make_cfg(n_actions=3, resample_spread=1e6, loss=zero_loss)
    children, _, _ = tracker.resample(
        np.zeros(1000, dtype=int), np.full((3, 1), 490.0), np.full(3, 1 / 3), 0.0,
        np.ones(3), np.ones(3), None, cfg, np.random.default_rng(0))
    assert children.min() >= -500 and children.max() <= 500


def test_child_regret_uses_own_fresh_loss():
    def loss(states, frame):
        return states[:, 0] * 0.5

    cfg = tracker.TrackerConfig(loss=loss, n_actions=2, discount=0.1, resample_spread=9.0)
    states = np.array([[0.0], [10.0]])
    children, child_r, parents = tracker.resample(
        [0], states, np.array([0.0, 1.0]), 4.0, np.array([0.0, 6.0]), np.array([-2.0, 1.0]),
        None, cfg, np.random.default_rng(0))
    assert parents.tolist() == [1]
    assert child_r[0] == pytest.approx(0.9 * 6.0 + 4.0 - 0.5 * children[0, 0])


def test_two_dimensional_states():
    def loss(states, frame):
        return np.linalg.norm(states - np.array([3.0, -2.0]), axis=1)

    cov = np.array([[4.0, 1.0], [1.0, 2.0]])
    cfg = tracker.TrackerConfig(loss=loss, n_actions=200, resample_spread=cov,
                                box_lo=(-50.0, -50.0), box_hi=(50.0, 50.0))
    est = tracker.run([None] * 80, cfg, np.random.default_rng(0))
    assert est.shape == (80, 2)
    np.testing.assert_allclose(est[-1], [3.0, -2.0], atol=1.5)
