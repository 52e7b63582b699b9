import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialcritic.critic import score_oracle
from socialcritic.errors import DegenerateRange, ScorerFailure, ScriptExhausted
from socialcritic.ras import (
    RasConfig,
    Status,
    init_candidates,
    run_refinement,
    sample_candidates,
    select_best,
    update_sigma,
)

from conftest import one_joint_model

CFG = RasConfig()


def oracle_scorer(target, current=0.0, lo=-1.0, hi=1.0):
    m = one_joint_model(lo, hi)
    return lambda v: score_oracle(m, [target], [v], [current], "q")


def test_config_validation():
    for bad in (dict(tau=0), dict(tau=11), dict(alpha=1.0), dict(beta=0.9), dict(max_iterations=0), dict(sigma_base=0)):
        with pytest.raises(ValueError):
            RasConfig(**bad)


# --- initialisation -------------------------------------------------------------------


def test_init_sign_structure():
    cs = init_candidates(0.0, "increase", (-1, 1), CFG, np.random.default_rng(42))
    assert cs.t == 0 and cs.sigma == 0.6
    assert sum(v > 0 for v in cs.values) == 2 and sum(v < 0 for v in cs.values) == 1
    assert all(-1 <= v <= 1 for v in cs.values)


def test_init_at_upper_limit():
    cs = init_candidates(1.0, "increase", (-1, 1), CFG, np.random.default_rng(3))
    assert cs.values[:2] == (1.0, 1.0) and cs.values[2] < 1.0


def test_init_unspecified_counts_as_increase():
    a = init_candidates(0.1, "unspecified", (-1, 1), CFG, np.random.default_rng(5))
    b = init_candidates(0.1, "increase", (-1, 1), CFG, np.random.default_rng(5))
    assert a == b


def test_init_degenerate_range():
    with pytest.raises(DegenerateRange):
        init_candidates(0.5, "increase", (0.5, 0.5 + 1e-9), CFG, np.random.default_rng(0))


# --- width update and sampling --------------------------------------------------------


@pytest.mark.parametrize("reward, sigma", [(6, 0.24), (5, 0.24), (7, 0.24), (3, 0.9), (4, 0.9), (1, 0.9)])
def test_update_sigma(reward, sigma):
    assert update_sigma(reward, CFG) == sigma


def test_update_sigma_rejects_success():
    with pytest.raises(ValueError):
        update_sigma(8, CFG)


def test_sample_vanishing_width():
    vals = sample_candidates(0.3, 1e-9, (-1, 1), np.random.default_rng(0))
    assert np.allclose(vals, 0.3, atol=1e-7)


def test_sample_at_limit_never_exceeds():
    vals = sample_candidates(1.0, 0.5, (-1, 1), np.random.default_rng(11), count=50)
    assert max(vals) <= 1.0


def test_sample_frozen_regression_value():
    vals = sample_candidates(0.2, 0.24, (-1, 1), np.random.default_rng(7))
    assert vals == (0.20029523680579583, 0.2716989290020328, 0.13420691471306778)


def test_select_best_tie_breaks():
    assert select_best([0.5, 0.1, -0.1], [7, 7, 7], 0.0) == (1, 0.1, 7)
    assert select_best([0.1, -0.1], [5, 5], 0.0) == (0, 0.1, 5)
    assert select_best([0.1, 0.9], [3, 6], 0.0) == (1, 0.9, 6)


# --- the loop -------------------------------------------------------------------------


def test_oracle_converges_seed_1():
    out = run_refinement("q", 0.0, "increase", (-1, 1), oracle_scorer(0.8), CFG, np.random.default_rng(1))
    assert out.status is Status.SUCCESS
    assert abs(out.value - 0.8) <= 0.15 * 2
    assert out.iterations <= 10 and out.reward >= 8


def test_constant_two_fails_after_streak():
    out = run_refinement("q", 0.0, "increase", (-1, 1), lambda v: 2)
    assert out.status is Status.JOINT_FAILURE
    assert len(out.history) == CFG.low_reward_streak_limit


def test_immediate_success():
    out = run_refinement("q", 0.0, "increase", (-1, 1), lambda v: 9, CFG, np.random.default_rng(4))
    assert out.status is Status.SUCCESS and out.iterations == 0
    # all tie at 9: closest to the starting value wins
    first = out.history[0].values
    assert out.value == min(first, key=abs)


def test_budget_exhausted_keeps_best():
    rewards = iter([4, 4, 6] + [5, 5, 5] * 20)
    out = run_refinement("q", 0.0, "increase", (-1, 1), lambda v: next(rewards), RasConfig(max_iterations=3))
    assert out.status is Status.BUDGET_EXHAUSTED
    assert len(out.history) == 4 and out.reward == 6
    assert out.value == out.history[0].values[2]


def test_scorer_errors_become_scorer_failure():
    def broken(v):
        raise ScriptExhausted("no more replies")

    with pytest.raises(ScorerFailure):
        run_refinement("q", 0.0, "increase", (-1, 1), broken)
    with pytest.raises(ScorerFailure):
        run_refinement("q", 0.0, "increase", (-1, 1), lambda v: 0)
    with pytest.raises(ScorerFailure):
        run_refinement("q", 0.0, "increase", (-1, 1), lambda v: 7.5)


# --- properties -----------------------------------------------------------------------


reward_lists = st.lists(st.integers(1, 10), min_size=3, max_size=40)


@given(
    st.floats(-1, 1),
    st.sampled_from(["increase", "decrease", "unspecified"]),
    reward_lists,
    st.integers(0, 2**32 - 1),
    st.integers(1, 10),
)
@settings(max_examples=200, deadline=None)
def test_loop_invariants(current, hint, rewards, seed, tau):
    config = RasConfig(tau=tau, rng_seed=seed)
    feed = iter(rewards * 20)
    out = run_refinement("q", current, hint, (-1, 1), lambda v: next(feed), config)
    # bounded and self-consistent
    assert 1 <= len(out.history) <= config.max_iterations + 1
    assert out.iterations == len(out.history) - 1
    assert [cs.t for cs in out.history] == list(range(len(out.history)))
    for cs in out.history:
        assert all(-1 <= v <= 1 for v in cs.values)
        assert cs.best_reward == max(cs.rewards) and cs.chosen in cs.values
    if out.status is Status.SUCCESS:
        assert out.reward >= tau
    # widths follow the previous round's best reward
    for prev, cs in zip(out.history, out.history[1:]):
        expected = 0.24 if prev.best_reward >= 5 else 0.9
        assert cs.sigma == pytest.approx(expected, abs=1e-15)
    # the reported best equals the running max
    assert out.reward == max(cs.best_reward for cs in out.history)


@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_refinement_is_deterministic(current, target, seed):
    cfg = RasConfig(rng_seed=seed)
    a = run_refinement("q", current, "increase", (-1, 1), oracle_scorer(target, current), cfg)
    b = run_refinement("q", current, "increase", (-1, 1), oracle_scorer(target, current), cfg)
    assert a == b


@given(st.floats(-3, 3), st.floats(0.01, 4), st.floats(-1, 1), st.floats(0.05, 2), st.integers(0, 1000))
@settings(max_examples=200, deadline=None)
def test_samples_always_clipped(v_star, sigma, lo, width, seed):
    vals = sample_candidates(v_star, sigma, (lo, lo + width), np.random.default_rng(seed))
    assert all(lo <= v <= lo + width for v in vals)
