"""Reward-based adaptive search over one joint value.

Each round scores a small candidate set, keeps the best value, and resamples
around it with a width chosen from the best reward: narrow after a
right-direction-but-incomplete reward, wide after a poor one.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Callable

import numpy as np

from .errors import DegenerateRange, ScorerFailure, SocialCriticError
from .plan import Direction

logger = logging.getLogger(__name__)

MIN_SPAN = 1e-6
FINE_SEARCH_FLOOR = 5  # rewards in [5, tau) narrow the search


@dataclass(frozen=True)
class RasConfig:
    tau: int = 8
    sigma_base: float = 0.6
    alpha: float = 0.4
    beta: float = 1.5
    max_iterations: int = 10
    candidates_per_iteration: int = 3
    low_reward_streak_limit: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.tau <= 10:
            raise ValueError(f"tau must be in 1..10, got {self.tau}")
        if not 0 < self.alpha < 1 < self.beta:
            raise ValueError(f"need 0 < alpha < 1 < beta, got alpha={self.alpha}, beta={self.beta}")
        if self.sigma_base <= 0:
            raise ValueError("sigma_base must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.candidates_per_iteration < 1:
            raise ValueError("candidates_per_iteration must be >= 1")
        if self.low_reward_streak_limit < 1:
            raise ValueError("low_reward_streak_limit must be >= 1")


@dataclass(frozen=True)
class CandidateSet:
    """One round: the values tried, their rewards and the width that produced them.

    Also the record appended to a step log (``chosen`` and ``best_reward``
    are filled once the round is scored).
    """

    t: int
    values: tuple[float, ...]
    sigma: float
    rewards: tuple[int, ...] | None = None
    chosen: float | None = None
    best_reward: int | None = None


class Status(str, enum.Enum):
    SUCCESS = "success"
    JOINT_FAILURE = "joint_failure"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class RefinementOutcome:
    status: Status
    joint: str
    value: float | None  # final value on success, best seen otherwise
    reward: int | None
    history: tuple[CandidateSet, ...]

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    @property
    def succeeded(self) -> bool:
        return self.status is Status.SUCCESS


def _check_span(limits) -> tuple[float, float]:
    lo, hi = float(limits[0]), float(limits[1])
    if hi - lo < MIN_SPAN:
        raise DegenerateRange(f"joint range [{lo}, {hi}] is narrower than {MIN_SPAN}")
    return lo, hi


def init_candidates(current: float, direction, limits, config: RasConfig, rng: np.random.Generator) -> CandidateSet:
    """First round: all but one candidate step in the hinted direction, one steps the other way.

    Step sizes are uniform on (0, sigma_base]; an unspecified hint counts
    as an increase.
    """
    lo, hi = _check_span(limits)
    sign = Direction(direction).sign
    n = config.candidates_per_iteration
    steps = config.sigma_base - rng.uniform(0.0, config.sigma_base, size=n)
    signs = [sign] * max(n - 1, 1) + ([-sign] if n > 1 else [])
    values = tuple(float(np.clip(current + s * d, lo, hi)) for s, d in zip(signs, steps))
    return CandidateSet(t=0, values=values, sigma=config.sigma_base)


def update_sigma(r_star: int, config: RasConfig) -> float:
    if r_star >= config.tau:
        raise ValueError(f"reward {r_star} already meets tau={config.tau}; the search should have stopped")
    factor = config.alpha if r_star >= FINE_SEARCH_FLOOR else config.beta
    # product of the configured decimals, rounded once (1.5 * 0.6 -> 0.9, not 0.8999999999999999)
    return float(Decimal(repr(factor)) * Decimal(repr(config.sigma_base)))


def sample_candidates(v_star: float, sigma: float, limits, rng: np.random.Generator, count: int = 3) -> tuple[float, ...]:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lo, hi = float(limits[0]), float(limits[1])
    draws = rng.normal(v_star, sigma, size=count)
    return tuple(float(v) for v in np.clip(draws, lo, hi))


def select_best(values, rewards, mean: float) -> tuple[int, float, int]:
    """Index, value and reward of the winner.

    Ties on reward go to the value nearest ``mean``, then the lowest index.
    """
    best = max(rewards)
    tied = [i for i, r in enumerate(rewards) if r == best]
    i = min(tied, key=lambda k: (abs(values[k] - mean), k))
    return i, float(values[i]), int(best)


def _score(scorer: Callable[[float], int], value: float) -> int:
    try:
        r = scorer(value)
    except SocialCriticError as exc:
        raise ScorerFailure(f"scoring {value!r} failed: {exc}") from exc
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or not 1 <= int(r) <= 10:
        raise ScorerFailure(f"scorer returned {r!r} for {value!r}; rewards must be integers in 1..10")
    return int(r)


def run_refinement(
    joint: str,
    current: float,
    direction,
    limits,
    scorer: Callable[[float], int],
    config: RasConfig = RasConfig(),
    rng: np.random.Generator | None = None,
) -> RefinementOutcome:
    """Search ``joint``'s value until a reward reaches ``tau``.

    Stops with ``joint_failure`` after ``low_reward_streak_limit`` rounds in
    a row whose best reward is <= 2, and with ``budget_exhausted`` after the
    round at t == max_iterations. At most max_iterations + 1 rounds are
    scored.
    """
    lo, hi = _check_span(limits)
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    cs = init_candidates(current, direction, (lo, hi), config, rng)
    mean = float(current)
    history: list[CandidateSet] = []
    best_value, best_reward = None, 0
    streak = 0
    while True:
        rewards = tuple(_score(scorer, v) for v in cs.values)
        _, v_star, r_star = select_best(cs.values, rewards, mean)
        history.append(replace(cs, rewards=rewards, chosen=v_star, best_reward=r_star))
        logger.debug("%s t=%d values=%s rewards=%s", joint, cs.t, cs.values, rewards)
        if r_star > best_reward:
            best_value, best_reward = v_star, r_star
        if r_star >= config.tau:
            return RefinementOutcome(Status.SUCCESS, joint, v_star, r_star, tuple(history))
        streak = streak + 1 if r_star <= 2 else 0
        if streak >= config.low_reward_streak_limit:
            return RefinementOutcome(Status.JOINT_FAILURE, joint, best_value, best_reward, tuple(history))
        if cs.t >= config.max_iterations:
            return RefinementOutcome(Status.BUDGET_EXHAUSTED, joint, best_value, best_reward, tuple(history))
        sigma = update_sigma(r_star, config)
        values = sample_candidates(v_star, sigma, (lo, hi), rng, config.candidates_per_iteration)
        cs = CandidateSet(t=cs.t + 1, values=values, sigma=sigma)
        mean = v_star
