"""Choosing the number of local iterations H under communication delay.

For a star whose rounds cost ``t_lp*H + t_delay + t_cp`` seconds, a time
budget ``t_total`` buys ``t_total / (t_lp*H + t_delay + t_cp)`` rounds, each
contracting the expected gap by ``1 - (1 - (1 - delta)^H) * C / K``. The
predicted gap after the budget is the product; everything here works with its
logarithm because realistic budgets underflow doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class DelayScenario:
    C: float
    K: int
    delta: float
    t_total: float
    t_lp: float
    t_cp: float
    t_delay: float = 0.0

    def __post_init__(self) -> None:
        if min(self.t_lp, self.t_cp, self.t_delay) < 0:
            raise ValueError("times must be >= 0")
        if self.t_lp + self.t_cp + self.t_delay <= 0:
            raise ValueError("a round must take positive time")
        if self.t_total <= 0:
            raise ValueError("t_total must be > 0")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 <= self.C <= 1.0:
            raise ValueError(f"C must lie in [0, 1], got {self.C}")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @classmethod
    def with_ratio(cls, r: float, *, C: float, K: int, delta: float, t_total: float, t_lp: float, t_cp: float):
        """Scenario whose delay is ``r`` local-iteration times."""
        return cls(C, K, delta, t_total, t_lp, t_cp, r * t_lp)


# measured star-network scenario used for the H-vs-delay study
MEASURED_SCENARIO = dict(C=0.5, K=3, delta=1.0 / 300.0, t_total=1.0, t_lp=4e-5, t_cp=3e-5)


def round_progress(scenario: DelayScenario, H: int) -> float:
    """``(1 - (1 - delta)^H) * C / K``, the fraction of gap removed per round."""
    if H < 1:
        raise ValueError(f"H must be >= 1, got {H}")
    s = scenario
    if s.delta == 1.0:
        return s.C / s.K
    return -math.expm1(H * math.log1p(-s.delta)) * s.C / s.K


def gap_terms(scenario: DelayScenario, H: int) -> tuple[float, float]:
    """``(base, exponent)`` with the predicted gap equal to ``base ** exponent``."""
    s = scenario
    return 1.0 - round_progress(s, H), s.t_total / (s.t_lp * H + s.t_delay + s.t_cp)


def log_gap_objective(scenario: DelayScenario, H: int) -> float:
    p = round_progress(scenario, H)
    if p >= 1.0:
        return -math.inf
    s = scenario
    return s.t_total / (s.t_lp * H + s.t_delay + s.t_cp) * math.log1p(-p)


def gap_objective(scenario: DelayScenario, H: int) -> float:
    return math.exp(log_gap_objective(scenario, H))


@dataclass(frozen=True)
class OptimalH:
    h_star: int
    value: float
    """Natural log of the predicted gap at ``h_star``."""


def optimal_h(scenario: DelayScenario, h_max: int) -> OptimalH:
    """Exhaustive search over H = 1..h_max; ties go to the smaller H."""
    if h_max < 1:
        raise ValueError(f"h_max must be >= 1, got {h_max}")
    best_h, best = 1, log_gap_objective(scenario, 1)
    for H in range(2, h_max + 1):
        v = log_gap_objective(scenario, H)
        if v < best:
            best_h, best = H, v
    return OptimalH(best_h, best)
