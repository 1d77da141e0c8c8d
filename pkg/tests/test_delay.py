import math

import numpy as np
import pytest

from treecoca.delay import (
    MEASURED_SCENARIO,
    DelayScenario,
    gap_objective,
    gap_terms,
    log_gap_objective,
    optimal_h,
    round_progress,
)


def _grid_oracle(r, h_max):
    """Direct evaluation of the predicted log-gap on every H, argmin."""
    p = MEASURED_SCENARIO
    H = np.arange(1, h_max + 1, dtype=float)
    prog = (1 - (1 - p["delta"]) ** H) * p["C"] / p["K"]
    logf = p["t_total"] / (p["t_lp"] * H + r * p["t_lp"] + p["t_cp"]) * np.log(1 - prog)
    return int(H[np.argmin(logf)])


def test_delta_one_base_and_exponent():
    s = DelayScenario(**{**MEASURED_SCENARIO, "delta": 1.0})
    base, expo = gap_terms(s, 1)
    assert base == pytest.approx(5 / 6, rel=1e-15)
    assert expo == pytest.approx(1 / 7e-5, rel=1e-12)
    assert log_gap_objective(s, 1) == pytest.approx(expo * math.log(5 / 6), rel=1e-12)


def test_no_progress_objective_is_one():
    s = DelayScenario(**{**MEASURED_SCENARIO, "C": 0.0})
    assert all(gap_objective(s, H) == 1.0 for H in (1, 10, 1000))


def test_zero_delay_optimum_is_small():
    s = DelayScenario.with_ratio(0.0, **MEASURED_SCENARIO)
    res = optimal_h(s, 2000)
    assert res.h_star == 23
    assert res.h_star == _grid_oracle(0.0, 2000)


@pytest.mark.parametrize("r", [1.0, 10.0, 1e3, 1e5])
def test_matches_grid_oracle(r):
    assert optimal_h(DelayScenario.with_ratio(r, **MEASURED_SCENARIO), 2000).h_star == _grid_oracle(r, 2000)


def test_single_candidate():
    assert optimal_h(DelayScenario.with_ratio(1e6, **MEASURED_SCENARIO), 1).h_star == 1


def test_h_star_grows_with_delay():
    hs = [optimal_h(DelayScenario.with_ratio(10.0**k, **MEASURED_SCENARIO), 2000).h_star for k in range(11)]
    assert hs == sorted(hs)
    assert hs[-1] >= 10 * hs[0]


def test_ties_go_to_smaller_H():
    # every H removes the whole per-round fraction, so only round time matters
    s = DelayScenario(C=0.0, K=1, delta=1.0, t_total=1.0, t_lp=1e-3, t_cp=0.0)
    assert optimal_h(s, 50).h_star == 1


def test_progress_and_validation():
    s = DelayScenario.with_ratio(0.0, **MEASURED_SCENARIO)
    assert round_progress(s, 300) == pytest.approx((1 - (1 - 1 / 300) ** 300) / 6, rel=1e-13)
    with pytest.raises(ValueError):
        round_progress(s, 0)
    with pytest.raises(ValueError):
        DelayScenario(C=0.5, K=3, delta=0.0, t_total=1, t_lp=1, t_cp=1)
    with pytest.raises(ValueError):
        DelayScenario(C=0.5, K=3, delta=0.5, t_total=1, t_lp=0, t_cp=0)
