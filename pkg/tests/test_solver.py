import math

import numpy as np
import pytest

from optinc import solver
from optinc.core import (
    ImperfectionModel,
    SolverError,
    ValidationError,
    helstrom_error,
    idp_bound,
    optimal_inconclusive_error,
)
from optinc.solver import (
    evaluate_strategy,
    gap_scaling,
    solve_point,
    solve_strategy,
    switch_gap,
    tradeoff_curve,
    usd_endpoint,
)

ALPHAS = (0.2, 0.4, 0.6)


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_dolinar_endpoint_reaches_helstrom(alpha_sq):
    spec = solve_strategy(alpha_sq, 0.5, 0.0)
    assert spec.t1 == 1.0
    final = evaluate_strategy(spec.t1, spec.v, alpha_sq)
    assert final.p_i == 0.0
    assert final.p_e == pytest.approx(helstrom_error(alpha_sq), abs=2e-3)


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_usd_endpoint_reaches_idp(alpha_sq):
    pt = usd_endpoint(alpha_sq)
    assert pt.achieved_pe < 1e-9
    assert pt.achieved_pi == pytest.approx(idp_bound(alpha_sq), abs=2e-3)


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_points_meet_target_and_sit_on_frontier(alpha_sq):
    for target in np.linspace(0.05, 0.9 * idp_bound(alpha_sq), 4):
        pt = solve_point(alpha_sq, 0.5, float(target))
        assert pt.ok
        assert pt.achieved_pi == pytest.approx(target, abs=1e-6)
        bound = optimal_inconclusive_error(alpha_sq, pt.achieved_pi)
        # time discretization moves the curve by a few 1e-4 around the optimum
        assert pt.achieved_pe == pytest.approx(bound, abs=1e-3)


def test_evaluate_matches_solver():
    pt = solve_point(0.4, 0.5, 0.2)
    final = evaluate_strategy(pt.t1, pt.v, 0.4)
    assert final.p_i == pt.achieved_pi
    assert final.p_e == pt.achieved_pe


def test_evaluate_t1_one_is_dolinar():
    final = evaluate_strategy(1.0, 0.9, 0.2)
    assert final.p_i == 0.0
    assert final.p_e == pytest.approx(helstrom_error(0.2), abs=1e-3)
    # without a second mode, n0 = 1 makes every outcome inconclusive
    assert evaluate_strategy(1.0, 0.3, 0.2).p_i == 1.0


def test_design_evaluator_matches_evolution():
    design = solver._Design(0.2, 0.5, 256)
    for k, v in [(256, 0.3), (256, 0.9), (100, 0.3), (100, 0.8)]:
        expected = evaluate_strategy(k / 256, v, 0.2, n_bins=256)
        assert design.run(k, v) == pytest.approx(expected.as_tuple(), abs=1e-12)


def test_solver_is_deterministic():
    a = solve_point(0.2, 0.5, 0.15)
    b = solve_point(0.2, 0.5, 0.15)
    assert a == b


def test_n0_follows_v():
    low = solve_point(0.2, 0.5, 0.05)
    high = solve_point(0.2, 0.5, 0.5)
    for pt in (low, high):
        assert pt.n0 == (0 if pt.v > 0.5 else 1)
    assert high.v < 0.5


@pytest.mark.parametrize("alpha_sq", ALPHAS)
def test_tradeoff_monotone_and_convex(alpha_sq):
    grid = np.linspace(0.0, 0.95 * idp_bound(alpha_sq), 20)
    curve = tradeoff_curve(alpha_sq, 0.5, grid)
    assert all(pt.ok for pt in curve)
    pe = np.array([pt.achieved_pe for pt in curve])
    assert np.all(np.diff(pe) <= 1e-9)
    assert np.diff(pe, 2).min() >= -1e-6


def test_switch_time_at_quoted_point():
    # LO waveform of the strategy with P_I = 0.19 at |alpha|^2 = 0.2 switches near t = 0.70
    spec = solve_strategy(0.2, 0.5, 0.19)
    assert spec.t1 == pytest.approx(0.70, abs=0.02)


def test_switch_time_decreases_with_energy():
    t1 = [solve_strategy(e, 0.5, 0.19).t1 for e in ALPHAS]
    assert t1[0] > t1[1] > t1[2]


def test_fixed_switch_time_is_feasible():
    # with t1 held at 0.57 a value of v still reaches P_I = 0.31
    design = solver._Design(0.2, 0.5, 1024)
    k = round(0.57 * 1024)
    found = solver._solve_v(design, k, 0.31, 1e-6)
    assert found is not None
    assert found[3] == pytest.approx(0.31, abs=1e-6)


def test_imperfect_curve_is_executed_on_device():
    imp = ImperfectionModel.experiment()
    ideal = tradeoff_curve(0.2, 0.5, [0.1, 0.2])
    real = tradeoff_curve(0.2, 0.5, [0.1, 0.2], imp)
    for a, b in zip(ideal, real):
        assert (a.t1, a.v) == (b.t1, b.v)
        assert b.achieved_pe > a.achieved_pe


def test_tradeoff_records_failures(monkeypatch):
    real = solver.solve_point

    def flaky(alpha_sq, p, target, *args, **kwargs):
        if target == 0.2:
            raise SolverError("no convergence")
        return real(alpha_sq, p, target, *args, **kwargs)

    monkeypatch.setattr(solver, "solve_point", flaky)
    curve = tradeoff_curve(0.2, 0.5, [0.1, 0.2, 0.3])
    assert [pt.ok for pt in curve] == [True, False, True]
    bad = curve[1]
    assert "no convergence" in bad.error
    assert math.isnan(bad.achieved_pe) and bad.n0 == -1


@pytest.mark.parametrize("grid", [[], [0.2, 0.1], [0.1, 1.0], [-0.1], [[0.1]]])
def test_tradeoff_grid_validation(grid):
    with pytest.raises(ValidationError) as exc:
        tradeoff_curve(0.2, 0.5, grid)
    assert exc.value.field == "pi_grid"


def test_evaluation_budget_raises():
    with pytest.raises(SolverError):
        solve_point(0.2, 0.5, 0.2, max_evals=5)


@pytest.mark.parametrize("kwargs,field", [
    ({"target_pi": 1.0}, "target_pi"),
    ({"target_pi": -0.1}, "target_pi"),
    ({"target_pi": 0.1, "tol": 0.0}, "tol"),
    ({"target_pi": 0.1, "p": 1.5}, "p"),
])
def test_solve_point_validation(kwargs, field):
    args = {"alpha_sq": 0.2, "p": 0.5, **kwargs}
    with pytest.raises(ValidationError) as exc:
        solve_point(**args)
    assert exc.value.field == field


def test_gap_vanishes_without_power_limit():
    pt = solver.switch_point(0.2)
    assert 0.3 < pt.v <= 0.5
    d_pe, d_pi = switch_gap(0.2, pt.t1, math.inf, n_bins=1024)
    assert math.hypot(d_pe, d_pi) < 1e-4
    d_pe, d_pi = switch_gap(0.2, pt.t1, 10.0, n_bins=1024)
    assert math.hypot(d_pe, d_pi) > 1e-3


def test_gap_shrinks_with_power_ratio():
    result = gap_scaling(0.4, [10, 100, 1000], n_bins=2048)
    g = [x for _, x in result]
    assert g[0] > g[1] > g[2] > 0


@pytest.mark.parametrize("r", [1.0, 0.5, float("nan")])
def test_gap_rejects_small_power_ratio(r):
    with pytest.raises(ValidationError):
        gap_scaling(0.2, [r])


def test_gap_needs_commensurate_grid():
    with pytest.raises(ValidationError) as exc:
        gap_scaling(0.2, [10], n_bins=1000)
    assert exc.value.field == "n_bins"
