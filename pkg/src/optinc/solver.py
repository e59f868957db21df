"""Numerical design of optimal inconclusive strategies and tradeoff frontiers.

A strategy is fixed by the switching time ``t1`` and the effective prior
``v`` of the second mode. For a target inconclusive probability the solver
runs an outer search over ``t1`` (snapped to bin boundaries, ``t1 = k / n``)
and an inner root-find over ``v`` that meets the target, keeping the pair
with the smallest error. Designs always use the ideal, unclamped waveform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (
    ImperfectionModel,
    OptIncError,
    ProbabilityTriple,
    SolverError,
    StrategySpec,
    ValidationError,
)
from .evolution import (
    click_probabilities,
    evolve,
    first_mode_path,
    second_mode_path,
    switch_state,
)
from .waveform import bin_centers, build_waveform, dolinar_magnitude, single_state_magnitude

__all__ = [
    "TradeoffPoint",
    "evaluate_strategy",
    "solve_strategy",
    "solve_point",
    "usd_endpoint",
    "tradeoff_curve",
    "switch_point",
    "switch_gap",
    "gap_scaling",
]

V_MIN = 1e-12
V_MAX = 1.0 - 1e-12
V_XTOL = 1e-2  # bracket tolerance on v, relative to the P_I tolerance
WARM_WIDTH = 0.01
_ABOVE_HALF = float(np.nextafter(0.5, 1.0))
MAX_EVALS = 400
COARSE_POINTS = 9
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TradeoffPoint:
    """One point of a tradeoff curve.

    ``achieved_*`` come from executing the ideally designed strategy on the
    requested device model. ``error`` is set (and the numbers are NaN) when
    the solve failed for this grid point.
    """

    target_pi: float
    achieved_pi: float
    achieved_pe: float
    t1: float
    v: float
    n0: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def spec(self, alpha_sq: float, p: float = 0.5) -> StrategySpec:
        return StrategySpec(alpha_sq, p, self.target_pi, self.t1, self.v)


def _check_design_args(alpha_sq: float, p: float, n_bins: int) -> None:
    # reuse the domain checks of the shared types
    StrategySpec(alpha_sq, p, None, 1.0, 0.5)
    ImperfectionModel.ideal(n_bins)


@lru_cache(maxsize=64)
def _first_mode(alpha_sq: float, p: float, n_bins: int) -> tuple[float, ...]:
    imp = ImperfectionModel.ideal(n_bins)
    mags = dolinar_magnitude(bin_centers(n_bins), alpha_sq, p)
    q_null, q_const = click_probabilities(alpha_sq, mags, imp)
    return tuple(first_mode_path(p, q_null.tolist(), q_const.tolist()))


class _Design:
    """Fast ideal-device evaluator for candidates ``(k, v)`` with ``t1 = k / n``.

    Matches :func:`evaluate_strategy` bit-for-bit; the first-mode path does
    not depend on ``t1`` and is computed once.
    """

    def __init__(self, alpha_sq: float, p: float, n_bins: int):
        self.alpha_sq = float(alpha_sq)
        self.p = float(p)
        self.n = int(n_bins)
        self.imp = ImperfectionModel.ideal(self.n)
        self.t_mid = bin_centers(self.n)
        self.q_path = _first_mode(self.alpha_sq, self.p, self.n)
        self.evals = 0

    def run(self, k: int, v: float) -> tuple[float, float, float]:
        self.evals += 1
        q = self.q_path[k]
        if k == self.n:
            # no second mode: n0 = 1 leaves every trial inconclusive
            return (q, 1.0 - q, 0.0) if v > 0.5 else (0.0, 0.0, 1.0)
        mags = single_state_magnitude(self.t_mid[k:], self.alpha_sq, v, k / self.n)
        q_null, q_const = click_probabilities(self.alpha_sq, mags, self.imp)
        pc0, pe0 = switch_state(q, v)
        pcs, pes = second_mode_path(pc0, pe0, q, q_null.tolist(), q_const.tolist())
        pc, pe = pcs[-1], pes[-1]
        return pc, pe, 1.0 - pc - pe


def evaluate_strategy(
    t1: float,
    v: float,
    alpha_sq: float,
    p: float = 0.5,
    n_bins: int = 1024,
    imp: ImperfectionModel | None = None,
) -> ProbabilityTriple:
    """Final ``(P_C, P_E, P_I)`` of the strategy ``(t1, v)``; ideal devices unless ``imp`` is given."""
    if imp is None:
        imp = ImperfectionModel.ideal(n_bins)
    spec = StrategySpec(alpha_sq, p, None, t1, v)
    return evolve(spec, build_waveform(spec, imp), imp).final


def _solve_v(design: _Design, k: int, target: float, tol: float, guess: float | None = None):
    """Root-find ``v`` at fixed ``k``; returns ``(v, pc, pe, pi)`` or ``None`` if infeasible.

    ``P_I`` decreases with ``v``. A ``guess`` (typically the solution at a
    neighboring ``k``) is tried first with a narrow bracket.
    """
    seen: dict[float, tuple[float, float, float]] = {}
    xtol = V_XTOL * tol

    def f(v: float) -> float:
        if v not in seen:
            seen[v] = design.run(k, v)
        return seen[v][2] - target

    v = None
    if guess is not None:
        # keep the bracket on one side of the jump at v = 1/2
        if guess <= 0.5:
            lo, hi = max(guess - WARM_WIDTH, V_MIN), min(guess + WARM_WIDTH, 0.5)
        else:
            lo, hi = max(guess - WARM_WIDTH, _ABOVE_HALF), min(guess + WARM_WIDTH, V_MAX)
        if f(lo) > 0 > f(hi):
            v = brentq(f, lo, hi, xtol=xtol, maxiter=100)
    if v is None:
        f_lo = f(V_MIN)
        if f_lo < -tol:
            return None
        if f_lo <= tol:
            v = V_MIN
        else:
            f_hi = f(V_MAX)
            if f_hi > tol:
                return None
            if f_hi >= -tol:
                v = V_MAX
            else:
                v = brentq(f, V_MIN, V_MAX, xtol=xtol, maxiter=100)
    if abs(f(v)) > tol:
        # steep branch: tighten around the root, else the target falls
        # inside the discontinuity where n0 flips
        lo, hi = max(v - 1e3 * xtol, V_MIN), min(v + 1e3 * xtol, V_MAX)
        if not f(lo) > 0 > f(hi):
            return None
        v = brentq(f, lo, hi, xtol=1e-3 * xtol, maxiter=100)
        if abs(f(v)) > tol:
            return None
    return (v, *seen[v])


def _pe_key(result) -> float:
    return math.inf if result is None else result[2]


def _golden_min(F, lo: int, hi: int, anchor: int) -> int:
    """Integer golden-section minimum of ``F`` on ``[lo, hi]``, smallest argument on ties.

    ``F`` is unimodal where finite and ``inf`` outside a feasible interval
    that contains ``anchor``; ``F`` is expected to cache its values.
    """
    a, b = lo, hi
    c = b - int(round(_INV_PHI * (b - a)))
    d = a + int(round(_INV_PHI * (b - a)))
    while b - a > 3:
        c, d = min(c, d), max(c, d)
        if c == d:
            d = c + 1
        fc, fd = F(c), F(d)
        if math.isinf(fc) and math.isinf(fd):
            if anchor <= c:
                b = d
            elif anchor >= d:
                a = c
            else:
                a, b = c, d
            c = b - int(round(_INV_PHI * (b - a)))
            d = a + int(round(_INV_PHI * (b - a)))
        elif fc <= fd:
            b, d = d, c
            c = b - int(round(_INV_PHI * (b - a)))
        else:
            a, c = c, d
            d = a + int(round(_INV_PHI * (b - a)))
    return min(range(a, b + 1), key=lambda k: (F(k), k))


def solve_point(
    alpha_sq: float,
    p: float,
    target_pi: float,
    tol: float = 1e-6,
    n_bins: int = 1024,
    max_evals: int = MAX_EVALS,
) -> TradeoffPoint:
    """Minimal-error ideal strategy meeting ``target_pi``, with the values it achieves."""
    _check_design_args(alpha_sq, p, n_bins)
    target = float(target_pi)
    if math.isnan(target) or not 0 <= target < 1:
        raise ValidationError("target_pi", f"must satisfy 0 <= target_pi < 1, got {target_pi}")
    if not tol > 0:
        raise ValidationError("tol", f"must be > 0, got {tol}")
    design = _Design(alpha_sq, p, n_bins)
    n = design.n
    if target == 0:
        # pure Dolinar; v is unused and set to the final posterior of the guess
        pc, pe, pi = design.run(n, V_MAX)
        return TradeoffPoint(0.0, pi, pe, 1.0, pc, 0)

    cache: dict[int, tuple | None] = {}

    def at(k: int):
        if k not in cache:
            if design.evals > max_evals:
                raise SolverError(f"evaluation budget of {max_evals} exhausted", best=_best())
            solved = [kk for kk, r in cache.items() if r is not None]
            guess = cache[min(solved, key=lambda kk: (abs(kk - k), kk))][0] if solved else None
            cache[k] = _solve_v(design, k, target, tol, guess)
        return cache[k]

    def _best():
        found = [(kk, r) for kk, r in cache.items() if r is not None]
        if not found:
            return None
        kk, r = min(found, key=lambda item: (item[1][2], item[0]))
        return TradeoffPoint(target, r[3], r[2], kk / n, r[0], 0 if r[0] > 0.5 else 1)

    ks = np.unique(np.linspace(1, n - 1, COARSE_POINTS).round().astype(int)).tolist()
    vals = [_pe_key(at(k)) for k in ks]
    if all(math.isinf(x) for x in vals):
        # feasible set may be narrower than the coarse spacing: scan finer
        ks = np.unique(np.linspace(1, n - 1, 8 * COARSE_POINTS).round().astype(int)).tolist()
        vals = [_pe_key(at(k)) for k in ks]
        if all(math.isinf(x) for x in vals):
            raise SolverError(f"no feasible strategy found for target_pi={target}", best=None)

    i = int(np.argmin(vals))
    # P_E is unimodal in k along the constraint
    _golden_min(lambda k: _pe_key(at(k)), ks[max(i - 1, 0)], ks[min(i + 1, len(ks) - 1)], ks[i])
    best = _best()
    if best is None:
        raise SolverError(f"no feasible strategy found for target_pi={target}", best=None)
    # smallest t1 among candidates tied on P_E
    ties = [kk for kk, r in sorted(cache.items()) if r is not None and r[2] <= best.achieved_pe + 1e-15]
    k = ties[0]
    v, pc, pe, pi = cache[k]
    return TradeoffPoint(target, pi, pe, k / n, v, 0 if v > 0.5 else 1)


def solve_strategy(
    alpha_sq: float,
    p: float = 0.5,
    target_pi: float = 0.0,
    tol: float = 1e-6,
    n_bins: int = 1024,
) -> StrategySpec:
    """``StrategySpec`` minimizing the error at inconclusive probability ``target_pi``.

    ``target_pi = 0`` gives the Dolinar receiver with ``t1 = 1``. Raises
    :class:`SolverError` when no strategy meets the target within ``tol``.
    """
    pt = solve_point(alpha_sq, p, target_pi, tol, n_bins)
    return StrategySpec(alpha_sq, p, pt.target_pi, pt.t1, pt.v)


def usd_endpoint(alpha_sq: float, p: float = 0.5, n_bins: int = 1024) -> TradeoffPoint:
    """Zero-error end of the frontier: ``v -> 0`` and ``t1`` minimizing ``P_I``.

    The returned ``target_pi`` is the achieved value itself.
    """
    _check_design_args(alpha_sq, p, n_bins)
    design = _Design(alpha_sq, p, n_bins)
    n = design.n
    cache: dict[int, tuple[float, float, float]] = {}

    def pi_at(k: int) -> float:
        if k not in cache:
            cache[k] = design.run(k, V_MIN)
        return cache[k][2]

    ks = np.unique(np.linspace(1, n - 1, COARSE_POINTS).round().astype(int)).tolist()
    i = int(np.argmin([pi_at(k) for k in ks]))
    k = _golden_min(pi_at, ks[max(i - 1, 0)], ks[min(i + 1, len(ks) - 1)], ks[i])
    pc, pe, pi = cache[k]
    return TradeoffPoint(pi, pi, pe, k / n, V_MIN, 1)


def tradeoff_curve(
    alpha_sq: float,
    p: float,
    pi_grid: Sequence[float],
    imp: ImperfectionModel | None = None,
    tol: float = 1e-6,
) -> list[TradeoffPoint]:
    """Solve each grid point on ideal devices, then execute the design on ``imp``.

    Failures are recorded per point in :attr:`TradeoffPoint.error`.
    """
    if imp is None:
        imp = ImperfectionModel.ideal()
    grid = np.asarray(pi_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("pi_grid", "must be a non-empty 1-D sequence")
    if np.any(np.isnan(grid)) or np.any(grid < 0) or np.any(grid >= 1):
        raise ValidationError("pi_grid", "values must lie in [0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("pi_grid", "must be strictly increasing")
    _check_design_args(alpha_sq, p, imp.n_bins)

    out = []
    for target in grid.tolist():
        try:
            pt = solve_point(alpha_sq, p, target, tol, imp.n_bins)
            if not imp.is_ideal:
                final = evaluate_strategy(pt.t1, pt.v, alpha_sq, p, imp=imp)
                pt = TradeoffPoint(target, final.p_i, final.p_e, pt.t1, pt.v, pt.n0)
        except OptIncError as exc:
            nan = math.nan
            pt = TradeoffPoint(target, nan, nan, nan, nan, -1, error=str(exc))
        out.append(pt)
    return out


def switch_point(alpha_sq: float, p: float = 0.5, n_bins: int = 1024, tol: float = 1e-4) -> TradeoffPoint:
    """Frontier point where the designed ``v`` crosses 1/2, i.e. where ``n0`` flips.

    Bisects on the target inconclusive probability; returns the solve on the
    ``v <= 1/2`` side of the crossing.
    """
    usd = usd_endpoint(alpha_sq, p, n_bins)
    lo, hi = 0.0, usd.achieved_pi
    lo_pt: TradeoffPoint | None = None
    hi_pt: TradeoffPoint | None = None
    while hi - lo > tol or hi_pt is None:
        mid = 0.5 * (lo + hi)
        pt = solve_point(alpha_sq, p, mid, n_bins=n_bins)
        if pt.v > 0.5:
            lo, lo_pt = mid, pt
        else:
            hi, hi_pt = mid, pt
    return hi_pt


def switch_gap(
    alpha_sq: float,
    t1: float,
    r_max: float,
    p: float = 0.5,
    n_bins: int = 8192,
) -> tuple[float, float]:
    """``(dP_E, dP_I)`` between the two sides of the ``n0`` flip at ``v = 1/2``.

    With unbounded LO power the second-mode magnitude diverges at the switch
    and erases the initial guess, so both sides coincide; a finite power
    ratio leaves a gap in the reachable frontier.
    """
    imp = ImperfectionModel(r_max=r_max, n_bins=n_bins)
    inc = evaluate_strategy(t1, 0.5, alpha_sq, p, imp=imp)
    con = evaluate_strategy(t1, float(np.nextafter(0.5, 1.0)), alpha_sq, p, imp=imp)
    return con.p_e - inc.p_e, con.p_i - inc.p_i


def gap_scaling(
    alpha_sq: float,
    r_values: Sequence[float],
    p: float = 0.5,
    n_bins: int = 8192,
    design_bins: int = 1024,
) -> list[tuple[float, float]]:
    """``(R, g^2)`` with ``g^2 = dP_E^2 + dP_I^2`` of the frontier gap for each power ratio ``R``.

    The gap sits where the designed ``v`` crosses 1/2. ``n_bins`` must be a
    multiple of ``design_bins`` so the switch time stays on the bin grid.
    """
    rs = [float(r) for r in r_values]
    for r in rs:
        if math.isnan(r) or not r > 1:
            raise ValidationError("r_values", f"each R must be > 1, got {r}")
    if n_bins % design_bins:
        raise ValidationError("n_bins", f"must be a multiple of design_bins={design_bins}")
    pt = switch_point(alpha_sq, p, design_bins)
    out = []
    for r in rs:
        d_pe, d_pi = switch_gap(alpha_sq, pt.t1, r, p, n_bins)
        out.append((r, d_pe * d_pe + d_pi * d_pi))
    return out
