"""Inconclusive discrimination of M-ary phase-shift-keyed coherent states.

The hybrid receiver tests the states one after another with a nulling
displacement: a click while testing ``s_k`` rules ``s_k`` out with certainty.
Testing stops once two candidates remain; those are then handed to the
binary optimal inconclusive receiver, using the energy left in the pulse.
Histories that end with three or more candidates are inconclusive.

State ``j`` is ``|alpha| exp(2 pi i j / m)``, the priors are uniform and each
test uses a fraction ``f / m`` of the pulse energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .core import SolverError, ValidationError
from .solver import solve_point

__all__ = [
    "MpskConfig",
    "History",
    "HybridResult",
    "MAX_STATES",
    "vacuum_likelihood",
    "reduced_pair_energy",
    "coherent_overlap",
    "elimination_histories",
    "min_inconclusive_prob",
    "hybrid",
    "hybrid_tpsk",
    "heterodyne_baseline",
    "heterodyne_binary_reference",
    "scaling_study",
]

MAX_STATES = 20
Priors = Literal["posterior", "equal"]


def _phases(m: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(m) / m


def _check_m(m, minimum: int) -> int:
    if isinstance(m, bool) or int(m) != m or m < minimum:
        raise ValidationError("m", f"must be an integer >= {minimum}, got {m}")
    if m > MAX_STATES:
        raise ValidationError("m", f"history enumeration is limited to m <= {MAX_STATES}, got {m}")
    return int(m)


def _check_energy(alpha_sq) -> float:
    alpha_sq = float(alpha_sq)
    if math.isnan(alpha_sq) or alpha_sq < 0 or math.isinf(alpha_sq):
        raise ValidationError("alpha_sq", f"must be finite and >= 0, got {alpha_sq}")
    return alpha_sq


def _check_fraction(f) -> float:
    f = float(f)
    if math.isnan(f) or not 0 < f <= 1:
        # the residual energy 1 - k f / m must stay >= 0 up to k = m
        raise ValidationError("f", f"must satisfy 0 < f <= 1, got {f}")
    return f


@dataclass(frozen=True)
class MpskConfig:
    """Hybrid receiver settings.

    ``target_pi2`` is the inconclusive probability added by the binary stage,
    shared among conclusive elimination histories in proportion to their
    probabilities. ``priors`` selects whether the surviving pair keeps its
    posterior weights or is treated as equiprobable.
    """

    m: int
    alpha_sq: float
    f: float
    target_pi2: float = 0.0
    priors: Priors = "posterior"
    n_bins: int = 1024

    def __post_init__(self):
        _check_m(self.m, 3)
        _check_energy(self.alpha_sq)
        _check_fraction(self.f)
        t = float(self.target_pi2)
        if math.isnan(t) or not 0 <= t < 1:
            raise ValidationError("target_pi2", f"must satisfy 0 <= target_pi2 < 1, got {self.target_pi2}")
        if self.priors not in ("posterior", "equal"):
            raise ValidationError("priors", f"must be 'posterior' or 'equal', got {self.priors!r}")

    @classmethod
    def scaling_default(cls, m: int, alpha_sq: float, **kwargs) -> "MpskConfig":
        return cls(m, alpha_sq, (m - 1) / m, **kwargs)

    @property
    def stage_energy(self) -> float:
        return self.f * self.alpha_sq / self.m


def vacuum_likelihood(theta_test, theta_true, stage_energy):
    """Probability of no click when the test displacement nulls ``theta_test``.

    Equals ``exp(-2 E_s (1 - cos(theta_true - theta_test)))`` for stage energy ``E_s``.
    """
    e = np.asarray(stage_energy, dtype=float)
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise ValidationError("stage_energy", "must be >= 0")
    delta = np.asarray(theta_true, dtype=float) - np.asarray(theta_test, dtype=float)
    out = np.exp(-2.0 * e * (1.0 - np.cos(delta)))
    return float(out) if out.ndim == 0 else out


def reduced_pair_energy(alpha_sq: float, dtheta: float) -> float:
    """``|beta|^2`` of the antipodal pair with the same overlap as two states ``dtheta`` apart."""
    return 0.5 * alpha_sq * (1.0 - math.cos(dtheta))


def coherent_overlap(a: complex, b: complex) -> float:
    """``|<a|b>|`` for coherent amplitudes ``a`` and ``b``."""
    return math.exp(-0.5 * abs(a - b) ** 2)


@dataclass(frozen=True, eq=False)
class History:
    """One detection history of the sequential elimination.

    ``clicks[t]`` is the result of the ``t``-th test (state ``t``);
    ``likelihood[j]`` is the probability of the history given true state ``j``.
    """

    clicks: tuple[int, ...]
    likelihood: np.ndarray
    survivors: tuple[int, ...]

    @property
    def stage(self) -> int:
        return len(self.clicks)

    @property
    def probability(self) -> float:
        return float(self.likelihood.mean())

    @property
    def conclusive(self) -> bool:
        return len(self.survivors) == 2


def _test_vacuum(m: int, alpha_sq: float, f: float) -> np.ndarray:
    """``vac[t, j]``: no-click probability of test ``t`` given true state ``j``."""
    th = _phases(m)
    return vacuum_likelihood(th[:, None], th[None, :], f * alpha_sq / m)


def elimination_histories(m: int, alpha_sq: float, f: float) -> list[History]:
    """Every history of the protocol, in depth-first order (no-click branch first)."""
    m = _check_m(m, 3)
    vac = _test_vacuum(m, _check_energy(alpha_sq), _check_fraction(f))
    out: list[History] = []

    def walk(clicks: tuple[int, ...], like: np.ndarray) -> None:
        t = len(clicks)
        n_clicks = sum(clicks)
        if n_clicks == m - 2 or t == m:
            survivors = tuple(j for j in range(m) if j >= t or not clicks[j])
            like.setflags(write=False)
            out.append(History(clicks, like, survivors))
            return
        walk(clicks + (0,), like * vac[t])
        walk(clicks + (1,), like * (1.0 - vac[t]))

    walk((), np.ones(m))
    return out


def min_inconclusive_prob(m: int, alpha_sq: float, f: float) -> float:
    """Probability that the elimination stage leaves three or more candidates.

    Enumerates the histories breadth-first; conclusive branches are retired
    as soon as they reach ``m - 2`` clicks.
    """
    m = _check_m(m, 3)
    vac = _test_vacuum(m, _check_energy(alpha_sq), _check_fraction(f))
    like = np.ones((1, m))
    clicks = np.zeros(1, dtype=np.int64)
    retired = 0.0
    for t in range(m):
        like = np.concatenate([like * vac[t], like * (1.0 - vac[t])])
        clicks = np.concatenate([clicks, clicks + 1])
        done = clicks == m - 2
        retired += like[done].sum()
        like, clicks = like[~done], clicks[~done]
    inconclusive = like.sum() / m
    total = inconclusive + retired / m
    if abs(total - 1.0) > 1e-9:
        raise ArithmeticError(f"history probabilities sum to {total!r}")
    return float(inconclusive)


@dataclass(frozen=True)
class HybridResult:
    """Totals of the elimination plus binary receiver."""

    p_i_stage1: float
    p_i_stage2: float
    p_e: float

    @property
    def p_i_total(self) -> float:
        return self.p_i_stage1 + self.p_i_stage2

    @property
    def conditional_error(self) -> float:
        rest = 1.0 - self.p_i_total
        return self.p_e / rest if rest > 0 else math.nan


@lru_cache(maxsize=4096)
def _binary(beta_sq: float, prior: float, budget: float, n_bins: int) -> tuple[float, float]:
    if beta_sq == 0:
        # no signal left: guess the likelier state on the conclusive share
        return (1.0 - budget) * (1.0 - prior), budget
    pt = solve_point(beta_sq, prior, budget, n_bins=n_bins)
    return pt.achieved_pe, pt.achieved_pi


def hybrid(config: MpskConfig) -> HybridResult:
    """Error and inconclusive totals of the hybrid receiver for ``config``.

    Each conclusive history gets the binary budget
    ``target_pi2 / (1 - P_I1)``, so the binary stage contributes
    ``target_pi2`` in total.
    """
    m, alpha_sq, f = config.m, float(config.alpha_sq), float(config.f)
    histories = elimination_histories(m, alpha_sq, f)
    th = _phases(m)
    p_i1 = sum(h.probability for h in histories if not h.conclusive)
    conclusive = 1.0 - p_i1
    if config.target_pi2 > 0 and config.target_pi2 >= conclusive:
        raise SolverError(
            f"target_pi2={config.target_pi2} exceeds the conclusive share {conclusive:.6g} of the elimination stage"
        )
    budget = config.target_pi2 / conclusive if config.target_pi2 > 0 else 0.0

    p_e = 0.0
    p_i2 = 0.0
    for h in histories:
        if not h.conclusive or h.probability == 0:
            continue
        a, b = h.survivors
        residual = max(1.0 - h.stage * f / m, 0.0) * alpha_sq
        beta_sq = reduced_pair_energy(residual, th[a] - th[b])
        if config.priors == "equal":
            prior = 0.5
        else:
            la, lb = h.likelihood[a], h.likelihood[b]
            prior = max(la, lb) / (la + lb)
        pe, pi = _binary(round(beta_sq, 15), round(prior, 15), budget, config.n_bins)
        p_e += h.probability * pe
        p_i2 += h.probability * pi
    return HybridResult(p_i_stage1=p_i1, p_i_stage2=p_i2, p_e=p_e)


def hybrid_tpsk(config: MpskConfig) -> HybridResult:
    """:func:`hybrid` restricted to three states."""
    if config.m != 3:
        raise ValidationError("m", f"hybrid_tpsk needs m = 3, got {config.m}")
    return hybrid(config)


def _het_posteriors(m: int, alpha_sq: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outcome density and largest posterior for heterodyne outcomes ``z``."""
    amps = math.sqrt(alpha_sq) * np.exp(1j * _phases(m))
    dens = np.exp(-np.abs(z[..., None] - amps) ** 2) / math.pi
    total = dens.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        top = np.where(total > 0, dens.max(axis=-1) / total, 1.0 / m)
    return total / m, top


@lru_cache(maxsize=32)
def _het_table(m: int, alpha_sq: float, n_grid: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid outcomes sorted by increasing certainty: weights, cumulative weights, error tail sums."""
    half = math.sqrt(alpha_sq) + 6.0 / math.sqrt(2.0)
    x = np.linspace(-half, half, n_grid)
    z = x[:, None] + 1j * x[None, :]
    weight, top = _het_posteriors(m, alpha_sq, z.ravel())
    order = np.argsort(top, kind="stable")
    w = weight[order] / weight.sum()
    err = w * (1.0 - top[order])
    tail = np.concatenate([np.cumsum(err[::-1])[::-1], [0.0]])
    for arr in (w, tail):
        arr.setflags(write=False)
    return w, np.cumsum(w), tail


def _threshold_error(w: np.ndarray, cum: np.ndarray, tail: np.ndarray, target_pi: float) -> float:
    """Error left after discarding the least certain outcomes up to ``target_pi``."""
    i = int(np.searchsorted(cum, target_pi, side="left"))
    if i >= len(w):
        return 0.0
    before = cum[i - 1] if i > 0 else 0.0
    part = (target_pi - before) / w[i] if w[i] > 0 else 0.0
    err_i = tail[i] - tail[i + 1]
    return float(err_i * (1.0 - part) + tail[i + 1])


def heterodyne_baseline(
    m: int,
    alpha_sq: float,
    target_pi: float,
    method: Literal["grid", "mc"] = "grid",
    n_grid: int = 2000,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """Conditional error ``P_E / (1 - P_I)`` of heterodyne detection with discarded outcomes.

    Outcomes with the smallest maximum posterior are declared inconclusive
    until their probability reaches ``target_pi``. ``"grid"`` integrates on a
    square grid reaching six standard deviations beyond the constellation;
    ``"mc"`` samples outcomes and counts actual decision errors.
    """
    if isinstance(m, bool) or int(m) != m or m < 2:
        raise ValidationError("m", f"must be an integer >= 2, got {m}")
    m = int(m)
    alpha_sq = _check_energy(alpha_sq)
    target_pi = float(target_pi)
    if math.isnan(target_pi) or not 0 <= target_pi < 1:
        raise ValidationError("target_pi", f"must satisfy 0 <= target_pi < 1, got {target_pi}")

    if method == "grid":
        if isinstance(n_grid, bool) or int(n_grid) != n_grid or n_grid < 3:
            raise ValidationError("n_grid", f"must be an integer >= 3, got {n_grid}")
        p_e = _threshold_error(*_het_table(m, alpha_sq, int(n_grid)), target_pi)
        return p_e / (1.0 - target_pi)
    if method == "mc":
        rng = np.random.default_rng(seed)
        truth = rng.integers(0, m, n_samples)
        amps = math.sqrt(alpha_sq) * np.exp(1j * _phases(m))
        z = amps[truth] + (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) / math.sqrt(2.0)
        dens = np.exp(-np.abs(z[:, None] - amps) ** 2)
        top = dens.max(axis=1) / dens.sum(axis=1)
        guess = dens.argmax(axis=1)
        keep = top >= np.quantile(top, target_pi) if target_pi > 0 else np.ones(n_samples, dtype=bool)
        return float(np.count_nonzero(guess[keep] != truth[keep]) / np.count_nonzero(keep))
    raise ValidationError("method", f"must be 'grid' or 'mc', got {method!r}")


def heterodyne_binary_reference(alpha_sq: float, target_pi: float) -> float:
    """Closed-form heterodyne conditional error for two antipodal states.

    Only the quadrature along the constellation axis matters; it is normal
    with mean ``|alpha|`` and variance 1/2, and the inconclusive set is a
    symmetric strip around zero.
    """
    a = math.sqrt(_check_energy(alpha_sq))

    def cdf(y: float) -> float:
        # P(X - |alpha| < y) for variance 1/2
        return 0.5 * (1.0 + erf(y))

    def strip(c: float) -> tuple[float, float]:
        p_i = cdf(c - a) - cdf(-c - a)
        return cdf(-c - a), p_i

    if target_pi == 0:
        p_e, p_i = strip(0.0)
    else:
        c = brentq(lambda c: strip(c)[1] - target_pi, 0.0, a + 40.0, xtol=1e-15)
        p_e, p_i = strip(c)
    return p_e / (1.0 - p_i)


def scaling_study(
    m_range: Sequence[int],
    alpha_sq_per_bit: float,
    f: float | None = None,
) -> list[tuple[int, float]]:
    """``(m, log10(1 - P_I1))`` with total energy ``alpha_sq_per_bit * log2(m)``.

    ``f`` defaults to ``(m - 1) / m``.
    """
    e = _check_energy(alpha_sq_per_bit)
    out = []
    for m in m_range:
        m = _check_m(m, 3)
        frac = (m - 1) / m if f is None else f
        p_conc = 1.0 - min_inconclusive_prob(m, e * math.log2(m), frac)
        out.append((m, math.log10(p_conc) if p_conc > 0 else -math.inf))
    return out
