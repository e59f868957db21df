"""Deterministic bin-by-bin evolution of the correct/error/inconclusive probabilities.

The receiver's provisional outcome changes only on a click, so the
probabilities obey a two-state rate equation in each mode. In the first mode
the provisional hypothesis flips between the two input states; in the second
mode it flips between the first-mode hypothesis and "inconclusive".

``P_C`` is the probability that the provisional outcome is the true state,
``P_E`` that it is the wrong state, ``P_I`` that it is inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .core import (
    SIMPLEX_TOL,
    ImperfectionModel,
    ProbabilityTriple,
    SimplexError,
    StrategySpec,
    ValidationError,
    helstrom_error,
)
from .waveform import WaveformTable

__all__ = [
    "ProbabilityTrace",
    "mean_counts",
    "helstrom_at_switch",
    "click_probabilities",
    "evolve",
]

Scheme = Literal["euler", "exact"]


def mean_counts(alpha_sq, beta_mag, imp: ImperfectionModel):
    """Mean detected photons per pulse for constructive (+) and nulling (-) LO phase.

    Returns ``(n_plus, n_minus)``; scalars in, scalars out.
    """
    beta = np.asarray(beta_mag, dtype=float)
    if np.any(beta < 0):
        raise ValidationError("beta_mag", "must be >= 0")
    base = alpha_sq + beta * beta
    cross = 2.0 * imp.xi * beta * math.sqrt(alpha_sq)
    n_plus = imp.eta * (base + cross) + imp.nu
    n_minus = imp.eta * (base - cross) + imp.nu
    if np.ndim(beta_mag) == 0:
        return float(n_plus), float(n_minus)
    return n_plus, n_minus


def helstrom_at_switch(alpha_sq: float, p: float, t1: float) -> float:
    """Helstrom error for the first-mode states ``|+-sqrt(t1) alpha>``."""
    if not 0 <= t1 <= 1:
        raise ValidationError("t1", f"must lie in [0, 1], got {t1}")
    return helstrom_error(t1 * alpha_sq, p)


def click_probabilities(alpha_sq: float, mags, imp: ImperfectionModel, scheme: Scheme = "euler"):
    """Per-bin click probabilities ``(q_null, q_const)`` for the given LO magnitudes.

    ``"euler"`` uses the first-order ``n * dt``; ``"exact"`` uses the on/off
    probability ``1 - exp(-n * dt)`` that the Monte-Carlo engine samples.
    """
    n_plus, n_minus = mean_counts(alpha_sq, np.asarray(mags, dtype=float), imp)
    dt = imp.dt
    if scheme == "euler":
        return n_minus * dt, n_plus * dt
    if scheme == "exact":
        return -np.expm1(-n_minus * dt), -np.expm1(-n_plus * dt)
    raise ValidationError("scheme", f"unknown scheme {scheme!r}")


def first_mode_path(p: float, q_null, q_const) -> list[float]:
    """``P_C`` at every bin boundary of the first mode, starting from the prior."""
    pc = p
    path = [pc]
    for a, b in zip(q_null, q_const):
        pc = pc * (1.0 - a) + (1.0 - pc) * b
        path.append(pc)
    return path


def second_mode_path(pc: float, pe: float, q: float, q_null, q_const) -> tuple[list[float], list[float]]:
    """``(P_C, P_E)`` over the second mode.

    ``q`` is the probability that the first-mode hypothesis is right; a
    hypothesis-correct trial clicks at the nulling rate while its provisional
    outcome is the hypothesis and at the constructive rate while it is
    inconclusive, and the reverse for a hypothesis-wrong trial.
    """
    w = 1.0 - q
    pcs = [pc]
    pes = [pe]
    for a, b in zip(q_null, q_const):
        pc, pe = pc * (1.0 - a) + (q - pc) * b, pe * (1.0 - b) + (w - pe) * a
        pcs.append(pc)
        pes.append(pe)
    return pcs, pes


def switch_state(q: float, v: float) -> tuple[float, float]:
    """``(P_C, P_E)`` right after the switch: all inconclusive when ``v <= 0.5``."""
    if v <= 0.5:
        return 0.0, 0.0
    return q, 1.0 - q


@dataclass(frozen=True, eq=False)
class ProbabilityTrace:
    """Probabilities at every bin boundary ``t = i / n_bins``, ``i = 0 .. n_bins``.

    The entry at ``t1_index`` is the state after the mode switch.
    ``q_switch`` is the evolved probability that the first-mode hypothesis is
    correct; ``p_prime`` is the ideal Helstrom error at ``t1`` for reference.
    """

    times: np.ndarray
    p_c: np.ndarray
    p_e: np.ndarray
    p_i: np.ndarray
    t1_index: int
    p_prime: float
    q_switch: float

    def triple(self, i: int) -> ProbabilityTriple:
        return ProbabilityTriple(float(self.p_c[i]), float(self.p_e[i]), float(self.p_i[i]))

    @property
    def triples(self) -> list[ProbabilityTriple]:
        return [self.triple(i) for i in range(len(self.times))]

    @property
    def final(self) -> ProbabilityTriple:
        return self.triple(-1)

    def rows(self) -> Iterator[tuple[int, float, float, float, float]]:
        for i in range(len(self.times)):
            yield i, float(self.times[i]), float(self.p_c[i]), float(self.p_e[i]), float(self.p_i[i])


def _check_simplex(p_c: np.ndarray, p_e: np.ndarray, p_i: np.ndarray) -> None:
    for name, arr in (("P_C", p_c), ("P_E", p_e), ("P_I", p_i)):
        bad = np.flatnonzero((arr < -SIMPLEX_TOL) | (arr > 1 + SIMPLEX_TOL) | np.isnan(arr))
        if bad.size:
            i = int(bad[0])
            raise SimplexError(
                f"{name} = {arr[i]!r} at boundary {i} left the simplex; "
                "time bins too coarse for the click rates, or invalid inputs"
            )


def evolve(
    spec: StrategySpec,
    wf: WaveformTable,
    imp: ImperfectionModel,
    scheme: Scheme = "euler",
) -> ProbabilityTrace:
    """Evolve ``(P_C, P_E, P_I)`` through both temporal modes using ``wf.mag_applied``.

    Raises :class:`SimplexError` if any probability leaves ``[0, 1]`` by more
    than ``1e-9``.
    """
    if wf.n_bins != imp.n_bins:
        raise ValidationError("n_bins", f"waveform has {wf.n_bins} bins, imperfection model {imp.n_bins}")
    if wf.alpha_sq != spec.alpha_sq or wf.t1 != spec.t1:
        raise ValidationError("waveform", "table was built for a different strategy")
    q_null, q_const = click_probabilities(spec.alpha_sq, wf.mag_applied, imp, scheme)
    k = wf.n_first
    q_null = q_null.tolist()
    q_const = q_const.tolist()

    first = first_mode_path(spec.p, q_null[:k], q_const[:k])
    q = first[-1]
    pc0, pe0 = switch_state(q, spec.v)
    pcs, pes = second_mode_path(pc0, pe0, q, q_null[k:], q_const[k:])

    p_c = np.array(first[:-1] + pcs)
    p_e = np.concatenate([1.0 - np.array(first[:-1]), pes])
    p_i = 1.0 - p_c - p_e
    p_i[np.abs(p_i) < 1e-15] = 0.0
    _check_simplex(p_c, p_e, p_i)
    times = np.arange(wf.n_bins + 1, dtype=float) / wf.n_bins
    return ProbabilityTrace(
        times=times,
        p_c=p_c,
        p_e=p_e,
        p_i=p_i,
        t1_index=k,
        p_prime=helstrom_at_switch(spec.alpha_sq, spec.p, spec.t1),
        q_switch=q,
    )
