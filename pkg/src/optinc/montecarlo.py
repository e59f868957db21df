"""Trial-level Monte-Carlo simulation of the two-mode feedback receiver.

Each trial draws the true state, then walks the time bins: the LO sign
follows the detection record, every bin fires the on/off detector with the
Poisson probability of at least one count, and the provisional outcome is
updated on each click. Ensembles are split into chunks that can run on any
number of threads; trial ``i`` always uses the same random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import ImperfectionModel, StrategySpec, ValidationError
from .evolution import mean_counts
from .rng import TrialStreams
from .waveform import WaveformTable

__all__ = [
    "TrialRecord",
    "EnsembleStats",
    "sample_detection",
    "simulate_trial",
    "trial_generator",
    "run_ensemble",
]

Outcome = Literal["correct", "error", "inconclusive"]
DEFAULT_CHUNK = 4096


def sample_detection(mean_counts: float, rng: np.random.Generator) -> int:
    """On/off detection for a Poisson count of the given mean.

    Inverts the Poisson CDF at zero with one uniform: ``0`` iff ``u < exp(-mean)``.
    Any count above one is reported as a single click.
    """
    if math.isnan(mean_counts) or mean_counts < 0:
        raise ValidationError("mean_counts", f"must be >= 0, got {mean_counts}")
    return int(rng.random() >= math.exp(-mean_counts))


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One simulated experiment.

    ``hypothesis[i]`` is the provisional outcome at bin boundary ``i``
    (``+1``, ``-1`` or ``0`` for inconclusive); the entry at the switch
    boundary is the post-switch value.
    """

    true_state: int
    detections: np.ndarray
    hypothesis: np.ndarray
    outcome: Outcome
    n1_final: int
    n2_final: int


def _check_inputs(spec: StrategySpec, wf: WaveformTable, imp: ImperfectionModel) -> None:
    if wf.n_bins != imp.n_bins:
        raise ValidationError("n_bins", f"waveform has {wf.n_bins} bins, imperfection model {imp.n_bins}")
    if wf.alpha_sq != spec.alpha_sq or wf.t1 != spec.t1:
        raise ValidationError("waveform", "table was built for a different strategy")


def trial_generator(master_seed: int, trial: int, n_bins: int) -> np.random.Generator:
    """Random stream that :func:`run_ensemble` assigns to ``trial``."""
    return TrialStreams(master_seed, 1 + n_bins).generator(trial)


def simulate_trial(
    spec: StrategySpec,
    wf: WaveformTable,
    imp: ImperfectionModel,
    rng: np.random.Generator,
) -> TrialRecord:
    """Run one experiment bin by bin.

    Consumes one uniform for the true state and one per bin, in that order.
    """
    _check_inputs(spec, wf, imp)
    alpha = math.sqrt(spec.alpha_sq)
    dt = imp.dt
    n = wf.n_bins
    k = wf.n_first
    mags = wf.mag_applied

    true_state = 1 if rng.random() < spec.p else -1
    detections = np.zeros(n, dtype=np.uint8)
    hypothesis = np.zeros(n + 1, dtype=np.int8)

    def mean(beta: float) -> float:
        return (imp.eta * (spec.alpha_sq + beta * beta - 2.0 * imp.xi * beta * alpha * true_state) + imp.nu) * dt

    # first mode: LO sign (-1)^N1 nulls the current guess
    n1 = 0
    hypothesis[0] = 1
    for j in range(k):
        d = sample_detection(mean((-1) ** n1 * mags[j]), rng)
        detections[j] = d
        n1 += d
        hypothesis[j + 1] = (-1) ** n1

    # second mode: parity N2 + N0 alternates between the guess and inconclusive
    guess = (-1) ** n1
    n2 = 0
    parity = spec.n0
    hypothesis[k] = guess if parity % 2 == 0 else 0
    for j in range(k, n):
        sign = guess * (-1) ** (n2 + parity)
        d = sample_detection(mean(sign * mags[j]), rng)
        detections[j] = d
        n2 += d
        hypothesis[j + 1] = guess if (n2 + parity) % 2 == 0 else 0

    final = int(hypothesis[-1])
    outcome: Outcome = "inconclusive" if final == 0 else ("correct" if final == true_state else "error")
    detections.setflags(write=False)
    hypothesis.setflags(write=False)
    return TrialRecord(true_state, detections, hypothesis, outcome, n1, n2)


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Outcome statistics of ``n_trials`` simulated experiments.

    ``trace_counts[i]`` holds the (correct, error, inconclusive) counts of the
    provisional outcome at bin boundary ``i``. ``batch_p`` holds per-batch
    probabilities and ``batch_sd`` their sample standard deviation.
    """

    n_trials: int
    n_batches: int
    master_seed: int
    counts: tuple[int, int, int]
    trace_counts: np.ndarray
    batch_p: np.ndarray
    detections: np.ndarray | None = None

    @property
    def p_c(self) -> float:
        return self.counts[0] / self.n_trials

    @property
    def p_e(self) -> float:
        return self.counts[1] / self.n_trials

    @property
    def p_i(self) -> float:
        return self.counts[2] / self.n_trials

    @property
    def probabilities(self) -> tuple[float, float, float]:
        return (self.p_c, self.p_e, self.p_i)

    @property
    def standard_errors(self) -> tuple[float, float, float]:
        return tuple(math.sqrt(x * (1.0 - x) / self.n_trials) for x in self.probabilities)

    @property
    def se_c(self) -> float:
        return self.standard_errors[0]

    @property
    def se_e(self) -> float:
        return self.standard_errors[1]

    @property
    def se_i(self) -> float:
        return self.standard_errors[2]

    @property
    def batch_sd(self) -> tuple[float, float, float]:
        if self.n_batches < 2:
            return (math.nan, math.nan, math.nan)
        return tuple(float(x) for x in self.batch_p.std(axis=0, ddof=1))

    @property
    def trace_p(self) -> np.ndarray:
        """Time-resolved (P_C, P_E, P_I) at every bin boundary, shape ``(n_bins + 1, 3)``."""
        return self.trace_counts / self.n_trials


@dataclass(frozen=True)
class _Plan:
    p: float
    k: int
    n0: int
    # no-click probabilities exp(-mean) for nulling and constructive LO phase
    stay_null: np.ndarray
    stay_const: np.ndarray


def _make_plan(spec: StrategySpec, wf: WaveformTable, imp: ImperfectionModel) -> _Plan:
    n_plus, n_minus = mean_counts(spec.alpha_sq, np.asarray(wf.mag_applied), imp)
    return _Plan(
        p=spec.p,
        k=wf.n_first,
        n0=spec.n0,
        stay_null=np.exp(-n_minus * imp.dt),
        stay_const=np.exp(-n_plus * imp.dt),
    )


def _run_chunk(plan: _Plan, streams: TrialStreams, start: int, stop: int, keep: bool):
    """Boundary counts ``(n_bins + 1, 2)`` of correct/error outcomes for one trial range."""
    u = np.ascontiguousarray(streams.uniforms(start, stop).T)
    m = stop - start
    n = len(plan.stay_null)
    counts = np.zeros((n + 1, 2), dtype=np.int64)
    clicks = np.zeros((n, m), dtype=bool) if keep else None

    # ``right``: the first-mode guess equals the true state
    right = u[0] < plan.p  # trials start on the guess +1, true with probability p
    counts[0] = right.sum(), m - right.sum()
    for j in range(plan.k):
        d = u[j + 1] >= np.where(right, plan.stay_null[j], plan.stay_const[j])
        right ^= d
        if keep:
            clicks[j] = d
        c = int(right.sum())
        counts[j + 1] = c, m - c

    # ``conclusive``: parity N2 + N0 is even, the outcome is the guess
    conclusive = np.full(m, plan.n0 % 2 == 0)
    counts[plan.k] = _split(right, conclusive)
    for j in range(plan.k, n):
        nulling = right == conclusive
        d = u[j + 1] >= np.where(nulling, plan.stay_null[j], plan.stay_const[j])
        conclusive ^= d
        if keep:
            clicks[j] = d
        counts[j + 1] = _split(right, conclusive)
    packed = np.packbits(clicks.T, axis=1) if keep else None
    return counts, packed


def _split(right: np.ndarray, conclusive: np.ndarray) -> tuple[int, int]:
    c = int(np.count_nonzero(right & conclusive))
    return c, int(np.count_nonzero(conclusive)) - c


def run_ensemble(
    spec: StrategySpec,
    wf: WaveformTable,
    imp: ImperfectionModel,
    n_trials: int,
    master_seed: int,
    n_batches: int = 1,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    keep_detections: bool = False,
) -> EnsembleStats:
    """Simulate ``n_batches`` batches of ``n_trials`` experiments each.

    Trial ``i`` of the whole run uses :func:`trial_generator` ``(master_seed, i)``,
    so results do not depend on ``workers`` or ``chunk_size``. With
    ``keep_detections`` the per-trial click record is kept as a bit-packed
    array of shape ``(total, ceil(n_bins / 8))``.
    """
    _check_inputs(spec, wf, imp)
    for name, value in (("n_trials", n_trials), ("n_batches", n_batches), ("workers", workers), ("chunk_size", chunk_size)):
        if isinstance(value, bool) or int(value) != value or value < 1:
            raise ValidationError(name, f"must be an integer >= 1, got {value}")
    if isinstance(master_seed, bool) or int(master_seed) != master_seed or master_seed < 0:
        raise ValidationError("master_seed", f"must be an integer >= 0, got {master_seed}")
    n_trials, n_batches, master_seed = int(n_trials), int(n_batches), int(master_seed)

    plan = _make_plan(spec, wf, imp)
    streams = TrialStreams(master_seed, 1 + wf.n_bins)
    jobs = []
    for b in range(n_batches):
        lo, hi = b * n_trials, (b + 1) * n_trials
        jobs.extend((b, a, min(a + chunk_size, hi)) for a in range(lo, hi, chunk_size))

    def work(job):
        _, a, z = job
        return _run_chunk(plan, streams, a, z, keep_detections)

    if workers == 1:
        results = [work(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))

    n = wf.n_bins
    batch_counts = np.zeros((n_batches, 2), dtype=np.int64)
    trace = np.zeros((n + 1, 2), dtype=np.int64)
    for (b, _, _), (counts, _) in zip(jobs, results):
        trace += counts
        batch_counts[b] += counts[-1]
    total = n_trials * n_batches
    trace_counts = np.column_stack([trace, total - trace.sum(axis=1)])
    batch_full = np.column_stack([batch_counts, n_trials - batch_counts.sum(axis=1)])
    detections = np.concatenate([packed for _, packed in results]) if keep_detections else None
    final = trace_counts[-1]
    return EnsembleStats(
        n_trials=total,
        n_batches=n_batches,
        master_seed=master_seed,
        counts=(int(final[0]), int(final[1]), int(final[2])),
        trace_counts=trace_counts,
        batch_p=batch_full / n_trials,
        detections=detections,
    )
