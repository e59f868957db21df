"""LO displacement-magnitude waveforms on the discretized measurement window.

Only magnitudes live here. The LO sign depends on the detection record and
is tracked by the engines in :mod:`optinc.evolution` and
:mod:`optinc.montecarlo`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import ImperfectionModel, StrategySpec, ValidationError

__all__ = [
    "WaveformTable",
    "bin_centers",
    "dolinar_magnitude",
    "single_state_magnitude",
    "quantize",
    "dequantize",
    "build_waveform",
]


def bin_centers(n_bins: int) -> np.ndarray:
    return (np.arange(n_bins, dtype=float) + 0.5) / n_bins


def _feedback_magnitude(tau, alpha_sq: float, prior: float):
    # sqrt(E) / sqrt(1 - 4w(1-w) K^(2 tau)); zero denominator -> inf
    g = 4.0 * prior * (1.0 - prior)
    denom = 1.0 - g * np.exp(-4.0 * alpha_sq * np.asarray(tau, dtype=float))
    with np.errstate(divide="ignore"):
        out = math.sqrt(alpha_sq) / np.sqrt(np.maximum(denom, 0.0))
    return float(out) if np.ndim(tau) == 0 else out


def dolinar_magnitude(t, alpha_sq: float, p: float):
    """Minimum-error (Dolinar) displacement magnitude at elapsed time ``t``.

    Diverges at ``t = 0`` for ``p = 0.5``; callers clamp downstream.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise ValidationError("t", "must lie in [0, 1]")
    if not 0 < p < 1:
        raise ValidationError("p", f"must satisfy 0 < p < 1, got {p}")
    return _feedback_magnitude(t, alpha_sq, p)


def single_state_magnitude(t, alpha_sq: float, v: float, t1: float):
    """Second-mode displacement magnitude for ``t1 < t <= 1``.

    The Dolinar-like receiver restarts at ``t1`` with effective prior ``v``,
    so the elapsed time entering the overlap factor is ``t - t1``.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= t1) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise ValidationError("t", f"must lie in ({t1}, 1]")
    if not 0 < v < 1:
        raise ValidationError("v", f"must satisfy 0 < v < 1, got {v}")
    return _feedback_magnitude(arr - t1, alpha_sq, v)


def quantize(mag, full_scale: float, bits: int) -> np.ndarray:
    """Nearest DAC code for each magnitude, codes ``0 .. 2**bits - 1`` spanning ``[0, full_scale]``."""
    top = (1 << int(bits)) - 1
    scaled = np.asarray(mag, dtype=float) / full_scale * top
    return np.clip(np.floor(scaled + 0.5), 0, top).astype(np.int64)


def dequantize(code, full_scale: float, bits: int) -> np.ndarray:
    top = (1 << int(bits)) - 1
    return np.asarray(code, dtype=float) * (full_scale / top)


@dataclass(frozen=True, eq=False)
class WaveformTable:
    """Per-bin LO magnitudes for one strategy executed on one device model.

    ``first_mode[k]`` is true for bins whose center satisfies ``t_mid <= t1``;
    those bins always form a prefix of length ``n_first``.
    """

    t_mid: np.ndarray
    mag_ideal: np.ndarray
    mag_applied: np.ndarray
    first_mode: np.ndarray
    t1: float
    alpha_sq: float
    full_scale: float

    @property
    def n_bins(self) -> int:
        return len(self.t_mid)

    @property
    def n_first(self) -> int:
        return int(np.count_nonzero(self.first_mode))

    def rows(self) -> Iterator[tuple[int, float, float, float, str]]:
        for k in range(self.n_bins):
            mode = "first" if self.first_mode[k] else "second"
            yield k, float(self.t_mid[k]), float(self.mag_ideal[k]), float(self.mag_applied[k]), mode


def build_waveform(spec: StrategySpec, imp: ImperfectionModel) -> WaveformTable:
    """Evaluate the two-mode waveform at bin centers, clamp to ``sqrt(R) |alpha|`` and digitize.

    With ``r_max`` unbounded the DAC full scale is the largest clamped magnitude
    in the table.
    """
    n = int(imp.n_bins)
    t_mid = bin_centers(n)
    first = t_mid <= spec.t1
    k = int(np.count_nonzero(first))
    mag_ideal = np.empty(n)
    mag_ideal[:k] = dolinar_magnitude(t_mid[:k], spec.alpha_sq, spec.p)
    if k < n:
        mag_ideal[k:] = single_state_magnitude(t_mid[k:], spec.alpha_sq, spec.v, spec.t1)

    cap = math.sqrt(imp.r_max * spec.alpha_sq)
    applied = np.minimum(mag_ideal, cap)
    full_scale = cap if math.isfinite(cap) else float(applied.max())
    if imp.dac_bits is not None:
        applied = dequantize(quantize(applied, full_scale, imp.dac_bits), full_scale, imp.dac_bits)
    for arr in (t_mid, mag_ideal, applied, first):
        arr.setflags(write=False)
    return WaveformTable(
        t_mid=t_mid,
        mag_ideal=mag_ideal,
        mag_applied=applied,
        first_mode=first,
        t1=float(spec.t1),
        alpha_sq=float(spec.alpha_sq),
        full_scale=full_scale,
    )
