"""Shared domain types and closed-form reference bounds for binary coherent states.

All energies are mean photon numbers ``|alpha|^2`` of the full pulse, and time
is measured as a fraction of the pulse, ``0 <= t <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "OptIncError",
    "ValidationError",
    "SimplexError",
    "SolverError",
    "StrategySpec",
    "ImperfectionModel",
    "ProbabilityTriple",
    "SIMPLEX_TOL",
    "overlap_sq",
    "helstrom_error",
    "idp_bound",
    "homodyne_error",
    "optimal_inconclusive_error",
]

SIMPLEX_TOL = 1e-9


class OptIncError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(OptIncError, ValueError):
    """A physical or numerical parameter is outside its allowed domain.

    ``field`` names the offending parameter so front ends can report it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SimplexError(OptIncError, ArithmeticError):
    """A probability triple left the simplex during time evolution."""


class SolverError(OptIncError, RuntimeError):
    """The strategy solver failed to meet its target.

    ``best`` holds the closest candidate found (or ``None``).
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


def _check_finite(field: str, value: float) -> float:
    value = float(value)
    if math.isnan(value):
        raise ValidationError(field, "must not be NaN")
    return value


@dataclass(frozen=True)
class StrategySpec:
    """Parameters that fix one optimal inconclusive measurement.

    ``t1`` is the switching time between the minimum-error mode and the
    single-state-domain mode, ``v`` the effective prior driving the second
    mode. ``n0`` (the initial LO parity of the second mode) is derived from
    ``v``. ``target_pi`` is ``None`` for strategies not produced by a solve.
    """

    alpha_sq: float
    p: float
    target_pi: float | None
    t1: float
    v: float

    def __post_init__(self):
        alpha_sq = _check_finite("alpha_sq", self.alpha_sq)
        if not alpha_sq > 0 or math.isinf(alpha_sq):
            raise ValidationError("alpha_sq", f"must be positive and finite, got {self.alpha_sq}")
        p = _check_finite("p", self.p)
        if not 0.5 <= p < 1:
            raise ValidationError("p", f"must satisfy 0.5 <= p < 1, got {self.p}")
        target = None if self.target_pi is None else _check_finite("target_pi", self.target_pi)
        if target is not None and not 0 <= target < 1:
            raise ValidationError("target_pi", f"must satisfy 0 <= target_pi < 1, got {self.target_pi}")
        t1 = _check_finite("t1", self.t1)
        if not 0 < t1 <= 1:
            raise ValidationError("t1", f"must satisfy 0 < t1 <= 1, got {self.t1}")
        if target == 0 and t1 != 1:
            raise ValidationError("t1", "target_pi = 0 requires t1 = 1 (pure Dolinar)")
        v = _check_finite("v", self.v)
        if not 0 < v < 1:
            raise ValidationError("v", f"must satisfy 0 < v < 1, got {self.v}")

    @property
    def n0(self) -> int:
        return 0 if self.v > 0.5 else 1

    def to_dict(self) -> dict:
        return {
            "alpha_sq": self.alpha_sq,
            "p": self.p,
            "target_pi": self.target_pi,
            "t1": self.t1,
            "v": self.v,
            "n0": self.n0,
        }


@dataclass(frozen=True)
class ImperfectionModel:
    """Detector and modulator non-idealities applied when executing a strategy.

    ``nu`` is the expected number of dark counts over the whole pulse, so a
    single time bin contributes ``nu * dt``. ``r_max`` bounds the LO-to-signal
    power ratio and may be ``math.inf``; ``dac_bits=None`` disables
    quantization.
    """

    eta: float = 1.0
    xi: float = 1.0
    nu: float = 0.0
    r_max: float = math.inf
    dac_bits: int | None = None
    n_bins: int = 1024

    def __post_init__(self):
        eta = _check_finite("eta", self.eta)
        if not 0 <= eta <= 1:
            raise ValidationError("eta", f"must satisfy 0 <= eta <= 1, got {self.eta}")
        xi = _check_finite("xi", self.xi)
        if not 0 < xi <= 1:
            raise ValidationError("xi", f"must satisfy 0 < xi <= 1, got {self.xi}")
        nu = _check_finite("nu", self.nu)
        if not 0 <= nu < math.inf:
            raise ValidationError("nu", f"must be finite and >= 0, got {self.nu}")
        r_max = _check_finite("r_max", self.r_max)
        if not r_max > 0:
            raise ValidationError("r_max", f"must be > 0, got {self.r_max}")
        if self.dac_bits is not None:
            if isinstance(self.dac_bits, bool) or int(self.dac_bits) != self.dac_bits or self.dac_bits < 1:
                raise ValidationError("dac_bits", f"must be an integer >= 1 or None, got {self.dac_bits}")
            if self.dac_bits > 32:
                raise ValidationError("dac_bits", "more than 32 bits is not supported")
        if isinstance(self.n_bins, bool) or int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValidationError("n_bins", f"must be an integer >= 1, got {self.n_bins}")

    @classmethod
    def ideal(cls, n_bins: int = 1024) -> "ImperfectionModel":
        return cls(n_bins=n_bins)

    @classmethod
    def experiment(cls, n_bins: int = 1024) -> "ImperfectionModel":
        """Device parameters of the reported photon-counting receiver."""
        return cls(eta=0.72, xi=0.998, nu=0.03, r_max=50.0, dac_bits=8, n_bins=n_bins)

    @property
    def dt(self) -> float:
        return 1.0 / self.n_bins

    @property
    def is_ideal(self) -> bool:
        return (
            self.eta == 1
            and self.xi == 1
            and self.nu == 0
            and math.isinf(self.r_max)
            and self.dac_bits is None
        )

    def with_bins(self, n_bins: int) -> "ImperfectionModel":
        return replace(self, n_bins=n_bins)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "xi": self.xi,
            "nu": self.nu,
            "r_max": "inf" if math.isinf(self.r_max) else self.r_max,
            "dac_bits": "none" if self.dac_bits is None else int(self.dac_bits),
            "n_bins": int(self.n_bins),
        }


@dataclass(frozen=True)
class ProbabilityTriple:
    """Correct / error / inconclusive probabilities of one measurement."""

    p_c: float
    p_e: float
    p_i: float

    def __post_init__(self):
        for name in ("p_c", "p_e", "p_i"):
            value = getattr(self, name)
            if not -SIMPLEX_TOL <= value <= 1 + SIMPLEX_TOL:
                raise SimplexError(f"{name}={value!r} outside [0, 1]")
        total = self.p_c + self.p_e + self.p_i
        if abs(total - 1) > SIMPLEX_TOL:
            raise SimplexError(f"probabilities sum to {total!r}, not 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_c, self.p_e, self.p_i)


def _check_alpha_sq(alpha_sq):
    arr = np.asarray(alpha_sq, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValidationError("alpha_sq", f"must be >= 0, got {alpha_sq}")
    return arr


def _scalar_or_array(result, like):
    return float(result) if np.ndim(like) == 0 else result


def overlap_sq(alpha_sq):
    """Squared overlap ``|<-alpha|alpha>|^2 = exp(-4 |alpha|^2)``."""
    arr = _check_alpha_sq(alpha_sq)
    return _scalar_or_array(np.exp(-4.0 * arr), alpha_sq)


def helstrom_error(alpha_sq, p=0.5):
    """Minimum-error probability for ``{|alpha>, |-alpha>}`` with priors ``p, 1-p``."""
    arr = _check_alpha_sq(alpha_sq)
    p = _check_finite("p", p)
    if not 0 < p < 1:
        raise ValidationError("p", f"must satisfy 0 < p < 1, got {p}")
    disc = 1.0 - 4.0 * p * (1.0 - p) * np.exp(-4.0 * arr)
    result = 0.5 * (1.0 - np.sqrt(np.maximum(disc, 0.0)))
    return _scalar_or_array(result, alpha_sq)


def idp_bound(alpha_sq):
    """Minimum unambiguous-discrimination inconclusive probability (equal priors)."""
    arr = _check_alpha_sq(alpha_sq)
    return _scalar_or_array(np.exp(-2.0 * arr), alpha_sq)


def homodyne_error(alpha_sq):
    """Error of sign detection on a homodyne record (equal priors)."""
    from scipy.special import erf

    arr = _check_alpha_sq(alpha_sq)
    return _scalar_or_array(0.5 * (1.0 - erf(np.sqrt(2.0 * arr))), alpha_sq)


def optimal_inconclusive_error(alpha_sq: float, p_i: float) -> float:
    """Smallest error at a fixed inconclusive probability for equiprobable states.

    For overlap ``s = exp(-2 |alpha|^2)`` the optimum is
    ``(1 - P_I - sqrt((1 - P_I)^2 - (s - P_I)^2)) / 2`` when ``P_I <= s`` and
    zero beyond. It reduces to :func:`helstrom_error` at ``P_I = 0`` and hits
    zero at :func:`idp_bound`. Used as the reference frontier.
    """
    alpha_sq = float(_check_alpha_sq(alpha_sq))
    p_i = _check_finite("p_i", p_i)
    if not 0 <= p_i <= 1:
        raise ValidationError("p_i", f"must satisfy 0 <= p_i <= 1, got {p_i}")
    s = math.exp(-2.0 * alpha_sq)
    if p_i >= s:
        return 0.0
    rest = 1.0 - p_i
    return 0.5 * (rest - math.sqrt(max(rest * rest - (s - p_i) ** 2, 0.0)))
