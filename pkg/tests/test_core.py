import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from optinc.core import (
    ImperfectionModel,
    ProbabilityTriple,
    SimplexError,
    StrategySpec,
    ValidationError,
    helstrom_error,
    homodyne_error,
    idp_bound,
    optimal_inconclusive_error,
    overlap_sq,
)


def _coherent(alpha: complex, dim: int = 60) -> np.ndarray:
    n = np.arange(dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * log_fact) * alpha ** n
    return amp.astype(complex)


def _helstrom_density_matrix(alpha_sq: float, p: float) -> float:
    # 0.5 (1 - trace norm of p rho+ - (1-p) rho-) in a truncated Fock basis
    a = math.sqrt(alpha_sq)
    plus, minus = _coherent(a), _coherent(-a)
    gamma = p * np.outer(plus, plus.conj()) - (1 - p) * np.outer(minus, minus.conj())
    return 0.5 * (1.0 - np.abs(np.linalg.eigvalsh(gamma)).sum())


def test_helstrom_matches_density_matrix_for_random_pairs(rng):
    for _ in range(20):
        alpha_sq = rng.uniform(0.01, 2.0)
        p = rng.uniform(0.05, 0.95)
        assert helstrom_error(alpha_sq, p) == pytest.approx(_helstrom_density_matrix(alpha_sq, p), abs=1e-12)


def test_reference_values_at_alpha_sq_0_2():
    assert helstrom_error(0.2) == pytest.approx(0.128964, abs=1e-6)
    assert idp_bound(0.2) == pytest.approx(0.670320, abs=1e-6)
    assert overlap_sq(0.2) == pytest.approx(math.exp(-0.8))


def test_vacuum_limits():
    assert helstrom_error(0.0) == 0.5
    assert idp_bound(0.0) == 1.0
    assert homodyne_error(0.0) == 0.5
    assert helstrom_error(0.0, 0.7) == pytest.approx(0.3)


def test_homodyne_matches_quadrature():
    for alpha_sq in (0.1, 0.2, 0.6, 1.5):
        a = math.sqrt(alpha_sq)
        # x = (a + a^dagger) / sqrt(2) on |alpha>: mean sqrt(2)|alpha|, variance 1/2
        density = lambda x: math.exp(-((x - math.sqrt(2) * a) ** 2)) / math.sqrt(math.pi)
        numeric, _ = quad(density, -np.inf, 0.0, epsabs=1e-14)
        assert homodyne_error(alpha_sq) == pytest.approx(numeric, abs=1e-12)


def test_vectorized_bounds_keep_shape():
    e = np.array([0.1, 0.2, 0.4])
    assert helstrom_error(e).shape == (3,)
    assert isinstance(helstrom_error(0.3), float)
    np.testing.assert_allclose(idp_bound(e), np.exp(-2 * e))


@pytest.mark.parametrize("bad", [-0.1, math.nan])
def test_negative_energy_rejected(bad):
    with pytest.raises(ValidationError) as info:
        helstrom_error(bad)
    assert info.value.field == "alpha_sq"


def test_prior_outside_open_interval_rejected():
    for p in (0.0, 1.0, 1.5):
        with pytest.raises(ValidationError):
            helstrom_error(0.2, p)


def test_optimal_inconclusive_error_endpoints():
    for e in (0.2, 0.4, 0.6):
        assert optimal_inconclusive_error(e, 0.0) == pytest.approx(helstrom_error(e), abs=1e-15)
        assert optimal_inconclusive_error(e, idp_bound(e)) == 0.0
        assert optimal_inconclusive_error(e, 0.99) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.0, 1.0))
def test_optimal_inconclusive_error_below_helstrom(alpha_sq, p_i):
    value = optimal_inconclusive_error(alpha_sq, p_i)
    assert 0.0 <= value <= helstrom_error(alpha_sq) + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_helstrom_decreases_with_energy(a, b):
    lo, hi = sorted((a, b))
    assert helstrom_error(hi) <= helstrom_error(lo) + 1e-15
    assert 0.0 <= helstrom_error(hi) <= 0.5


def test_helstrom_below_homodyne():
    e = np.linspace(0.01, 2, 50)
    assert np.all(helstrom_error(e) < homodyne_error(e))


class TestStrategySpec:
    def test_n0_from_v(self):
        assert StrategySpec(0.2, 0.5, 0.1, 0.8, 0.7).n0 == 0
        assert StrategySpec(0.2, 0.5, 0.1, 0.8, 0.5).n0 == 1
        assert StrategySpec(0.2, 0.5, 0.1, 0.8, 0.2).n0 == 1

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(alpha_sq=0.0), "alpha_sq"),
            (dict(alpha_sq=math.inf), "alpha_sq"),
            (dict(p=0.4), "p"),
            (dict(p=1.0), "p"),
            (dict(target_pi=1.0), "target_pi"),
            (dict(target_pi=-0.1), "target_pi"),
            (dict(t1=0.0), "t1"),
            (dict(t1=1.2), "t1"),
            (dict(target_pi=0.0, t1=0.5), "t1"),
            (dict(v=0.0), "v"),
            (dict(v=1.0), "v"),
            (dict(v=math.nan), "v"),
        ],
    )
    def test_invalid_fields(self, kwargs, field):
        base = dict(alpha_sq=0.2, p=0.5, target_pi=0.1, t1=0.5, v=0.6)
        base.update(kwargs)
        with pytest.raises(ValidationError) as info:
            StrategySpec(**base)
        assert info.value.field == field

    def test_unsolved_strategy_allows_missing_target(self):
        spec = StrategySpec(0.2, 0.5, None, 0.3, 0.4)
        assert spec.to_dict()["target_pi"] is None

    def test_frozen(self):
        spec = StrategySpec(0.2, 0.5, 0.0, 1.0, 0.6)
        with pytest.raises(Exception):
            spec.t1 = 0.5


class TestImperfectionModel:
    def test_presets(self):
        assert ImperfectionModel.ideal().is_ideal
        exp = ImperfectionModel.experiment()
        assert (exp.eta, exp.xi, exp.nu, exp.r_max, exp.dac_bits) == (0.72, 0.998, 0.03, 50.0, 8)
        assert not exp.is_ideal
        assert exp.dt == 1 / 1024

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(eta=1.1), "eta"),
            (dict(eta=-0.1), "eta"),
            (dict(xi=0.0), "xi"),
            (dict(nu=-1.0), "nu"),
            (dict(nu=math.inf), "nu"),
            (dict(r_max=0.0), "r_max"),
            (dict(dac_bits=0), "dac_bits"),
            (dict(dac_bits=2.5), "dac_bits"),
            (dict(n_bins=0), "n_bins"),
            (dict(n_bins=True), "n_bins"),
        ],
    )
    def test_invalid_fields(self, kwargs, field):
        with pytest.raises(ValidationError) as info:
            ImperfectionModel(**kwargs)
        assert info.value.field == field

    def test_to_dict_is_json_friendly(self):
        import json

        json.dumps(ImperfectionModel.ideal().to_dict())


class TestProbabilityTriple:
    def test_valid(self):
        assert ProbabilityTriple(0.5, 0.25, 0.25).as_tuple() == (0.5, 0.25, 0.25)

    def test_tolerance(self):
        ProbabilityTriple(0.5, 0.5, -5e-10)
        with pytest.raises(SimplexError):
            ProbabilityTriple(0.5, 0.5, -1e-8)
        with pytest.raises(SimplexError):
            ProbabilityTriple(0.5, 0.4, 0.2)
