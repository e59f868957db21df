import itertools
import math

import numpy as np
import pytest

from optinc.core import SolverError, ValidationError
from optinc.mpsk import (
    MpskConfig,
    coherent_overlap,
    elimination_histories,
    heterodyne_baseline,
    heterodyne_binary_reference,
    hybrid,
    hybrid_tpsk,
    min_inconclusive_prob,
    reduced_pair_energy,
    scaling_study,
    vacuum_likelihood,
)


def brute_force_floor(m, alpha_sq, f):
    """Inconclusive mass from every full-length click pattern.

    Inconclusive histories never stop early, so each is one pattern.
    """
    th = 2 * np.pi * np.arange(m) / m
    e = f * alpha_sq / m
    total = 0.0
    for j in range(m):
        for pattern in itertools.product((0, 1), repeat=m):
            clicks, prob = 0, 1.0
            for t, c in enumerate(pattern):
                if clicks == m - 2:
                    break
                vac = math.exp(-2 * e * (1 - math.cos(th[j] - th[t])))
                prob *= vac if c == 0 else 1 - vac
                clicks += c
            if clicks < m - 2:
                total += prob / m
    return total


def test_vacuum_likelihood_examples():
    assert vacuum_likelihood(0.0, 0.0, 0.3) == 1.0
    assert vacuum_likelihood(0.0, 1.0, 0.0) == 1.0
    assert vacuum_likelihood(0.0, 2 * np.pi / 3, (2 / 3) * 0.2 / 3) == pytest.approx(0.8752, abs=1e-4)
    with pytest.raises(ValidationError):
        vacuum_likelihood(0.0, 1.0, -0.1)


@pytest.mark.parametrize("alpha_sq,expected", [(0.2, 0.766), (0.4, 0.587), (0.6, 0.449)])
def test_tpsk_floor(alpha_sq, expected):
    assert min_inconclusive_prob(3, alpha_sq, 2 / 3) == pytest.approx(expected, abs=1e-3)


def test_tpsk_floor_is_product_of_two_vacuum_factors():
    factor = vacuum_likelihood(0.0, 2 * np.pi / 3, (2 / 3) * 0.2 / 3)
    assert min_inconclusive_prob(3, 0.2, 2 / 3) == pytest.approx(factor**2, rel=1e-12)


def test_vacuum_input_never_eliminates():
    assert min_inconclusive_prob(3, 0.0, 2 / 3) == 1.0


@pytest.mark.parametrize("m", [3, 4, 5, 6])
@pytest.mark.parametrize("alpha_sq", [0.3, 1.5])
def test_floor_matches_brute_force(m, alpha_sq):
    f = (m - 1) / m
    got = min_inconclusive_prob(m, alpha_sq, f)
    assert got == pytest.approx(brute_force_floor(m, alpha_sq, f), abs=1e-12)


@pytest.mark.parametrize("m", [3, 5, 8])
def test_histories_are_complete(m):
    hs = elimination_histories(m, 0.8, (m - 1) / m)
    assert sum(h.probability for h in hs) == pytest.approx(1.0, abs=1e-12)
    floor = sum(h.probability for h in hs if not h.conclusive)
    assert floor == pytest.approx(min_inconclusive_prob(m, 0.8, (m - 1) / m), abs=1e-12)


def test_forbidden_histories_have_zero_probability():
    for h in elimination_histories(4, 1.0, 0.75):
        for t, c in enumerate(h.clicks):
            if c:
                # a click while testing state t rules out t exactly
                assert h.likelihood[t] == 0.0
                assert t not in h.survivors


@pytest.mark.parametrize("m", [3, 4, 7])
def test_pair_reduction_preserves_overlap(m):
    alpha = math.sqrt(0.7)
    for k in range(1, m):
        dtheta = 2 * np.pi * k / m
        a, b = alpha, alpha * complex(math.cos(dtheta), math.sin(dtheta))
        beta = math.sqrt(reduced_pair_energy(0.7, dtheta))
        assert coherent_overlap(beta, -beta) == pytest.approx(coherent_overlap(a, b), abs=1e-12)


def test_hybrid_without_budget_has_floor_only():
    cfg = MpskConfig(3, 0.4, 2 / 3)
    r = hybrid_tpsk(cfg)
    assert r.p_i_stage1 == pytest.approx(min_inconclusive_prob(3, 0.4, 2 / 3))
    assert r.p_i_stage2 == 0.0
    assert r.p_i_total == r.p_i_stage1 + r.p_i_stage2
    assert 0 < r.conditional_error < 0.5


@pytest.mark.parametrize("priors", ["posterior", "equal"])
def test_hybrid_error_decreases_with_budget(priors):
    floor = min_inconclusive_prob(3, 0.4, 0.66)
    budgets = np.linspace(0, 0.9 * (1 - floor), 6)
    results = [hybrid_tpsk(MpskConfig(3, 0.4, 0.66, float(b), priors, n_bins=512)) for b in budgets]
    errors = [r.conditional_error for r in results]
    assert np.all(np.diff(errors) <= 1e-9)
    for b, r in zip(budgets, results):
        assert r.p_i_stage2 == pytest.approx(b, abs=1e-5)


def test_hybrid_budget_limit():
    floor = min_inconclusive_prob(3, 0.4, 0.66)
    with pytest.raises(SolverError):
        hybrid(MpskConfig(3, 0.4, 0.66, 1 - floor + 1e-3))


def test_smaller_fraction_gives_smaller_error():
    # at a common total inconclusive probability the f = 0.66 receiver makes fewer errors
    total = 0.85
    errs = {}
    for f in (0.66, 0.90):
        floor = min_inconclusive_prob(3, 0.4, f)
        errs[f] = hybrid_tpsk(MpskConfig(3, 0.4, f, total - floor, n_bins=512)).conditional_error
    assert errs[0.66] < errs[0.90]


@pytest.mark.parametrize("target", [0.0, 0.2, 0.6])
@pytest.mark.parametrize("alpha_sq", [0.2, 1.0])
def test_heterodyne_binary_closed_form(alpha_sq, target):
    grid = heterodyne_baseline(2, alpha_sq, target)
    assert grid == pytest.approx(heterodyne_binary_reference(alpha_sq, target), rel=5e-5, abs=1e-9)


def test_heterodyne_binary_closed_form_at_zero():
    # no inconclusive outcomes: a sign decision on one quadrature
    assert heterodyne_binary_reference(0.5, 0.0) == pytest.approx(0.5 * math.erfc(math.sqrt(0.5)))


def test_heterodyne_vacuum_is_uniform_guess():
    assert heterodyne_baseline(3, 0.0, 0.0) == pytest.approx(2 / 3, abs=1e-9)


def test_heterodyne_grid_matches_sampling():
    for target in (0.0, 0.4):
        grid = heterodyne_baseline(3, 0.6, target)
        mc = heterodyne_baseline(3, 0.6, target, method="mc", n_samples=400_000, seed=3)
        assert mc == pytest.approx(grid, abs=4e-3)


def test_heterodyne_error_vanishes_towards_full_discard():
    values = [heterodyne_baseline(3, 0.6, t) for t in (0.0, 0.5, 0.9, 0.999)]
    assert np.all(np.diff(values) < 0)
    assert values[-1] < 0.01 and values[-1] > 0


@pytest.mark.parametrize("per_bit", [0.2, 0.5, 1.0])
def test_scaling_is_quadratic_in_m(per_bit):
    out = scaling_study(range(3, 9), per_bit)
    ms = np.array([m for m, _ in out], dtype=float)
    y = np.array([v for _, v in out])
    assert np.all(np.diff(y) < 0)
    r = np.corrcoef(ms**2, y)[0, 1]
    assert r * r > 0.98


def test_scaling_m3_matches_floor():
    (m, value), = scaling_study([3], 0.4)
    expected = 1 - min_inconclusive_prob(3, 0.4 * math.log2(3), 2 / 3)
    assert value == pytest.approx(math.log10(expected), abs=1e-12)


@pytest.mark.parametrize("kwargs,field", [
    ({"m": 2}, "m"),
    ({"m": 21}, "m"),
    ({"f": 0.0}, "f"),
    ({"f": 1.2}, "f"),
    ({"alpha_sq": -1.0}, "alpha_sq"),
    ({"target_pi2": 1.0}, "target_pi2"),
    ({"priors": "flat"}, "priors"),
])
def test_config_validation(kwargs, field):
    args = {"m": 3, "alpha_sq": 0.4, "f": 0.66, **kwargs}
    with pytest.raises(ValidationError) as exc:
        MpskConfig(**args)
    assert exc.value.field == field


def test_enumeration_limit_and_tpsk_size():
    with pytest.raises(ValidationError):
        min_inconclusive_prob(21, 1.0, 0.5)
    with pytest.raises(ValidationError):
        hybrid_tpsk(MpskConfig(4, 0.4, 0.75))
    with pytest.raises(ValidationError):
        heterodyne_baseline(3, 0.4, 1.0)
    with pytest.raises(ValidationError):
        heterodyne_baseline(3, 0.4, 0.1, method="exact")
