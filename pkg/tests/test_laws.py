import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from switchkit import (
    FirstAttemptSpec,
    GeometricDivisibleSpec,
    law_from_dict,
    law_to_dict,
    make_common_divisor,
    make_exponential,
    make_first_attempt,
    make_first_attempt_pair,
    make_gamma,
    make_geometric_divisible,
    make_scaled_common_divisor,
    size_biased_split_sampler,
)
from switchkit.errors import ParameterError
from switchkit.laws import law_from_json, make_grid_law
from switchkit.laplace import GridFunction

S_GRID = np.logspace(-1, 1, 21)
sym_s = sp.symbols("s", positive=True)


def _sym_eval(expr, s_vals):
    f = sp.lambdify(sym_s, expr, "numpy")
    return np.asarray(f(s_vals), dtype=float)


def test_exponential_basics():
    law = make_exponential(1.0)
    assert law.psi(1.0) == pytest.approx(0.5, abs=1e-15)
    assert make_exponential(2.0).mean == 2.0
    assert law.cdf(1.0) == pytest.approx(1 - np.exp(-1), abs=1e-12)
    assert law.cdf(1.0) == pytest.approx(0.632121, abs=1e-6)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_exponential_rejects_bad_mean(bad):
    with pytest.raises(ParameterError):
        make_exponential(bad)


def test_gamma_transforms_match_closed_form():
    g22 = make_gamma(2, 2)
    g31 = make_gamma(3, 1)
    np.testing.assert_allclose(g22.psi(S_GRID), (1 + 2 * S_GRID) ** -2, rtol=1e-14)
    np.testing.assert_allclose(g31.psi(S_GRID), (1 + S_GRID) ** -3, rtol=1e-14)
    assert g22.mean == pytest.approx(4.0)
    assert g31.mean == pytest.approx(3.0)


def test_gamma_shape_one_is_exponential():
    np.testing.assert_allclose(make_gamma(1, 1).psi(S_GRID), make_exponential(1).psi(S_GRID), atol=1e-12)


def test_complement_is_accurate_near_zero():
    s = np.array([1e-12, 1e-9, 1e-6])
    for law in (make_exponential(2.0), make_gamma(3, 1.5)):
        np.testing.assert_allclose(law.complement(s), law.mean * s, rtol=1e-5)


def test_geometric_divisible_reduces_to_exponential():
    W = make_geometric_divisible(GeometricDivisibleSpec(make_exponential(0.5), 0.5))
    # symbolic oracle: p Psi_V / (1 - (1-p) Psi_V) with Psi_V = 1/(1 + s/2)
    pv = 1 / (1 + sym_s / 2)
    oracle = sp.simplify(sp.Rational(1, 2) * pv / (1 - sp.Rational(1, 2) * pv))
    assert sp.simplify(oracle - 1 / (1 + sym_s)) == 0
    np.testing.assert_allclose(W.psi(S_GRID), _sym_eval(oracle, S_GRID), rtol=1e-13)
    assert W.mean == pytest.approx(1.0)


def test_geometric_divisible_boundary_and_wald():
    with pytest.raises(ParameterError):
        GeometricDivisibleSpec(make_exponential(1.0), 1.0)
    with pytest.raises(ParameterError):
        GeometricDivisibleSpec(make_exponential(1.0), 0.0)
    W = make_geometric_divisible(GeometricDivisibleSpec(make_exponential(1.0), 1 / 3))
    assert W.mean == pytest.approx(3.0)


def test_first_attempt_symbolic_oracle():
    X = make_exponential(1.0)
    law = make_first_attempt(FirstAttemptSpec(X, X, 0.5))
    px = 1 / (1 + sym_s)
    oracle = sp.simplify(sp.Rational(1, 2) * px / (1 - sp.Rational(1, 2) * px))
    assert sp.simplify(oracle - 1 / (1 + 2 * sym_s)) == 0
    np.testing.assert_allclose(law.psi(S_GRID), _sym_eval(oracle, S_GRID), rtol=1e-13)
    assert law.psi(0.0) == pytest.approx(1.0)


@given(st.floats(0.05, 0.95))
def test_first_attempt_normalised(alpha):
    law = make_first_attempt(FirstAttemptSpec(make_exponential(1.0), make_gamma(2, 0.5), alpha))
    assert law.psi(0.0) == pytest.approx(1.0, abs=1e-14)
    assert law.mean == pytest.approx(1.0 + (1 / alpha - 1) * 1.0)


def test_first_attempt_sample_mean():
    X = make_exponential(1.0)
    law = make_first_attempt(FirstAttemptSpec(X, X, 0.5))
    x = law.sample(np.random.default_rng(3), 100_000)
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean() - 2.0) < 4 * se


def test_first_attempt_sample_distribution():
    X = make_exponential(1.0)
    law = make_first_attempt(FirstAttemptSpec(X, X, 0.5))
    x = law.sample(np.random.default_rng(4), 20_000)
    assert stats.kstest(x, "expon", args=(0, 2.0)).pvalue > 0.01


def test_first_attempt_pair_means():
    plus, minus = make_first_attempt_pair(make_exponential(1.0), make_exponential(1.0), 1 / 3)
    assert plus.mean == pytest.approx(3.0)
    assert minus.mean == pytest.approx(1.5)


def test_scaled_common_degenerate_matches_first_attempt():
    V = make_exponential(1.0)
    plus, minus = make_scaled_common_divisor(1, 1, 0.5, V)
    ref = make_first_attempt(FirstAttemptSpec(V, V, 0.5))
    np.testing.assert_allclose(plus.psi(S_GRID), ref.psi(S_GRID), rtol=1e-14)
    np.testing.assert_allclose(minus.psi(S_GRID), ref.psi(S_GRID), rtol=1e-14)


@pytest.mark.parametrize("a,b,alpha,mu_plus,mu_minus", [(1, 2, 0.5, 3, 3), (2, 1, 1 / 3, 5, None)])
def test_scaled_common_means(a, b, alpha, mu_plus, mu_minus):
    plus, minus = make_scaled_common_divisor(a, b, alpha, make_exponential(1.0))
    assert plus.mean == pytest.approx(mu_plus)
    beta = 1 - alpha
    assert minus.mean == pytest.approx(a + b * (1 / beta - 1))
    if mu_minus is not None:
        assert minus.mean == pytest.approx(mu_minus)


def test_common_divisor_is_scaled_with_unit_factors():
    V = make_gamma(2, 0.5)
    p1, m1 = make_common_divisor(0.3, V)
    p2, m2 = make_scaled_common_divisor(1, 1, 0.3, V)
    np.testing.assert_allclose(p1.psi(S_GRID), p2.psi(S_GRID), rtol=1e-14)
    np.testing.assert_allclose(m1.psi(S_GRID), m2.psi(S_GRID), rtol=1e-14)


def test_size_biased_split_exponential_marginal():
    law = make_exponential(1.5)
    A, B = size_biased_split_sampler(law, np.random.default_rng(5), 100_000)
    assert stats.kstest(A, "expon", args=(0, 1.5)).pvalue > 0.01
    tot = A + B
    se = tot.std(ddof=1) / np.sqrt(tot.size)
    # E[A + B] = E[L^2] / mu = 2 mu for the exponential
    assert abs(tot.mean() - 3.0) < 4 * se
    d = A - B
    assert abs(d.mean()) < 4 * d.std(ddof=1) / np.sqrt(d.size)


def test_size_biased_split_gamma_total_mean():
    law = make_gamma(3, 1)
    A, B = size_biased_split_sampler(law, np.random.default_rng(6), 100_000)
    tot = A + B
    # E[L^2] / mu = k(k+1) theta^2 / (k theta) = 4
    assert abs(tot.mean() - 4.0) < 4 * tot.std(ddof=1) / np.sqrt(tot.size)


@pytest.mark.parametrize(
    "law",
    [
        make_exponential(2.0),
        make_gamma(2, 2),
        make_first_attempt(FirstAttemptSpec(make_exponential(1), make_gamma(3, 1), 0.25)),
        make_scaled_common_divisor(1, 2, 0.4, make_gamma(2, 1))[1],
    ],
)
def test_descriptor_round_trip(law):
    d = law_to_dict(law)
    back = law_from_dict(json.loads(json.dumps(d)))
    np.testing.assert_allclose(back.psi(S_GRID), law.psi(S_GRID), rtol=1e-14)
    assert law_from_json(law.to_json()).mean == pytest.approx(law.mean)


def test_descriptor_errors_name_the_field():
    with pytest.raises(ParameterError, match="mean"):
        law_from_dict({"kind": "exponential"})
    with pytest.raises(ParameterError, match="kind"):
        law_from_dict({"kind": "weibull", "shape": 1})


def test_grid_law_normalises_and_samples():
    t = np.linspace(0, 30, 3001)
    law = make_grid_law(GridFunction(t, 2.0 * np.exp(-t), 0.0))
    assert law.mean == pytest.approx(1.0, rel=1e-3)
    x = law.sample(np.random.default_rng(8), 20_000)
    assert stats.kstest(x, "expon").pvalue > 0.01


@settings(max_examples=30)
@given(st.floats(0.2, 5.0), st.floats(0.01, 50.0))
def test_exponential_psi_matches_quadrature(mean, s):
    from scipy.integrate import quad

    law = make_exponential(mean)
    ref, _ = quad(lambda x: np.exp(-s * x) * np.exp(-x / mean) / mean, 0, np.inf)
    assert law.psi(s) == pytest.approx(ref, rel=1e-8)
