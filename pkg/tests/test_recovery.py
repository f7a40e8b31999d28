import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchkit import (
    GridFunction,
    ProcessSpec,
    TransformFn,
    build_characteristics,
    curve,
    cycle_representation_check,
    estimate_E,
    extract_divisors,
    invert_expected_values,
    make_exponential,
    make_first_attempt_pair,
    make_gamma,
    rebuild_switching_laws,
    recover_from_transforms,
    smooth_derivative,
    validate_pair,
)
from switchkit.errors import MonotonicityError, ParameterError, SingularityError, TailError
from switchkit.recovery import RecoveredPair

S = np.logspace(-1, 1, 21)
TALBOT = dict(method="talbot", talbot_terms=32)
EXP21 = ProcessSpec(make_exponential(2), make_exponential(1))
EXP11 = ProcessSpec(make_exponential(1), make_exponential(1))
GAMMA = ProcessSpec(make_gamma(2, 2), make_gamma(3, 1))
FA = ProcessSpec(*make_first_attempt_pair(make_exponential(1), make_gamma(2, 0.5), 0.3))


def exact_curves(spec, t_max=40.0, n=4001):
    cs = build_characteristics(spec)
    t = np.linspace(0, t_max, n)
    out = []
    for name, tail in (("E_plus", cs.gamma), ("E_minus", cs.gamma), ("dE_plus", 0.0), ("dE_minus", 0.0)):
        v = np.empty(n)
        v[1:] = curve(cs, name, t[1:], **TALBOT)
        v[0] = curve(cs, name, 0.0) if name.startswith("E") else curve(cs, name, 1e-9, **TALBOT)
        out.append(GridFunction(t, v, tail))
    return out


@pytest.mark.parametrize("spec", [EXP21, EXP11, GAMMA, FA])
def test_analytic_inversion_round_trip(spec):
    cs = build_characteristics(spec)
    pp, pm = invert_expected_values(cs.LE_plus, cs.LE_minus)
    np.testing.assert_allclose(pp(S), spec.plus.psi(S), atol=1e-10)
    np.testing.assert_allclose(pm(S), spec.minus.psi(S), atol=1e-10)


def test_exponential_example():
    cs = build_characteristics(EXP21)
    pp, _ = invert_expected_values(cs.LE_plus, cs.LE_minus)
    np.testing.assert_allclose(pp(S), 1 / (1 + 2 * S), atol=1e-10)


def test_symmetric_closed_form():
    LEp = TransformFn(lambda s: 1 / (s + 2), analytic=True)
    LEm = TransformFn(lambda s: -1 / (s + 2), analytic=True)
    pp, pm = invert_expected_values(LEp, LEm)
    np.testing.assert_allclose(pp(S), 1 / (1 + S), rtol=1e-14)
    np.testing.assert_allclose(pm(S), 1 / (1 + S), rtol=1e-14)


def test_recovered_transforms_normalised():
    cs = build_characteristics(GAMMA)
    pp, pm = invert_expected_values(cs.LE_plus, cs.LE_minus)
    assert pp(1e-4) == pytest.approx(1.0, abs=1e-3)
    assert pm(1e-4) == pytest.approx(1.0, abs=1e-3)


def test_singular_denominator():
    LE = TransformFn(lambda s: 1 / s, analytic=True)
    pp, _ = invert_expected_values(LE, LE)
    with pytest.raises(SingularityError):
        pp(1.0)


def test_recovered_range_follows_inputs():
    LEp = TransformFn(lambda s: 1 / (s + 2), s_min=0.5, analytic=True)
    LEm = TransformFn(lambda s: -1 / (s + 2), analytic=True)
    pp, _ = invert_expected_values(LEp, LEm)
    assert pp.s_min == 0.5


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 5.0), st.floats(0.3, 5.0), st.floats(0.5, 3.0))
def test_round_trip_property(mp, mm, shape):
    spec = ProcessSpec(make_gamma(shape, mp / shape), make_exponential(mm))
    cs = build_characteristics(spec)
    pair = recover_from_transforms(cs.LE_plus, cs.LE_minus)
    assert pair.gamma == pytest.approx(spec.gamma, abs=1e-6)
    np.testing.assert_allclose(pair.psi_plus(S), spec.plus.psi(S), atol=1e-10)
    np.testing.assert_allclose(pair.psi_minus(S), spec.minus.psi(S), atol=1e-10)


@pytest.mark.parametrize("spec", [EXP21, EXP11, FA, GAMMA])
def test_cycle_representation_analytic(spec):
    cs = build_characteristics(spec)
    pair = recover_from_transforms(cs.LE_plus, cs.LE_minus, gamma=cs.gamma)
    assert cycle_representation_check(pair, spec)["max_rel"] < 1e-10


def test_validate_exponential_exact_curves():
    Ep, Em, _, _ = exact_curves(EXP21)
    rep = validate_pair(Ep, Em)
    assert rep["limits_ok"] and rep["monotone"]
    assert rep["verdict"] == "valid-consistent", rep
    assert rep["gamma"] == pytest.approx(1 / 3, abs=1e-8)


def test_validate_limit_mismatch():
    t = np.linspace(0, 30, 601)
    Ep = GridFunction(t, 0.5 + 0.5 * np.exp(-t), 0.5)
    Em = GridFunction(t, 0.3 - 1.3 * np.exp(-t), 0.3)
    rep = validate_pair(Ep, Em)
    assert rep["verdict"] == "invalid"
    assert not rep["limits_ok"]
    assert any("tails differ" in r for r in rep["reasons"])


def test_validate_gamma_curves_not_monotone():
    Ep, Em, _, _ = exact_curves(GAMMA, t_max=60.0, n=6001)
    rep = validate_pair(Ep, Em)
    assert rep["limits_ok"]
    assert not rep["monotone"]
    verdicts = [r["verdict"] for r in rep["divisor_probe"].values()]
    assert "violated" in verdicts


def test_extract_exponential_divisor():
    curves = exact_curves(EXP21)
    pair = extract_divisors(*curves)
    assert pair.alpha == pytest.approx(1 / 3, abs=1e-8)
    assert pair.beta == pytest.approx(2 / 3, abs=1e-8)
    t = curves[0].grid
    # renormalising by the trapezoid mass costs (1.5 h)^2 / 12 relative
    np.testing.assert_allclose(pair.f_X.values, 1.5 * np.exp(-1.5 * t), rtol=1e-4, atol=1e-10)


def test_extract_symmetric():
    pair = extract_divisors(*exact_curves(EXP11))
    assert pair.alpha == pytest.approx(0.5, abs=1e-8)
    np.testing.assert_allclose(pair.f_X.values, pair.f_Y.values, atol=1e-8)


def test_extract_gamma_raises_monotonicity():
    with pytest.raises(MonotonicityError):
        extract_divisors(*exact_curves(GAMMA, t_max=60.0, n=6001))


def test_extract_short_grid_raises_tail():
    Ep, Em, dp, dm = exact_curves(EXP21, t_max=2.0, n=201)
    with pytest.raises(TailError):
        extract_divisors(Ep, Em, dp, dm)


def test_rebuild_analytic_round_trip():
    cs = build_characteristics(EXP21)
    pair = recover_from_transforms(cs.LE_plus, cs.LE_minus, gamma=cs.gamma)
    plus, minus = rebuild_switching_laws(pair)
    np.testing.assert_allclose(plus.psi(S), 1 / (1 + 2 * S), atol=1e-8)
    np.testing.assert_allclose(minus.psi(S), 1 / (1 + S), atol=1e-8)
    assert plus.mean == pytest.approx(2.0, rel=0.02)
    assert minus.mean == pytest.approx(1.0, rel=0.02)


def test_rebuild_rejects_alpha_boundary():
    cs = build_characteristics(EXP21)
    pair = recover_from_transforms(cs.LE_plus, cs.LE_minus)
    bad = RecoveredPair(**{**pair.__dict__, "alpha": 1.0, "beta": 0.0})
    with pytest.raises(ParameterError):
        rebuild_switching_laws(bad)


@pytest.fixture(scope="module")
def mc_pair():
    t = np.linspace(0, 25, 501)
    rng = np.random.default_rng(2024)
    Ep = estimate_E(EXP21, 1, t, 1_000_000, rng, threads=4)
    Em = estimate_E(EXP21, -1, t, 1_000_000, rng, threads=4)
    return extract_divisors(Ep.to_grid_function(), Em.to_grid_function(), smooth_derivative(Ep), smooth_derivative(Em))


@pytest.mark.slow
def test_rebuild_monte_carlo_round_trip(mc_pair):
    plus, minus = rebuild_switching_laws(mc_pair)
    assert np.max(np.abs(plus.psi(S) - 1 / (1 + 2 * S))) < 2e-2
    assert np.max(np.abs(minus.psi(S) - 1 / (1 + S))) < 2e-2


@pytest.mark.slow
def test_rebuild_monte_carlo_means(mc_pair):
    plus, minus = rebuild_switching_laws(mc_pair)
    assert plus.mean == pytest.approx(2.0, rel=0.02)
    assert minus.mean == pytest.approx(1.0, rel=0.02)


@pytest.mark.slow
def test_cycle_representation_monte_carlo(mc_pair):
    assert cycle_representation_check(mc_pair, EXP21)["max_rel"] < 5e-2
