"""Worked examples and the end-to-end simulate/estimate/recover round trip."""

from __future__ import annotations

import numpy as np

from .characteristics import build_characteristics, curve
from .errors import SwitchkitError
from .estimators import estimate_E, smooth_derivative
from .laws import SwitchingLaw, make_common_divisor, make_exponential, make_gamma, make_scaled_common_divisor
from .process import ProcessSpec
from .recovery import extract_divisors, rebuild_switching_laws

TALBOT = dict(method="talbot", talbot_terms=32)


def _curves(cs, t, names):
    return {n: curve(cs, n, t, **TALBOT) for n in names}


def common_divisor_example(alpha: float = 1 / 3, divisor: SwitchingLaw = None, t_grid=None, min_abs: float = 0.05) -> dict:
    """Geometric sums of one divisor with success probabilities ``alpha`` and ``1 - alpha``.

    Reports three deviations from proportionality with factor ``-alpha/beta``:
    of the curves themselves (``E_+ / E_-``, on points with ``|E_-| >= min_abs``),
    of their derivatives and of the curves centred at ``gamma``.
    """
    divisor = make_exponential(1.0) if divisor is None else divisor
    t = np.linspace(0.05, 10.0, 200) if t_grid is None else np.asarray(t_grid, dtype=float)
    plus, minus = make_common_divisor(alpha, divisor)
    cs = build_characteristics(ProcessSpec(plus, minus))
    c = _curves(cs, t, ("E_plus", "E_minus", "dE_plus", "dE_minus"))
    k = alpha / (1.0 - alpha)
    ok = np.abs(c["E_minus"]) >= min_abs
    ratio_dev = float(np.max(np.abs(c["E_plus"][ok] / c["E_minus"][ok] + k))) if ok.any() else float("nan")
    report = {
        "alpha": alpha,
        "beta": 1.0 - alpha,
        "gamma": cs.gamma,
        "ratio_target": -k,
        "max_abs_E_ratio_dev": ratio_dev,
        "max_abs_dE_proportionality_dev": float(np.max(np.abs(c["dE_plus"] + k * c["dE_minus"]))),
        "max_abs_centred_proportionality_dev": float(
            np.max(np.abs((c["E_plus"] - cs.gamma) + k * (c["E_minus"] - cs.gamma)))
        ),
    }
    report["E_ratio_claim_holds"] = bool(ratio_dev < 1e-4)
    return {"report": report, "table": {"t": t, **c}}


def scaled_common_example(a: float = 1.0, b: float = 2.0, alpha: float = 0.5, divisor: SwitchingLaw = None, t_grid=None) -> dict:
    """Scaled common-divisor family; compares inverted ``E'_pm`` with the closed forms

    ``E'_+(t) = -2 (a + b(1/beta - 1)) / (a/alpha + b/beta) f(t/b)/b`` and
    ``E'_-(t) = 2 (b + a(1/alpha - 1)) / (a/alpha + b/beta) f(t/a)/a``.
    """
    divisor = make_exponential(1.0) if divisor is None else divisor
    t = np.linspace(0.05, 10.0, 200) if t_grid is None else np.asarray(t_grid, dtype=float)
    beta = 1.0 - alpha
    plus, minus = make_scaled_common_divisor(a, b, alpha, divisor)
    cs = build_characteristics(ProcessSpec(plus, minus))
    c = _curves(cs, t, ("E_plus", "E_minus", "dE_plus", "dE_minus"))
    den = a / alpha + b / beta
    closed_p = -2.0 * (a + b * (1 / beta - 1)) / den * divisor.pdf(t / b) / b
    closed_m = 2.0 * (b + a * (1 / alpha - 1)) / den * divisor.pdf(t / a) / a
    report = {
        "a": a,
        "b": b,
        "alpha": alpha,
        "mu_plus": plus.mean,
        "mu_minus": minus.mean,
        "process_alpha": cs.alpha,
        "max_abs_dE_plus_dev": float(np.max(np.abs(c["dE_plus"] - closed_p))),
        "max_abs_dE_minus_dev": float(np.max(np.abs(c["dE_minus"] - closed_m))),
    }
    return {"report": report, "table": {"t": t, **c, "dE_plus_closed": closed_p, "dE_minus_closed": closed_m}}


def _sign_changes(x, floor: float = 1e-12) -> int:
    s = np.sign(x[np.abs(x) > floor])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def gamma_nonmonotone_example(t_grid=None) -> dict:
    """Gamma switching times (shape 2, scale 2) and (shape 3, scale 1).

    Inverts the transforms of ``E'_pm`` on ``(0, 20]`` and counts sign
    changes; also checks ``L(E'_+)`` against the expanded rational form
    ``-2 (3 + 3s + s^2) / (7 + 19s + 25s^2 + 16s^3 + 4s^4)``.
    """
    t = np.linspace(0.05, 20.0, 400) if t_grid is None else np.asarray(t_grid, dtype=float)
    cs = build_characteristics(ProcessSpec(make_gamma(2, 2), make_gamma(3, 1)))
    c = _curves(cs, t, ("E_plus", "E_minus", "dE_plus", "dE_minus"))
    s = np.array([0.5, 1.0, 2.0])
    quartic = 7 + 19 * s + 25 * s**2 + 16 * s**3 + 4 * s**4
    resid = cs.LEd_plus(s) * s * quartic - (-2 * s * (3 + 3 * s + s**2))
    report = {
        "sign_changes_dE_plus": _sign_changes(c["dE_plus"]),
        "sign_changes_dE_minus": _sign_changes(c["dE_minus"]),
        "max_dE_plus": float(c["dE_plus"].max()),
        "min_dE_minus": float(c["dE_minus"].min()),
        "rational_form_residual": float(np.max(np.abs(resid))),
        "LEd_plus_at_1": float(cs.LEd_plus(1.0)),
    }
    report["monotone"] = report["max_dE_plus"] <= 0 and report["min_dE_minus"] >= 0
    return {"report": report, "table": {"t": t, **c}}


def _staged(stage: str, fn, *args, note: str = "", **kw):
    try:
        return fn(*args, **kw)
    except SwitchkitError as e:
        raise type(e)(f"[{stage}] {e}{note}") from e


def round_trip(
    spec: ProcessSpec,
    n_paths: int,
    rng,
    t_max: float = 25.0,
    points: int = 501,
    tol: float = 5e-2,
    s_grid=None,
    window: int = 9,
    threads: int = 1,
) -> dict:
    """Simulate, estimate ``E_pm``, recover, rebuild, and compare transforms.

    Errors are re-raised with the failing stage prefixed, plus the largest
    pointwise standard error of the estimates once they exist.
    """
    s = np.logspace(-1, 1, 41) if s_grid is None else np.asarray(s_grid, dtype=float)
    t = np.linspace(0.0, t_max, points)
    Ep = _staged("estimate", estimate_E, spec, 1, t, n_paths, rng, threads)
    Em = _staged("estimate", estimate_E, spec, -1, t, n_paths, rng, threads)
    se = float(max(Ep.se.max(), Em.se.max()))
    note = f" (max pointwise SE of E estimates {se:.3g}; increase n_paths)"
    dp = _staged("recover", smooth_derivative, Ep, window, note=note)
    dm = _staged("recover", smooth_derivative, Em, window, note=note)
    pair = _staged(
        "recover", extract_divisors, Ep.to_grid_function(), Em.to_grid_function(), dp, dm, note=note
    )
    plus, minus = _staged("rebuild", rebuild_switching_laws, pair, note=note)
    err_p = float(np.max(np.abs(plus.psi(s) - spec.plus.psi(s))))
    err_m = float(np.max(np.abs(minus.psi(s) - spec.minus.psi(s))))
    worst = max(err_p, err_m)
    out = {
        "n_paths": int(n_paths),
        "alpha": pair.alpha,
        "alpha_true": spec.alpha,
        "alpha_integral": pair.alpha_integral,
        "gamma": pair.gamma,
        "renorm_factors": pair.renorm,
        "max_transform_error": {"plus": err_p, "minus": err_m},
        "rebuilt_means": {"plus": plus.mean, "minus": minus.mean},
        "true_means": {"plus": spec.mu_plus, "minus": spec.mu_minus},
        "max_se": se,
        "tol": tol,
        "pass": bool(worst <= tol),
    }
    if not out["pass"]:
        out["diagnostic"] = f"transform error {worst:.3g} exceeds tol {tol:.3g}" + note
    return out
