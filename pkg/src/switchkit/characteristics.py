"""Analytic characteristics of the switch process in the Laplace domain.

With ``c_pm = 1 - Psi_pm`` and ``D = 1 - Psi_+ Psi_-`` every transform is a
rational expression in ``Psi_+`` and ``Psi_-``. Complements come from the
laws themselves, which evaluate them without cancellation near ``s = 0``.
Time-domain values are obtained by numerical inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PreconditionError, PrecisionError
from .laplace import TransformFn, complete_monotonicity_probe, invert, is_mp
from .process import ProcessSpec

SERIES_S = 1e-6


@dataclass(frozen=True)
class CharacteristicSet:
    """Transforms of ``P_pm``, ``E_pm``, ``E'_pm``, stationary ``P~_pm`` and ``R``.

    ``P_delta(t) = P(D(t) = 1 | delta)``, ``E_delta = 2 P_delta - 1`` and
    ``P~_pm(t) = P(D~(t) = 1 | D~(0) = pm 1)``.
    """

    LP_plus: TransformFn
    LP_minus: TransformFn
    LE_plus: TransformFn
    LE_minus: TransformFn
    LEd_plus: TransformFn
    LEd_minus: TransformFn
    LPt_plus: TransformFn
    LPt_minus: TransformFn
    LR: TransformFn
    gamma: float
    mu_plus: float
    mu_minus: float

    @property
    def alpha(self) -> float:
        return self.mu_minus / (self.mu_plus + self.mu_minus)

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @property
    def r0(self) -> float:
        return 1.0 - self.gamma**2


def _real_small(s):
    """Boolean mask of real double-precision arguments below the series threshold."""
    if is_mp(s):
        return None
    arr = np.asarray(s)
    if np.iscomplexobj(arr):
        return None
    mask = arr < SERIES_S
    return mask if np.any(mask) else None


def build_characteristics(spec: ProcessSpec) -> CharacteristicSet:
    """Assemble all transforms from the two switching laws.

    For real ``s < 1e-6`` the ratio ``c_+ c_- / D`` is replaced by its
    first-order expansion ``mu_+ mu_- s / (mu_+ + mu_-)``. ``L(R)`` needs the
    next order, which depends on second moments, and raises
    :class:`PrecisionError` there instead.
    """
    mp_, mm_ = spec.mu_plus, spec.mu_minus
    tot = mp_ + mm_
    gamma = (mp_ - mm_) / tot
    psi_p, psi_m = spec.plus.psi, spec.minus.psi
    cp_, cm_ = spec.plus.complement, spec.minus.complement
    analytic = psi_p.analytic and psi_m.analytic

    def parts(s):
        Pp, Pm = psi_p.func(s), psi_m.func(s)
        cp, cm = cp_.func(s), cm_.func(s)
        D = cp + cm - cp * cm
        if not is_mp(s) and np.any(np.asarray(D) == 0):
            raise PrecisionError("1 - Psi_+ Psi_- underflows; s too close to 0")
        return Pp, Pm, cp, cm, D

    def X(s):
        _, _, cp, cm, D = parts(s)
        out = cp * cm / D
        small = _real_small(s)
        if small is not None:
            out = np.where(small, mp_ * mm_ * np.asarray(s) / tot, out)
        return out

    def T(func, name):
        return TransformFn(func, s_min=0.0, analytic=analytic, name=name)

    def LP_plus(s):
        _, _, cp, _, D = parts(s)
        return cp / (s * D)

    def LP_minus(s):
        _, Pm, cp, _, D = parts(s)
        return Pm * cp / (s * D)

    def LE(delta):
        def f(s):
            _, _, cp, cm, D = parts(s)
            return (cp - cm + delta * cp * cm) / (s * D)
        return f

    def LEd_plus(s):
        Pp, _, _, cm, D = parts(s)
        return -2.0 * Pp * cm / D

    def LEd_minus(s):
        _, Pm, cp, _, D = parts(s)
        return 2.0 * Pm * cp / D

    def LPt_plus(s):
        return (1.0 - X(s) / (mp_ * s)) / s

    def LPt_minus(s):
        return X(s) / (mm_ * s * s)

    def LR(s):
        if _real_small(s) is not None:
            raise PrecisionError(
                f"L(R) loses all digits for s < {SERIES_S:g}; its expansion needs second moments"
            )
        return 4.0 / (s * tot) * (mp_ * mm_ / tot - X(s) / s)

    return CharacteristicSet(
        LP_plus=T(LP_plus, "L(P+)"),
        LP_minus=T(LP_minus, "L(P-)"),
        LE_plus=T(LE(1), "L(E+)"),
        LE_minus=T(LE(-1), "L(E-)"),
        LEd_plus=T(LEd_plus, "L(E'+)"),
        LEd_minus=T(LEd_minus, "L(E'-)"),
        LPt_plus=T(LPt_plus, "L(Pt+)"),
        LPt_minus=T(LPt_minus, "L(Pt-)"),
        LR=T(LR, "L(R)"),
        gamma=gamma,
        mu_plus=mp_,
        mu_minus=mm_,
    )


# ---------------------------------------------------------------------------
# time domain

CURVES = ("E_plus", "E_minus", "P_plus", "P_minus", "Pt_plus", "Pt_minus", "R", "dE_plus", "dE_minus")

_TRANSFORM = {
    "E_plus": "LE_plus",
    "E_minus": "LE_minus",
    "P_plus": "LP_plus",
    "P_minus": "LP_minus",
    "Pt_plus": "LPt_plus",
    "Pt_minus": "LPt_minus",
    "R": "LR",
    "dE_plus": "LEd_plus",
    "dE_minus": "LEd_minus",
}


def _value_at_zero(cs: CharacteristicSet, name: str):
    return {
        "E_plus": 1.0,
        "E_minus": -1.0,
        "P_plus": 1.0,
        "P_minus": 0.0,
        "Pt_plus": 1.0,
        "Pt_minus": 0.0,
        "R": cs.r0,
    }.get(name)


def curve(cs: CharacteristicSet, name: str, t, order: int = 14, method: str = "gs", precision: str = "double", **inv):
    """Time-domain value of a characteristic by numerical inversion.

    ``name`` is one of ``E_plus, E_minus, P_plus, P_minus, Pt_plus, Pt_minus,
    R, dE_plus, dE_minus``. At ``t = 0`` the exact initial value is returned
    (the derivatives are undefined there and raise). Extra keywords go to
    :func:`invert`.
    """
    if name not in _TRANSFORM:
        raise ParameterError(f"unknown characteristic {name!r}; choose from {CURVES}")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ParameterError("t must be non-negative")
    out = np.empty(arr.shape)
    zero = arr == 0
    if np.any(zero):
        v0 = _value_at_zero(cs, name)
        if v0 is None:
            raise ParameterError(f"{name} has no value at t = 0")
        out[zero] = v0
    if np.any(~zero):
        F = getattr(cs, _TRANSFORM[name])
        out[~zero] = invert(F, arr[~zero], order=order, method=method, precision=precision, **inv)
    return out if arr.ndim else float(out)


def expected_value(spec: ProcessSpec, t, cs=None, **kw):
    """Unconditional ``E D(t) = p E_+(t) + (1 - p) E_-(t)``."""
    cs = build_characteristics(spec) if cs is None else cs
    return spec.p * curve(cs, "E_plus", t, **kw) + (1 - spec.p) * curve(cs, "E_minus", t, **kw)


def covariance(
    spec: ProcessSpec,
    t,
    path: str = "both",
    order: int = 14,
    method: str = "gs",
    precision: str = "double",
    agree_tol: float = 1e-6,
    cs=None,
    **inv,
):
    """Stationary covariance ``R(t)``.

    ``path='direct'`` inverts ``L(R)``; ``path='assembled'`` inverts ``P~_pm``
    and combines them as
    ``R = 2/(mu_+ + mu_-) (mu_+ P~_+ - mu_- P~_- + mu_+ (mu_- - mu_+)/(mu_+ + mu_-))``.
    ``path='both'`` computes the two and raises :class:`PrecisionError` when
    they differ by more than ``agree_tol``.
    """
    cs = build_characteristics(spec) if cs is None else cs
    kw = dict(order=order, method=method, precision=precision, **inv)
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ParameterError("covariance needs t >= 0")
    if path not in ("direct", "assembled", "both"):
        raise ParameterError(f"unknown covariance path {path!r}")
    mp_, mm_ = cs.mu_plus, cs.mu_minus
    tot = mp_ + mm_
    direct = assembled = None
    if path in ("direct", "both"):
        direct = curve(cs, "R", arr, **kw)
    if path in ("assembled", "both"):
        pt_p = curve(cs, "Pt_plus", arr, **kw)
        pt_m = curve(cs, "Pt_minus", arr, **kw)
        assembled = 2.0 / tot * (pt_p * mp_ - pt_m * mm_ + mp_ * (mm_ - mp_) / tot)
    if path == "both":
        gap = float(np.max(np.abs(direct - assembled)))
        if gap > agree_tol:
            raise PrecisionError(
                f"covariance paths disagree by {gap:.3g} > {agree_tol:.3g}; raise the inversion order or precision"
            )
    out = direct if direct is not None else assembled
    return out if np.ndim(out) else float(out)


def variance_D(mean) -> float:
    """``Var D(t) = 1 - (E D(t))^2`` for a sign-valued process."""
    m = np.asarray(mean, dtype=float)
    if np.any(np.abs(m) > 1):
        raise ParameterError("mean of a sign-valued process must lie in [-1, 1]")
    out = 1.0 - m * m
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# relations between stationary and non-stationary characteristics


def _rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / scale))


def verify_relations(cs: CharacteristicSet, mu_plus=None, mu_minus=None, s_grid=None, tol: float = 1e-10) -> dict:
    """Evaluate both sides of the derivative relations on ``s_grid``.

    Checked identities::

        L(P~'_+) = s L(P~_+) - 1 = (L(P_-) - L(P_+)) / mu_+
        L(P~'_-) = s L(P~_-)     = (L(P_+) - L(P_-)) / mu_-
        L(R')    = s L(R) - R(0) = 4 (L(P_-) - L(P_+)) / (mu_+ + mu_-)
                                 = 2 (L(E_-) - L(E_+)) / (mu_+ + mu_-)

    Returns the maximum relative discrepancy per identity, the overall
    maximum and ``ok = max <= tol``.
    """
    mp_ = cs.mu_plus if mu_plus is None else float(mu_plus)
    mm_ = cs.mu_minus if mu_minus is None else float(mu_minus)
    tot = mp_ + mm_
    s = np.logspace(-2, 2, 41) if s_grid is None else np.asarray(s_grid, dtype=float)
    r0 = 1.0 - ((mp_ - mm_) / tot) ** 2
    LPp, LPm = cs.LP_plus(s), cs.LP_minus(s)
    LEp, LEm = cs.LE_plus(s), cs.LE_minus(s)
    dR = s * cs.LR(s) - r0
    res = {
        "Pt_plus": _rel(s * cs.LPt_plus(s) - 1.0, (LPm - LPp) / mp_),
        "Pt_minus": _rel(s * cs.LPt_minus(s), (LPp - LPm) / mm_),
        "R_from_P": _rel(dR, 4.0 * (LPm - LPp) / tot),
        "R_from_E": _rel(dR, 2.0 * (LEm - LEp) / tot),
    }
    worst = max(res.values())
    return {"relations": res, "max_rel": worst, "ok": worst <= tol, "s_min": float(s.min()), "s_max": float(s.max())}


# ---------------------------------------------------------------------------
# second derivative of R as a mixture of divisor densities


def r_prime_at_zero(cs: CharacteristicSet, source: str = "exact", t0: float = 1e-6, **kw) -> float:
    """``R'(0+) = 2 (E_-(0+) - E_+(0+)) / (mu_+ + mu_-)``.

    ``source='exact'`` uses ``E_pm(0+) = pm 1``. ``source='numeric'`` inverts
    ``2 (L(E_-) - L(E_+)) / (mu_+ + mu_-)`` at ``t0`` and ``t0/2`` and applies
    one Richardson step; ``kw`` goes to :func:`invert`.
    """
    tot = cs.mu_plus + cs.mu_minus
    if source == "exact":
        return -4.0 / tot
    if source != "numeric":
        raise ParameterError(f"unknown source {source!r}")
    F = TransformFn(
        lambda s: 2.0 * (cs.LE_minus.func(s) - cs.LE_plus.func(s)) / tot,
        analytic=cs.LE_plus.analytic,
        name="L(R')",
    )
    a, b = invert(F, np.array([t0, t0 / 2]), **kw)
    return float(2 * b - a)


def r_second_derivative_mixture(alpha: float, f_X, f_Y, mu_plus: float, mu_minus: float, t):
    """``R''(t) = 4/(mu_+ + mu_-) (alpha f_X(t) + (1 - alpha) f_Y(t))``."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    tot = float(mu_plus) + float(mu_minus)
    val = alpha * np.asarray(f_X(t)) + (1.0 - alpha) * (np.asarray(f_Y(t)) if alpha < 1 else 0.0)
    out = 4.0 / tot * val
    return out if np.ndim(out) else float(out)


def divisor_transforms(cs: CharacteristicSet):
    """Transforms of ``f_X = -E'_+/(2 alpha)`` and ``f_Y = E'_-/(2 beta)``."""
    a, b = cs.alpha, cs.beta
    psi_X = TransformFn(lambda s: -cs.LEd_plus.func(s) / (2 * a), analytic=cs.LEd_plus.analytic, name="Psi_X")
    psi_Y = TransformFn(lambda s: cs.LEd_minus.func(s) / (2 * b), analytic=cs.LEd_minus.analytic, name="Psi_Y")
    return psi_X, psi_Y


def mixture_components(spec: ProcessSpec, cs=None, s_grid=None):
    """``(alpha, Psi_X, Psi_Y)`` for a spec with monotone expected values.

    Monotonicity of ``E_pm`` is equivalent to non-negative ``f_X, f_Y``, which
    is probed through complete monotonicity of their transforms.

    Raises
    ------
    PreconditionError
        If the probe finds a sign violation in either transform.
    """
    cs = build_characteristics(spec) if cs is None else cs
    psi_X, psi_Y = divisor_transforms(cs)
    for label, F in (("f_X", psi_X), ("f_Y", psi_Y)):
        rep = complete_monotonicity_probe(F, s_grid=s_grid, max_order=10)
        if rep.verdict == "violated":
            raise PreconditionError(
                f"{label} takes negative values (expected-value functions are not monotone); "
                "the mixture representation of R'' does not apply"
            )
    return cs.alpha, psi_X, psi_Y


def r_second_derivative_identity(cs: CharacteristicSet, alpha, psi_X, psi_Y, s_grid=None, r_prime0=None) -> dict:
    """Compare ``s^2 L(R) - s R(0) - R'(0+)`` with ``4/(mu_+ + mu_-) (alpha Psi_X + (1-alpha) Psi_Y)``."""
    s = np.logspace(-1, 1, 41) if s_grid is None else np.asarray(s_grid, dtype=float)
    tot = cs.mu_plus + cs.mu_minus
    rp0 = r_prime_at_zero(cs) if r_prime0 is None else float(r_prime0)
    lhs = s * s * cs.LR(s) - s * cs.r0 - rp0
    rhs = 4.0 / tot * (alpha * psi_X(s) + (1.0 - alpha) * psi_Y(s))
    abs_err = float(np.max(np.abs(lhs - rhs)))
    return {"max_abs": abs_err, "max_rel": _rel(lhs, rhs), "r_prime0": rp0}
