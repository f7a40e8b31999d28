"""Recovery of switching-time laws from the expected-value functions.

The transforms of ``E_pm`` determine ``Psi_pm`` uniquely. When ``E_+`` is
non-increasing and ``E_-`` non-decreasing, the normalised derivatives
``f_X = -E'_+/(2 alpha)`` and ``f_Y = E'_-/(2 beta)`` are probability
densities and each switching time is a geometric sum of first-attempt type:
``T_+ = X + Y_1 + ... + Y_{nu - 1}`` with ``nu`` geometric with success
probability ``alpha``, and symmetrically for ``T_-``.

Only the shapes and ``alpha`` are identified by ``E_pm``; absolute means
follow from the rebuilt divisor laws through Wald's identity. The
stationary covariance alone does not identify the pair, so no recovery from
``R`` is offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import (
    MonotonicityError,
    ParameterError,
    SingularityError,
    TailError,
    ValidationError,
)
from .laplace import (
    GridFunction,
    TransformFn,
    complete_monotonicity_probe,
    derivative_transform,
    invert,
    is_mp,
    numeric_forward,
)
from .laws import FirstAttemptSpec, SwitchingLaw, make_first_attempt, make_grid_law
from .process import ProcessSpec

SINGULAR = 1e-12
VERDICTS = ("valid-consistent", "invalid", "inconclusive")


@dataclass
class RecoveredPair:
    """Recovered transforms, geometric parameters and divisor densities.

    ``f_X`` and ``f_Y`` are ``None`` when the pair comes from exact
    transforms; ``psi_X`` and ``psi_Y`` are always set.
    """

    psi_plus: TransformFn
    psi_minus: TransformFn
    alpha: float
    beta: float
    gamma: float
    psi_X: TransformFn
    psi_Y: TransformFn
    f_X: Optional[GridFunction] = None
    f_Y: Optional[GridFunction] = None
    renorm: dict = field(default_factory=lambda: {"f_X": 1.0, "f_Y": 1.0})
    alpha_integral: Optional[float] = None

    def __post_init__(self):
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ParameterError("alpha + beta must equal 1")


def _check_den(den, label):
    if is_mp(den):
        bad = abs(den) < SINGULAR
    else:
        arr = np.asarray(den)
        bad = np.any(np.abs(arr) < SINGULAR)
    if bad:
        raise SingularityError(f"{label}: denominator below {SINGULAR:g}; choose s away from 0 and infinity")


def _propagate(num_err, den_err, q, den):
    """First-order error of ``q = num / den``."""
    if num_err is None and den_err is None:
        return None

    def err(s):
        a = 0.0 if num_err is None else np.abs(num_err(s))
        b = 0.0 if den_err is None else np.abs(den_err(s))
        return (a + np.abs(q(s)) * b) / np.abs(den(s))

    return err


def invert_expected_values(LE_plus: TransformFn, LE_minus: TransformFn, s_min=None, s_max=None):
    """``(Psi_+, Psi_-)`` from the transforms of ``E_+`` and ``E_-``::

        Psi_+ = (s L(E_+) - 1) / (s L(E_-) - 1)
        Psi_- = (s L(E_-) + 1) / (s L(E_+) + 1)

    The validity range defaults to the intersection of the inputs' ranges.

    Raises
    ------
    SingularityError
        At evaluation, if a denominator is smaller than ``1e-12`` in magnitude.
    """
    lo = max(LE_plus.s_min, LE_minus.s_min) if s_min is None else float(s_min)
    hi = min(LE_plus.s_max, LE_minus.s_max) if s_max is None else float(s_max)
    analytic = LE_plus.analytic and LE_minus.analytic

    def den_p(s):
        return s * LE_minus.func(s) - 1.0

    def den_m(s):
        return s * LE_plus.func(s) + 1.0

    def psi_plus(s):
        d = den_p(s)
        _check_den(d, "Psi_+")
        return (s * LE_plus.func(s) - 1.0) / d

    def psi_minus(s):
        d = den_m(s)
        _check_den(d, "Psi_-")
        return (s * LE_minus.func(s) + 1.0) / d

    ep = None if LE_plus.error is None else (lambda s: np.abs(s) * LE_plus.error(s))
    em = None if LE_minus.error is None else (lambda s: np.abs(s) * LE_minus.error(s))
    return (
        TransformFn(psi_plus, lo, hi, analytic, _propagate(ep, em, psi_plus, den_p), "Psi_+"),
        TransformFn(psi_minus, lo, hi, analytic, _propagate(em, ep, psi_minus, den_m), "Psi_-"),
    )


def _ratio(num: TransformFn, den: TransformFn, name: str) -> TransformFn:
    def q(s):
        return num.func(s) / den.func(s)

    return TransformFn(
        q,
        max(num.s_min, den.s_min),
        min(num.s_max, den.s_max),
        num.analytic and den.analytic,
        _propagate(num.error, den.error, q, den.func),
        name,
    )


def _shift(F: TransformFn, c: float, name: str) -> TransformFn:
    return TransformFn(lambda s: F.func(s) + c, F.s_min, F.s_max, F.analytic, F.error, name)


def _scale(F: TransformFn, c: float, name: str) -> TransformFn:
    err = None if F.error is None else (lambda s: abs(c) * F.error(s))
    return TransformFn(lambda s: c * F.func(s), F.s_min, F.s_max, F.analytic, err, name)


def _final_value(LE: TransformFn, s: float = 1e-8) -> float:
    return float(s * LE(s))


def recover_from_transforms(LE_plus: TransformFn, LE_minus: TransformFn, gamma=None) -> RecoveredPair:
    """Exact-transform path: ``Psi_pm`` by inversion and divisor transforms
    ``Psi_X = -L(E'_+)/(2 alpha)``, ``Psi_Y = L(E'_-)/(2 beta)``.

    ``gamma`` defaults to the final value ``s L(E_+)(s)`` at ``s = 1e-8``.
    No monotonicity check is made here; see :func:`validate_pair`.
    """
    g = _final_value(LE_plus) if gamma is None else float(gamma)
    if not -1.0 < g < 1.0:
        raise ValidationError(f"common limit gamma={g} must lie in (-1, 1)")
    alpha = (1.0 - g) / 2.0
    beta = 1.0 - alpha
    psi_p, psi_m = invert_expected_values(LE_plus, LE_minus)
    psi_X = _scale(derivative_transform(LE_plus, 1.0), -1.0 / (2 * alpha), "Psi_X")
    psi_Y = _scale(derivative_transform(LE_minus, -1.0), 1.0 / (2 * beta), "Psi_Y")
    return RecoveredPair(psi_p, psi_m, alpha, beta, g, psi_X, psi_Y)


# ---------------------------------------------------------------------------
# grid inputs


def _tail(g: GridFunction, fraction: float):
    k = max(1, int(round(fraction * g.grid.size)))
    se = 0.0 if g.se is None else float(g.se[-k:].mean())
    return float(g.values[-k:].mean()), se


def _effective_tail_eps(g: GridFunction, tail_eps: float) -> float:
    # Monte Carlo curves cannot meet a tail tolerance below their own noise
    return tail_eps if g.se is None else max(tail_eps, 4.0 * float(g.se[-1]))


def _forward(g: GridFunction, tail: float, tail_eps: float) -> TransformFn:
    return numeric_forward(GridFunction(g.grid, g.values, tail, g.se), tail_eps=_effective_tail_eps(g, tail_eps))


def _noise_z(n: int, family_alpha: float = 0.01) -> float:
    # Bonferroni: checking n noisy points at a fixed z would flag pure noise
    return max(3.0, float(norm.isf(family_alpha / (2 * max(n, 1)))))


def _monotone(g: GridFunction, sign: int, tol: float) -> bool:
    d = sign * np.diff(g.values)
    if g.se is None:
        bound = tol
    else:
        bound = tol + _noise_z(d.size) * np.sqrt(g.se[1:] ** 2 + g.se[:-1] ** 2)
    return bool(np.all(d <= bound))


def validate_pair(
    E_plus: GridFunction,
    E_minus: GridFunction,
    s_grid=None,
    limit_tol: float = 1e-3,
    tail_eps: float = 1e-4,
    tail_fraction: float = 0.1,
    max_order: int = 6,
) -> dict:
    """Check a candidate pair of expected-value curves.

    Condition (i): ``E_+(0) = 1``, ``E_-(0) = -1`` and a common tail
    ``gamma`` in ``(-1, 1)``. Condition (ii): the ratios
    ``L(E'_+)/(L(E'_-) - 2)`` and ``L(E'_-)/(L(E'_+) + 2)``, which equal
    ``Psi_+`` and ``Psi_-``, pass the complete-monotonicity probe.
    Additionally reports time-domain monotonicity of the curves and the
    probe on the divisor transforms ``-L(E'_+)/(2 alpha)`` and
    ``L(E'_-)/(2 beta)``, which is what the first-attempt representation
    needs.

    The verdict is ``invalid`` if (i) fails or a probe on the ratios finds a
    violation, ``valid-consistent`` if both ratio probes are consistent and
    ``inconclusive`` otherwise.

    The default ``s_grid`` spans what the sampled curves resolve: 33 log-spaced
    points from ``5 / T_max`` to ``0.2 / h`` with ``h`` the largest grid step.
    """
    if s_grid is None:
        h = float(np.max(np.diff(E_plus.grid)))
        s = np.logspace(np.log10(5.0 / E_plus.grid[-1]), np.log10(0.2 / h), 33)
    else:
        s = np.asarray(s_grid, dtype=float)
    reasons = []
    for g, want, label in ((E_plus, 1.0, "E_plus"), (E_minus, -1.0, "E_minus")):
        if abs(g.grid[0]) > 1e-12:
            raise ParameterError(f"{label} grid must start at 0")
        if abs(g.values[0] - want) > limit_tol:
            reasons.append(f"{label}(0) = {g.values[0]:.6g}, expected {want:+.0f}")
    if E_plus.grid.size != E_minus.grid.size or np.any(E_plus.grid != E_minus.grid):
        raise ParameterError("E_plus and E_minus must share one grid")
    gp, sp = _tail(E_plus, tail_fraction)
    gm, sm = _tail(E_minus, tail_fraction)
    tol = max(limit_tol, 4.0 * math.hypot(sp, sm))
    gamma = 0.5 * (gp + gm)
    if abs(gp - gm) > tol:
        reasons.append(f"tails differ: E_plus -> {gp:.6g}, E_minus -> {gm:.6g}")
    if not -1.0 < gamma < 1.0:
        reasons.append(f"common limit {gamma:.6g} outside (-1, 1)")
    limits_ok = not reasons
    report = {
        "limits_ok": limits_ok,
        "gamma": gamma,
        "monotone": _monotone(E_plus, 1, 1e-9) and _monotone(E_minus, -1, 1e-9),
        "reasons": reasons,
    }
    if not limits_ok:
        report.update(verdict="invalid", cm_probe=None, divisor_probe=None)
        return report

    LEp = _forward(E_plus, gamma, tail_eps)
    LEm = _forward(E_minus, gamma, tail_eps)
    dp = derivative_transform(LEp, 1.0)
    dm = derivative_transform(LEm, -1.0)
    ratios = {
        "plus": _ratio(dp, _shift(dm, -2.0, ""), "Psi_+"),
        "minus": _ratio(dm, _shift(dp, 2.0, ""), "Psi_-"),
    }
    alpha = (1.0 - gamma) / 2.0
    divisors = {
        "X": _scale(dp, -1.0 / (2 * alpha), "Psi_X"),
        "Y": _scale(dm, 1.0 / (2 * (1 - alpha)), "Psi_Y"),
    }
    cm = {k: complete_monotonicity_probe(F, s, max_order).to_dict() for k, F in ratios.items()}
    div = {k: complete_monotonicity_probe(F, s, max_order).to_dict() for k, F in divisors.items()}
    verdicts = [r["verdict"] for r in cm.values()]
    if "violated" in verdicts:
        verdict = "invalid"
        reasons.append("a transform ratio is not completely monotone")
    elif all(v == "consistent" for v in verdicts):
        verdict = "valid-consistent"
    else:
        verdict = "inconclusive"
    if any(r["verdict"] == "violated" for r in div.values()):
        report["monotone"] = False
    report.update(verdict=verdict, cm_probe=cm, divisor_probe=div)
    return report


def extract_divisors(
    E_plus: GridFunction,
    E_minus: GridFunction,
    dE_plus: GridFunction,
    dE_minus: GridFunction,
    tail_fraction: float = 0.1,
    tail_eps: float = 1e-4,
    alpha_tol: float = 0.02,
    noise_floor: float = 1e-8,
) -> RecoveredPair:
    """Divisor densities ``f_X = -E'_+/(2 alpha)``, ``f_Y = E'_-/(2 beta)``.

    ``gamma`` is the mean of both curves over the last ``tail_fraction`` of
    the grid; ``alpha = (1 - gamma)/2`` is cross-checked against
    ``-1/2 int E'_+``. The densities are renormalised to unit mass and the
    factors are recorded in ``renorm``.

    Raises
    ------
    MonotonicityError
        If ``E'_+`` exceeds or ``E'_-`` falls below zero anywhere by more
        than ``noise_floor`` plus ``z`` propagated standard errors, with
        ``z`` set so that pure noise trips the check with probability 1%
        over the whole grid (at least 3).
    TailError
        If the tails of ``E_+`` and ``E_-`` disagree beyond their noise, i.e.
        the grid is too short for the curves to have converged.
    ValidationError
        If the two estimates of ``alpha`` differ by more than ``alpha_tol``.
    """
    for d, sign, label in ((dE_plus, 1, "E'_plus"), (dE_minus, -1, "E'_minus")):
        eps = noise_floor + (0.0 if d.se is None else _noise_z(d.grid.size) * d.se)
        excess = sign * d.values - eps
        if np.any(excess > 0):
            i = int(np.argmax(excess))
            raise MonotonicityError(
                f"{label} has the wrong sign at t={d.grid[i]:.4g} ({d.values[i]:.3g} beyond noise "
                f"{np.broadcast_to(eps, d.values.shape)[i]:.3g}); the curves are not monotone, "
                "run validate_pair for a diagnosis"
            )
    gp, sp = _tail(E_plus, tail_fraction)
    gm, sm = _tail(E_minus, tail_fraction)
    tol = max(_effective_tail_eps(E_plus, tail_eps), _effective_tail_eps(E_minus, tail_eps), 4.0 * math.hypot(sp, sm))
    if abs(gp - gm) > tol:
        raise TailError(
            f"tails of E_plus ({gp:.6g}) and E_minus ({gm:.6g}) differ by more than {tol:.3g}; extend the grid"
        )
    gamma = 0.5 * (gp + gm)
    if not -1.0 < gamma < 1.0:
        raise ValidationError(f"common limit gamma={gamma} must lie in (-1, 1)")
    alpha = (1.0 - gamma) / 2.0
    beta = 1.0 - alpha
    alpha_int = -0.5 * float(np.trapezoid(dE_plus.values, dE_plus.grid))
    if abs(alpha_int - alpha) > alpha_tol:
        raise ValidationError(
            f"alpha from the tail ({alpha:.4f}) and from -1/2 int E'_+ ({alpha_int:.4f}) differ by more than {alpha_tol}"
        )

    def density(d: GridFunction, c: float):
        vals = c * d.values
        mass = float(np.trapezoid(vals, d.grid))
        se = None if d.se is None else abs(c) * d.se / mass
        return GridFunction(d.grid, vals / mass, 0.0, se), 1.0 / mass

    f_X, rX = density(dE_plus, -1.0 / (2 * alpha))
    f_Y, rY = density(dE_minus, 1.0 / (2 * beta))
    LEp = _forward(E_plus, gamma, tail_eps)
    LEm = _forward(E_minus, gamma, tail_eps)
    psi_p, psi_m = invert_expected_values(LEp, LEm)
    return RecoveredPair(
        psi_plus=psi_p,
        psi_minus=psi_m,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        psi_X=_density_transform(f_X, tail_eps),
        psi_Y=_density_transform(f_Y, tail_eps),
        f_X=f_X,
        f_Y=f_Y,
        renorm={"f_X": rX, "f_Y": rY},
        alpha_integral=alpha_int,
    )


def _density_transform(f: GridFunction, tail_eps: float) -> TransformFn:
    # noisy densities end in noise around 0; the tail was checked on E already
    eps = max(_effective_tail_eps(f, tail_eps), abs(float(f.values[-1])) * (1 + 1e-9) + 1e-300)
    return numeric_forward(f, tail_eps=eps)


def _cut_noise_tail(f: GridFunction, min_fit: int = 5) -> GridFunction:
    """Replace the noise beyond the last point that stands out from it.

    The density beyond that point is continued by an exponential fitted to
    log ``f`` on the second half of the resolved stretch, weighted by
    ``f/se``. If the fit does not decay the tail is set to zero.
    """
    if f.se is None:
        return f
    signal = np.nonzero(f.values > _noise_z(f.grid.size) * f.se)[0]
    if signal.size == 0:
        return f
    last = signal[-1]
    vals = f.values.copy()
    vals[last + 1:] = 0.0
    fit = signal[signal >= last // 2]
    if fit.size >= min_fit:
        w = f.values[fit] / np.maximum(f.se[fit], 1e-300)
        slope, icpt = np.polyfit(f.grid[fit], np.log(f.values[fit]), 1, w=w)
        if slope < 0:
            vals[last + 1:] = np.exp(icpt + slope * f.grid[last + 1:])
    return GridFunction(f.grid, vals, 0.0, f.se)


def _divisor_law(psi: TransformFn, f: Optional[GridFunction], t_max: float, n_grid: int) -> SwitchingLaw:
    if f is not None:
        f = _cut_noise_tail(f)
        return make_grid_law(f, tail_eps=abs(float(f.values[-1])) + 1e-4)
    # exact transform: sample from an inverted density, keep the exact transform
    t = np.linspace(0.0, t_max, n_grid)
    vals = np.zeros_like(t)
    vals[1:] = invert(psi, t[1:], method="talbot", precision="double")
    grid_law = make_grid_law(GridFunction(t, vals, 0.0), tail_eps=abs(vals[-1]) + 1e-4)
    h = 1e-6
    mean = float((1.0 - psi(h)) / h)
    return SwitchingLaw(
        {"kind": "grid", "points": int(n_grid)},
        mean=mean,
        psi=psi.func,
        complement=lambda s: 1.0 - psi.func(s),
        sampler=grid_law.sample,
        pdf=grid_law.pdf,
        cdf=grid_law.cdf,
        quantile=grid_law.quantile,
        analytic=psi.analytic,
    )


def rebuild_switching_laws(pair: RecoveredPair, t_max: float = 40.0, n_grid: int = 4001):
    """First-attempt laws ``T_+ = FA(X, Y, alpha)`` and ``T_- = FA(Y, X, beta)``.

    Grid densities become laws by normalised piecewise-linear interpolation.
    For densities carrying standard errors, the noise beyond the last point
    exceeding the noise threshold is replaced by a fitted exponential tail,
    so clipped noise adds no mass and the true tail is not lost.
    For exact-transform pairs the divisor transforms are kept exactly and
    samplers use a density inverted on ``[0, t_max]``.

    Raises
    ------
    ParameterError
        If ``alpha`` is not strictly inside ``(0, 1)``.
    DensityError
        If a grid density has no positive mass.
    """
    if not 0.0 < pair.alpha < 1.0:
        raise ParameterError(f"geometric parameter alpha must lie strictly in (0, 1), got {pair.alpha}")
    X = _divisor_law(pair.psi_X, pair.f_X, t_max, n_grid)
    Y = _divisor_law(pair.psi_Y, pair.f_Y, t_max, n_grid)
    T_plus = make_first_attempt(FirstAttemptSpec(X, Y, pair.alpha))
    T_minus = make_first_attempt(FirstAttemptSpec(Y, X, pair.beta))
    return T_plus, T_minus


def cycle_representation_check(pair: RecoveredPair, spec: ProcessSpec, s_grid=None) -> dict:
    """Compare ``Psi_+ Psi_-`` of ``spec`` with the product of geometric compounds
    ``beta Psi_X / (1 - alpha Psi_X) * alpha Psi_Y / (1 - beta Psi_Y)``."""
    s = np.logspace(-1, 1, 41) if s_grid is None else np.asarray(s_grid, dtype=float)
    a, b = pair.alpha, pair.beta
    lhs = np.asarray(spec.plus.psi(s) * spec.minus.psi(s), dtype=float)
    X = np.asarray(pair.psi_X(s), dtype=float)
    Y = np.asarray(pair.psi_Y(s), dtype=float)
    rhs = b * X / (1 - a * X) * (a * Y / (1 - b * Y))
    rel = np.abs(lhs - rhs) / np.abs(lhs)
    return {
        "max_rel": float(rel.max()),
        "max_abs": float(np.max(np.abs(lhs - rhs))),
        "s_min": float(s.min()),
        "s_max": float(s.max()),
    }
