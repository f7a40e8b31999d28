"""Switching-time distributions.

A :class:`SwitchingLaw` bundles a density, CDF, mean, Laplace transform and
sampler for a positive continuous random time. The elementary families
(exponential, gamma) have closed forms throughout. Geometric compounds and
"first attempt" laws carry an exact transform built from their components;
their density and CDF are recovered by numerical inversion when asked for.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import optimize, stats

from .errors import ParameterError
from .laplace import GridFunction, TransformFn, invert, is_mp, numeric_forward

SCHEMA = "switchkit/law/v1"
TRUNCATION_QUANTILE = 1.0 - 1e-9


def _positive(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a number, got {value!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive and finite, got {value}")
    return value


def _open_unit(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a number, got {value!r}") from None
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie strictly inside (0, 1), got {value}")
    return value


class SwitchingLaw:
    """Positive absolutely continuous distribution of a switching time.

    Instances are immutable after construction; samplers draw from an
    externally supplied ``numpy.random.Generator``.
    """

    def __init__(
        self,
        descriptor: dict,
        mean: float,
        psi: Callable,
        complement: Callable,
        sampler: Callable[[np.random.Generator, int], np.ndarray],
        pdf: Optional[Callable] = None,
        cdf: Optional[Callable] = None,
        quantile: Optional[Callable] = None,
        analytic: bool = True,
    ):
        self.descriptor = descriptor
        self.mean = float(mean)
        self._psi = psi
        self._complement = complement
        self._sampler = sampler
        self._pdf = pdf
        self._cdf = cdf
        self._quantile = quantile
        self.analytic = analytic

    def __repr__(self) -> str:
        return f"SwitchingLaw({json.dumps(self.descriptor)})"

    @property
    def kind(self) -> str:
        return self.descriptor["kind"]

    @cached_property
    def psi(self) -> TransformFn:
        """Laplace transform of the density."""
        return TransformFn(self._psi, analytic=self.analytic, name=f"psi[{self.kind}]", closed_min=True)

    @cached_property
    def complement(self) -> TransformFn:
        """``1 - psi(s)`` evaluated without cancellation near ``s = 0``."""
        return TransformFn(
            self._complement, analytic=self.analytic, name=f"1-psi[{self.kind}]", closed_min=True
        )

    def _inversion_method(self) -> str:
        return "talbot" if self.analytic else "gs"

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        if self._pdf is not None:
            return self._pdf(t)
        out = np.zeros_like(t)
        pos = t > 0
        if np.any(pos):
            out[pos] = invert(self.psi, t[pos], method=self._inversion_method())
        return out if out.ndim else float(out)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self._cdf is not None:
            return self._cdf(t)
        return 1.0 - self.sf(t)

    def sf(self, t):
        """Survival function ``1 - F(t)``."""
        t = np.asarray(t, dtype=float)
        if self._cdf is not None:
            return 1.0 - self._cdf(t)
        out = np.ones_like(t)
        pos = t > 0
        if np.any(pos):
            tr = TransformFn(lambda s: self._complement(s) / s, analytic=self.analytic)
            out[pos] = np.clip(invert(tr, t[pos], method=self._inversion_method()), 0.0, 1.0)
        return out if out.ndim else float(out)

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise ParameterError(f"quantile level must lie in (0, 1), got {q}")
        if self._quantile is not None:
            return float(self._quantile(q))
        target = 1.0 - q
        hi = self.mean
        while float(self.sf(hi)) > target:
            hi *= 2.0
            if hi > 1e9 * self.mean:
                raise ParameterError("quantile bracket search diverged")
        return float(optimize.brentq(lambda x: float(self.sf(x)) - target, 0.0, hi, xtol=1e-12 * hi))

    @cached_property
    def truncation_point(self) -> float:
        """Upper cut used by the size-biased rejection sampler."""
        return self.quantile(TRUNCATION_QUANTILE)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self._sampler(rng, int(size)), dtype=float)

    def to_json(self) -> str:
        return json.dumps(law_to_dict(self))


# ---------------------------------------------------------------------------
# elementary families


def make_exponential(mean: float) -> SwitchingLaw:
    mu = _positive("mean", mean)
    rate = 1.0 / mu

    def quantile(q):
        return -mu * math.log1p(-q)

    return SwitchingLaw(
        {"kind": "exponential", "mean": mu},
        mean=mu,
        psi=lambda s: 1 / (1 + mu * s),
        complement=lambda s: mu * s / (1 + mu * s),
        sampler=lambda rng, n: rng.exponential(mu, n),
        pdf=lambda t: np.where(t >= 0, rate * np.exp(-rate * np.maximum(t, 0.0)), 0.0),
        cdf=lambda t: np.where(t > 0, -np.expm1(-rate * np.maximum(t, 0.0)), 0.0),
        quantile=quantile,
    )


def make_gamma(shape: float, scale: float) -> SwitchingLaw:
    k = _positive("shape", shape)
    theta = _positive("scale", scale)
    dist = stats.gamma(a=k, scale=theta)

    def complement(s):
        if is_mp(s):
            return -mpmath.expm1(-k * mpmath.log1p(theta * s))
        return -np.expm1(-k * np.log1p(theta * s))

    return SwitchingLaw(
        {"kind": "gamma", "shape": k, "scale": theta},
        mean=k * theta,
        psi=lambda s: (1 + theta * s) ** (-k),
        complement=complement,
        sampler=lambda rng, n: rng.gamma(k, theta, n),
        pdf=dist.pdf,
        cdf=dist.cdf,
        quantile=dist.ppf,
    )


def make_scaled(law: SwitchingLaw, factor: float) -> SwitchingLaw:
    """Law of ``factor * T`` for ``T`` drawn from ``law``."""
    c = _positive("factor", factor)
    return SwitchingLaw(
        {"kind": "scaled", "factor": c, "law": law.descriptor},
        mean=c * law.mean,
        psi=lambda s: law._psi(c * s),
        complement=lambda s: law._complement(c * s),
        sampler=lambda rng, n: c * law.sample(rng, n),
        pdf=lambda t: np.asarray(law.pdf(np.asarray(t) / c)) / c,
        cdf=lambda t: law.cdf(np.asarray(t) / c),
        quantile=lambda q: c * law.quantile(q),
        analytic=law.analytic,
    )


# ---------------------------------------------------------------------------
# geometric compounds


def sample_geometric(rng: np.random.Generator, p: float, size: int) -> np.ndarray:
    """Geometric variates on {1, 2, ...} with pmf ``(1-p)^(k-1) p``, by CDF inversion."""
    u = rng.random(size)
    return (np.floor(np.log1p(-u) / math.log1p(-p)) + 1).astype(np.int64)


def _sum_by_count(rng, law: SwitchingLaw, counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if total == 0:
        return np.zeros(counts.size)
    draws = law.sample(rng, total)
    owner = np.repeat(np.arange(counts.size), counts)
    return np.bincount(owner, weights=draws, minlength=counts.size)


@dataclass(frozen=True)
class GeometricDivisibleSpec:
    """Geometric sum of ``nu_p`` iid copies of ``divisor``; order ``r = 1/p``."""

    divisor: SwitchingLaw
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _open_unit("success probability p", self.p))

    @property
    def r(self) -> float:
        return 1.0 / self.p


@dataclass(frozen=True)
class FirstAttemptSpec:
    """``first + sum_{k=1}^{nu-1} between_k`` with ``nu`` geometric(``stop_prob``)."""

    first: SwitchingLaw
    between: SwitchingLaw
    stop_prob: float

    def __post_init__(self):
        object.__setattr__(self, "stop_prob", _open_unit("stop_prob", self.stop_prob))


def make_geometric_divisible(spec: GeometricDivisibleSpec) -> SwitchingLaw:
    V, p = spec.divisor, spec.p
    q = 1.0 - p

    def sampler(rng, n):
        return _sum_by_count(rng, V, sample_geometric(rng, p, n))

    return SwitchingLaw(
        {"kind": "geom_div", "p": p, "divisor": V.descriptor},
        mean=V.mean / p,
        psi=lambda s: p * V._psi(s) / (1 - q * V._psi(s)),
        complement=lambda s: V._complement(s) / (1 - q * V._psi(s)),
        sampler=sampler,
        analytic=V.analytic,
    )


def make_first_attempt(spec: FirstAttemptSpec) -> SwitchingLaw:
    X, Y, a = spec.first, spec.between, spec.stop_prob
    b = 1.0 - a

    def sampler(rng, n):
        extra = sample_geometric(rng, a, n) - 1
        return X.sample(rng, n) + _sum_by_count(rng, Y, extra)

    return SwitchingLaw(
        {"kind": "first_attempt", "alpha": a, "first": X.descriptor, "between": Y.descriptor},
        mean=X.mean + (1.0 / a - 1.0) * Y.mean,
        psi=lambda s: a * X._psi(s) / (1 - b * Y._psi(s)),
        complement=lambda s: (a * X._complement(s) + b * Y._complement(s)) / (1 - b * Y._psi(s)),
        sampler=sampler,
        analytic=X.analytic and Y.analytic,
    )


def make_first_attempt_pair(first: SwitchingLaw, between: SwitchingLaw, alpha: float):
    """``(T+, T-)`` with ``T+ = X + sum_{nu_alpha - 1} Y`` and ``T- = Y + sum_{nu_beta - 1} X``.

    With ``beta = 1 - alpha`` the pair has ``mu_-/(mu_+ + mu_-) = alpha``, so it
    is exactly the class with monotone expected-value functions.
    """
    alpha = _open_unit("alpha", alpha)
    plus = make_first_attempt(FirstAttemptSpec(first, between, alpha))
    minus = make_first_attempt(FirstAttemptSpec(between, first, 1.0 - alpha))
    return plus, minus


def make_scaled_common_divisor(a: float, b: float, alpha: float, divisor: SwitchingLaw):
    """``T+ = b V_1 + a sum_{k=2}^{nu_alpha} V_k``, ``T- = a V_1 + b sum_{k=2}^{nu_beta} V_k``."""
    a = _positive("a", a)
    b = _positive("b", b)
    alpha = _open_unit("alpha", alpha)
    bV, aV = make_scaled(divisor, b), make_scaled(divisor, a)
    plus = make_first_attempt(FirstAttemptSpec(bV, aV, alpha))
    minus = make_first_attempt(FirstAttemptSpec(aV, bV, 1.0 - alpha))
    base = {"kind": "scaled_common", "a": a, "b": b, "alpha": alpha, "divisor": divisor.descriptor}
    plus.descriptor = {**base, "side": "plus"}
    minus.descriptor = {**base, "side": "minus"}
    return plus, minus


def make_common_divisor(alpha: float, divisor: SwitchingLaw):
    """``T+ ~ GD(1/alpha)`` and ``T- ~ GD(1/(1-alpha))`` sharing ``divisor``."""
    alpha = _open_unit("alpha", alpha)
    return (
        make_geometric_divisible(GeometricDivisibleSpec(divisor, alpha)),
        make_geometric_divisible(GeometricDivisibleSpec(divisor, 1.0 - alpha)),
    )


# ---------------------------------------------------------------------------
# laws given by a sampled density


def make_grid_law(density: GridFunction, tail_eps: float = 1e-4) -> SwitchingLaw:
    """Law with a piecewise-linear density on ``density.grid``.

    Negative values (sampling noise) are clipped, the result is normalised to
    unit mass, and draws come from inverting the cumulative trapezoid.
    """
    from .errors import DensityError

    t = density.grid
    f = np.clip(density.values, 0.0, None)
    mass = float(np.trapezoid(f, t))
    if not (mass > 0 and math.isfinite(mass)):
        raise DensityError(f"grid density has non-positive mass {mass}")
    f = f / mass
    cum = np.concatenate([[0.0], np.cumsum(np.diff(t) * (f[1:] + f[:-1]) / 2)])
    cum /= cum[-1]
    mean = float(np.trapezoid(t * f, t))
    g = GridFunction(t, f, tail=0.0)
    psi = numeric_forward(g, tail_eps=max(tail_eps, f[-1] * 1.000001 + 1e-300))

    def sampler(rng, n):
        return np.interp(rng.random(n), cum, t)

    def quantile(q):
        return float(np.interp(q, cum, t))

    return SwitchingLaw(
        {"kind": "grid", "points": int(t.size)},
        mean=mean,
        psi=psi.func,
        complement=lambda s: 1.0 - psi.func(s),
        sampler=sampler,
        pdf=lambda x: np.interp(x, t, f, left=0.0, right=0.0),
        cdf=lambda x: np.interp(x, t, cum, left=0.0, right=1.0),
        quantile=quantile,
        analytic=False,
    )


# ---------------------------------------------------------------------------
# size-biased interval covering a fixed time


def size_biased_split_sampler(law: SwitchingLaw, rng: np.random.Generator, size: int = 1):
    """Draw ``(A, B)`` with joint density ``f(a + b) / mu``.

    The covering length ``L`` has density ``x f(x) / mu``; it is drawn by
    rejection from ``f`` with acceptance ``x / x_max`` on ``[0, x_max]``, where
    ``x_max`` is the ``1 - 1e-9`` quantile. ``L`` is then split uniformly.
    """
    size = int(size)
    x_max = law.truncation_point
    out = np.empty(size)
    filled = 0
    batch = max(64, int(1.2 * size * x_max / law.mean))
    while filled < size:
        x = law.sample(rng, batch)
        keep = x[(x <= x_max) & (rng.random(batch) * x_max < x)]
        take = min(keep.size, size - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    u = rng.random(size)
    return u * out, (1.0 - u) * out


# ---------------------------------------------------------------------------
# JSON descriptors


def law_to_dict(law: SwitchingLaw) -> dict:
    if law.kind == "grid":
        raise ParameterError("grid-density laws have no JSON descriptor")
    return {"schema": SCHEMA, **law.descriptor}


def _num(d: dict, key: str):
    if key not in d:
        raise ParameterError(f"law descriptor of kind {d.get('kind')!r} is missing field {key!r}")
    return d[key]


def law_from_dict(d: dict, _top: bool = True) -> SwitchingLaw:
    """Inverse of :func:`law_to_dict`. Nested descriptors omit ``schema``."""
    if not isinstance(d, dict):
        raise ParameterError(f"law descriptor must be an object, got {type(d).__name__}")
    if _top and "schema" in d and d["schema"] != SCHEMA:
        raise ParameterError(f"unsupported law schema {d['schema']!r}; expected {SCHEMA!r}")
    kind = d.get("kind")
    if kind == "exponential":
        return make_exponential(_num(d, "mean"))
    if kind == "gamma":
        return make_gamma(_num(d, "shape"), _num(d, "scale"))
    if kind == "scaled":
        return make_scaled(law_from_dict(_num(d, "law"), False), _num(d, "factor"))
    if kind == "geom_div":
        return make_geometric_divisible(
            GeometricDivisibleSpec(law_from_dict(_num(d, "divisor"), False), _num(d, "p"))
        )
    if kind == "first_attempt":
        return make_first_attempt(
            FirstAttemptSpec(
                law_from_dict(_num(d, "first"), False),
                law_from_dict(_num(d, "between"), False),
                _num(d, "alpha"),
            )
        )
    if kind == "scaled_common":
        side = d.get("side", "plus")
        if side not in ("plus", "minus"):
            raise ParameterError(f"scaled_common side must be 'plus' or 'minus', got {side!r}")
        pair = make_scaled_common_divisor(
            _num(d, "a"), _num(d, "b"), _num(d, "alpha"), law_from_dict(_num(d, "divisor"), False)
        )
        return pair[0] if side == "plus" else pair[1]
    raise ParameterError(f"unknown law kind {kind!r}")


def law_from_json(text: str) -> SwitchingLaw:
    return law_from_dict(json.loads(text))
