"""Simulation of switch processes and exact oracles for the switch count.

A trajectory stores only its sign at the origin and the ordered switch
epochs; values follow from parity, ``D(t) = delta * (-1)^N(t)``. The counting
convention is ``N(t) = #{epochs in (0, t]}`` for ``t >= 0`` and
``N(t) = -#{epochs in (t, 0]}`` for ``t < 0``.

Non-stationary trajectories include the switch at the origin as an epoch
(it matters for the backward delay ``B(t)``) but it is never counted by
``N``. The last interval is always generated in full, so one epoch beyond
the horizon is kept; the same holds at the left end of two-sided paths.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, ParameterError, RangeError
from .laws import SwitchingLaw, size_biased_split_sampler


@dataclass(frozen=True)
class ProcessSpec:
    """Switching laws for the +1 and -1 states and ``P(delta = +1) = p``."""

    plus: SwitchingLaw
    minus: SwitchingLaw
    p: float = 1.0

    def __post_init__(self):
        if not 0.0 <= float(self.p) <= 1.0:
            raise ParameterError(f"start probability p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    @property
    def mu_plus(self) -> float:
        return self.plus.mean

    @property
    def mu_minus(self) -> float:
        return self.minus.mean

    @property
    def gamma(self) -> float:
        """Common limit of both expected-value functions."""
        return (self.mu_plus - self.mu_minus) / (self.mu_plus + self.mu_minus)

    @property
    def alpha(self) -> float:
        return self.mu_minus / (self.mu_plus + self.mu_minus)

    def law(self, sign: int) -> SwitchingLaw:
        return self.plus if sign > 0 else self.minus

    def with_start(self, p: float) -> "ProcessSpec":
        return ProcessSpec(self.plus, self.minus, p)


@dataclass(frozen=True)
class Trajectory:
    initial_sign: int
    epochs: np.ndarray
    t_start: float
    horizon: float

    def __post_init__(self):
        if self.initial_sign not in (1, -1):
            raise ParameterError(f"initial_sign must be +1 or -1, got {self.initial_sign}")
        ep = np.asarray(self.epochs, dtype=float)
        if ep.ndim != 1 or np.any(np.diff(ep) <= 0):
            raise ParameterError("epochs must be strictly ascending")
        if not self.t_start < self.horizon:
            raise ParameterError("t_start must be below the horizon")
        object.__setattr__(self, "epochs", ep)


@dataclass(frozen=True)
class StationaryInit:
    """Sign on the interval ``[-B, A]`` covering the origin and its two delays."""

    delta: object
    A: object
    B: object


# ---------------------------------------------------------------------------
# vectorised path generation


def _draw_signs(spec: ProcessSpec, rng, n: int) -> np.ndarray:
    return np.where(rng.random(n) < spec.p, 1, -1)


def _interval_block(spec: ProcessSpec, first_state: np.ndarray, m: int, rng) -> np.ndarray:
    n = first_state.size
    P = spec.plus.sample(rng, n * m).reshape(n, m)
    M = spec.minus.sample(rng, n * m).reshape(n, m)
    pos = (first_state > 0)[:, None]
    out = np.empty((n, 2 * m))
    out[:, 0::2] = np.where(pos, P, M)
    out[:, 1::2] = np.where(pos, M, P)
    return out


def alternating_epochs(spec: ProcessSpec, first_state, horizon: float, rng, start=0.0) -> np.ndarray:
    """Switch epochs of paths that enter ``first_state`` at time ``start``.

    Returns an ``(n, K)`` array of cumulative switch times. Every row holds at
    least one epoch beyond ``horizon``; shorter rows are padded with ``inf``.
    The origin itself is not included.
    """
    first_state = np.asarray(first_state)
    n = first_state.size
    start = np.broadcast_to(np.asarray(start, dtype=float), (n,))
    cycle = spec.mu_plus + spec.mu_minus
    span = max(float(horizon) - float(start.min()), 0.0)
    m = max(2, int(math.ceil(1.25 * span / cycle)) + 2)
    ep = start[:, None] + np.cumsum(_interval_block(spec, first_state, m, rng), axis=1)
    short = np.nonzero(ep[:, -1] <= horizon)[0]
    blocks = [ep]
    while short.size:
        # blocks have even length, so the state entering each block is unchanged
        ext = _interval_block(spec, first_state[short], m, rng)
        last = blocks[-1][short, -1]
        new = np.full((n, 2 * m), np.inf)
        new[short] = last[:, None] + np.cumsum(ext, axis=1)
        blocks.append(new)
        short = short[new[short, -1] <= horizon]
    return np.hstack(blocks) if len(blocks) > 1 else ep


def nonstationary_epochs(spec: ProcessSpec, n: int, horizon: float, rng, delta=None):
    """Signs and epoch matrix of ``n`` one-sided non-stationary paths."""
    signs = _draw_signs(spec, rng, n) if delta is None else np.full(n, int(delta))
    return signs, alternating_epochs(spec, signs, horizon, rng)


def _sample_init_arrays(spec: ProcessSpec, rng, n: int):
    w_plus = spec.mu_plus / (spec.mu_plus + spec.mu_minus)
    delta = np.where(rng.random(n) < w_plus, 1, -1)
    A = np.empty(n)
    B = np.empty(n)
    for sign in (1, -1):
        idx = np.nonzero(delta == sign)[0]
        if idx.size:
            A[idx], B[idx] = size_biased_split_sampler(spec.law(sign), rng, idx.size)
    return delta, A, B


def stationary_forward_epochs(spec: ProcessSpec, n: int, horizon: float, rng):
    """Signs at the origin and epoch matrix on ``(0, inf)`` of ``n`` stationary paths."""
    delta, A, _ = _sample_init_arrays(spec, rng, n)
    rest = alternating_epochs(spec, -delta, horizon, rng, start=A)
    return delta, np.hstack([A[:, None], rest])


# ---------------------------------------------------------------------------
# single trajectories


def _trim(row: np.ndarray, horizon: float) -> np.ndarray:
    row = row[np.isfinite(row)]
    k = np.searchsorted(row, horizon, side="right")
    return row[: k + 1]


def simulate_nonstationary(spec: ProcessSpec, horizon: float, rng, delta=None) -> Trajectory:
    """One path of ``D(t)`` on ``[0, horizon]`` with the switch at the origin."""
    if not horizon > 0:
        raise ParameterError(f"horizon must be positive, got {horizon}")
    signs, ep = nonstationary_epochs(spec, 1, horizon, rng, delta)
    epochs = np.concatenate([[0.0], _trim(ep[0], horizon)])
    return Trajectory(int(signs[0]), epochs, 0.0, float(horizon))


def simulate_two_sided(spec: ProcessSpec, t_min: float, t_max: float, rng, delta=None) -> Trajectory:
    """Non-stationary path extended to ``[t_min, t_max]``.

    Left of the origin the intervals alternate starting from ``-delta``: the
    backward part is the forward generator started in state ``-delta`` and
    mirrored.
    """
    if not t_min < 0 < t_max:
        raise ParameterError(f"need t_min < 0 < t_max, got ({t_min}, {t_max})")
    signs, fwd = nonstationary_epochs(spec, 1, t_max, rng, delta)
    back = alternating_epochs(spec, -signs, -t_min, rng)
    epochs = np.concatenate([-_trim(back[0], -t_min)[::-1], [0.0], _trim(fwd[0], t_max)])
    return Trajectory(int(signs[0]), epochs, float(t_min), float(t_max))


def sample_stationary_init(spec: ProcessSpec, rng, size=None) -> StationaryInit:
    """``delta`` with ``P(+1) = mu_+/(mu_+ + mu_-)`` and ``(A, B)`` size-biased given ``delta``."""
    n = 1 if size is None else int(size)
    delta, A, B = _sample_init_arrays(spec, rng, n)
    if size is None:
        return StationaryInit(int(delta[0]), float(A[0]), float(B[0]))
    return StationaryInit(delta, A, B)


def simulate_stationary(spec: ProcessSpec, t_min: float, t_max: float, rng) -> Trajectory:
    """Stationary path: sign ``delta`` on ``[-B, A]``, independent
    non-stationary continuations started in ``-delta`` at ``A`` and (mirrored) at ``-B``."""
    if not t_min < t_max:
        raise ParameterError(f"need t_min < t_max, got ({t_min}, {t_max})")
    init = sample_stationary_init(spec, rng)
    d = np.array([-init.delta])
    fwd = alternating_epochs(spec, d, t_max, rng, start=init.A)[0]
    back = alternating_epochs(spec, d, max(-t_min, 0.0), rng, start=init.B)[0]
    right = np.concatenate([[init.A], _trim(fwd, t_max)])
    left = np.concatenate([[init.B], _trim(back, max(-t_min, 0.0))])
    epochs = np.concatenate([-left[::-1], right])
    return Trajectory(init.delta, epochs, float(t_min), float(t_max))


# ---------------------------------------------------------------------------
# path functionals


def _check_span(traj: Trajectory, t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < traj.t_start) or np.any(arr > traj.horizon):
        raise RangeError(f"t outside trajectory span [{traj.t_start}, {traj.horizon}]")
    return arr


def count_switches(traj: Trajectory, t):
    """Switch count ``N(t)``; negative for ``t < 0``."""
    arr = _check_span(traj, t)
    at_zero = np.searchsorted(traj.epochs, 0.0, side="right")
    upto = np.searchsorted(traj.epochs, arr, side="right")
    n = (upto - at_zero).astype(np.int64)
    return n if n.ndim else int(n)


def value_at(traj: Trajectory, t):
    """``D(t) = delta * (-1)^N(t)``; right-continuous at epochs."""
    n = np.asarray(count_switches(traj, t))
    v = traj.initial_sign * np.where(n % 2 == 0, 1, -1)
    return v if v.ndim else int(v)


def delays_at(traj: Trajectory, t: float):
    """``(B(t), A(t)) = (t - S_L(t), S_R(t) - t)``; ``S_L(t) = t`` at an epoch."""
    t = float(_check_span(traj, t))
    i = np.searchsorted(traj.epochs, t, side="right")
    if i == 0:
        raise BoundaryError(f"no switch at or before t={t}")
    if i == traj.epochs.size:
        raise BoundaryError(f"no switch after t={t}")
    return t - traj.epochs[i - 1], traj.epochs[i] - t


# ---------------------------------------------------------------------------
# exact distribution of N(t) by discretised convolution


def _cdf_at_end(masses: np.ndarray, terms: int, n: int) -> float:
    """P(sum <= n h) for a sum of ``terms`` midpoint-discretised variables."""
    # mass index J sits at (J + terms/2) h
    if terms % 2:
        return float(masses[: n - (terms + 1) // 2 + 1].sum())
    edge = n - terms // 2
    if edge < 0:
        return 0.0
    full = float(masses[:edge].sum())
    return full + (0.5 * masses[edge] if edge < masses.size else 0.0)


def _pmf_discretised(spec: ProcessSpec, t: float, k: int, delta: int, n: int) -> float:
    h = t / n
    x = h * np.arange(n + 1)
    inc_p = np.diff(np.asarray(spec.plus.cdf(x), dtype=float))
    inc_m = np.diff(np.asarray(spec.minus.cdf(x), dtype=float))
    inc_d = inc_p if delta > 0 else inc_m
    cycle = np.convolve(inc_p, inc_m)[:n]
    l = k // 2
    G = np.zeros(n)
    G[0] = 1.0
    for _ in range(l):
        G = np.convolve(G, cycle)[:n]
    G_d = np.convolve(G, inc_d)[:n]
    c_even = _cdf_at_end(G, 2 * l, n)
    c_odd = _cdf_at_end(G_d, 2 * l + 1, n)
    if k % 2 == 0:
        return c_even - c_odd
    G_next = np.convolve(G, cycle)[:n]
    return c_odd - _cdf_at_end(G_next, 2 * l + 2, n)


def pmf_N_oracle(spec: ProcessSpec, t: float, k: int, delta: int, grid_step=None) -> float:
    """``P(N(t) = k | delta)`` from the renewal convolution identities.

    With ``G_l`` the ``l``-fold convolution of the cycle CDF ``F_+ * F_-``:
    ``P(N = 2l) = G_l(t) - (G_l * F_delta)(t)`` and
    ``P(N = 2l+1) = (G_l * F_delta)(t) - G_{l+1}(t)``. CDF increments on a
    uniform grid (default step ``t/2048``) are placed at interval midpoints
    and convolved. A warning is issued when halving the resolution changes
    the result by more than the result itself.
    """
    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    if k < 0 or int(k) != k:
        raise ParameterError(f"k must be a non-negative integer, got {k}")
    if delta not in (1, -1):
        raise ParameterError(f"delta must be +1 or -1, got {delta}")
    step = t / 2048 if grid_step is None else float(grid_step)
    if not step > 0:
        raise ParameterError("grid_step must be positive")
    n = max(2, int(round(t / step)))
    fine = _pmf_discretised(spec, t, int(k), delta, n)
    coarse = _pmf_discretised(spec, t, int(k), delta, max(1, n // 2))
    if abs(fine - coarse) > abs(fine):
        warnings.warn(
            f"pmf_N_oracle: discretisation error dominates for k={k} at t={t} "
            f"(estimate {abs(fine - coarse):.2e} vs value {fine:.2e}); reduce grid_step",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(fine)
