"""Monte Carlo estimates of process characteristics with standard errors.

Every path is evaluated on the whole time grid (common random numbers), so
estimated curves are smooth in ``t`` and can be differentiated. Paths are
generated in fixed-size chunks, each with its own child stream spawned from
the caller's generator; results therefore do not depend on the number of
worker threads.

Sums over paths use an epoch histogram instead of per-path lookups: a path
with sign ``delta`` jumps by ``-2 delta (-1)^k`` at its ``k``-th epoch, so the
sum of ``D(t)`` over paths is ``sum(delta)`` plus the cumulative jumps on the
grid.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_coeffs, savgol_filter

from .errors import ParameterError, ResolutionError
from .laplace import GridFunction
from .process import ProcessSpec, nonstationary_epochs, stationary_forward_epochs

CHUNK = 50_000
KINDS = ("E_plus", "E_minus", "E", "P_plus", "P_minus", "R", "stationary_mean")


@dataclass(frozen=True)
class EstimateTable:
    grid: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n_paths: int
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown estimate kind {self.kind!r}")
        for name in ("grid", "mean", "se"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.grid) <= 0):
            raise ParameterError("estimate grid must be strictly ascending")
        if np.any(self.se < 0):
            raise ParameterError("standard errors must be non-negative")

    def tail_mean(self, fraction: float = 0.1):
        """Mean and standard error of the curve over the last ``fraction`` of the grid."""
        k = max(1, int(round(fraction * self.grid.size)))
        # correlated along t, so the pointwise SE is not reduced by averaging
        return float(self.mean[-k:].mean()), float(self.se[-k:].mean())

    def to_grid_function(self, tail=None) -> GridFunction:
        tail = self.tail_mean()[0] if tail is None else tail
        return GridFunction(self.grid, self.mean, tail=tail, se=self.se)


def _check_n(n_paths: int):
    if int(n_paths) < 100:
        raise ParameterError(f"n_paths must be at least 100, got {n_paths}")


def _check_grid(t_grid, name="t_grid"):
    g = np.asarray(t_grid, dtype=float)
    if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0) or g[0] < 0:
        raise ParameterError(f"{name} must be ascending and non-negative")
    return g


def _map_chunks(work, rng, n_paths: int, threads: int = 1):
    sizes = [CHUNK] * (n_paths // CHUNK)
    if n_paths % CHUNK:
        sizes.append(n_paths % CHUNK)
    streams = rng.spawn(len(sizes))
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, sizes, streams, offsets))
    return [work(m, r, o) for m, r, o in zip(sizes, streams, offsets)]


def _jump_sums(t_grid, signs, epochs, weights=None, groups=None, n_groups=1):
    """Per-group sums over paths of ``w * D(t)`` on ``t_grid``; shape ``(n_groups, G)``."""
    G = t_grid.size
    w = np.ones(signs.size) if weights is None else weights
    grp = np.zeros(signs.size, dtype=np.int64) if groups is None else groups
    k = np.arange(epochs.shape[1])
    jumps = -2.0 * (w * signs)[:, None] * np.where(k % 2 == 0, 1.0, -1.0)[None, :]
    idx = np.searchsorted(t_grid, epochs, side="left")
    flat = grp[:, None] * (G + 1) + idx
    hist = np.bincount(flat.ravel(), weights=jumps.ravel(), minlength=n_groups * (G + 1))
    hist = hist.reshape(n_groups, G + 1)[:, :G]
    base = np.bincount(grp, weights=w * signs, minlength=n_groups)
    return base[:, None] + np.cumsum(hist, axis=1)


def _sign_table(sums, n, grid, kind):
    mean = sums / n
    se = np.sqrt(np.clip(1.0 - mean**2, 0.0, None) / (n - 1))
    return EstimateTable(grid, mean, se, n, kind)


def estimate_E(spec: ProcessSpec, delta, t_grid, n_paths: int, rng, threads: int = 1) -> EstimateTable:
    """``E_delta(t)`` by averaging ``D(t)`` over non-stationary paths.

    ``delta=None`` draws the initial sign with probability ``p`` and estimates
    the unconditional mean ``p E_+ + (1 - p) E_-``.
    """
    _check_n(n_paths)
    grid = _check_grid(t_grid)
    if delta not in (1, -1, None):
        raise ParameterError(f"delta must be +1, -1 or None, got {delta}")
    horizon = float(grid[-1])

    def work(m, r, offset):
        signs, ep = nonstationary_epochs(spec, m, horizon, r, delta)
        return _jump_sums(grid, signs, ep)[0]

    sums = np.sum(_map_chunks(work, rng, int(n_paths), threads), axis=0)
    kind = {1: "E_plus", -1: "E_minus", None: "E"}[delta]
    return _sign_table(sums, int(n_paths), grid, kind)


def estimate_P(spec: ProcessSpec, delta: int, t_grid, n_paths: int, rng, threads: int = 1) -> EstimateTable:
    """``P_delta(t) = (1 + E_delta(t)) / 2``."""
    if delta not in (1, -1):
        raise ParameterError(f"delta must be +1 or -1, got {delta}")
    e = estimate_E(spec, delta, t_grid, n_paths, rng, threads)
    kind = "P_plus" if delta > 0 else "P_minus"
    return EstimateTable(e.grid, (1 + e.mean) / 2, e.se / 2, e.n_paths, kind)


def estimate_stationary_mean(spec: ProcessSpec, t_grid, n_paths: int, rng, threads: int = 1) -> EstimateTable:
    """``E D~(t)`` on ``t >= 0``; constant ``gamma`` in theory."""
    _check_n(n_paths)
    grid = _check_grid(t_grid)

    def work(m, r, offset):
        signs, ep = stationary_forward_epochs(spec, m, float(grid[-1]), r)
        return _jump_sums(grid, signs, ep)[0]

    sums = np.sum(_map_chunks(work, rng, int(n_paths), threads), axis=0)
    return _sign_table(sums, int(n_paths), grid, "stationary_mean")


def estimate_R(
    spec: ProcessSpec, lag_grid, n_paths: int, u: float, rng, threads: int = 1, n_batches: int = 20
) -> EstimateTable:
    """Sample covariance of ``D~(u)`` and ``D~(u + t)`` over stationary paths.

    Standard errors come from batch means: paths are split into
    ``n_batches`` groups by index and the spread of the per-group covariances
    is scaled by ``1/sqrt(n_batches)``.
    """
    _check_n(n_paths)
    lags = _check_grid(lag_grid, "lag_grid")
    if u < 0:
        raise ParameterError(f"base point u must be non-negative, got {u}")
    n_paths = int(n_paths)
    n_batches = int(min(n_batches, n_paths // 10))
    grid = u + lags

    def work(m, r, offset):
        signs, ep = stationary_forward_epochs(spec, m, float(grid[-1]), r)
        d_u = signs * np.where(np.sum(ep <= u, axis=1) % 2 == 0, 1, -1)
        groups = ((offset + np.arange(m)) * n_batches) // n_paths
        return (
            np.bincount(groups, weights=d_u, minlength=n_batches),
            np.bincount(groups, minlength=n_batches),
            _jump_sums(grid, signs, ep, groups=groups, n_groups=n_batches),
            _jump_sums(grid, signs, ep, weights=d_u, groups=groups, n_groups=n_batches),
        )

    parts = _map_chunks(work, rng, n_paths, threads)
    sums_x, counts, sums_y, sums_xy = (np.sum([p[i] for p in parts], axis=0) for i in range(4))

    def cov(sx, sy, sxy, n):
        return sxy / n - (sx / n) * (sy / n)

    total = cov(sums_x.sum(), sums_y.sum(0), sums_xy.sum(0), counts.sum())
    per_batch = cov(sums_x[:, None], sums_y, sums_xy, counts[:, None])
    se = per_batch.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return EstimateTable(lags, total, se, n_paths, "R")


@dataclass(frozen=True)
class PmfTable:
    k: np.ndarray
    prob: np.ndarray
    se: np.ndarray
    n_paths: int
    beyond: float


def estimate_pmf_N(spec: ProcessSpec, t: float, k_max: int, n_paths: int, delta: int, rng, threads: int = 1) -> PmfTable:
    """Empirical pmf of ``N(t)`` given ``delta`` for ``k = 0..k_max``.

    ``beyond`` is the empirical mass above ``k_max``.
    """
    _check_n(n_paths)
    if k_max < 0:
        raise ParameterError("k_max must be non-negative")
    if not t > 0:
        raise ParameterError("t must be positive")

    def work(m, r, offset):
        _, ep = nonstationary_epochs(spec, m, float(t), r, delta)
        return np.bincount(np.sum(ep <= t, axis=1), minlength=k_max + 2)

    counts = np.zeros(k_max + 2)
    for c in _map_chunks(work, rng, int(n_paths), threads):
        counts[: k_max + 1] += c[: k_max + 1]
        counts[k_max + 1] += c[k_max + 1:].sum()
    p = counts / n_paths
    se = np.sqrt(p * (1 - p) / n_paths)
    return PmfTable(np.arange(k_max + 1), p[: k_max + 1], se[: k_max + 1], int(n_paths), float(p[-1]))


def smooth_derivative(table: EstimateTable, window: int = 9, polyorder: int = 2) -> GridFunction:
    """Savitzky-Golay derivative of the mean curve on a uniform grid.

    Pointwise standard errors are propagated through the filter weights as if
    grid values were independent. The result has tail 0.

    Raises
    ------
    ResolutionError
        If the grid has fewer than 64 points or is not uniform.
    """
    t = table.grid
    if t.size < 64:
        raise ResolutionError(f"derivative needs at least 64 grid points, got {t.size}")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-6):
        raise ResolutionError("derivative needs a uniform grid")
    if window % 2 == 0 or window <= polyorder or window > t.size:
        raise ParameterError("window must be odd, larger than polyorder and at most the grid size")
    step = float(h[0])
    d = savgol_filter(table.mean, window, polyorder, deriv=1, delta=step, mode="interp")
    half = window // 2
    # interior rows share one stencil; edge rows come from the end fits
    stencil = savgol_coeffs(window, polyorder, deriv=1, delta=step, use="dot")
    edge = savgol_filter(np.eye(window), window, polyorder, deriv=1, delta=step, axis=0, mode="interp")
    var = table.se**2
    out_var = np.correlate(var, stencil**2, mode="same")
    out_var[:half] = (edge[:half] ** 2) @ var[:window]
    out_var[-half:] = (edge[half + 1:] ** 2) @ var[-window:]
    return GridFunction(t, d, tail=0.0, se=np.sqrt(out_var))

