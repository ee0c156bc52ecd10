"""High-frequency statistics and local-time estimators.

For observations ``X_0, X_1, ...`` at spacing ``1/n`` the statistic

    eps_{n,t} = n^{-1/2} sum_{k < floor(n t)} f(sqrt(n)(X_k - r), sqrt(n)(X_{k+1} - r))

pairs each observation with the *next* one. The two estimators are special
cases:

* crossing estimator: ``sqrt(T/N) * #{i : (xi_i - r)(xi_{i+1} - r) < 0}``
  (kernel ``h0``);
* weighted estimator: ``2 sum 1{crossing} |xi_{i+1} - r|`` (kernel ``2 h1``).

A grid value exactly equal to ``r`` never counts as a crossing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import BivariateKernel, opposite_signs
from .sampler import PathSample


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function on a time grid.

    ``values[i]`` holds on ``[grid[i], grid[i+1])``; before ``grid[0]`` the
    function is undefined and evaluation raises.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # Tolerate round-off in t = k/n by snapping to the grid.
        idx = np.searchsorted(self.grid, t + 1e-12 * np.maximum(1.0, np.abs(t)), side="right") - 1
        if np.any(idx < 0):
            raise ValueError("evaluation time precedes the grid")
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    @property
    def final(self) -> float:
        return float(self.values[-1])


def _kernel_func(kernel):
    return kernel.__call__ if isinstance(kernel, BivariateKernel) else kernel


def pair_terms(observations, r: float, kernel, n: float) -> np.ndarray:
    """Kernel values ``f(sqrt(n)(X_k - r), sqrt(n)(X_{k+1} - r))`` for each step.

    Works along the last axis, so 2-d arrays of paths are supported.
    """
    obs = np.asarray(observations, dtype=float)
    s = np.sqrt(n)
    c = obs - r
    return np.asarray(_kernel_func(kernel)(s * c[..., :-1], s * c[..., 1:]), dtype=float)


def epsilon_stat(observations, r: float, kernel, n: float, T: float | None = None) -> StepFunction:
    """The statistic ``eps_{n,t}`` on the observation grid.

    Parameters
    ----------
    observations : array_like
        Values at spacing ``1/n``, starting at time 0.
    n : float
        Sampling frequency (observations per unit time).
    T : float, optional
        Horizon; if given it must match ``(len(observations) - 1)/n``.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 1 or obs.size < 2:
        raise ValueError("need a 1-d array of at least two observations")
    if not n >= 1:
        raise ValueError("n must be >= 1")
    m = obs.size - 1
    if T is not None and not np.isclose(T * n, m):
        raise ValueError(f"observations length {obs.size} does not match T*n + 1 = {T * n + 1:g}")
    terms = pair_terms(obs, r, kernel, n)
    values = np.concatenate([[0.0], np.cumsum(terms)]) / np.sqrt(n)
    return StepFunction(np.arange(m + 1) / n, values)


def _crossings(obs: np.ndarray, r: float) -> np.ndarray:
    c = obs - r
    return opposite_signs(c[..., :-1], c[..., 1:])


def _check_obs(observations, N):
    obs = np.asarray(observations, dtype=float)
    if N < 1:
        raise ValueError("N must be >= 1")
    if obs.ndim != 1 or obs.size != N + 1:
        raise ValueError(f"expected N + 1 = {N + 1} observations, got {obs.size}")
    return obs


def crossing_estimator(observations, r: float, T: float, N: int) -> StepFunction:
    """``sqrt(T/N)`` times the number of threshold crossings up to each grid time."""
    obs = _check_obs(observations, N)
    counts = np.concatenate([[0], np.cumsum(_crossings(obs, r))])
    return StepFunction(np.arange(N + 1) * (T / N), np.sqrt(T / N) * counts)


def weighted_estimator(observations, r: float, T: float, N: int) -> StepFunction:
    """``2 sum 1{crossing} |xi_{i+1} - r|`` up to each grid time (no prefactor)."""
    obs = _check_obs(observations, N)
    terms = 2.0 * _crossings(obs, r) * np.abs(obs[1:] - r)
    return StepFunction(np.arange(N + 1) * (T / N), np.concatenate([[0.0], np.cumsum(terms)]))


def reference_local_time(path: PathSample, t) -> float:
    """Exact local time accrued over the steps completed by time ``t``."""
    t = float(t)
    if not (0.0 <= t <= path.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {path.T}]")
    k = int(np.floor(t / path.dt + 1e-9))
    k = min(k, path.n_steps)
    # Cumulative sums are monotone in floating point; pairwise np.sum is not.
    return float(path.local_time[k])


def sup_error(estimate: StepFunction, reference: Callable | np.ndarray, scale: float) -> float:
    """``max_k |estimate(t_k) - scale * reference(t_k)|`` over the estimate's grid.

    ``reference`` is either a callable of time or an array of values on the grid.
    """
    if callable(reference):
        ref = np.asarray(reference(estimate.grid), dtype=float)
    else:
        ref = np.asarray(reference, dtype=float)
    if ref.shape != estimate.values.shape:
        raise ValueError("reference does not match the estimate grid")
    if estimate.values.size == 0:
        return 0.0
    return float(np.max(np.abs(estimate.values - scale * ref)))


# -- streaming accumulators used by the Monte Carlo harness -----------------


class StreamingStatistic:
    """Accumulate ``sum f(sqrt(n) X_k, sqrt(n) X_{k+1})`` over blocks of paths.

    Works on centered positions; records the value at a chosen step index.
    """

    def __init__(self, kernel, n: float, x0, record_step: int):
        self.f = _kernel_func(kernel)
        self.sqrt_n = float(np.sqrt(n))
        self.prev = np.array(x0, dtype=float)
        self.total = np.zeros_like(self.prev)
        self.steps = 0
        self.record_step = record_step
        self.recorded = None

    def update(self, positions: np.ndarray):
        prev = np.concatenate([self.prev[:, None], positions[:, :-1]], axis=1)
        terms = self.f(self.sqrt_n * prev, self.sqrt_n * positions)
        b = positions.shape[1]
        if self.recorded is None and self.steps + b >= self.record_step:
            upto = self.record_step - self.steps
            self.recorded = (self.total + terms[:, :upto].sum(axis=1)) / self.sqrt_n
        self.total = self.total + terms.sum(axis=1)
        self.steps += b
        self.prev = positions[:, -1]

    def value(self):
        return self.total / self.sqrt_n
