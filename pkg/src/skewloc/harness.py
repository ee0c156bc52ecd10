"""Monte Carlo experiments: CLT marginals, convergence rate and consistency.

Paths are simulated in fixed-size chunks, each chunk using the per-path
random streams ``RandomStream(seed', path_index)``. Chunks are dispatched to a
process pool and collected in path order, so every result is bit-identical
for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .analytic import ProcessParams
from .asymptotics import (
    DEFAULT_SERIES,
    SeriesConfig,
    closed_form_constants,
    constants_for,
)
from .errors import ConfigError, ExperimentError
from .kernels import builtin_kernel
from .quadrature import DEFAULT_QUAD, QuadratureConfig
from .sampler import RandomStream, iter_path_blocks

ESTIMATOR_KERNELS = {"weighted": "h1x2", "crossing": "h0"}
CONSTANT_SOURCES = ("closed_form", "numeric", "supplied")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``n`` is the sampling frequency (observations per unit time); a path on
    ``[0, T]`` has ``round(n * T)`` steps. ``estimator`` is ``weighted``,
    ``crossing`` or a built-in kernel name.
    """

    params: ProcessParams
    estimator: str = "weighted"
    n: int | tuple = 4096
    n_paths: int = 2000
    seed: int = 1
    T: float = 1.0
    t_eval: float | None = None
    x0: float | None = None
    localtime_floor: float = 1e-3
    constants: str = "closed_form"
    c: float | None = None
    K: float | None = None
    chunk_paths: int = 250

    def __post_init__(self):
        ns = self.n_list
        if any(int(v) != v or v < 2 for v in ns):
            raise ConfigError("n must be an integer >= 2")
        if self.n_paths < 2:
            raise ConfigError("n_paths must be >= 2")
        if not self.T > 0:
            raise ConfigError("T must be > 0")
        if not (0 < self.eval_time <= self.T):
            raise ConfigError("t_eval must lie in (0, T]")
        if not self.localtime_floor >= 0:
            raise ConfigError("localtime_floor must be >= 0")
        if self.constants not in CONSTANT_SOURCES:
            raise ConfigError(f"constants must be one of {CONSTANT_SOURCES}")
        if self.constants == "supplied" and (self.c is None or self.K is None):
            raise ConfigError("constants = supplied requires both c and K")
        if self.chunk_paths < 1:
            raise ConfigError("chunk_paths must be >= 1")
        self.kernel_name  # validates the estimator name

    @property
    def n_list(self) -> tuple:
        return tuple(int(v) for v in self.n) if isinstance(self.n, (tuple, list)) else (int(self.n),)

    @property
    def eval_time(self) -> float:
        return self.T if self.t_eval is None else float(self.t_eval)

    @property
    def start(self) -> float:
        return self.params.threshold if self.x0 is None else float(self.x0)

    @property
    def kernel_name(self) -> str:
        name = ESTIMATOR_KERNELS.get(self.estimator, self.estimator)
        builtin_kernel(name, self.params.beta if self.params.is_skew else None)
        return name

    def steps_for(self, n: int) -> int:
        steps = int(round(n * self.T))
        if not math.isclose(steps, n * self.T, rel_tol=0, abs_tol=1e-9):
            raise ConfigError("n * T must be an integer")
        return steps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.describe()
        d["n"] = list(self.n_list) if isinstance(self.n, (tuple, list)) else int(self.n)
        return d


@dataclass
class ZSampleSet:
    """Normalised CLT statistics, one per retained path."""

    z: np.ndarray
    excluded_count: int
    n: int
    c: float
    K: float
    ks: float = float("nan")
    mean: float = float("nan")
    variance: float = float("nan")
    constants_source: str = ""

    def summary(self) -> dict:
        return {
            "n": self.n,
            "paths_used": int(self.z.size),
            "excluded": self.excluded_count,
            "c": self.c,
            "K": self.K,
            "constants_source": self.constants_source,
            "ks": self.ks,
            "mean": self.mean,
            "variance": self.variance,
        }


@dataclass
class RateTable:
    """RMSE of ``eps_{n,t} - c L_t`` per ``n`` and the fitted log-log slope."""

    rows: list  # (n, rmse, M)
    slope: float
    slope_se: float
    c: float = float("nan")

    def summary(self) -> dict:
        return {
            "rows": [{"n": int(n), "rmse": float(r), "paths": int(m)} for n, r, m in self.rows],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "c": self.c,
        }


@dataclass
class ConsistencyTable:
    """Median over paths of the uniform error ``max_k |est_k - c L_k|`` per ``n``."""

    rows: list  # (n, median, M)
    c: float

    @property
    def medians(self) -> list:
        return [r[1] for r in self.rows]

    def strictly_decreasing(self) -> bool:
        m = self.medians
        return all(b < a for a, b in zip(m, m[1:]))

    def summary(self) -> dict:
        return {
            "rows": [{"n": int(n), "median_sup_error": float(v), "paths": int(m)} for n, v, m in self.rows],
            "c": self.c,
            "strictly_decreasing": self.strictly_decreasing(),
        }


# ---------------------------------------------------------------------------
# Statistics helpers
# ---------------------------------------------------------------------------


def ks_distance(samples, cdf: Callable = stats.norm.cdf) -> float:
    """Kolmogorov--Smirnov distance between the empirical CDF and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise ValueError("ks_distance needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def fit_rate(ns: Sequence[float], rmses: Sequence[float]):
    """Least-squares slope (and its standard error) of ``log rmse`` on ``log n``."""
    ns = np.asarray(ns, dtype=float)
    rmses = np.asarray(rmses, dtype=float)
    if np.unique(ns).size < 3:
        raise ExperimentError("rate fit needs at least three distinct n")
    if np.any(rmses <= 0):
        raise ExperimentError("rate fit needs positive RMSE values")
    res = stats.linregress(np.log(ns), np.log(rmses))
    return float(res.slope), float(res.stderr)


# ---------------------------------------------------------------------------
# Chunk simulation (runs in worker processes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ChunkTask:
    params: ProcessParams
    kernel_name: str
    x0: float
    T: float
    n: int
    n_steps: int
    record_step: int
    seed: int
    ids: tuple
    sup_scale: float | None = None


def _run_chunk(task: _ChunkTask):
    """Return ``(eps_at_t, L_at_t, sup_error or None)`` for a chunk of paths."""
    p = task.params
    kernel = builtin_kernel(task.kernel_name, p.beta if p.is_skew else None)
    streams = [RandomStream(task.seed, i) for i in task.ids]
    M = len(streams)
    sqrt_n = math.sqrt(task.n)
    prev = np.full(M, task.x0 - p.threshold)
    eps_sum = np.zeros(M)
    lt = np.zeros(M)
    eps_rec = lt_rec = None
    sup = np.zeros(M) if task.sup_scale is not None else None
    done = 0
    for pos, inc in iter_path_blocks(p, task.x0, task.T, task.n_steps, streams):
        b = pos.shape[1]
        left = np.concatenate([prev[:, None], pos[:, :-1]], axis=1)
        terms = kernel(sqrt_n * left, sqrt_n * pos) / sqrt_n
        if eps_rec is None and done + b >= task.record_step:
            k = task.record_step - done
            eps_rec = eps_sum + terms[:, :k].sum(axis=1)
            lt_rec = lt + inc[:, :k].sum(axis=1)
        if sup is not None:
            e_path = eps_sum[:, None] + np.cumsum(terms, axis=1)
            l_path = lt[:, None] + np.cumsum(inc, axis=1)
            sup = np.maximum(sup, np.max(np.abs(e_path - task.sup_scale * l_path), axis=1))
        eps_sum = eps_sum + terms.sum(axis=1)
        lt = lt + inc.sum(axis=1)
        prev = pos[:, -1]
        done += b
    return eps_rec, lt_rec, sup


def _level_seed(seed: int, level: int) -> int:
    """Independent key per resolution level (levels > 0 only used by multi-n runs)."""
    if level == 0:
        return int(seed) & 0xFFFFFFFFFFFFFFFF
    return (int(seed) * 0x9E3779B97F4A7C15 + level) & 0xFFFFFFFFFFFFFFFF


def _simulate(config: ExperimentConfig, n: int, level: int, workers: int, sup_scale=None):
    n_steps = config.steps_for(n)
    record = int(round(config.eval_time * n))
    seed = _level_seed(config.seed, level)
    ids = list(range(config.n_paths))
    tasks = [
        _ChunkTask(
            config.params,
            config.kernel_name,
            config.start,
            config.T,
            n,
            n_steps,
            record,
            seed,
            tuple(ids[i : i + config.chunk_paths]),
            sup_scale,
        )
        for i in range(0, len(ids), config.chunk_paths)
    ]
    if workers <= 1 or len(tasks) == 1:
        results = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, tasks))
    eps = np.concatenate([r[0] for r in results])
    lt = np.concatenate([r[1] for r in results])
    sup = np.concatenate([r[2] for r in results]) if sup_scale is not None else None
    return eps, lt, sup


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


def resolve_constants(
    config: ExperimentConfig,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
    need_K: bool = True,
):
    """Return ``(c, K, source)`` according to ``config.constants``."""
    p = config.params
    if config.constants == "supplied":
        return float(config.c), float(config.K), "supplied"
    if config.constants == "closed_form" and config.estimator in ESTIMATOR_KERNELS:
        kind = f"{config.estimator}_{'sbm' if p.is_skew else 'obm'}"
        cf = closed_form_constants(kind, p, series, quad)
        if cf.clt_constant is not None or not need_K:
            return cf.limit_constant, cf.clt_constant, cf.source
    rep = constants_for(p, config.kernel_name, series, quad)
    return rep.limit_constant, rep.clt_constant, "numeric"


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def clt_statistics(eps, lt, n: int, c: float, K: float, floor: float, T: float = 1.0):
    """Normalised statistics ``n^{1/4}(eps - c L)/sqrt(K L)`` and the exclusion count."""
    keep = lt >= floor if floor > 0 else lt > 0
    if not np.any(keep):
        raise ExperimentError("all paths were excluded by the local-time floor")
    z = n**0.25 * (eps[keep] - c * lt[keep]) / np.sqrt(K * lt[keep])
    return z, int(np.count_nonzero(~keep))


def run_clt_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> ZSampleSet:
    """Simulate ``n_paths`` paths and test the normalised statistic against N(0, 1)."""
    if len(config.n_list) != 1:
        raise ConfigError("the CLT experiment takes a single n")
    n = config.n_list[0]
    c, K, source = resolve_constants(config, series, quad)
    if not K > 0:
        raise ExperimentError(f"variance constant must be positive, got {K}")
    eps, lt, _ = _simulate(config, n, 0, workers)
    z, excluded = clt_statistics(eps, lt, n, c, K, config.localtime_floor)
    return ZSampleSet(
        z=z,
        excluded_count=excluded,
        n=n,
        c=float(c),
        K=float(K),
        ks=ks_distance(z),
        mean=float(np.mean(z)),
        variance=float(np.var(z, ddof=1)),
        constants_source=source,
    )


def run_rate_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> RateTable:
    """RMSE of ``eps_{n,t} - c L_t`` across ``n`` and its log-log slope."""
    ns = sorted(config.n_list)
    if len(set(ns)) < 3:
        raise ExperimentError("rate experiment needs at least three distinct n")
    c, _, _ = resolve_constants(config, series, quad, need_K=False)
    rows = []
    for level, n in enumerate(ns, start=1):
        eps, lt, _ = _simulate(config, n, level, workers)
        rows.append((n, float(np.sqrt(np.mean((eps - c * lt) ** 2))), config.n_paths))
    slope, se = fit_rate([r[0] for r in rows], [r[1] for r in rows])
    return RateTable(rows, slope, se, float(c))


def run_consistency_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    c: float | None = None,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> ConsistencyTable:
    """Median uniform error of the estimator against ``c L`` for each ``n``.

    ``c`` overrides the configured constant (e.g. to check miscalibration).
    """
    ns = sorted(config.n_list)
    if c is None:
        c, _, _ = resolve_constants(config, series, quad, need_K=False)
    rows = []
    for level, n in enumerate(ns, start=1):
        _, _, sup = _simulate(config, n, level, workers, sup_scale=float(c))
        rows.append((n, float(np.median(sup)), config.n_paths))
    return ConsistencyTable(rows, float(c))


# ---------------------------------------------------------------------------
# Sampler exactness checks
# ---------------------------------------------------------------------------

SAMPLER_STEP_CASES = (
    # (label, params, x, dt)
    ("sbm beta=0.5 x=0 dt=1", ProcessParams.skew(0.5), 0.0, 1.0),
    ("sbm beta=-0.7 x=1.3 dt=0.25", ProcessParams.skew(-0.7), 1.3, 0.25),
    ("sbm beta=0 x=2 dt=1", ProcessParams.skew(0.0), 2.0, 1.0),
    ("obm sigma=(1,1) x=0.3 dt=1", ProcessParams.oscillating(1.0, 1.0), 0.3, 1.0),
    ("obm sigma=(1,2) x=0.5 dt=0.5", ProcessParams.oscillating(1.0, 2.0), 0.5, 0.5),
    ("obm sigma=(2,3) x=-0.4 dt=1", ProcessParams.oscillating(2.0, 3.0), -0.4, 1.0),
)


def joint_bin_probabilities(density: Callable, y_edges, l_edges, order: int = 8) -> np.ndarray:
    """Probabilities of the rectangles ``[y_i, y_{i+1}) x [l_j, l_{j+1})`` under ``density(y, l)``.

    Each rectangle is integrated with a tensor Gauss--Legendre rule.
    """
    t, w = np.polynomial.legendre.leggauss(order)
    y_edges = np.asarray(y_edges, dtype=float)
    l_edges = np.asarray(l_edges, dtype=float)
    yh, ym = 0.5 * np.diff(y_edges), 0.5 * (y_edges[1:] + y_edges[:-1])
    lh, lm = 0.5 * np.diff(l_edges), 0.5 * (l_edges[1:] + l_edges[:-1])
    Y = ym[:, None, None, None] + yh[:, None, None, None] * t[None, None, :, None]
    L = lm[None, :, None, None] + lh[None, :, None, None] * t[None, None, None, :]
    vals = density(Y, L) * (w[:, None] * w[None, :])[None, None]
    return vals.sum(axis=(2, 3)) * yh[:, None] * lh[None, :]


def joint_chi_square(y, ell, density: Callable, y_edges, l_edges, min_expected: float = 5.0):
    """Pearson chi-square of 2-d binned samples against ``density``.

    Rectangles with expected count below ``min_expected`` are pooled together
    with the region outside the grid into one remainder cell.
    """
    probs = joint_bin_probabilities(density, y_edges, l_edges)
    counts, _, _ = np.histogram2d(y, ell, bins=[y_edges, l_edges])
    m = len(y)
    expected = probs * m
    keep = expected >= min_expected
    obs = list(counts[keep])
    exp = list(expected[keep])
    obs.append(m - sum(obs))
    exp.append(m - sum(exp))
    obs, exp = np.asarray(obs), np.asarray(exp)
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), int(obs.size)


def run_sampler_checks(seed: int = 1, draws: int = 200_000, joint_draws: int = 1_000_000) -> dict:
    """One-step KS tests against the analytic transition CDF and joint chi-square tests."""
    from .analytic import joint_density_bm, joint_density_obm, transition_cdf
    from .sampler import obm_step, sbm_step

    out = {"draws": draws, "joint_draws": joint_draws, "steps": [], "joint": []}
    for i, (label, p, x, dt) in enumerate(SAMPLER_STEP_CASES):
        stream = RandomStream(seed, i)
        if p.is_skew:
            y, _ = sbm_step(p.beta, dt, x, stream, size=draws)
        else:
            y, _ = obm_step(p, dt, x, stream, size=draws)
        ks = ks_distance(y, lambda v: transition_cdf(p, dt, x, v))
        out["steps"].append({"case": label, "ks": ks})

    edges = np.linspace(0.0, 3.0, 13)
    stream = RandomStream(seed, 100)
    y, ell = sbm_step(0.0, 1.0, 0.0, stream, size=joint_draws)
    chi2, pval, cells = joint_chi_square(
        np.abs(y), ell, lambda a, l: 2.0 * joint_density_bm(1.0, a, l), edges, edges
    )
    out["joint"].append({"case": "bm (|Y_1|, L_1) from 0", "chi2": chi2, "p_value": pval, "cells": cells})

    osc = ProcessParams.oscillating(1.0, 2.0)
    stream = RandomStream(seed, 101)
    y, ell = obm_step(osc, 1.0, 0.0, stream, size=joint_draws)
    y_edges = np.linspace(-3.0, 6.0, 19)
    l_edges = np.linspace(0.0, 4.0, 11)
    dens = lambda v, l: joint_density_obm(osc, 1.0, np.where(v == 0, 1e-300, v), l)
    chi2, pval, cells = joint_chi_square(y, ell, dens, y_edges, l_edges)
    out["joint"].append({"case": "obm(1,2) (Y_1, L_1) from 0", "chi2": chi2, "p_value": pval, "cells": cells})
    return out
