"""Limit and variance constants of the high-frequency central limit theorems.

For an oscillating process and an admissible kernel ``h`` the statistic
``eps_{n,t}`` converges to ``c L_t`` with ``c = <lambda, H_h>`` and the
fluctuations ``n^{1/4}(eps - c L)`` converge to ``sqrt(K) B_{L_t}``.  With
``s = 2 s- s+/(s- + s+)`` the variance constant is a sum of four terms

(i)   ``<lambda, H_{h^2} + 2 H_{h, Q}>``
(ii)  ``s (8 / (3 sqrt(2 pi))) c^2``
(iii) ``-2 sqrt(2/pi) s c int w(y) Q(sigma(y) y) dy / sigma(y)``,
      ``w(y) = exp(-y^2/2) - sqrt(2 pi)|y| Phi(-|y|)``
(iv)  ``-2 c s^2 Triple``, where ``Triple`` is the integral over
      ``(x, t, y)`` of ``|x| phi(x) Phi(-|y|) sqrt(1/t - 1) h(sigma(x) x sqrt(t),
      sigma(y) y sqrt(1 - t)) / (sigma(x) sigma(y))``

and ``Q = sum_{j >= 0} Q_j kappa`` is the semigroup series of the centered
transform ``kappa = H_h - c H_g``.

Numerical strategy
------------------
All spatial integrals use one composite Gauss--Legendre grid in the scaled
variable ``u = y / sigma(y)`` (panels of width 0.5, eight points, split at the
threshold), on which every integrand is a smooth Gaussian-type function.
The series terms decay like ``j^{-3/2}``; after truncation at ``J`` the
remainder is replaced by its integral from ``J + 1/2`` to infinity, which has a
closed form through the time-integrated heat kernel, plus the first
Euler--Maclaurin correction. In the triple integral the substitution
``t = sin^2(theta)`` turns ``sqrt(1/t - 1) dt`` into ``2 cos^2(theta) d theta``
and removes both endpoint singularities.

Skew processes are handled through the oscillating companion
``s- = 1 + beta, s+ = 1 - beta`` and the kernel
``h(x, y) = f(x/sigma(x), y/sigma(y))``; since ``L(Y) = (1 - beta^2) L(X)`` both
constants pick up the factor ``1 - beta^2``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .analytic import (
    SQRT_2_OVER_PI,
    SQRT_2PI,
    ProcessParams,
    gaussian_kernel,
    std_normal_pdf,
    transform_H,
)
from .errors import ConfigError, NumericalError, SeriesError
from .kernels import (
    BivariateKernel,
    abs_increment_kernel,
    builtin_kernel,
    crossing_kernel,
    weighted_crossing_kernel,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, adaptive, interval_rule

MAXWELL_MEAN_FACTOR = 8.0 / (3.0 * SQRT_2PI)  # <lambda, E[L_1^2 | Y_0 = .]> for unit scales


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation control for the semigroup series.

    Truncation at ``J`` requires ``J >= j_min``, ``max |term_J| < term_tol``
    and, over the last ``decay_check_window`` terms, consecutive ratios no
    larger than 1.3 times the ``j^{-3/2}`` ratio. ``j_max`` is a safeguard.
    """

    j_min: int = 16
    term_tol: float = 1e-3
    decay_check_window: int = 4
    j_max: int = 4000
    tail_correction: bool = True

    def __post_init__(self):
        if self.j_min < 2:
            raise ConfigError("j_min must be >= 2")
        if not self.term_tol > 0:
            raise ConfigError("term_tol must be > 0")
        if self.decay_check_window < 1:
            raise ConfigError("decay_check_window must be >= 1")
        if self.j_max < self.j_min:
            raise ConfigError("j_max must be >= j_min")


DEFAULT_SERIES = SeriesConfig()


@dataclass
class AsymptoticReport:
    """Limit constant, variance constant and diagnostics for (process, kernel)."""

    limit_constant: float
    clt_constant: float
    terms: list = field(default_factory=list)
    series_j: int = 0
    err_estimate: float = 0.0
    process: dict = field(default_factory=dict)
    kernel: str = ""
    source: str = "numeric"
    last_term: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.err_estimate):
            raise NumericalError("error estimate is not finite")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "process": self.process,
            "kernel": self.kernel,
            "source": self.source,
            "limit_constant": self.limit_constant,
            "clt_constant": self.clt_constant,
            "terms": list(self.terms),
            "series_j": self.series_j,
            "last_term": self.last_term,
            "err_estimate": self.err_estimate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def integrated_heat_kernel_tail(T: float, a):
    """``D_T(a) = int_T^inf (phi_t(a) - phi_t(0)) dt``.

    Closed form ``sqrt(2T/pi)(1 - exp(-a^2/2T)) - |a| erf(|a|/sqrt(2T))``.
    """
    a = np.abs(np.asarray(a, dtype=float))
    return math.sqrt(2.0 * T / math.pi) * (-np.expm1(-a * a / (2.0 * T))) - a * special.erf(a / math.sqrt(2.0 * T))


def _heat_kernel_dt(t: float, a):
    a = np.asarray(a, dtype=float)
    return gaussian_kernel(t, a) * (a * a / (2.0 * t * t) - 1.0 / (2.0 * t))


def excursion_weight(y):
    """``exp(-y^2/2) - sqrt(2 pi)|y| Phi(-|y|)``."""
    y = np.abs(np.asarray(y, dtype=float))
    return np.exp(-0.5 * y * y) - SQRT_2PI * y * special.ndtr(-y)


def _as_oscillating(params: ProcessParams) -> ProcessParams:
    if params.is_skew:
        raise ValueError("expected oscillating parameters; use the skew entry points for skew processes")
    return params


class _Grid:
    """Shared quadrature grid in ``u = y/sigma(y)`` for one oscillating process."""

    def __init__(self, params: ProcessParams, quad: QuadratureConfig, width: float = 0.5, order: int = 8):
        self.params = params
        self.quad = quad
        span = 1.2 * quad.tail_sigmas
        up, wp = interval_rule(0.0, span, width, order)
        self.u = np.concatenate([-up[::-1], up])
        self.wu = np.concatenate([wp[::-1], wp])
        self.sig = params.sigma(self.u)
        self.y = self.sig * self.u  # nodes in process coordinates
        self.wy = self.wu * self.sig  # dy weights
        self.lam_w = self.wu / self.sig  # lambda(dy) weights
        self.beta = params.beta_sigma
        self.s = params.local_time_factor
        self._sgn_v = np.sign(self.u)
        # Wider rule for one-step transforms, so that q(1, x, .) is fully
        # resolved for every node x.
        ue, we = interval_rule(0.0, span + quad.tail_sigmas, width, order)
        self._ue = np.concatenate([-ue[::-1], ue])
        sig_e = params.sigma(self._ue)
        self._ye = sig_e * self._ue
        self._wye = np.concatenate([we[::-1], we]) * sig_e

    def density(self, t: float, x):
        """``q(t, x_i, y_k)`` for points ``x`` (any) against grid nodes ``y_k``."""
        x = np.asarray(x, dtype=float)
        ux = (x / self.params.sigma(x))[:, None]
        v = self.u[None, :]
        return (gaussian_kernel(t, ux - v) + self.beta * self._sgn_v * gaussian_kernel(t, np.abs(ux) + np.abs(v))) / self.sig

    def density_dt(self, t: float, x):
        x = np.asarray(x, dtype=float)
        ux = (x / self.params.sigma(x))[:, None]
        v = self.u[None, :]
        return (_heat_kernel_dt(t, ux - v) + self.beta * self._sgn_v * _heat_kernel_dt(t, np.abs(ux) + np.abs(v))) / self.sig

    def green_tail(self, T: float, x):
        """``G_T(x, y_k) = int_T^inf [q(t, x, y_k) - c(y_k) phi_t(u_x)] dt``.

        The subtracted part integrates to zero against any ``kappa`` with
        ``<lambda, kappa> = 0``, which makes the time integral converge.
        """
        x = np.asarray(x, dtype=float)
        ux = (x / self.params.sigma(x))[:, None]
        v = self.u[None, :]
        d0 = integrated_heat_kernel_tail(T, ux)
        return (
            integrated_heat_kernel_tail(T, ux - v)
            - d0
            + self.beta * self._sgn_v * (integrated_heat_kernel_tail(T, np.abs(ux) + np.abs(v)) - d0)
        ) / self.sig

    def transform(self, f, x=None):
        """``H_f`` at ``x`` (default: grid nodes) using the grid in ``y``."""
        x = self.y if x is None else np.asarray(x, dtype=float)
        ux = (x / self.params.sigma(x))[:, None]
        v = self._ue[None, :]
        dens = (
            gaussian_kernel(1.0, ux - v) + self.beta * np.sign(v) * gaussian_kernel(1.0, np.abs(ux) + np.abs(v))
        ) / self.params.sigma(self._ue)
        return (np.asarray(f(x[:, None], self._ye[None, :]), dtype=float) * dens) @ self._wye

    def lam(self, values) -> float:
        return float(self.lam_w @ values)


@dataclass
class _SeriesResult:
    values: np.ndarray  # series at requested points
    node_values: np.ndarray  # series at grid nodes
    J: int
    last_term: float
    tail: float  # magnitude of the Euler--Maclaurin correction
    partial_sums: list


def _series_on_grid(grid: _Grid, kappa_nodes: np.ndarray, kappa_x: np.ndarray | None, x, series: SeriesConfig):
    """Sum ``sum_j Q_j kappa`` at the grid nodes and at extra points ``x``."""
    pts = grid.y if x is None else np.concatenate([grid.y, np.asarray(x, dtype=float)])
    n_nodes = grid.y.size
    start = kappa_nodes if x is None else np.concatenate([kappa_nodes, kappa_x])
    wk = grid.wy * kappa_nodes
    total = np.array(start, dtype=float)
    mags = [float(np.max(np.abs(start)))]
    partial = [float(total[0])]
    scale = max(mags[0], 1e-300)
    J = 0
    for j in range(1, series.j_max + 1):
        term = grid.density(float(j), pts) @ wk
        total += term
        m = float(np.max(np.abs(term)))
        mags.append(m)
        partial.append(float(total[n_nodes // 2]))
        J = j
        if j < series.j_min:
            continue
        if m <= 1e-13 * scale:
            break  # analytically zero series
        if m >= series.term_tol:
            continue
        w = series.decay_check_window
        ok = True
        for i in range(j - w + 1, j + 1):
            prev = mags[i - 1]
            if prev > 0 and mags[i] / prev > 1.3 * ((i - 1) / i) ** 1.5:
                ok = False
                break
        if ok:
            break
    else:
        raise SeriesError(
            f"semigroup series failed its decay check after {series.j_max} terms "
            f"(last |term| = {mags[-1]:.3e}); kernel may be inadmissible or quadrature inaccurate",
            partial_sums=partial,
            terms=mags,
        )
    tail_mag = 0.0
    if series.tail_correction and mags[-1] > 1e-13 * scale:
        T = J + 0.5
        total += grid.green_tail(T, pts) @ wk
        correction = (grid.density_dt(T, pts) @ wk) / 24.0
        total += correction
        tail_mag = float(np.max(np.abs(correction)))
    values = total[n_nodes:] if x is not None else total
    return _SeriesResult(values, total[:n_nodes], J, mags[-1], tail_mag, partial)


class _KernelProblem:
    """Quantities shared by ``kappa``, ``q_series`` and the variance constant."""

    def __init__(self, params: ProcessParams, kernel: BivariateKernel, quad: QuadratureConfig):
        self.params = _as_oscillating(params)
        self.kernel = kernel
        self.quad = quad
        self.grid = _Grid(self.params, quad)
        g = abs_increment_kernel()
        self.H_h = self.grid.transform(kernel)
        self.H_g = self.grid.transform(g)
        self.c = self.grid.lam(self.H_h)
        self.kappa_nodes = self.H_h - self.c * self.H_g

    def kappa_at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return threshold_regularised(
            self.params,
            lambda z: self.grid.transform(self.kernel, z) - self.c * self.grid.transform(abs_increment_kernel(), z),
            x,
        )


_THRESHOLD_OFFSET = 1e-200


def threshold_regularised(params: ProcessParams, fn, x):
    """Evaluate ``fn`` at ``x``, replacing the value at the threshold itself.

    Transforms are densities-based and only defined up to null sets; at the
    threshold the kernels' own convention (``h(0, y) = 0`` for crossing
    kernels) is arbitrary. The value used there is the small-time limit of
    the semigroup, ``lim_{t -> 0} Q_t fn(0) = ((1 + b) fn(0+) + (1 - b) fn(0-)) / 2``
    with ``b = beta_sigma``, which makes the semigroup series continuous in
    time at ``j = 0``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.asarray(fn(x), dtype=float).copy()
    zero = x == 0
    if np.any(zero):
        b = params.beta_sigma
        side = np.asarray(fn(np.array([_THRESHOLD_OFFSET, -_THRESHOLD_OFFSET])), dtype=float)
        out[zero] = 0.5 * ((1.0 + b) * side[0] + (1.0 - b) * side[1])
    return out


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def limit_constant_obm(params: ProcessParams, kernel: BivariateKernel, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``<lambda, H_h>``."""
    return _KernelProblem(params, kernel, quad).c


def kappa(params: ProcessParams, kernel: BivariateKernel, x, quad: QuadratureConfig = DEFAULT_QUAD):
    """Centered transform ``H_h(x) - <lambda, H_h> H_g(x)`` (adaptive quadrature in ``y``).

    At the threshold the small-time semigroup limit is returned (see
    :func:`threshold_regularised`).
    """
    prob = _KernelProblem(params, kernel, quad)
    x_arr = np.asarray(x, dtype=float)
    g = abs_increment_kernel()

    def centered(z):
        return transform_H(params, kernel, z, quad) - prob.c * transform_H(params, g, z, quad)

    out = threshold_regularised(params, centered, x_arr)
    return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])


def q_series(
    params: ProcessParams,
    kernel: BivariateKernel,
    x,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
    return_diagnostics: bool = False,
):
    """Semigroup series ``sum_{j>=0} Q_j kappa`` at ``x`` (centered coordinates)."""
    prob = _KernelProblem(params, kernel, quad)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    res = _series_on_grid(prob.grid, prob.kappa_nodes, prob.kappa_at(x_arr), x_arr, series)
    out = res.values.reshape(np.shape(x)) if np.ndim(x) else float(res.values[0])
    if return_diagnostics:
        return out, res
    return out


def p_series(
    beta: float,
    kernel: BivariateKernel,
    x,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
):
    """Skew-process series ``sum_j P_j(F_f - c F_{g_beta})`` at ``x``.

    Evaluated as the oscillating series of the transported kernel at
    ``sigma(x) x``.
    """
    osc, hb = skew_companion(beta, kernel)
    x_arr = np.asarray(x, dtype=float)
    return q_series(osc, hb, osc.sigma(x_arr) * x_arr, series, quad)


def skew_companion(beta: float, kernel: BivariateKernel):
    """Oscillating companion ``(1 + beta, 1 - beta)`` and transported kernel."""
    osc = ProcessParams.skew(beta).to_oscillating()
    sig = osc.sigma
    hb = kernel.composed(lambda x: x / sig(x), lambda y: y / sig(y), name=f"{kernel.name}@beta={beta:g}")
    return osc, hb


def triple_integral(params: ProcessParams, kernel: BivariateKernel, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """The ``(x, t, y)`` integral of the fourth variance term, times ``s``.

    Returns ``s * Triple`` so that for ``h = 2 h1`` the value is
    ``4/(3 sqrt(2 pi))`` for every choice of scales.
    """
    params = _as_oscillating(params)
    return params.local_time_factor * _triple(_Grid(params, quad), kernel, quad)


def _triple(grid: _Grid, kernel: BivariateKernel, quad: QuadratureConfig) -> float:
    u, wu, sig = grid.u, grid.wu, grid.sig
    ax = wu * np.abs(u) * std_normal_pdf(u) / sig
    by = wu * special.ndtr(-np.abs(u)) / sig
    X = (sig * u)[:, None]
    Y = (sig * u)[None, :]

    def integrand(theta):
        st, ct = math.sin(theta), math.cos(theta)
        H = np.asarray(kernel(X * st, Y * ct), dtype=float)
        return 2.0 * ct * ct * float(ax @ H @ by)

    return float(adaptive(integrand, 0.0, 0.5 * math.pi, quad, where="variance term (iv)"))


def _admissibility_warning(kernel: BivariateKernel):
    if kernel.gamma <= 3:
        warnings.warn(
            f"kernel {kernel.name!r} declares class exponent {kernel.gamma} <= 3; the variance formula may not apply",
            RuntimeWarning,
            stacklevel=3,
        )
        return
    bad = kernel.envelope_violations(4000)
    if bad:
        warnings.warn(f"kernel {kernel.name!r} violates its envelope at {bad} sampled points", RuntimeWarning, stacklevel=3)
    elif not math.isfinite(kernel.moment_integral(min(kernel.gamma, 4.0))):
        warnings.warn(f"kernel {kernel.name!r}: envelope moment integral is not finite", RuntimeWarning, stacklevel=3)


def clt_constant_obm(
    params: ProcessParams,
    kernel: BivariateKernel,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
    check_admissibility: bool = True,
) -> AsymptoticReport:
    """Limit constant ``c`` and variance constant ``K`` for an oscillating process."""
    if check_admissibility:
        _admissibility_warning(kernel)
    prob = _KernelProblem(params, kernel, quad)
    grid, c, s = prob.grid, prob.c, prob.grid.s
    try:
        res = _series_on_grid(grid, prob.kappa_nodes, None, None, series)
    except SeriesError as exc:
        raise SeriesError(f"variance term (i)/(iii): {exc}", exc.partial_sums, exc.terms) from exc
    Qn = res.node_values

    dens = grid.density(1.0, grid.y)
    Hmat = np.asarray(kernel(grid.y[:, None], grid.y[None, :]), dtype=float)
    weighted = Hmat * dens * grid.wy[None, :]
    t1 = grid.lam(np.sum(weighted * (Hmat + 2.0 * Qn[None, :]), axis=1))
    t2 = s * MAXWELL_MEAN_FACTOR * c * c
    t3 = -2.0 * SQRT_2_OVER_PI * s * c * float(np.sum(grid.wu * excursion_weight(grid.u) * Qn / grid.sig))
    triple = _triple(grid, kernel, quad) if c != 0.0 else 0.0
    t4 = -2.0 * c * s * s * triple
    K = t1 + t2 + t3 + t4

    # Error proxy: series remainder propagated linearly through (i) and (iii).
    err_q = res.tail + res.last_term * 1e-3
    abs_h = grid.lam(np.abs(weighted).sum(axis=1))
    w_int = float(np.sum(grid.wu * np.abs(excursion_weight(grid.u)) / grid.sig))
    err = 2.0 * abs_h * err_q + 2.0 * SQRT_2_OVER_PI * s * abs(c) * w_int * err_q
    err += 10.0 * quad.abs_tol * (1.0 + abs(K))
    if K < -max(err, 1e-9):
        raise NumericalError(f"assembled variance constant is negative (K = {K:.6g}); terms = {[t1, t2, t3, t4]}")
    return AsymptoticReport(
        limit_constant=float(c),
        clt_constant=float(max(K, 0.0)),
        terms=[float(t1), float(t2), float(t3), float(t4)],
        series_j=res.J,
        err_estimate=float(err),
        process=params.describe(),
        kernel=kernel.name,
        last_term=res.last_term,
    )


def clt_constant_sbm(
    beta: float,
    kernel: BivariateKernel,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
    check_admissibility: bool = True,
) -> AsymptoticReport:
    """Constants for a skew process via its oscillating companion.

    With ``s = 1 - beta^2`` the ratio of local times, ``c = s * c_osc`` and
    ``K = s * K_osc`` (``B_{L(Y)} = B_{s L(X)}`` has variance ``s L(X)``).
    Reported terms are rescaled by ``s`` as well.
    """
    if not abs(beta) < 1:
        raise ConfigError("beta must lie in (-1, 1)")
    osc, hb = skew_companion(beta, kernel)
    if check_admissibility:
        _admissibility_warning(kernel)
    rep = clt_constant_obm(osc, hb, series, quad, check_admissibility=False)
    s = osc.local_time_factor
    return AsymptoticReport(
        limit_constant=s * rep.limit_constant,
        clt_constant=s * rep.clt_constant,
        terms=[s * t for t in rep.terms],
        series_j=rep.series_j,
        err_estimate=s * rep.err_estimate,
        process=ProcessParams.skew(beta).describe(),
        kernel=kernel.name,
        last_term=rep.last_term,
    )


@dataclass(frozen=True)
class ClosedFormConstants:
    """Closed-form ``c`` and, where available, ``K``."""

    kind: str
    limit_constant: float
    clt_constant: float | None
    source: str  # "closed_form", "series" or "unavailable"
    report: AsymptoticReport | None = None

    def to_dict(self) -> dict:
        d = {
            "schema": 1,
            "kind": self.kind,
            "limit_constant": self.limit_constant,
            "clt_constant": self.clt_constant,
            "clt_source": self.source,
        }
        if self.report is not None:
            d["report"] = self.report.to_dict()
        return d


CLOSED_FORM_KINDS = ("crossing_obm", "crossing_sbm", "weighted_obm", "weighted_sbm")


def weighted_obm_variance(sigma_minus: float, sigma_plus: float) -> float:
    """``(16/(3 sqrt(2 pi))) (s-^2 + s+^2)/(s- + s+)``."""
    return 2.0 * MAXWELL_MEAN_FACTOR * (sigma_minus**2 + sigma_plus**2) / (sigma_minus + sigma_plus)


def closed_form_constants(
    kind: str,
    params: ProcessParams,
    series: SeriesConfig = DEFAULT_SERIES,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> ClosedFormConstants:
    """Explicit constants for the crossing and weighted estimators.

    ``weighted_sbm`` has no elementary variance formula; its ``K`` is the
    series-assembled value (``source = "series"``). Crossing estimators only
    get ``c``; their ``K`` requires :func:`clt_constant_obm`.
    """
    if kind not in CLOSED_FORM_KINDS:
        raise ConfigError(f"unknown closed-form kind {kind!r}; expected one of {CLOSED_FORM_KINDS}")
    wants_skew = kind.endswith("_sbm")
    if wants_skew != params.is_skew:
        raise ConfigError(f"{kind} requires {'skew' if wants_skew else 'oscillating'} parameters")
    if kind == "crossing_obm":
        c = 2.0 / (params.sigma_minus + params.sigma_plus) * SQRT_2_OVER_PI
        return ClosedFormConstants(kind, c, None, "unavailable")
    if kind == "crossing_sbm":
        return ClosedFormConstants(kind, SQRT_2_OVER_PI * (1.0 - params.beta**2), None, "unavailable")
    if kind == "weighted_obm":
        return ClosedFormConstants(kind, 1.0, weighted_obm_variance(params.sigma_minus, params.sigma_plus), "closed_form")
    rep = clt_constant_sbm(params.beta, weighted_crossing_kernel(), series, quad, check_admissibility=False)
    return ClosedFormConstants(kind, 1.0 - params.beta**2, rep.clt_constant, "series", rep)


def crossing_variance_obm(params: ProcessParams, series: SeriesConfig = DEFAULT_SERIES, quad: QuadratureConfig = DEFAULT_QUAD):
    """Variance constant of the crossing estimator (general formula with ``h0``)."""
    return clt_constant_obm(params, crossing_kernel(), series, quad, check_admissibility=False)


def constants_for(params: ProcessParams, kernel: BivariateKernel | str, series=DEFAULT_SERIES, quad=DEFAULT_QUAD) -> AsymptoticReport:
    """Dispatch on the process kind; ``kernel`` may be a built-in name."""
    if isinstance(kernel, str):
        kernel = builtin_kernel(kernel, params.beta if params.is_skew else None)
    if params.is_skew:
        return clt_constant_sbm(params.beta, kernel, series, quad)
    return clt_constant_obm(params, kernel, series, quad)
