"""Closed-form densities, integral transforms and local-time moments.

Everything in this module works in *threshold-centered* coordinates: the
threshold ``r`` sits at the origin and callers shift user coordinates by
``params.threshold`` first (see :meth:`ProcessParams.center`).

Conventions
-----------
* ``sgn(0) = 0`` inside the skew density (a Lebesgue-null choice).
* The oscillating volatility is right-continuous: ``sigma(0) = sigma_plus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigError, DivergenceError, QuadratureError
from .kernels import BivariateKernel, abs_increment_kernel
from .quadrature import DEFAULT_QUAD, QuadratureConfig, adaptive, interval_rule

SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

SKEW = "skew"
OSCILLATING = "oscillating"


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessParams:
    """Skew Brownian motion ``(beta, r)`` or oscillating Brownian motion
    ``(sigma_minus, sigma_plus, r)``.

    Use the :meth:`skew` and :meth:`oscillating` constructors.
    """

    kind: str
    beta: float = 0.0
    sigma_minus: float = 1.0
    sigma_plus: float = 1.0
    threshold: float = 0.0
    # Exact skewness remembered by the canonical skew -> oscillating map so the
    # round trip does not pick up floating-point noise.
    _origin_beta: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in (SKEW, OSCILLATING):
            raise ConfigError(f"kind must be '{SKEW}' or '{OSCILLATING}', got {self.kind!r}")
        if not math.isfinite(self.threshold):
            raise ConfigError("threshold r must be finite")
        if self.kind == SKEW:
            if not (math.isfinite(self.beta) and -1.0 < self.beta < 1.0):
                raise ConfigError(
                    f"beta must lie in the open interval (-1, 1) (|beta| < 1), got {self.beta!r}"
                )
        else:
            for name in ("sigma_minus", "sigma_plus"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v > 0):
                    raise ConfigError(f"{name} must be positive and finite (> 0), got {v!r}")

    # constructors ---------------------------------------------------------
    @classmethod
    def skew(cls, beta: float, threshold: float = 0.0) -> "ProcessParams":
        return cls(SKEW, beta=float(beta), threshold=float(threshold))

    @classmethod
    def oscillating(cls, sigma_minus: float, sigma_plus: float, threshold: float = 0.0) -> "ProcessParams":
        return cls(
            OSCILLATING,
            sigma_minus=float(sigma_minus),
            sigma_plus=float(sigma_plus),
            threshold=float(threshold),
        )

    # derived quantities ---------------------------------------------------
    @property
    def is_skew(self) -> bool:
        return self.kind == SKEW

    @property
    def beta_sigma(self) -> float:
        """Skewness ``(s- - s+)/(s- + s+)`` of ``Y/sigma(Y)`` for an oscillating process."""
        if self.is_skew:
            return self.beta
        if self._origin_beta is not None:
            return self._origin_beta
        return (self.sigma_minus - self.sigma_plus) / (self.sigma_minus + self.sigma_plus)

    @property
    def local_time_factor(self) -> float:
        """``2 s- s+ / (s- + s+)``: ratio ``L(Y) / L(Y / sigma(Y))``."""
        sm, sp = self.sigma_minus, self.sigma_plus
        return 2.0 * sm * sp / (sm + sp)

    @property
    def spatial_scale(self) -> float:
        return 1.0 if self.is_skew else max(self.sigma_minus, self.sigma_plus)

    def sigma(self, x):
        """Volatility at centered position ``x`` (``sigma_plus`` at the threshold)."""
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.sigma_plus, self.sigma_minus)

    def stationary_weight(self, x):
        """Density of the invariant measure: ``1 + sgn(x) beta`` or ``1/sigma(x)^2``."""
        x = np.asarray(x, dtype=float)
        if self.is_skew:
            return 1.0 + np.sign(x) * self.beta
        return 1.0 / self.sigma(x) ** 2

    def center(self, x):
        return np.asarray(x, dtype=float) - self.threshold

    def to_oscillating(self) -> "ProcessParams":
        """Canonical oscillating companion ``s- = 1 + beta, s+ = 1 - beta``."""
        if not self.is_skew:
            return self
        return ProcessParams(
            OSCILLATING,
            sigma_minus=1.0 + self.beta,
            sigma_plus=1.0 - self.beta,
            threshold=self.threshold,
            _origin_beta=self.beta,
        )

    def to_skew(self) -> "ProcessParams":
        """Skew process followed by ``Y / sigma(Y)``."""
        if self.is_skew:
            return self
        return ProcessParams.skew(self.beta_sigma, self.threshold)

    def describe(self) -> dict:
        if self.is_skew:
            return {"kind": SKEW, "beta": self.beta, "r": self.threshold}
        return {
            "kind": OSCILLATING,
            "sigma_minus": self.sigma_minus,
            "sigma_plus": self.sigma_plus,
            "r": self.threshold,
        }


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def std_normal_cdf(x):
    """Standard normal CDF (``scipy.special.ndtr``, accurate to ~1e-16)."""
    return special.ndtr(x)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def gaussian_kernel(t, a):
    """Heat kernel ``phi_t(a)``."""
    a = np.asarray(a, dtype=float)
    return np.exp(-a * a / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def _check_time(t):
    if isinstance(t, (float, int)):
        if not t > 0:
            raise ValueError("time t must be > 0")
    elif not np.all(np.asarray(t) > 0):
        raise ValueError("time t must be > 0")


def skew_density(beta: float, t, x, y):
    """Transition density of skew Brownian motion.

    ``p(t, x, y) = phi_t(x - y) + beta sgn(y) phi_t(|x| + |y|)``.
    """
    _check_time(t)
    if not abs(beta) < 1:
        raise ValueError("beta must lie in (-1, 1)")
    return _skew_density(beta, t, np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def _skew_density(beta, t, x, y):
    return gaussian_kernel(t, x - y) + beta * np.sign(y) * gaussian_kernel(t, np.abs(x) + np.abs(y))


def obm_density(params: ProcessParams, t, x, y):
    """Transition density of oscillating Brownian motion (centered coordinates)."""
    _check_time(t)
    if params.is_skew:
        raise ValueError("obm_density requires oscillating parameters")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sy = params.sigma(y)
    return _skew_density(params.beta_sigma, t, x / params.sigma(x), y / sy) / sy


def transition_density(params: ProcessParams, t, x, y):
    """Dispatch to :func:`skew_density` or :func:`obm_density`.

    ``x`` and ``y`` are threshold-centered; ``params.threshold`` is ignored.
    """
    if params.is_skew:
        return skew_density(params.beta, t, x, y)
    return obm_density(params, t, x, y)


def skew_cdf(beta: float, t, x, y):
    """``P(X_t <= y | X_0 = x)`` for skew Brownian motion (closed form).

    Integrating the density term by term: for ``y < 0`` the result is
    ``Phi((y - x)/s) - beta Phi((y - |x|)/s)``; for ``y >= 0`` it is
    ``Phi((y - x)/s) - beta Phi(-|x|/s) + beta (Phi((y + |x|)/s) - Phi(|x|/s))``
    with ``s = sqrt(t)``.
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.sqrt(t)
    ax = np.abs(x)
    free = special.ndtr((y - x) / s)
    neg = free - beta * special.ndtr((y - ax) / s)
    pos = free - beta * special.ndtr(-ax / s) + beta * (special.ndtr((y + ax) / s) - special.ndtr(ax / s))
    return np.where(y < 0, neg, pos)


def transition_cdf(params: ProcessParams, t, x, y):
    """``P(Z_t <= y | Z_0 = x)`` for either process kind.

    ``x`` and ``y`` are threshold-centered; ``params.threshold`` is ignored.
    """
    if params.is_skew:
        return skew_cdf(params.beta, t, x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return skew_cdf(params.beta_sigma, t, x / params.sigma(x), y / params.sigma(y))


def joint_density_bm(t, y, ell):
    """Joint density of ``(B_t, L_t(B))`` for standard BM from 0."""
    _check_time(t)
    y = np.asarray(y, dtype=float)
    ell = np.asarray(ell, dtype=float)
    s = np.abs(y) + np.where(ell > 0, ell, 0.0)
    val = s / np.sqrt(2.0 * np.pi * t**3) * np.exp(-s * s / (2.0 * t))
    return np.where(ell > 0, val, 0.0)


def joint_density_obm(params: ProcessParams, t, y, ell):
    """Joint density of ``(Y_t, L_t(Y))`` for the oscillating process from 0."""
    if params.is_skew:
        raise ValueError("joint_density_obm requires oscillating parameters")
    y = np.asarray(y, dtype=float)
    if np.any(y == 0):
        raise ValueError("joint_density_obm is defined for y != 0 only")
    sy = params.sigma(y)
    scale = 1.0 / params.local_time_factor
    return joint_density_bm(t, y / sy, scale * np.asarray(ell, dtype=float)) / sy**2


# ---------------------------------------------------------------------------
# Transforms and semigroups
# ---------------------------------------------------------------------------


def _kernel_func(kernel):
    if isinstance(kernel, BivariateKernel):
        return kernel.__call__
    return kernel


def transform_H(
    params: ProcessParams,
    kernel,
    x,
    quad: QuadratureConfig = DEFAULT_QUAD,
    weight: Callable | None = None,
    t: float = 1.0,
):
    """One-step transform ``x -> int f(x, y) p(t, x, y) dy``.

    For oscillating parameters this is ``H_f``; for skew parameters it is the
    analogous ``F_f``. ``weight(y)`` multiplies the kernel, giving the
    two-function form.

    Parameters
    ----------
    x : float or array_like
        Centered starting point(s); the result has the same shape.
    """
    _check_time(t)
    f = _kernel_func(kernel)
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x).ravel()
    width = quad.tail_sigmas * params.spatial_scale * math.sqrt(t)
    lo = min(float(xs.min()), 0.0) - width
    hi = max(float(xs.max()), 0.0) + width

    if params.is_skew:
        def density(y):
            return _skew_density(params.beta, t, xs, y)
    else:
        # the start-dependent factors do not change between quadrature nodes
        xs_scaled = xs / params.sigma(xs)
        beta_s = params.beta_sigma

        def density(y):
            sy = params.sigma_plus if y >= 0 else params.sigma_minus
            return _skew_density(beta_s, t, xs_scaled, y / sy) / sy

    def integrand(y):
        val = f(xs, y) * density(y)
        if weight is not None:
            val = val * weight(y)
        return val

    neg = adaptive(integrand, lo, 0.0, quad, points=list(xs[xs < 0]) if xs.size < 8 else None, where="transform (y<0)")
    pos = adaptive(integrand, 0.0, hi, quad, points=list(xs[xs > 0]) if xs.size < 8 else None, where="transform (y>0)")
    out = np.asarray(neg + pos, dtype=float)
    return out.reshape(x.shape) if x.ndim else float(out[0])


def semigroup_apply(
    params: ProcessParams,
    t: float,
    fn: Callable,
    x,
    quad: QuadratureConfig = DEFAULT_QUAD,
):
    """Apply the transition semigroup: ``x -> int p(t, x, y) fn(y) dy``.

    ``fn`` is called with scalar ``y``.
    """
    _check_time(t)
    return transform_H(params, lambda xx, y: fn(y), x, quad, t=t)


def _nested_half_rule(length: float, width: float, sign: float, order: int = 8):
    n1, w1 = interval_rule(0.0, length, width, order)
    n2, w2 = interval_rule(0.0, length, 2.0 * width, order)
    return sign * n1, w1, sign * n2, w2


def stationary_average(
    params: ProcessParams,
    fn: Callable,
    quad: QuadratureConfig = DEFAULT_QUAD,
    divergence_bound: float = 1e8,
    max_windows: int = 12,
):
    """Integral of ``fn`` against the invariant measure.

    ``<lambda, fn> = int fn(x)/sigma(x)^2 dx`` (oscillating) or
    ``<mu, fn> = int fn(x)(1 + sgn(x) beta) dx`` (skew).

    ``fn`` must accept numpy arrays. Each half-line is integrated over
    expanding windows ``[0, W], [W, 2W], ...`` with ``W = tail_sigmas * scale``;
    each window uses a composite Gauss--Legendre rule whose panels are halved
    until it agrees with the rule on twice-wider panels. Raises
    :class:`DivergenceError` when the running sum exceeds
    ``divergence_bound`` or new windows keep contributing.
    """
    total = 0.0
    partials = []
    for sign, sig in ((-1.0, params.sigma_minus if not params.is_skew else 1.0),
                      (1.0, params.sigma_plus if not params.is_skew else 1.0)):
        window = quad.tail_sigmas * sig
        start = 0.0
        for k in range(max_windows):
            piece = _window_integral(params, fn, sign, start, start + window, sig, quad)
            total += piece
            partials.append(total)
            if not math.isfinite(total) or abs(total) > divergence_bound:
                raise DivergenceError("stationary average diverges", partials)
            start += window
            if abs(piece) <= quad.abs_tol + quad.rel_tol * abs(total):
                break
            window *= 2.0
        else:
            raise DivergenceError(
                "stationary average did not settle over expanding windows", partials
            )
    return float(total)


def _window_integral(params, fn, sign, a, b, scale, quad):
    width = 0.5 * scale
    prev = None
    for _ in range(8):
        nodes, w = interval_rule(a, b, width, 8)
        xs = sign * nodes
        vals = np.asarray(fn(xs), dtype=float) * params.stationary_weight(xs)
        cur = float(np.dot(w, vals))
        if prev is not None and abs(cur - prev) <= 0.1 * quad.abs_tol + quad.rel_tol * abs(cur):
            return cur
        prev = cur
        width *= 0.5
        if (b - a) / width > quad.max_subdivisions:
            break
    raise QuadratureError(
        "stationary average window did not converge", residual=abs(cur - prev), where="stationary_average"
    )


# ---------------------------------------------------------------------------
# Local-time moments
# ---------------------------------------------------------------------------


def upper_partial_moments(a, p: int):
    """``J_k(a) = int_0^inf m^k phi(m + a) dm`` for ``k = 0..p``.

    Uses ``J_0 = Phi(-a)``, ``J_1 = phi(a) - a Phi(-a)`` and
    ``J_k = (k - 1) J_{k-2} - a J_{k-1}``.
    """
    a = np.asarray(a, dtype=float)
    J = [special.ndtr(-a)]
    if p >= 1:
        J.append(std_normal_pdf(a) - a * J[0])
    for k in range(2, p + 1):
        J.append((k - 1) * J[k - 2] - a * J[k - 1])
    return J


def local_time_weight(a, p: int):
    """``A_p(a) = int_0^inf ell^p rho_1(y, ell) d ell`` evaluated at ``|y| = a``.

    For standard BM from 0; ``A_0 = phi(a)`` and ``A_p = p J_{p-1}(a)``.
    """
    a = np.abs(np.asarray(a, dtype=float))
    if p == 0:
        return std_normal_pdf(a)
    return p * upper_partial_moments(a, p - 1)[p - 1]


def _from_zero_moment(params: ProcessParams, fn, p: int, s, quad: QuadratureConfig):
    """``E[L_1^p fn(s Y_1)]`` for the oscillating process started at 0.

    ``s`` may be an array; the change of variables ``y = sigma(u) u``,
    ``ell = factor * m`` reduces to a BM integral over ``u``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    length = 1.2 * quad.tail_sigmas
    u_pos, w_pos = interval_rule(0.0, length, 0.25, 8)
    u = np.concatenate([-u_pos[::-1], u_pos])
    w = np.concatenate([w_pos[::-1], w_pos])
    su = params.sigma(u)
    base = w * local_time_weight(u, p) / su
    vals = np.asarray(fn((su * u)[None, :] * s[:, None]), dtype=float)
    vals = np.broadcast_to(vals, (s.size, u.size))
    return params.local_time_factor ** (p + 1) * (vals @ base)


def localtime_moment(
    params: ProcessParams,
    fn: Callable,
    p: int,
    x,
    quad: QuadratureConfig = DEFAULT_QUAD,
):
    """``E[L_1^p fn(Y_1) | Y_0 = x]`` with ``L`` the symmetric local time at 0.

    The process moves as a Brownian motion of volatility ``sigma(x)`` until it
    first hits the threshold; the hitting time ``tau`` has the Lévy law, after
    which diffusive scaling reduces the moment to the from-zero functional
    over the remaining time ``1 - tau``. Writing ``a = |x|/sigma(x)`` and
    ``tau = a^2 / v^2``, then ``v = a cosh w``, the singular hitting density
    becomes the smooth integrand

    ``2 phi(a cosh w) a sinh w tanh(w)^p M(tanh w)``,

    with ``M(s) = E_0[L_1^p fn(s Y_1)]``. At ``x = 0`` the moment is ``M(1)``;
    ``p = 0`` is the plain semigroup ``Q_1 fn(x)``.

    Skew parameters are handled through the canonical oscillating companion.
    ``fn`` must accept numpy arrays.
    """
    if int(p) != p or p < 0:
        raise ValueError("p must be a non-negative integer")
    p = int(p)
    x = np.asarray(x, dtype=float)
    if params.is_skew:
        osc = params.to_oscillating()
        sig = osc.sigma
        # X = Y/sigma(Y) and L(X) = L(Y)/factor for the companion Y.
        val = localtime_moment(osc, lambda y: fn(y / sig(y)), p, sig(x) * x, quad)
        return val / osc.local_time_factor**p
    if p == 0:
        # L^0 = 1: the hitting-time split would miss the paths that never
        # reach the threshold, so use the transition density directly.
        return semigroup_apply(params, 1.0, fn, x, quad)
    xs = np.atleast_1d(x).ravel()
    a = np.abs(xs) / params.sigma(xs)
    out = np.empty_like(a)
    at_zero = a == 0
    if np.any(at_zero):
        out[at_zero] = _from_zero_moment(params, fn, p, 1.0, quad)[0]
    if np.any(~at_zero):
        av = a[~at_zero]
        cap = 1.5 * quad.tail_sigmas
        w_max = float(np.arccosh(max(cap / av.min(), 1.0 + 1e-12)))

        def integrand(w):
            s = math.tanh(w)
            m = _from_zero_moment(params, fn, p, s, quad)[0] if s > 0 else 0.0
            v = av * math.cosh(w)
            return 2.0 * std_normal_pdf(v) * av * math.sinh(w) * s**p * m

        brk = [float(np.arccosh(max(1.0 / v, 1.0 + 1e-12))) for v in np.unique(av)[:4] if v < 1]
        out[~at_zero] = adaptive(integrand, 0.0, w_max, quad, points=brk or None, where="localtime_moment")
    return out.reshape(x.shape) if x.ndim else float(out[0])


def abs_increment_transform(params: ProcessParams, x, quad: QuadratureConfig = DEFAULT_QUAD):
    """``H_g(x)`` for ``g(x, y) = |y| - |x|``."""
    return transform_H(params, abs_increment_kernel(), x, quad)
