"""Bivariate test functions applied to consecutive rescaled observations.

A kernel ``f(x, y)`` is evaluated on pairs ``(sqrt(n)(X_k - r), sqrt(n)(X_{k+1} - r))``.
Each kernel carries an *envelope* ``(base, a)`` certifying the growth bound
``|f(x, y)| <= base(x) * exp(a * |y - x|)``; the admissibility class exponent
``gamma`` records for which moments ``int base(x) (1 + |x|**gamma) dx`` is
finite.  All callables are vectorised with numpy broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

Array = np.ndarray


def _sgn(x):
    return np.sign(x)


@dataclass(frozen=True)
class BivariateKernel:
    """A vectorised bivariate function with an admissibility envelope.

    Parameters
    ----------
    func : callable
        ``func(x, y)`` evaluated with numpy broadcasting.
    envelope_base : callable
        Non-negative bound ``base(x)``.
    envelope_exp : float
        Exponential growth rate ``a`` in ``|y - x|``.
    gamma : float
        Claimed class exponent; ``inf`` when the base decays exponentially,
        ``0`` when the base is not integrable (centering kernels only).
    name : str
        Identifier; built-ins use ``h0``, ``h1``, ``h1x2``, ``g``, ``g_beta``.
    """

    func: Callable[[Array, Array], Array]
    envelope_base: Callable[[Array], Array]
    envelope_exp: float = 1.0
    gamma: float = float("inf")
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.asarray(self.func(x, y), dtype=float) * np.ones(np.broadcast(x, y).shape)

    # -- algebra -----------------------------------------------------------
    def scaled(self, factor: float, name: str | None = None) -> "BivariateKernel":
        """Return ``factor * self``."""
        f = self.func
        b = self.envelope_base
        return BivariateKernel(
            lambda x, y: factor * f(x, y),
            lambda x: abs(factor) * b(x),
            self.envelope_exp,
            self.gamma,
            name or f"{factor:g}*{self.name}",
        )

    def product(self, other: "BivariateKernel", name: str | None = None) -> "BivariateKernel":
        """Pointwise product, used for the two-function form of the transforms."""
        f, g = self.func, other.func
        b1, b2 = self.envelope_base, other.envelope_base
        return BivariateKernel(
            lambda x, y: f(x, y) * g(x, y),
            lambda x: b1(x) * b2(x),
            self.envelope_exp + other.envelope_exp,
            min(self.gamma, other.gamma),
            name or f"{self.name}*{other.name}",
        )

    def minus(self, other: "BivariateKernel", name: str | None = None) -> "BivariateKernel":
        f, g = self.func, other.func
        b1, b2 = self.envelope_base, other.envelope_base
        return BivariateKernel(
            lambda x, y: f(x, y) - g(x, y),
            lambda x: b1(x) + b2(x),
            max(self.envelope_exp, other.envelope_exp),
            min(self.gamma, other.gamma),
            name or f"{self.name}-{other.name}",
        )

    def composed(self, tx: Callable[[Array], Array], ty: Callable[[Array], Array], name=None):
        """Kernel ``(x, y) -> f(tx(x), ty(y))``.

        The envelope is carried over unchanged, which is valid when ``tx`` and
        ``ty`` are contractions fixing the origin (as for the skew/oscillating
        coordinate maps with unit-normalised scales).
        """
        f = self.func
        return BivariateKernel(
            lambda x, y: f(tx(x), ty(y)),
            self.envelope_base,
            self.envelope_exp,
            self.gamma,
            name or f"{self.name}∘T",
        )

    # -- checks ------------------------------------------------------------
    def envelope_violations(self, n_samples: int = 20000, seed: int = 0, box: float = 12.0) -> int:
        """Count sampled points where the envelope bound fails (randomised check)."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-box, box, n_samples)
        y = rng.uniform(-box, box, n_samples)
        lhs = np.abs(self(x, y))
        rhs = np.asarray(self.envelope_base(x)) * np.exp(self.envelope_exp * np.abs(y - x))
        return int(np.count_nonzero(lhs > rhs * (1 + 1e-12) + 1e-300))

    def moment_integral(self, gamma: float | None = None) -> float:
        """``int base(x) (1 + |x|**gamma) dx``; ``inf`` when it does not converge."""
        gamma = self.gamma if gamma is None else gamma
        if not np.isfinite(gamma):
            gamma = 4.0
        b = self.envelope_base

        def integrand(x):
            return float(np.asarray(b(np.asarray(x))) * (1.0 + abs(x) ** gamma))

        total = 0.0
        for lo, hi in ((-np.inf, 0.0), (0.0, np.inf)):
            val, err = integrate.quad(integrand, lo, hi, limit=200)
            if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)) or abs(val) > 1e12:
                return float("inf")
            total += val
        return total


def opposite_signs(x, y):
    """``1{xy < 0}`` computed from signs, so that tiny products cannot underflow to zero."""
    return (np.sign(x) * np.sign(y)) < 0


def _power_cross_kernel(alpha: float, weight: float, name: str) -> BivariateKernel:
    # |y|^alpha <= (alpha/e)^alpha exp(|y|) and |y - x| = |x| + |y| when xy < 0,
    # so weight*|y|^alpha*1{xy<0} <= weight*c*exp(-|x|)*exp(|y - x|).
    c = (alpha / np.e) ** alpha if alpha > 0 else 1.0
    if alpha == 0:
        func = lambda x, y: weight * opposite_signs(x, y).astype(float)
    else:
        func = lambda x, y: weight * np.abs(y) ** alpha * opposite_signs(x, y)
    return BivariateKernel(
        func,
        lambda x: weight * c * np.exp(-np.abs(x)),
        1.0,
        float("inf"),
        name,
    )


def crossing_kernel() -> BivariateKernel:
    """``h0(x, y) = 1{xy < 0}``: indicator of a threshold crossing."""
    return _power_cross_kernel(0.0, 1.0, "h0")


def crossing_distance_kernel() -> BivariateKernel:
    """``h1(x, y) = |y| 1{xy < 0}``."""
    return _power_cross_kernel(1.0, 1.0, "h1")


def weighted_crossing_kernel() -> BivariateKernel:
    """``2 h1``: the kernel behind the distance-weighted estimator."""
    return _power_cross_kernel(1.0, 2.0, "h1x2")


def abs_increment_kernel() -> BivariateKernel:
    """``g(x, y) = |y| - |x|``; the centering kernel for oscillating processes.

    Its envelope base is constant, so it is not integrable (``gamma = 0``).
    """
    return BivariateKernel(
        lambda x, y: np.abs(y) - np.abs(x),
        lambda x: np.ones_like(np.asarray(x, dtype=float)),
        1.0,
        0.0,
        "g",
    )


def skew_abs_increment_kernel(beta: float) -> BivariateKernel:
    """``g_beta(x, y) = |y|/(1 + sgn(y) beta) - |x|/(1 + sgn(x) beta)``.

    The centering kernel for skew processes; reduces to ``g`` at ``beta = 0``.
    """
    if not abs(beta) < 1:
        raise ValueError("beta must lie in (-1, 1)")
    b = float(beta)
    bound = 1.0 / (1.0 - abs(b))
    return BivariateKernel(
        lambda x, y: np.abs(y) / (1.0 + _sgn(y) * b) - np.abs(x) / (1.0 + _sgn(x) * b),
        lambda x: bound * (1.0 + 2.0 * np.abs(np.asarray(x, dtype=float))),
        1.0,
        0.0,
        "g_beta",
        {"beta": b},
    )


def constant_kernel(value: float = 1.0) -> BivariateKernel:
    return BivariateKernel(
        lambda x, y: value + 0.0 * (x + y),
        lambda x: abs(value) + 0.0 * np.asarray(x, dtype=float),
        0.0,
        0.0,
        f"const{value:g}",
    )


BUILTIN_KERNELS: dict[str, Callable[[], BivariateKernel]] = {
    "h0": crossing_kernel,
    "h1": crossing_distance_kernel,
    "h1x2": weighted_crossing_kernel,
    "g": abs_increment_kernel,
}


def builtin_kernel(name: str, beta: float | None = None) -> BivariateKernel:
    """Look up a built-in kernel by name (``g_beta`` needs ``beta``)."""
    if name == "g_beta":
        if beta is None:
            raise ValueError("kernel g_beta requires beta")
        return skew_abs_increment_kernel(beta)
    try:
        return BUILTIN_KERNELS[name]()
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; expected one of {sorted(BUILTIN_KERNELS) + ['g_beta']}"
        ) from None
