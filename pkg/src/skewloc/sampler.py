"""Exact simulation of skew / oscillating Brownian motion with local time.

One step of length ``dt`` from a centered state ``x`` is sampled without
discretisation bias. For the skew process ``X``, ``|X|`` is a reflected
Brownian motion and the symmetric local time of ``X`` at 0 equals the local
time of that reflected motion; only the sign of ``X`` after touching 0 is
biased (``+`` with probability ``(1 + beta)/2``, independently per excursion).
Hence, with ``a = |x|``:

1. draw the free Brownian endpoint ``z = a + sqrt(dt) G``;
2. decide whether 0 was hit: always when ``z <= 0``, otherwise with the
   reflection-principle probability ``exp(-2 a z / dt)``;
3. if not hit: ``|X_dt| = z``, ``dL = 0`` and the sign is kept;
4. if hit: ``|X_dt| = |z|`` and, conditionally on ``A = a + |z|``, the local
   time solves ``(A + dL)^2 = A^2 + 2 dt E`` with ``E ~ Exp(1)`` (this is the
   conditional law implied by the density ``(A + l) exp(-(A + l)^2 / 2dt)``),
   and the new sign is drawn with the skew bias.

Every step consumes exactly one normal, two uniforms and one exponential, so
steps vectorise across paths and the random streams advance in lock-step.

The hitting-time + killed-bridge + Maxwell-triple construction is also
provided (:func:`sbm_step_hitting_time`, :func:`sample_maxwell_triple`) as an
independent reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import ProcessParams
from .errors import SamplerError

# Sub-stream identifiers: each variate type has its own Philox counter block,
# so consumption of one type never shifts another.
_NORMAL, _UNIFORM_HIT, _UNIFORM_SIGN, _EXPONENTIAL, _AUX = range(5)


class RandomStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by numpy's Philox generator, whose 128-bit key holds the seed and
    the stream id; the high word of the counter selects a sub-stream per
    variate type. The draw sequence depends only on ``(seed, stream_id)`` and
    on the total number of draws of each type, not on how they are batched.
    """

    __slots__ = ("seed", "stream_id", "_gens", "counts")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._gens = {}
        self.counts = [0] * 5

    def _gen(self, kind: int) -> np.random.Generator:
        g = self._gens.get(kind)
        if g is None:
            bitgen = np.random.Philox(
                key=np.array([self.seed, self.stream_id], dtype=np.uint64),
                counter=np.array([0, 0, 0, kind], dtype=np.uint64),
            )
            g = self._gens[kind] = np.random.Generator(bitgen)
        return g

    def normal(self, size=None):
        self.counts[_NORMAL] += int(np.prod(size)) if size is not None else 1
        return self._gen(_NORMAL).standard_normal(size)

    def uniform(self, size=None, kind: int = _UNIFORM_HIT):
        self.counts[kind] += int(np.prod(size)) if size is not None else 1
        return self._gen(kind).random(size)

    def exponential(self, size=None):
        self.counts[_EXPONENTIAL] += int(np.prod(size)) if size is not None else 1
        return self._gen(_EXPONENTIAL).standard_exponential(size)

    def aux(self) -> np.random.Generator:
        """Generator for variable-count draws (reference samplers only)."""
        return self._gen(_AUX)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


# ---------------------------------------------------------------------------
# Vectorised exact step kernels
# ---------------------------------------------------------------------------


def _reflected_step(a, dt, z, u_hit, e):
    """Core step for ``|X|``: returns ``(abs_end, d_ell, hit)``."""
    sq = math.sqrt(dt)
    end = a + sq * z
    pos = np.maximum(end, 0.0)
    hit = (end <= 0.0) | (u_hit < np.exp(-2.0 * a * pos / dt))
    abs_end = np.abs(end)
    A = a + abs_end
    # sqrt(A^2 + 2 dt E) - A, written without cancellation
    ell = 2.0 * dt * e / (np.sqrt(A * A + 2.0 * dt * e) + A)
    ell = np.where(hit, ell, 0.0)
    return abs_end, ell, hit


def skew_step_arrays(beta, dt, x, z, u_hit, u_sign, e):
    """Vectorised skew step from centered states ``x`` given the four variates."""
    x = np.asarray(x, dtype=float)
    abs_end, ell, hit = _reflected_step(np.abs(x), dt, z, u_hit, e)
    new_sign = np.where(u_sign < 0.5 * (1.0 + beta), 1.0, -1.0)
    old_sign = np.where(x >= 0, 1.0, -1.0)
    sign = np.where(hit, new_sign, old_sign)
    return sign * abs_end, ell


def oscillating_step_arrays(params: ProcessParams, dt, y, z, u_hit, u_sign, e):
    """Oscillating step through ``X = Y/sigma(Y)`` (a skew process with ``beta_sigma``)."""
    y = np.asarray(y, dtype=float)
    x = y / params.sigma(y)
    xn, ell = skew_step_arrays(params.beta_sigma, dt, x, z, u_hit, u_sign, e)
    return params.sigma(xn) * xn, params.local_time_factor * ell


def step_arrays(params: ProcessParams, dt, x, z, u_hit, u_sign, e):
    if params.is_skew:
        return skew_step_arrays(params.beta, dt, x, z, u_hit, u_sign, e)
    return oscillating_step_arrays(params, dt, x, z, u_hit, u_sign, e)


def _draw_step_variates(stream: RandomStream, size):
    return (
        stream.normal(size),
        stream.uniform(size, _UNIFORM_HIT),
        stream.uniform(size, _UNIFORM_SIGN),
        stream.exponential(size),
    )


def sbm_step(beta: float, dt: float, x, stream: RandomStream, size=None):
    """Exact skew Brownian step from centered ``x``.

    Returns ``(y, d_ell)``; with ``size`` set, draws ``size`` independent
    steps from the same ``x``.
    """
    if not abs(beta) < 1:
        raise ValueError("beta must lie in (-1, 1)")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    shape = size if size is not None else np.shape(x)
    y, ell = skew_step_arrays(beta, dt, np.broadcast_to(x, shape), *_draw_step_variates(stream, shape))
    if size is None and np.ndim(x) == 0:
        return float(y), float(ell)
    return y, ell


def obm_step(params: ProcessParams, dt: float, x, stream: RandomStream, size=None):
    """Exact oscillating Brownian step from centered ``x``; ``d_ell`` is ``L(Y)``."""
    if params.is_skew:
        raise ValueError("obm_step requires oscillating parameters")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    shape = size if size is not None else np.shape(x)
    y, ell = oscillating_step_arrays(params, dt, np.broadcast_to(x, shape), *_draw_step_variates(stream, shape))
    if size is None and np.ndim(x) == 0:
        return float(y), float(ell)
    return y, ell


# ---------------------------------------------------------------------------
# Reference construction (hitting time, killed bridge, Maxwell triple)
# ---------------------------------------------------------------------------


def sample_maxwell_triple(t: float, stream: RandomStream, size=None):
    """``(|B_t|, L_t(B), sgn(B_t))`` for standard BM from 0.

    ``S = |B_t| + L_t`` has the Maxwell law (norm of a 3-d Gaussian with
    variance ``t``), the split ``L_t ~ Uniform(0, S)`` and an independent fair
    sign.
    """
    g = stream.aux()
    n = 1 if size is None else size
    s = np.sqrt(t) * np.linalg.norm(g.standard_normal((3, n) if np.ndim(n) == 0 else (3, *n)), axis=0)
    ell = s * g.random(s.shape)
    sign = np.where(g.random(s.shape) < 0.5, 1.0, -1.0)
    abs_pos = s - ell
    if size is None:
        return float(abs_pos[0]), float(ell[0]), float(sign[0])
    return abs_pos, ell, sign


def sbm_step_hitting_time(beta: float, dt: float, x: float, stream: RandomStream, max_iter: int = 10_000):
    """Reference skew step by hitting-time decomposition (scalar, slow).

    For ``x != 0`` (reduced to ``x > 0`` by the symmetry ``x, beta -> -x, -beta``)
    the hitting time is ``tau = x^2/G^2``; if ``tau >= dt`` the endpoint is
    drawn from the killed density ``phi_dt(y - x)(1 - exp(-2xy/dt))`` by
    rejection, otherwise the step restarts from 0 over ``dt - tau`` with a
    Maxwell triple whose sign is biased to ``+`` with probability
    ``(1 + beta)/2``.
    """
    g = stream.aux()
    flip = x < 0
    if flip:
        x, beta = -x, -beta
    if x > 0:
        G = g.standard_normal()
        tau = x * x / (G * G) if G != 0 else math.inf
        if tau >= dt:
            sq = math.sqrt(dt)
            for _ in range(max_iter):
                y = x + sq * g.standard_normal()
                if y > 0 and g.random() < 1.0 - math.exp(-2.0 * x * y / dt):
                    return (-y if flip else y), 0.0
            raise SamplerError("killed-bridge rejection exceeded its iteration cap")
        rest = dt - tau
    else:
        rest = dt
    s = math.sqrt(rest) * math.sqrt(sum(g.standard_normal() ** 2 for _ in range(3)))
    ell = s * g.random()
    y = (s - ell) * (1.0 if g.random() < 0.5 * (1.0 + beta) else -1.0)
    return (-y if flip else y), ell


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


@dataclass
class PathSample:
    """Discretely observed path with exact per-step local-time increments.

    ``positions`` are in user coordinates (not shifted by the threshold);
    ``localtime_increments[k]`` is the symmetric local time at the threshold
    accrued on ``[k dt, (k+1) dt]``.
    """

    params: ProcessParams
    x0: float
    T: float
    n_steps: int
    positions: np.ndarray
    localtime_increments: np.ndarray
    seed: int | None = None
    stream_id: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.positions.shape != (self.n_steps + 1,):
            raise ValueError("positions must have n_steps + 1 entries")
        if self.localtime_increments.shape != (self.n_steps,):
            raise ValueError("localtime_increments must have n_steps entries")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def local_time(self) -> np.ndarray:
        """Cumulative local time at the grid times (starts at 0)."""
        return np.concatenate([[0.0], np.cumsum(self.localtime_increments)])


def iter_path_blocks(params: ProcessParams, x0: float, T: float, n_steps: int, streams, block: int = 4096):
    """Simulate several paths in lock-step, yielding blocks of observations.

    Yields ``(positions, increments)`` with shapes ``(M, b)``: the centered
    positions at steps ``k+1..k+b`` and the local-time increments over those
    steps. The draws of each path come only from its own stream, in order, so
    the output is independent of ``block``.
    """
    if n_steps < 1 or not T > 0:
        raise ValueError("need n_steps >= 1 and T > 0")
    dt = T / n_steps
    M = len(streams)
    state = np.full(M, float(x0) - params.threshold)
    done = 0
    while done < n_steps:
        b = min(block, n_steps - done)
        z = np.stack([s.normal(b) for s in streams])
        uh = np.stack([s.uniform(b, _UNIFORM_HIT) for s in streams])
        us = np.stack([s.uniform(b, _UNIFORM_SIGN) for s in streams])
        e = np.stack([s.exponential(b) for s in streams])
        pos = np.empty((M, b))
        inc = np.empty((M, b))
        for k in range(b):
            state, ell = step_arrays(params, dt, state, z[:, k], uh[:, k], us[:, k], e[:, k])
            pos[:, k] = state
            inc[:, k] = ell
        done += b
        yield pos, inc


def simulate_paths(params: ProcessParams, x0: float, T: float, n_steps: int, streams, block: int = 4096):
    """Return centered positions ``(M, n_steps+1)`` and increments ``(M, n_steps)``."""
    M = len(streams)
    positions = np.empty((M, n_steps + 1))
    positions[:, 0] = float(x0) - params.threshold
    incs = np.empty((M, n_steps))
    k = 0
    for pos, inc in iter_path_blocks(params, x0, T, n_steps, streams, block):
        b = pos.shape[1]
        positions[:, k + 1 : k + 1 + b] = pos
        incs[:, k : k + b] = inc
        k += b
    return positions, incs


def simulate_path(params: ProcessParams, x0: float, T: float, n_steps: int, stream: RandomStream) -> PathSample:
    """Exact path on the grid ``k T / n_steps`` started at ``x0`` (user coordinates)."""
    positions, incs = simulate_paths(params, x0, T, n_steps, [stream])
    pos = positions[0] + params.threshold
    pos[0] = float(x0)
    return PathSample(params, float(x0), float(T), int(n_steps), pos, incs[0], stream.seed, stream.stream_id)


def sbm_from_obm_path(path: PathSample) -> PathSample:
    """Map an oscillating path to its skew companion ``X = Y/sigma(Y)``.

    Local-time increments are divided by ``2 s- s+/(s- + s+)``.
    """
    params = path.params
    if params.is_skew:
        raise ValueError("sbm_from_obm_path requires an oscillating path")
    r = params.threshold
    y = path.positions - r
    x = y / params.sigma(y) + r
    factor = params.local_time_factor
    inc = path.localtime_increments / factor if factor != 1.0 else path.localtime_increments.copy()
    # The source arrays are kept so the inverse map is exact even where
    # (y / s) * s differs from y in the last bit.
    meta = {**path.meta, "source": (params, path.positions, path.localtime_increments)}
    return PathSample(params.to_skew(), float(x[0]), path.T, path.n_steps, x, inc, path.seed, path.stream_id, meta)


def obm_from_sbm_path(path: PathSample, params: ProcessParams) -> PathSample:
    """Inverse of :func:`sbm_from_obm_path` for the given oscillating ``params``."""
    meta = dict(path.meta)
    source = meta.pop("source", None)
    if source is not None and source[0] == params:
        candidate = sbm_from_obm_path(PathSample(params, float(source[1][0]), path.T, path.n_steps, source[1], source[2]))
        if np.array_equal(candidate.positions, path.positions) and np.array_equal(
            candidate.localtime_increments, path.localtime_increments
        ):
            return PathSample(params, float(source[1][0]), path.T, path.n_steps, source[1].copy(),
                              source[2].copy(), path.seed, path.stream_id, meta)
    r = params.threshold
    x = path.positions - r
    y = params.sigma(x) * x + r
    factor = params.local_time_factor
    inc = path.localtime_increments * factor if factor != 1.0 else path.localtime_increments.copy()
    return PathSample(params, float(y[0]), path.T, path.n_steps, y, inc, path.seed, path.stream_id, meta)
