"""Traces of powers, pair and bipartite statistics, truncations and surrogates.

For g the 2 pi-periodization of x -> f(L x) with coefficients ghat(m):

    S_N = sum_{i != j} g(theta_i - theta_j)
        = 2 sum_{m>=1} ghat(m) |T^(m)|^2 + ghat(0) N^2 - N g(0),

    B_N = sum_{i, j} g(tau_i - theta_j)
        = ghat(0) N_a N_b + sum_{k != 0} ghat(k) T_a^(k) conj(T_b^(k)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import testfn as tf
from .ensemble import CircleConfiguration
from .errors import CutoffTooSmall

PAIR_TAIL_TOL = 1e-8
TAIL_STAT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TraceVector:
    """values[k-1] = T^(k) for k = 1..d.  T^(-k) is the conjugate."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.size

    def __getitem__(self, k: int) -> complex:
        if k == 0:
            return complex(self.n)
        if abs(k) > self.d:
            raise IndexError(f"trace of power {k} not computed (d={self.d})")
        t = self.values[abs(k) - 1]
        return t if k > 0 else t.conjugate()

    def abs2(self) -> np.ndarray:
        return self.values.real ** 2 + self.values.imag ** 2


def traces(config: CircleConfiguration, d: int) -> TraceVector:
    if d < 1:
        raise ValueError("d must be >= 1")
    return TraceVector(_kernels.power_sums(np.ascontiguousarray(config.angles), int(d)), config.n)


# ---------------------------------------------------------------------------
# direct sums


def pair_statistic_direct(config: CircleConfiguration, f, L: float) -> float:
    """sum over ordered pairs i != j of g(theta_i - theta_j), O(N^2)."""
    if config.n < 2:
        raise ValueError("the pair statistic needs N >= 2")
    th = config.angles
    iu = np.triu_indices(th.size, 1)
    # g is even, so each unordered pair counts twice
    return 2.0 * float(np.sum(tf.periodized_eval(f, L, th[iu[1]] - th[iu[0]])))


def bipartite_direct(a: CircleConfiguration, b: CircleConfiguration, f, L: float) -> float:
    """sum over all (i, j), diagonal included, of g(tau_i - theta_j)."""
    diff = a.angles[:, None] - b.angles[None, :]
    return float(np.sum(tf.periodized_eval(f, L, diff)))


# ---------------------------------------------------------------------------
# Fourier side


def _coefficients(f, L, cutoff):
    return tf.circle_coefficient(f, L, np.arange(1, cutoff + 1))


def _check_tail(f, L, cutoff, scale, tol):
    bound = tf.coefficient_tail_bound(f, L, cutoff)
    if scale * bound > tol:
        raise CutoffTooSmall(f"neglected tail bound {scale * bound:.3g} exceeds {tol:.3g} "
                             f"at cutoff {cutoff}")


def _need(tv, cutoff):
    if cutoff > tv.d:
        raise ValueError(f"cutoff {cutoff} exceeds the {tv.d} computed traces")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")


def pair_statistic_fourier(tv: TraceVector, f, L: float, cutoff: int | None = None) -> float:
    if cutoff is None:
        cutoff = min(tf.fourier_cutoff(f, L, tv.n), tv.d)
    _need(tv, cutoff)
    n = tv.n
    _check_tail(f, L, cutoff, 2.0 * n * n, PAIR_TAIL_TOL * n)
    quad = 2.0 * float(np.dot(_coefficients(f, L, cutoff), tv.abs2()[:cutoff]))
    g0 = float(tf.circle_coefficient(f, L, 0))
    return quad + g0 * n * n - n * float(tf.periodized_eval(f, L, 0.0))


def pair_statistic_eq6(tv: TraceVector, f, L: float, cutoff: int | None = None) -> float:
    """ghat(0) N^2 + sum_{k>=1} 2 ghat(k) (|T^(k)|^2 - N).

    Differs from the exact pair statistic by -N ghat(0), a deterministic shift.
    """
    if cutoff is None:
        cutoff = min(tf.fourier_cutoff(f, L, tv.n), tv.d)
    _need(tv, cutoff)
    n = tv.n
    _check_tail(f, L, cutoff, 2.0 * n * n, PAIR_TAIL_TOL * n)
    c = _coefficients(f, L, cutoff)
    return float(tf.circle_coefficient(f, L, 0)) * n * n + 2.0 * float(np.dot(c, tv.abs2()[:cutoff] - n))


def truncated_statistic(tv: TraceVector, f, L: float, d: int) -> float:
    """S_{N,d} = sum_{k=1}^{d} 2 ghat(k) |T^(k)|^2."""
    _need(tv, d)
    if d == 0:
        return 0.0
    return 2.0 * float(np.dot(_coefficients(f, L, d), tv.abs2()[:d]))


def tail_statistic(tv: TraceVector, f, L: float, d: int) -> float:
    """V_{N,d} = sum_{k>d} 2 ghat(k) |T^(k)|^2 up to the decay-justified cutoff."""
    if d < 0:
        raise ValueError("d must be >= 0")
    n = tv.n
    top = tf.fourier_cutoff(f, L, n, TAIL_STAT_TOL)
    if top > tv.d:
        _check_tail(f, L, tv.d, 2.0 * n * n, TAIL_STAT_TOL * n)
        top = tv.d
    if top <= d:
        return 0.0
    k = np.arange(d + 1, top + 1)
    return 2.0 * float(np.dot(tf.circle_coefficient(f, L, k), tv.abs2()[d:top]))


def bipartite_fourier(ta: TraceVector, tb: TraceVector, f, L: float, cutoff: int | None = None) -> float:
    scale = max(ta.n, tb.n)
    if cutoff is None:
        cutoff = min(tf.fourier_cutoff(f, L, scale), ta.d, tb.d)
    _need(ta, cutoff)
    _need(tb, cutoff)
    _check_tail(f, L, cutoff, 2.0 * ta.n * tb.n, PAIR_TAIL_TOL * scale)
    cross = ta.values[:cutoff] * np.conj(tb.values[:cutoff])
    # the k and -k terms are complex conjugates, so the sum is real
    return float(tf.circle_coefficient(f, L, 0)) * ta.n * tb.n + 2.0 * float(
        np.dot(_coefficients(f, L, cutoff), cross.real))


# ---------------------------------------------------------------------------
# Gaussian surrogate


def surrogate_weights(f, L: float, beta: float, d: int) -> np.ndarray:
    """a_k = 2 ghat(k) * 2k / beta for k = 1..d."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    k = np.arange(1, d + 1, dtype=float)
    return 2.0 * tf.circle_coefficient(f, L, k) * (2.0 * k / beta)


def gaussian_surrogate_batch(f, L: float, beta: float, d: int, size: int,
                             rng: np.random.Generator) -> np.ndarray:
    """``size`` independent draws of S_d = sum_k a_k |Z_k|^2, E|Z_k|^2 = 1."""
    if d < 1:
        raise ValueError("d must be >= 1")
    a = surrogate_weights(f, L, beta, d)
    out = np.empty(size)
    chunk = max(1, 2_000_000 // d)
    for s in range(0, size, chunk):
        e = min(size, s + chunk)
        z = rng.standard_normal((e - s, d, 2))
        out[s:e] = (0.5 * (z[..., 0] ** 2 + z[..., 1] ** 2)) @ a
    return out


def gaussian_surrogate(f, L: float, beta: float, d: int, rng: np.random.Generator) -> float:
    return float(gaussian_surrogate_batch(f, L, beta, d, 1, rng)[0])


def default_d(L: float, n: int, eps: float = 0.2, exponent: float = 0.5) -> int:
    """d = floor(L * n^(eps * exponent)); exponent 1/2 and 1 are the two variants in use."""
    return int(math.floor(L * n ** (eps * exponent) + 1e-9))
