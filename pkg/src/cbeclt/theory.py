"""Closed-form limit predictions: variances, means, moment bounds, global limit laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from . import testfn as tf
from .errors import ParameterOutOfRange, QuadratureFailure

QUAD_TOL = 1e-9
SERIES_TOL = 1e-10

Regime = Literal["meso_pair", "meso_bipartite", "local_pair",
                 "local_bipartite_i", "local_bipartite_ii", "local_bipartite_iii"]


@dataclass(frozen=True)
class VariancePrediction:
    value: float
    regime: str
    error: float

    def __post_init__(self):
        if self.value < 0 and self.value > -self.error - 1e-15:
            object.__setattr__(self, "value", 0.0)
        if self.value < 0:
            raise QuadratureFailure(f"{self.regime}: negative variance {self.value:g}")
        if not self.error < 1e-6 * (1.0 + abs(self.value)):
            raise QuadratureFailure(f"{self.regime}: quadrature error {self.error:g} too large")

    def to_json(self):
        return {"value": self.value, "regime": self.regime, "error": self.error}


def _no_circle(f):
    if getattr(f, "circle_native", False):
        raise ParameterOutOfRange("this prediction needs a test function on the real line")


def _quad(func, a, b, points=()):
    pts = [p for p in points if a < p < b]
    val, err = integrate.quad(func, a, b, points=pts or None, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500)
    return val, err


def half_line_integral(f, weight) -> tuple[float, float]:
    """2 int_0^R fhat(t)^2 weight(t) dt, i.e. the integral over the whole line."""
    bps = f.fourier_breakpoints()
    total, err = 0.0, 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        for lo, hi in ((a, min(b, 1.0)), (max(a, 1.0), b)):
            if hi > lo:
                v, e = _quad(lambda t: float(f.fourier(t)) ** 2 * weight(t), lo, hi)
                total += v
                err += e
    return 2.0 * total, 2.0 * err


def fhat_sq_t_sq(f) -> tuple[float, float]:
    """int |fhat(t)|^2 t^2 dt over the real line."""
    _no_circle(f)
    return half_line_integral(f, lambda t: t * t)


def meso_pair_variance(f, beta: float) -> VariancePrediction:
    """(4 / (pi beta^2)) int |fhat(t)|^2 t^2 dt."""
    if not beta > 0:
        raise ParameterOutOfRange("beta must be positive")
    v, e = fhat_sq_t_sq(f)
    c = 4.0 / (math.pi * beta * beta)
    return VariancePrediction(c * v, "meso_pair", c * e)


def meso_bipartite_variance(f, beta: float) -> VariancePrediction:
    p = meso_pair_variance(f, beta)
    return VariancePrediction(0.5 * p.value, "meso_bipartite", 0.5 * p.error)


def _local_pair_cross(f):
    """int over {|s-t| <= 1, max(|s|,|t|) >= 1} of fhat(t) fhat(s) (1 - |s-t|).

    The region and integrand are invariant under (s, t) -> (-s, -t), so only
    t >= 0 is integrated and doubled.  For t >= 1 the s-range is [t-1, t+1];
    for 0 <= t < 1 the square |s| < 1 must be cut out, leaving [1, t+1].
    """
    R = f.fourier_radius
    fh = lambda x: float(f.fourier(x))  # noqa: E731

    def inner(t):
        if t >= 1.0:
            lo, hi = max(t - 1.0, -R), min(t + 1.0, R)
            segs = [(lo, t), (t, hi)]
        else:
            segs = [(1.0, min(t + 1.0, R))]
        tot = 0.0
        for a, b in segs:
            if b > a:
                tot += _quad(lambda s: fh(s) * (1.0 - abs(s - t)), a, b)[0]
        return fh(t) * tot

    if R <= 0.0:
        return 0.0, 0.0
    # fhat vanishes (or is negligible) for |s| > R, and the inner range starts at 1
    if R <= 1.0:
        return 0.0, 0.0
    v, e = _quad(inner, 0.0, R, points=(1.0,))
    return 2.0 * v, 2.0 * e


def _local_pair_corner(f):
    """int over {0 <= s, t <= 1, s + t > 1} of fhat(s) fhat(t) (s + t - 1)."""
    fh = lambda x: float(f.fourier(x))  # noqa: E731

    def inner(t):
        return fh(t) * _quad(lambda s: fh(s) * (s + t - 1.0), 1.0 - t, 1.0)[0]

    return _quad(inner, 0.0, 1.0)


def local_pair_terms(f) -> tuple[float, float, float]:
    """(first, cross, corner) integrals of the local pair variance, each divided by pi.

    ``corner`` covers the single quadrant 0 <= s, t <= 1.
    """
    _no_circle(f)
    t1, _ = half_line_integral(f, lambda t: min(t, 1.0) ** 2)
    t2, _ = _local_pair_cross(f)
    t3, _ = _local_pair_corner(f)
    return t1 / math.pi, t2 / math.pi, t3 / math.pi


def local_pair_variance(f, corner: str = "symmetric") -> VariancePrediction:
    """Limit of Var(S_N) / N for beta = 2 and L = N.

    first - cross - corner, where the corner integral of fhat(s) fhat(t)
    (|s + t| - 1) runs over {|s|, |t| <= 1, |s + t| > 1}.  That region is two
    triangles of equal weight; ``corner="quadrant"`` keeps only the one with
    s, t >= 0, which breaks the (s, t) -> (-s, -t) symmetry of the other two
    terms and disagrees with simulation whenever the corner term is nonzero.
    """
    _no_circle(f)
    if corner not in ("symmetric", "quadrant"):
        raise ParameterOutOfRange("corner must be 'symmetric' or 'quadrant'")
    t1, e1 = half_line_integral(f, lambda t: min(t, 1.0) ** 2)
    t2, e2 = _local_pair_cross(f)
    t3, e3 = _local_pair_corner(f)
    w = 2.0 if corner == "symmetric" else 1.0
    value = (t1 - t2 - w * t3) / math.pi
    return VariancePrediction(value, "local_pair", (e1 + e2 + w * e3) / math.pi)


def local_bipartite_variance(f, case: str) -> VariancePrediction:
    """Limit of Var(B_N) / N at L = N against a CUE configuration.

    case "i": independent CUE, "ii": i.i.d. uniform points, "iii": equispaced grid.
    """
    _no_circle(f)
    case = str(case).lower()
    c = 1.0 / (2.0 * math.pi)
    if case == "i":
        v, e = half_line_integral(f, lambda t: min(t, 1.0) ** 2)
    elif case == "ii":
        v, e = half_line_integral(f, lambda t: min(t, 1.0))
    elif case == "iii":
        top = int(math.floor(f.fourier_radius))
        ls = np.arange(1, top + 1, dtype=float)
        v = 2.0 * float(np.sum(np.asarray(f.fourier(ls)) ** 2))
        e = 2.0 * float(np.sum(np.asarray(f.fourier_majorant(np.arange(top + 1, top + 2000, dtype=float))) ** 2))
        if e > SERIES_TOL:
            raise QuadratureFailure("integer-lattice sum tail is not negligible")
    else:
        raise ParameterOutOfRange(f"unknown local bipartite case {case!r}")
    return VariancePrediction(c * v, f"local_bipartite_{case}", c * e)


# ---------------------------------------------------------------------------
# global regime


def _coeff_array(g_coeffs):
    c = np.asarray(g_coeffs, dtype=float).ravel()
    return c, np.arange(1, c.size + 1, dtype=float)


def global_pair_limit_sample(g_coeffs, beta: float, rng: np.random.Generator, size=None):
    """(4/beta) sum_{m>=1} ghat(m) m (phi_m - 1), phi_m i.i.d. Exp(1).

    ``g_coeffs[m-1]`` is ghat(m).
    """
    if not beta > 0:
        raise ParameterOutOfRange("beta must be positive")
    c, m = _coeff_array(g_coeffs)
    shape = (1 if size is None else int(size), c.size)
    phi = rng.standard_exponential(shape)
    out = (4.0 / beta) * ((phi - 1.0) @ (c * m))
    return float(out[0]) if size is None else out


def global_bipartite_limit_sample(g_coeffs, beta: float, rng: np.random.Generator, size=None):
    """(2/beta) sum_{m>=1} ghat(m) m phi_m with phi_m centered Laplace, Var = 2."""
    if not beta > 0:
        raise ParameterOutOfRange("beta must be positive")
    c, m = _coeff_array(g_coeffs)
    shape = (1 if size is None else int(size), c.size)
    phi = rng.laplace(0.0, 1.0, shape)
    out = (2.0 / beta) * (phi @ (c * m))
    return float(out[0]) if size is None else out


def global_pair_limit_variance(g_coeffs, beta: float) -> float:
    c, m = _coeff_array(g_coeffs)
    return float(np.sum((4.0 / beta * c * m) ** 2))


def global_bipartite_limit_variance(g_coeffs, beta: float) -> float:
    c, m = _coeff_array(g_coeffs)
    return float(2.0 * np.sum((2.0 / beta * c * m) ** 2))


# ---------------------------------------------------------------------------
# means and moments


def bipartite_mean(f, n: int, L: float, regime: str = "meso") -> float:
    """E B_N(f): N^2/(2 pi L) int f, which is N/(2 pi) int f when L = N."""
    if regime == "local":
        if L != n:
            raise ParameterOutOfRange("the local regime needs L = n")
        return n / (2.0 * math.pi) * f.integral()
    if regime == "global" or getattr(f, "circle_native", False):
        return float(tf.circle_coefficient(f, L, 0)) * n * n
    if regime != "meso":
        raise ParameterOutOfRange(f"unknown regime {regime!r}")
    return n * n / (2.0 * math.pi * L) * f.integral()


def jm_moment_bound(k: int, m: int, n: int, beta: float) -> float:
    """Upper bound on E|T^(k)|^(2m) for 0 <= k, K = k m <= n."""
    if not beta > 0:
        raise ParameterOutOfRange("beta must be positive")
    if k < 0 or m < 0:
        raise ParameterOutOfRange("k and m must be nonnegative")
    K = k * m
    if K > n:
        raise ParameterOutOfRange(f"k*m = {K} exceeds n = {n}")
    pref = 1.0
    if beta > 2:
        pref = (1.0 + abs(2.0 / beta - 1.0) / (n - K + 2.0 / beta)) ** K
    return pref * (2.0 / beta) ** m * float(k) ** m * math.factorial(m)


def cue_trace_second_moment(k: int, n: int) -> float:
    """E|T^(k)|^2 = min(|k|, n) for the CUE.

    k = 0 is the degenerate case: T^(0) = n is deterministic, and the value 0
    is its variance rather than its second moment.
    """
    return float(min(abs(int(k)), int(n)))
