"""Brute-force expectations against the CbetaE density for N = 2, 3.

Every supported observable is rotation invariant, so the first angle is
pinned at 0 and the remaining N-1 angles are integrated by the periodic
trapezoidal rule on a tensor grid, doubling the grid until two successive
(Richardson-extrapolated) estimates agree.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from . import testfn as tf
from .ensemble import log_normalization
from .errors import NoConvergence, ParameterOutOfRange

TWO_PI = 2.0 * math.pi
OBSERVABLES = ("normalization", "trace_second_moment", "gap_cdf", "pair_mean")


def _chord_pow(x, beta):
    return np.abs(2.0 * np.sin(0.5 * x)) ** beta


def _grid_sum(n, beta, M, observable, params):
    h = TWO_PI / M
    th = h * np.arange(M)
    if n == 2:
        pts = [np.zeros_like(th), th]
        w = _chord_pow(th, beta)
    else:
        a, b = np.meshgrid(th, th, indexing="ij")
        pts = [np.zeros_like(a), a, b]
        w = _chord_pow(a, beta) * _chord_pow(b, beta) * _chord_pow(a - b, beta)
    if observable == "normalization":
        obs = 1.0
    elif observable == "trace_second_moment":
        k = int(params.get("k", 1))
        t = sum(np.exp(1j * k * p) for p in pts)
        obs = np.abs(t) ** 2
    elif observable == "pair_mean":
        f, L = params["f"], float(params["L"])
        g = lambda x: tf.periodized_eval(f, L, x)  # noqa: E731
        obs = 2.0 * g(pts[1]) if n == 2 else 2.0 * (g(pts[1]) + g(pts[2]) + g(pts[1] - pts[2]))
    else:
        raise ParameterOutOfRange(f"unknown observable {observable!r}")
    return TWO_PI * h ** (n - 1) * float(np.sum(obs * w)) / math.exp(log_normalization(n, beta))


def _gap_cdf(beta, x):
    dens = lambda d: (TWO_PI - d) * abs(2.0 * math.sin(0.5 * d)) ** beta  # noqa: E731
    x = min(max(float(x), 0.0), TWO_PI)
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    total = integrate.quad(dens, 0.0, TWO_PI, **kw)[0]
    return integrate.quad(dens, 0.0, x, **kw)[0] / total


def quadrature_oracle(beta: float, n: int, observable: str, rtol: float = 1e-6, **params) -> float:
    """E[observable] under the CbetaE law with n in {2, 3}.

    observable: "normalization" (integral of the density, should be 1),
    "trace_second_moment" (E|T^(k)|^2, param k), "gap_cdf" (n = 2 only;
    P(theta_(2) - theta_(1) <= x), param x) or "pair_mean" (E S_N(f), params f, L).
    """
    if n not in (2, 3):
        raise ParameterOutOfRange("the quadrature oracle supports n = 2 or 3")
    if not beta > 0:
        raise ParameterOutOfRange("beta must be positive")
    if observable == "gap_cdf":
        if n != 2:
            raise ParameterOutOfRange("gap_cdf is implemented for n = 2")
        return _gap_cdf(beta, params["x"])
    if observable not in OBSERVABLES:
        raise ParameterOutOfRange(f"unknown observable {observable!r}")

    # |x|^beta kinks on grid nodes give error terms h^(beta+1), h^(beta+3), ...;
    # for even integer beta the integrand is analytic and no extrapolation is needed
    even = float(beta).is_integer() and int(beta) % 2 == 0
    M = 16
    max_M = 1 << (20 if n == 2 else 11)
    table: list[list[float]] = []
    prev = None
    while M <= max_M:
        row = [_grid_sum(n, beta, M, observable, params)]
        if not even and table:
            for i, prev_val in enumerate(table[-1]):
                p = beta + 1.0 + 2.0 * i
                r = 2.0 ** p
                row.append((r * row[i] - prev_val) / (r - 1.0))
        table.append(row)
        est = row[-1]
        if prev is not None and abs(est - prev) <= rtol * abs(est) + 1e-13:
            return est
        prev = est
        M *= 2
    raise NoConvergence(f"quadrature oracle stalled for {observable} (beta={beta}, n={n})")
