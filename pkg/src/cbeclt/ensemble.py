"""Point configurations on the unit circle.

Exact CbetaE draws go through random Verblunsky coefficients (Killip-Nenciu):
alpha_k for k < N-1 is rotation invariant in the disk with
|alpha_k|^2 ~ Beta(1, beta (N-k-1)/2), alpha_{N-1} is uniform on the circle,
and the eigenangles are the zeros of the paraorthogonal polynomial Phi_N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import DegenerateConfiguration, NoConvergence, RootSeparationFailure

TWO_PI = 2.0 * math.pi
DEFAULT_TOL = 1e-12


def _wrap(angles):
    a = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    # np.mod of a tiny negative number can round to exactly 2 pi
    a[a >= TWO_PI] = 0.0
    return a


@dataclass(frozen=True, eq=False)
class CircleConfiguration:
    """N angles in [0, 2 pi), stored sorted ascending."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.sort(_wrap(np.atleast_1d(self.angles)))
        if a.ndim != 1 or a.size < 1:
            raise ValueError("a configuration needs at least one angle")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def n(self) -> int:
        return self.angles.size

    def __len__(self):
        return self.angles.size

    def __eq__(self, other):
        if not isinstance(other, CircleConfiguration):
            return NotImplemented
        return np.array_equal(self.angles, other.angles)

    def __hash__(self):
        return hash(self.angles.tobytes())

    def rotated(self, c: float) -> CircleConfiguration:
        return CircleConfiguration(self.angles + c)

    def to_json(self) -> list[float]:
        return [float(x) for x in self.angles]

    @classmethod
    def from_json(cls, values) -> CircleConfiguration:
        return cls(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class VerblunskyCoefficients:
    alpha: np.ndarray
    beta_param: float
    n: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=complex).copy()
        if a.ndim != 1 or a.size < 1:
            raise ValueError("need at least one Verblunsky coefficient")
        if not self.beta_param > 0:
            raise ValueError("beta must be positive")
        if np.any(np.abs(a[:-1]) >= 1.0):
            raise ValueError("|alpha_k| must be < 1 for k < N-1")
        last = a[-1]
        if abs(abs(last) - 1.0) > 1e-12:
            raise ValueError("|alpha_{N-1}| must equal 1")
        a[-1] = last / abs(last)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "n", a.size)


@dataclass(frozen=True)
class EnsembleKind:
    tag: Literal["cbe", "uniform", "equispaced"]
    beta: float | None = None

    def __post_init__(self):
        if self.tag not in ("cbe", "uniform", "equispaced"):
            raise ValueError(f"unknown ensemble tag {self.tag!r}")
        if self.tag == "cbe":
            if self.beta is None or not self.beta > 0:
                raise ValueError("CBE ensemble needs beta > 0")
        elif self.beta is not None:
            object.__setattr__(self, "beta", None)

    @classmethod
    def cbe(cls, beta: float) -> EnsembleKind:
        return cls("cbe", float(beta))

    @classmethod
    def uniform(cls) -> EnsembleKind:
        return cls("uniform")

    @classmethod
    def equispaced(cls) -> EnsembleKind:
        return cls("equispaced")

    def __str__(self):
        return f"cbe(beta={self.beta:g})" if self.tag == "cbe" else self.tag


def log_normalization(n: int, beta: float) -> float:
    """log Z_{beta,N} = N log(2 pi) + log Gamma(1 + beta N/2) - N log Gamma(1 + beta/2)."""
    return n * math.log(TWO_PI) + gammaln(1.0 + 0.5 * beta * n) - n * gammaln(1.0 + 0.5 * beta)


def log_density(config: CircleConfiguration, beta: float) -> float:
    """Log of the CbetaE joint density of the (unordered) angles."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    th = config.angles
    n = th.size
    if n < 2:
        raise ValueError("log_density needs N >= 2")
    iu = np.triu_indices(n, 1)
    chord = np.abs(2.0 * np.sin(0.5 * (th[iu[0]] - th[iu[1]])))
    if np.any(chord == 0.0):
        raise DegenerateConfiguration("two angles coincide; the density vanishes")
    return float(beta * np.sum(np.log(chord)) - log_normalization(n, beta))


def sample_verblunsky(n: int, beta: float, rng: np.random.Generator) -> VerblunskyCoefficients:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    shape_b = 0.5 * beta * (n - 1 - np.arange(n - 1))
    r = np.sqrt(rng.beta(1.0, shape_b)) if n > 1 else np.empty(0)
    # for small b the modulus can round to 1 in double precision; redraw those
    cap = 1.0 - 2.0 ** -48
    while np.any(r >= cap):
        bad = r >= cap
        r[bad] = np.sqrt(rng.beta(1.0, shape_b[bad]))
    phases = rng.uniform(0.0, TWO_PI, size=n)
    alpha = np.empty(n, dtype=complex)
    alpha[:-1] = r * np.exp(1j * phases[:-1])
    alpha[-1] = np.exp(1j * phases[-1])
    return VerblunskyCoefficients(alpha, float(beta))


def eigenvalues_from_verblunsky(vc: VerblunskyCoefficients, tol: float = DEFAULT_TOL) -> CircleConfiguration:
    """Zeros of the paraorthogonal polynomial built from ``vc``, as angles."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    ar = np.ascontiguousarray(vc.alpha.real)
    ai = np.ascontiguousarray(vc.alpha.imag)
    angles, status = _kernels.eigenangles(ar, ai, tol, 200)
    if status == _kernels.STATUS_NONMONOTONE:
        raise RootSeparationFailure("relative Pruefer phase is not monotone on the scan grid")
    if status == _kernels.STATUS_NO_CONVERGENCE:
        raise NoConvergence("eigenangle refinement did not converge")
    angles = _wrap(angles)
    if angles.size > 1:
        s = np.sort(angles)
        gaps = np.diff(np.append(s, s[0] + TWO_PI))
        if gaps.min() <= tol:
            raise RootSeparationFailure(f"two eigenangles within tol={tol:g}")
    return CircleConfiguration(angles)


def sample(kind: EnsembleKind, n: int, rng: np.random.Generator | None = None,
           tol: float = DEFAULT_TOL) -> CircleConfiguration:
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind.tag == "equispaced":
        return CircleConfiguration(TWO_PI * np.arange(1, n + 1) / n)
    if rng is None:
        raise ValueError(f"{kind} sampling needs a random generator")
    if kind.tag == "uniform":
        return CircleConfiguration(rng.uniform(0.0, TWO_PI, size=n))
    return eigenvalues_from_verblunsky(sample_verblunsky(n, kind.beta, rng), tol)


@dataclass
class MCMCRun:
    config: CircleConfiguration
    acceptance_rate: float


def mcmc_chain(n: int, beta: float, sweeps: int, step: float, rng: np.random.Generator,
               start: np.ndarray | None = None) -> MCMCRun:
    """Metropolis random walk targeting the CbetaE density, one coordinate at a time."""
    if n < 2:
        raise ValueError("mcmc needs n >= 2")
    if not beta > 0 or not step > 0:
        raise ValueError("beta and step must be positive")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if start is None:
        theta = rng.uniform(0.0, TWO_PI, size=n)
    else:
        theta = _wrap(np.array(start, dtype=float))
        if theta.size != n:
            raise ValueError("start has the wrong length")
    u_prop = rng.random((sweeps, n))
    u_acc = rng.random((sweeps, n))
    accepted = _kernels.metropolis(theta, float(beta), float(step), u_prop, u_acc)
    return MCMCRun(CircleConfiguration(theta), accepted / (sweeps * n))


def mcmc_sample(n: int, beta: float, sweeps: int, step: float, rng: np.random.Generator,
                start: np.ndarray | None = None) -> CircleConfiguration:
    return mcmc_chain(n, beta, sweeps, step, rng, start).config
