"""Even real test functions, their Fourier transforms and circle periodizations.

Convention: fhat(t) = (2 pi)^(-1/2) int f(x) exp(-i t x) dx.  With this
normalization the 2 pi-periodization of x -> f(L x) has Fourier coefficients
ghat(m) = fhat(m / L) / (sqrt(2 pi) L).

Both bump families share one transform: with phi(u) = exp(-1/(1-u^2)) on
|u| < 1,

    h(t) = (2 pi)^(-1/2) int phi(x) exp(-i t x) dx,

XBump(a) has fhat(t) = a h(a t) and FreqBump(b) has f(x) = b h(b x).  h is
tabulated once by the trapezoidal rule on the support of phi (spectrally
accurate: the error is the aliased transform h(2 pi / dx - t)) and read back
through a clamped cubic spline.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

SQRT_2PI = math.sqrt(2.0 * math.pi)
TWO_PI = 2.0 * math.pi

# |h(t)| sits at the 1e-16 roundoff floor beyond ~1000
H_RADIUS = 1200.0
H_TABLE_STEP = 0.0125
H_ALIAS_SPAN = 3000.0
# Gaussian tails below this are dropped
NEGLIGIBLE = 1e-18


def bump(u):
    """phi(u) = exp(-1/(1-u^2)) for |u| < 1, else 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def bump_transform_direct(t, span=H_ALIAS_SPAN):
    """h(t) by the trapezoidal rule with node spacing 2 pi / span."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dx = TWO_PI / span
    x = dx * np.arange(1, int(1.0 / dx) + 1)
    x = x[x < 1.0]
    w = bump(x)
    out = np.empty(t.size)
    for i in range(0, t.size, 4096):
        tt = t[i:i + 4096]
        out[i:i + 4096] = math.exp(-1.0) + 2.0 * (np.cos(np.outer(tt, x)) @ w)
    return out * (dx / SQRT_2PI)


class BumpTransform:
    """Cached table of h on [0, H_RADIUS] with spline read-back."""

    def __init__(self, grid, values):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.spline = CubicSpline(self.grid, self.values, bc_type=((1, 0.0), "not-a-knot"))
        # nonincreasing majorant of |spline| built from per-interval maxima on a 16x subgrid;
        # the sampling error is O(|h| (step/32)^2), far inside the 1e-5 margin; the absolute
        # 1e-17 covers spline roundoff where |h| itself is at the floor
        sub = np.linspace(0.0, 1.0, 17)
        pts = (self.grid[:-1, None] + np.diff(self.grid)[:, None] * sub).ravel()
        seg = np.abs(self.spline(pts)).reshape(-1, sub.size).max(axis=1)
        seg = np.append(seg, abs(self.values[-1]))
        self.envelope = np.maximum.accumulate(seg[::-1])[::-1] * (1.0 + 1e-5) + 1e-17
        self.radius = float(self.grid[-1])

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        inside = t <= self.radius
        out[inside] = self.spline(t[inside])
        return out

    def majorant(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        idx = np.minimum(np.floor(t / H_TABLE_STEP).astype(np.int64), self.grid.size - 1)
        out = self.envelope[idx]
        return np.where(t > self.radius, 0.0, out)


@functools.lru_cache(maxsize=1)
def bump_transform_table() -> BumpTransform:
    grid = np.linspace(0.0, H_RADIUS, int(round(H_RADIUS / H_TABLE_STEP)) + 1)
    return BumpTransform(grid, bump_transform_direct(grid))


class TestFunction:
    """Base class; subclasses are frozen dataclasses (hashable, immutable)."""

    form = "abstract"
    # True for functions defined directly on the circle (global regime only)
    circle_native = False

    def eval(self, x):
        raise NotImplementedError

    def fourier(self, t):
        raise NotImplementedError

    def fourier_majorant(self, t):
        """Nonincreasing-in-|t| upper bound on |fhat(t)|."""
        raise NotImplementedError

    @property
    def fourier_radius(self) -> float:
        """|fhat| is negligible (or zero) beyond this."""
        raise NotImplementedError

    @property
    def x_radius(self) -> float:
        """|f| is negligible (or zero) beyond this."""
        raise NotImplementedError

    @property
    def fourier_compact(self) -> bool:
        return False

    def fourier_breakpoints(self) -> list[float]:
        return [0.0, self.fourier_radius]

    def integral(self) -> float:
        """int f(x) dx."""
        return SQRT_2PI * float(self.fourier(0.0))

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class XBump(TestFunction):
    """f(x) = exp(-1/(1-(x/a)^2)) on |x| < a: compactly supported, C^infinity."""

    a: float = 1.0
    table: BumpTransform = field(default=None, compare=False, repr=False)

    form = "xbump"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("XBump half-width must be positive")
        if self.table is None:
            object.__setattr__(self, "table", bump_transform_table())

    def eval(self, x):
        return bump(np.asarray(x, dtype=float) / self.a)

    def fourier(self, t):
        return self.a * self.table(self.a * np.asarray(t, dtype=float))

    def fourier_majorant(self, t):
        return self.a * self.table.majorant(self.a * np.asarray(t, dtype=float))

    @property
    def fourier_radius(self):
        return self.table.radius / self.a

    @property
    def x_radius(self):
        return self.a

    def fourier_breakpoints(self):
        r = self.fourier_radius
        pts = [0.0, 1.0 / self.a, 5.0 / self.a, 20.0 / self.a]
        pts += list(np.arange(50.0, self.table.radius, 50.0) / self.a)
        return sorted(p for p in set(pts + [r]) if p <= r)

    def integral(self):
        val, _ = integrate.quad(lambda x: float(bump(x / self.a)), -self.a, self.a,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def to_spec(self):
        return {"form": self.form, "a": self.a}


@dataclass(frozen=True)
class FreqBump(TestFunction):
    """fhat(t) = exp(-1/(1-(t/b)^2)) on |t| < b; f itself is Schwartz, not compact."""

    b: float = 1.0
    table: BumpTransform = field(default=None, compare=False, repr=False)

    form = "freqbump"

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("FreqBump half-width must be positive")
        if self.table is None:
            object.__setattr__(self, "table", bump_transform_table())

    def eval(self, x):
        return self.b * self.table(self.b * np.asarray(x, dtype=float))

    def fourier(self, t):
        return bump(np.asarray(t, dtype=float) / self.b)

    def fourier_majorant(self, t):
        return self.fourier(t)

    @property
    def fourier_radius(self):
        return self.b

    @property
    def fourier_compact(self):
        return True

    @property
    def x_radius(self):
        return self.table.radius / self.b

    def integral(self):
        return SQRT_2PI * math.exp(-1.0)

    def to_spec(self):
        return {"form": self.form, "b": self.b}


@dataclass(frozen=True)
class GaussianProfile(TestFunction):
    """f(x) = exp(-x^2 / (2 sigma^2)),  fhat(t) = sigma exp(-sigma^2 t^2 / 2)."""

    sigma: float = 1.0

    form = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (x / self.sigma) ** 2)

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        return self.sigma * np.exp(-0.5 * (self.sigma * t) ** 2)

    def fourier_majorant(self, t):
        return self.fourier(t)

    @property
    def fourier_radius(self):
        return math.sqrt(2.0 * math.log(max(self.sigma, 1.0) / NEGLIGIBLE)) / self.sigma

    @property
    def x_radius(self):
        return self.sigma * math.sqrt(2.0 * math.log(1.0 / NEGLIGIBLE))

    def integral(self):
        return SQRT_2PI * self.sigma

    def to_spec(self):
        return {"form": self.form, "sigma": self.sigma}


@dataclass(frozen=True)
class CosineSeries(TestFunction):
    """g(x) = sum_m c_m cos(m x) directly on the circle (global regime, L = 1).

    ``coeffs[m-1]`` is c_m for m >= 1; ``constant`` is c_0.
    """

    coeffs: tuple = (1.0,)
    constant: float = 0.0

    form = "cosine"
    circle_native = True

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.constant)
        for m, c in enumerate(self.coeffs, start=1):
            out = out + c * np.cos(m * x)
        return out

    def coefficient(self, m):
        """Circle Fourier coefficient ghat(m)."""
        m = np.abs(np.asarray(m))
        out = np.zeros(m.shape)
        out[m == 0] = self.constant
        for k, c in enumerate(self.coeffs, start=1):
            out[m == k] = 0.5 * c
        return out

    @property
    def degree(self):
        return len(self.coeffs)

    def fourier(self, t):
        raise TypeError("a circle-native function has no line Fourier transform")

    def to_spec(self):
        return {"form": self.form, "coeffs": list(self.coeffs), "constant": self.constant}


FORMS = {"xbump": (XBump, "a"), "freqbump": (FreqBump, "b"), "gaussian": (GaussianProfile, "sigma")}


def from_spec(spec: dict) -> TestFunction:
    """Build a test function from e.g. {"form": "xbump", "a": 1.0}."""
    if not isinstance(spec, dict) or "form" not in spec:
        raise ValueError("test function spec needs a 'form'")
    form = str(spec["form"]).lower()
    if form == "cosine":
        return CosineSeries(tuple(spec.get("coeffs", (1.0,))), float(spec.get("constant", 0.0)))
    if form not in FORMS:
        raise ValueError(f"unknown test function form {spec['form']!r}")
    cls, key = FORMS[form]
    extra = set(spec) - {"form", key}
    if extra:
        raise ValueError(f"unexpected test function parameter(s) {sorted(extra)}")
    return cls(float(spec.get(key, 1.0)))


# ---------------------------------------------------------------------------
# module-level operations


def eval(f: TestFunction, x):  # noqa: A001 - mirrors the operation name
    return f.eval(x)


def fourier(f: TestFunction, t):
    return f.fourier(t)


def _check_circle(f, L):
    if f.circle_native and L != 1:
        raise ValueError("circle-native functions are only defined for L = 1")


def circle_coefficient(f: TestFunction, L: float, m):
    """ghat(m) of the 2 pi-periodization of x -> f(L x)."""
    if not L > 0:
        raise ValueError("L must be positive")
    _check_circle(f, L)
    if f.circle_native:
        return f.coefficient(m)
    m = np.asarray(m, dtype=float)
    return f.fourier(m / L) / (SQRT_2PI * L)


def wrap_centered(theta):
    """Map angles into [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi


def periodized_eval(f: TestFunction, L: float, theta):
    """sum_n f(L (wrap(theta) + 2 pi n)) over the images where f is not negligible."""
    if not L > 0:
        raise ValueError("L must be positive")
    _check_circle(f, L)
    th = wrap_centered(theta)
    if f.circle_native:
        return f.eval(th)
    reach = int(math.ceil((f.x_radius / L + math.pi) / TWO_PI))
    out = f.eval(L * th)
    for n in range(1, reach + 1):
        out = out + f.eval(L * (th + TWO_PI * n)) + f.eval(L * (th - TWO_PI * n))
    return out


@functools.lru_cache(maxsize=256)
def _majorant_terms(f: TestFunction, L: float):
    """|ghat(m)| majorants for m = 1..M where beyond M everything is negligible."""
    top = int(math.ceil(f.fourier_radius * L)) + 1
    m = np.arange(1, top + 1, dtype=float)
    return f.fourier_majorant(m / L) / (SQRT_2PI * L)


def coefficient_tail_bound(f: TestFunction, L: float, cutoff: int) -> float:
    """Upper bound on sum_{m > cutoff} |ghat(m)|."""
    _check_circle(f, L)
    if f.circle_native:
        return float(np.sum(np.abs(f.coefficient(np.arange(cutoff + 1, f.degree + 1)))))
    terms = _majorant_terms(f, float(L))
    return float(terms[cutoff:].sum()) if cutoff < terms.size else 0.0


@functools.lru_cache(maxsize=256)
def fourier_cutoff(f: TestFunction, L: float, n: int, tol: float = 1e-8) -> int:
    """Smallest cutoff with 2 N^2 sum_{m > cutoff} |ghat(m)| <= tol * max(N, 1)."""
    _check_circle(f, L)
    if f.circle_native:
        return f.degree
    if f.fourier_compact:
        # fhat(m/L) = 0 once m/L >= radius
        return max(int(math.ceil(f.fourier_radius * L)) - 1, 0)
    terms = _majorant_terms(f, float(L))
    tails = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])
    ok = np.nonzero(2.0 * n * n * tails <= tol * max(n, 1))[0]
    return int(ok[0])


def _piecewise_quad(func, pts):
    total, err = 0.0, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(func, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
        total += v
        err += e
    return total, err


def plancherel_sides(f: TestFunction) -> tuple[float, float]:
    """(int f(x)^2 dx, int fhat(t)^2 dt), each by adaptive quadrature over the real line."""
    if f.circle_native:
        raise TypeError("Plancherel on the line needs a real-line test function")
    xr = f.x_radius
    xpts = sorted({0.0, *[p for p in (1.0, 5.0, 20.0) if p < xr],
                   *np.arange(50.0, xr, 50.0).tolist(), xr})
    if isinstance(f, FreqBump):
        xpts = sorted({0.0, xr, *(np.array([1.0, 5.0, 20.0, *np.arange(50.0, H_RADIUS, 50.0)]) / f.b).tolist()})
    xs, _ = _piecewise_quad(lambda x: float(f.eval(x)) ** 2, [p for p in xpts if p <= xr])
    ts, _ = _piecewise_quad(lambda t: float(f.fourier(t)) ** 2, f.fourier_breakpoints())
    return 2.0 * xs, 2.0 * ts
