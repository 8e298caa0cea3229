"""Potential shapes f(r) and the closed-form spectral data they admit.

The shapes cover the analytic families used as seeds, targets and test
oracles (Coulomb, pure powers, log, Hulthen, Coulomb plus a confining term)
plus tabulated shapes produced by the inversion loop or read from CSV.
All shapes are immutable and vectorized over r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .curves import KFunction, KineticPotential, SpectralCurve
from .errors import DomainError, RangeError, UnsupportedModelError
from .io import read_csv, write_columns


def _radii(r):
    rr = np.asarray(r, dtype=float)
    if np.any(~(rr > 0)):
        raise DomainError("potential shapes are defined for r > 0 only")
    return rr


def _out(r, val):
    return float(val) if np.ndim(r) == 0 else val


class PotentialShape:
    """Base class for radial shapes f(r), monotone non-decreasing on r > 0.

    Subclasses implement ``_f`` and ``_df`` on validated arrays.  Two
    asymptotic descriptors drive the eigensolver:

    ``coulomb_strength``
        lim r f(r) as r -> 0 (negative for a Coulombic singularity, 0 when
        f is bounded or only log-singular at the origin).
    ``tail``
        ``"confining"`` (f -> +inf), ``"long_range"`` (f -> limit slower
        than 1/r**2, infinitely many bound states) or ``"short_range"``.
    """

    kind = "abstract"
    coulomb_strength = 0.0
    limit_at_infinity = 0.0
    tail = "short_range"

    def __call__(self, r):
        rr = _radii(r)
        return _out(r, self._f(rr))

    def derivative(self, r):
        rr = _radii(r)
        return _out(r, self._df(rr))

    @property
    def singularity(self) -> str:
        if self.coulomb_strength != 0.0:
            return "coulombic"
        return "confining" if self.tail == "confining" else "bounded"

    def inverse(self, y, lo: float = 1e-12, hi: float = 1e12):
        """Radius at which f(r) = y, by bisection in ln r."""
        y = np.asarray(y, dtype=float)
        a = np.full(y.shape, math.log(lo))
        b = np.full(y.shape, math.log(hi))
        fa, fb = self._f(np.exp(a)), self._f(np.exp(b))
        if np.any(y < fa) or np.any(y > fb):
            raise DomainError("value outside the range of the shape on the search interval")
        for _ in range(200):
            m = 0.5 * (a + b)
            below = self._f(np.exp(m)) < y
            a = np.where(below, m, a)
            b = np.where(below, b, m)
            if np.all(b - a < 1e-15):
                break
        return _out(y, np.exp(0.5 * (a + b)))

    def describe(self) -> str:
        return self.kind

    def __repr__(self):
        return f"<{type(self).__name__} {self.describe()}>"


class Power(PotentialShape):
    """f(r) = sgn(q) r**q, q > -2, q != 0."""

    kind = "power"

    def __init__(self, q: float):
        q = float(q)
        if not q > -2 or q == 0:
            raise DomainError(f"power exponent must satisfy q > -2, q != 0 (got {q})")
        self.q = q
        self.sign = 1.0 if q > 0 else -1.0
        if q > 0:
            self.tail, self.limit_at_infinity = "confining", math.inf
        else:
            self.tail, self.limit_at_infinity = "long_range", 0.0
        if q == -1:
            self.coulomb_strength = -1.0
        elif q < -1:
            self.coulomb_strength = -math.inf

    def _f(self, r):
        return self.sign * r**self.q

    def _df(self, r):
        return self.sign * self.q * r ** (self.q - 1)

    def inverse(self, y, lo=1e-12, hi=1e12):
        y = np.asarray(y, dtype=float)
        if np.any(self.sign * y <= 0):
            raise DomainError("value outside the range of the power shape")
        return _out(y, (self.sign * y) ** (1.0 / self.q))

    def describe(self):
        return f"power {self.q!r}"


class Coulomb(Power):
    kind = "coulomb"

    def __init__(self):
        super().__init__(-1.0)

    def inverse(self, y, lo=1e-12, hi=1e12):
        y = np.asarray(y, dtype=float)
        if np.any(y >= 0):
            raise DomainError("Coulomb shape takes only negative values")
        return _out(y, -1.0 / y)

    def describe(self):
        return "coulomb"


class Log(PotentialShape):
    kind = "log"
    tail = "confining"
    limit_at_infinity = math.inf

    def _f(self, r):
        return np.log(r)

    def _df(self, r):
        return 1.0 / r

    def inverse(self, y, lo=1e-12, hi=1e12):
        return _out(y, np.exp(np.asarray(y, dtype=float)))


class Hulthen(PotentialShape):
    """f(r) = -1/(e**r - 1)."""

    kind = "hulthen"
    coulomb_strength = -1.0
    tail = "short_range"
    limit_at_infinity = 0.0

    def _f(self, r):
        return np.exp(-r) / np.expm1(-r)

    def _df(self, r):
        return np.exp(-r) / np.expm1(-r) ** 2


_W_FAMILIES = ("linear", "oscillator", "log", "power")


class CoulombPlus(PotentialShape):
    """f(r) = -a/r + b w(r) with w one of r, r**2, ln r or sgn(q) r**q."""

    kind = "coulomb_plus"

    def __init__(self, w: str, a: float = 1.0, b: float = 0.5, q: float | None = None):
        if w not in _W_FAMILIES:
            raise DomainError(f"unknown w family {w!r}; expected one of {_W_FAMILIES}")
        if not (a > 0 and b > 0):
            raise DomainError("coulomb_plus needs a > 0 and b > 0")
        if w == "linear":
            q = 1.0
        elif w == "oscillator":
            q = 2.0
        elif w == "power":
            if q is None:
                raise DomainError("w=power needs an exponent q")
            self._w = Power(q)
        self.w, self.a, self.b, self.q = w, float(a), float(b), q
        if w == "log":
            self._w = Log()
        elif w != "power":
            self._w = Power(q)
        self.coulomb_strength = -self.a
        if self._w.tail == "confining":
            self.tail, self.limit_at_infinity = "confining", math.inf
        else:
            self.tail, self.limit_at_infinity = "long_range", 0.0

    def _f(self, r):
        return -self.a / r + self.b * self._w._f(r)

    def _df(self, r):
        return self.a / r**2 + self.b * self._w._df(r)

    def describe(self):
        if self.w == "power":
            return f"coulomb_plus power {self.q!r} {self.a!r} {self.b!r}"
        return f"coulomb_plus {self.w} {self.a!r} {self.b!r}"


class Scaled(PotentialShape):
    """A f(r/b) + B for a base shape f."""

    kind = "scaled"

    def __init__(self, base: PotentialShape, A: float, b: float, B: float):
        if not (A > 0 and b > 0):
            raise DomainError("scale_shift needs A > 0 and b > 0")
        self.base, self.A, self.b, self.B = base, float(A), float(b), float(B)
        self.coulomb_strength = self.A * self.b * base.coulomb_strength
        self.tail = base.tail
        self.limit_at_infinity = self.A * base.limit_at_infinity + self.B

    def _f(self, r):
        return self.A * self.base._f(r / self.b) + self.B

    def _df(self, r):
        return self.A / self.b * self.base._df(r / self.b)

    def describe(self):
        return f"scaled({self.base.describe()}; A={self.A!r}, b={self.b!r}, B={self.B!r})"


def _limit_slopes(t, f, m):
    """Fritsch-Carlson limiter: make Hermite slopes monotonicity preserving."""
    m = m.copy()
    delta = np.diff(f) / np.diff(t)
    for k, d in enumerate(delta):
        if d == 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        m[k] = max(m[k], 0.0) if d > 0 else min(m[k], 0.0)
        m[k + 1] = max(m[k + 1], 0.0) if d > 0 else min(m[k + 1], 0.0)
        alpha, beta = m[k] / d, m[k + 1] / d
        rad = alpha * alpha + beta * beta
        if rad > 9.0:
            tau = 3.0 / math.sqrt(rad)
            m[k], m[k + 1] = tau * alpha * d, tau * beta * d
    return m


class Tabulated(PotentialShape):
    """Shape known on a grid of radii.

    Interpolation is monotone cubic in ln r: Fritsch-Carlson limited
    Hermite when slopes are supplied, PCHIP otherwise.  With
    ``extrapolate=True`` the shape continues below the table as
    ``alpha + c/r`` fitted through the two smallest nodes and above it
    linearly along the last segment.
    """

    kind = "tabulated"

    def __init__(self, r, f, slopes=None, *, extrapolate: bool = False, monotone_tol: float = 1e-12):
        r = np.asarray(r, dtype=float)
        f = np.asarray(f, dtype=float)
        if r.ndim != 1 or r.size < 3 or f.shape != r.shape:
            raise DomainError("tabulated shape needs matching 1-D arrays with >= 3 points")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated radii must be positive and strictly increasing")
        if not np.all(np.isfinite(f)):
            raise DomainError("tabulated values must be finite")
        scale = max(1.0, float(np.max(np.abs(f))))
        if np.any(np.diff(f) < -monotone_tol * scale):
            raise DomainError("tabulated shape is not monotone non-decreasing")
        self.r, self.f = r, f
        self.extrapolate = bool(extrapolate)
        t = np.log(r)
        if slopes is None:
            self._spline = PchipInterpolator(t, f)
        else:
            m = _limit_slopes(t, f, np.asarray(slopes, dtype=float) * r)
            self._spline = CubicHermiteSpline(t, f, m)
        self._dspline = self._spline.derivative()
        self._c = (f[1] - f[0]) / (1.0 / r[1] - 1.0 / r[0])
        self._alpha = f[0] - self._c / r[0]
        self._slope_hi = (f[-1] - f[-2]) / (r[-1] - r[-2])
        self.coulomb_strength = float(self._c) if self.extrapolate else 0.0
        if self.extrapolate and self._slope_hi > 0:
            self.tail, self.limit_at_infinity = "confining", math.inf
        else:
            self.tail, self.limit_at_infinity = "short_range", float(f[-1])

    @property
    def r_range(self) -> tuple[float, float]:
        return float(self.r[0]), float(self.r[-1])

    def _split(self, r):
        lo, hi = self.r[0], self.r[-1]
        below = r < lo * (1 - 1e-14)
        above = r > hi * (1 + 1e-14)
        if not self.extrapolate and (np.any(below) or np.any(above)):
            raise RangeError(f"r outside tabulated range [{lo:g}, {hi:g}] and extrapolation is disabled")
        return below, above

    def _f(self, r):
        below, above = self._split(r)
        out = self._spline(np.log(np.clip(r, self.r[0], self.r[-1])))
        if np.any(below):
            out = np.where(below, self._alpha + self._c / r, out)
        if np.any(above):
            out = np.where(above, self.f[-1] + self._slope_hi * (r - self.r[-1]), out)
        return out

    def _df(self, r):
        below, above = self._split(r)
        rc = np.clip(r, self.r[0], self.r[-1])
        out = self._dspline(np.log(rc)) / rc
        if np.any(below):
            out = np.where(below, -self._c / r**2, out)
        if np.any(above):
            out = np.where(above, self._slope_hi, out)
        return out

    def describe(self):
        return f"tabulated[{self.r.size} pts, {self.r[0]:g}..{self.r[-1]:g}]"

    def to_csv(self, path, config=None):
        return write_columns(path, {"r": self.r, "f": self.f}, config)

    @classmethod
    def from_csv(cls, path, *, extrapolate: bool = False) -> "Tabulated":
        data = read_csv(path)
        if "r" not in data or "f" not in data:
            raise DomainError(f"{path}: expected columns 'r,f'")
        return cls(data["r"], data["f"], extrapolate=extrapolate)


def eval_shape(shape: PotentialShape, r):
    return shape(r)


def scale_shift(shape: PotentialShape, A: float = 1.0, b: float = 1.0, B: float = 0.0) -> PotentialShape:
    """Return the shape A f(r/b) + B."""
    if A == 1.0 and b == 1.0 and B == 0.0:
        return shape
    return Scaled(shape, A, b, B)


def parse_shape(text: str) -> PotentialShape:
    """Build a shape from a short text spec.

    Accepted forms: ``coulomb``, ``hulthen``, ``log``, ``power Q``,
    ``coulomb_plus {linear|oscillator|log} A B`` and
    ``coulomb_plus power Q A B``.
    """
    parts = text.replace(",", " ").split()
    if not parts:
        raise DomainError("empty shape spec")
    kind, args = parts[0].lower(), parts[1:]
    try:
        nums = [float(x) for x in args if x.lower() not in _W_FAMILIES]
    except ValueError as exc:
        raise DomainError(f"bad number in shape spec {text!r}") from exc
    if kind == "coulomb" and not args:
        return Coulomb()
    if kind == "hulthen" and not args:
        return Hulthen()
    if kind == "log" and not args:
        return Log()
    if kind == "power" and len(nums) == 1:
        return Coulomb() if nums[0] == -1 else Power(nums[0])
    if kind == "coulomb_plus" and args:
        w = args[0].lower()
        if w == "power" and len(nums) == 3:
            return CoulombPlus("power", nums[1], nums[2], q=nums[0])
        if w in ("linear", "oscillator", "log"):
            a, b = (nums + [1.0, 0.5][len(nums):])[:2]
            return CoulombPlus(w, a, b)
    raise DomainError(f"unrecognized shape spec {text!r}")


# ---------------------------------------------------------------------------
# power-law spectral constants

@dataclass(frozen=True)
class PowerSpectralConstants:
    q: float
    n: int
    ell: int
    E_nl: float
    P_nl: float


def _check_state(n: int, ell: int):
    if int(n) < 1 or int(ell) < 0:
        raise DomainError("states need n >= 1 and ell >= 0")


def p_from_energy(q: float, E: float) -> float:
    """P(q) from the unit-coupling eigenvalue E(q) of sgn(q) r**q."""
    if not q > -2 or q == 0:
        raise DomainError("P(q) from E(q) needs q > -2, q != 0")
    return abs(E) ** ((2 + q) / (2 * q)) * (2 / (2 + q)) ** (1 / q) * abs(q / (2 + q)) ** 0.5


def p_log(E_log: float) -> float:
    """q -> 0 limit of P(q), expressed through the ln r eigenvalue."""
    return math.sqrt(math.exp(2 * E_log - 1) / 2)


@lru_cache(maxsize=None)
def unit_eigenvalue(q: float, n: int = 1, ell: int = 0) -> float:
    """Eigenvalue of -Delta + sgn(q) r**q (q = 0 means ln r) at unit coupling."""
    _check_state(n, ell)
    if q == -1:
        return -1.0 / (4 * (n + ell) ** 2)
    if q == 2:
        return float(4 * n + 2 * ell - 1)
    from .solver import RadialProblem, solve_state

    shape = Log() if q == 0 else Power(q)
    return solve_state(RadialProblem(shape, 1.0, n=n, ell=ell)).energy


def power_constants(q: float, n: int = 1, ell: int = 0) -> PowerSpectralConstants:
    _check_state(n, ell)
    if not q > -2:
        raise DomainError(f"power exponent must exceed -2 (got {q})")
    E = unit_eigenvalue(float(q), n, ell)
    if q == -1:
        P = float(n + ell)
    elif q == 2:
        P = 2 * n + ell - 0.5
    elif q == 0:
        P = p_log(E)
    else:
        P = p_from_energy(q, E)
    return PowerSpectralConstants(float(q), n, ell, E, P)


# ---------------------------------------------------------------------------
# closed-form curves, kinetic potentials and K-functions

def _power_exponent(shape) -> float | None:
    if isinstance(shape, Log):
        return 0.0
    if isinstance(shape, Power):
        return shape.q
    return None


def exact_spectral_curve(shape: PotentialShape, n: int = 1, ell: int = 0) -> SpectralCurve:
    """Analytic F(v) for Hulthen (s states), Coulomb, pure powers, ln r and their scalings."""
    _check_state(n, ell)
    if isinstance(shape, Scaled):
        base = exact_spectral_curve(shape.base, n, ell)
        k = shape.A * shape.b**2
        b2, B = shape.b**2, shape.B
        lo = base.domain[0] / k
        return SpectralCurve(
            lambda v: base._func(v * k) / b2 + v * B,
            lambda v: shape.A * base._deriv(v * k) + B,
            (lo, math.inf),
            n=n,
            ell=ell,
            label=f"exact {shape.describe()}",
        )
    if isinstance(shape, Hulthen):
        if ell != 0:
            raise UnsupportedModelError("closed-form Hulthen curves exist for s states only")
        n2 = float(n * n)
        return SpectralCurve(
            lambda v: -(((v - n2) / (2 * n)) ** 2),
            lambda v: -(v - n2) / (2 * n2),
            (n2, math.inf),
            n=n,
            ell=ell,
            label="exact hulthen",
            second=lambda v: np.full_like(v, -1 / (2 * n2)),
        )
    q = _power_exponent(shape)
    if q is None:
        raise UnsupportedModelError(f"no closed-form spectral curve for {shape.describe()}")
    if q == 0:
        EL = unit_eigenvalue(0.0, n, ell)
        return SpectralCurve(
            lambda v: v * EL - 0.5 * v * np.log(v),
            lambda v: EL - 0.5 * np.log(v) - 0.5,
            (0.0, math.inf),
            n=n,
            ell=ell,
            label="exact log",
            second=lambda v: -0.5 / v,
        )
    E = unit_eigenvalue(q, n, ell)
    p = 2.0 / (2.0 + q)
    return SpectralCurve(
        lambda v: E * v**p,
        lambda v: E * p * v ** (p - 1),
        (0.0, math.inf),
        n=n,
        ell=ell,
        label=f"exact {shape.describe()}",
        second=lambda v: E * p * (p - 1) * v ** (p - 2),
    )


def exact_kinetic_potential(shape: PotentialShape, n: int = 1, ell: int = 0) -> KineticPotential:
    """Closed-form fbar(s) for the shapes supported by :func:`exact_spectral_curve`."""
    _check_state(n, ell)
    if isinstance(shape, Scaled):
        base = exact_kinetic_potential(shape.base, n, ell)
        A, b2, B = shape.A, shape.b**2, shape.B
        return KineticPotential(
            lambda s: A * base._func(b2 * s) + B,
            lambda s: A * b2 * base._deriv(b2 * s),
            (base.domain[0] / b2, base.domain[1] / b2),
        )
    if isinstance(shape, Hulthen):
        if ell != 0:
            raise UnsupportedModelError("closed-form Hulthen kinetic potentials exist for s states only")
        c = 4.0 / n**2
        return KineticPotential(
            lambda s: -0.5 * (np.sqrt(c * s + 1) - 1),
            lambda s: -0.25 * c / np.sqrt(c * s + 1),
            (0.0, math.inf),
            label="exact hulthen",
        )
    q = _power_exponent(shape)
    if q is None:
        raise UnsupportedModelError(f"no closed-form kinetic potential for {shape.describe()}")
    if q == 0:
        EL = unit_eigenvalue(0.0, n, ell)
        return KineticPotential(
            lambda s: EL - 0.5 * np.log(2 * math.e * s),
            lambda s: -0.5 / s,
            (0.0, math.inf),
            label="exact log",
        )
    E = unit_eigenvalue(q, n, ell)
    coef = (2 / q) * abs(q * E / (2 + q)) ** ((q + 2) / 2)
    return KineticPotential(
        lambda s: coef * s ** (-q / 2),
        lambda s: -coef * q / 2 * s ** (-q / 2 - 1),
        (0.0, math.inf),
        label=f"exact {shape.describe()}",
    )


def exact_kfunction(shape: PotentialShape, n: int = 1, ell: int = 0) -> KFunction:
    """K(r) = P**2/r**2 for pure powers and ln r, including scaled/shifted copies."""
    _check_state(n, ell)
    base = shape.base if isinstance(shape, Scaled) else shape
    q = _power_exponent(base)
    if q is None:
        raise UnsupportedModelError(f"K-function is not of inverse-square form for {shape.describe()}")
    if q <= -2:
        raise DomainError("K-function needs q > -2")
    P = power_constants(q, n, ell).P_nl
    return KFunction.inverse_square(P, label=f"exact {shape.describe()}")
