"""Containers for the three one-dimensional maps used throughout the package.

* :class:`SpectralCurve`   v -> F(v), one eigenvalue as a function of coupling
* :class:`KineticPotential` s -> fbar(s), the Legendre dual of F
* :class:`KFunction`       r -> K(r), kinetic energy parametrized by radius

Each map is either analytic (a pair of callables) or sampled.  Sampled maps
are interpolated with cubic Hermite splines in the logarithm of the
abscissa, using the derivative information that every producer in this
package has for free (Hellmann-Feynman slopes for curves, ``-1/v`` for
kinetic potentials, the envelope theorem for K-functions).
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import DomainError
from .io import write_columns

# finite search window used for analytic maps with open-ended domains
SEARCH_FLOOR = 1e-12
SEARCH_CEIL = 1e14


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _check_samples(x, *ys):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("need at least two samples")
    if np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise DomainError("sample abscissae must be positive and strictly increasing")
    out = [x]
    for y in ys:
        y = np.asarray(y, dtype=float)
        if y.shape != x.shape:
            raise DomainError("sample arrays must have equal length")
        if not np.all(np.isfinite(y)):
            raise DomainError("non-finite sample values")
        out.append(y)
    return out


class _LogHermite:
    """Cubic Hermite interpolant of y(x) built in t = ln x."""

    def __init__(self, x, y, dydx):
        self.x = x
        self.spline = CubicHermiteSpline(np.log(x), y, dydx * x)
        self.d1 = self.spline.derivative(1)
        self.d2 = self.spline.derivative(2)

    def __call__(self, x):
        return self.spline(np.log(x))

    def derivative(self, x):
        return self.d1(np.log(x)) / x

    def second_derivative(self, x):
        t = np.log(x)
        return (self.d2(t) - self.d1(t)) / x**2


class SpectralCurve:
    """One eigenvalue E = F(v) of ``-Delta + v f(r)`` as a function of v.

    Parameters
    ----------
    func, deriv : callable
        Vectorized F(v) and F'(v).
    domain : (float, float)
        Open coupling interval on which the state exists; the left end is the
        critical coupling.
    n, ell : int
        State labels (radial index from 1, angular momentum).
    """

    def __init__(
        self,
        func: Callable,
        deriv: Callable,
        domain: tuple[float, float],
        *,
        n: int = 1,
        ell: int = 0,
        label: str = "",
        second: Callable | None = None,
    ):
        self._func = func
        self._deriv = deriv
        self._second = second
        self.domain = (float(domain[0]), float(domain[1]))
        self.n = int(n)
        self.ell = int(ell)
        self.label = label
        self.samples: dict[str, np.ndarray] | None = None
        self.failed: list[float] = []
        self.concave_verified: bool | None = None
        self._v1: float | None = None

    @classmethod
    def from_samples(
        cls,
        v: Sequence[float],
        F: Sequence[float],
        dF: Sequence[float],
        *,
        n: int = 1,
        ell: int = 0,
        label: str = "",
        failed: Sequence[float] = (),
        concavity_tol: float = 1e-8,
        critical_coupling: float | None = None,
    ) -> "SpectralCurve":
        v, F, dF = _check_samples(v, F, dF)
        interp = _LogHermite(v, F, dF)
        curve = cls(
            interp,
            interp.derivative,
            (v[0], v[-1]),
            n=n,
            ell=ell,
            label=label,
            second=interp.second_derivative,
        )
        curve.samples = {"v": v, "F": F, "Fprime": dF}
        curve.failed = [float(x) for x in failed]
        curve.concave_verified = concavity_report(v, F, dF, concavity_tol)["concave"]
        curve._v1 = critical_coupling
        return curve

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def critical_coupling(self) -> float:
        """Known critical coupling; for sampled curves without one, the first sample."""
        return self.domain[0] if self._v1 is None else self._v1

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        lo, hi = self.domain
        if self.is_sampled:
            bad = (v < lo * (1 - 1e-12)) | (v > hi * (1 + 1e-12))
        else:
            bad = (v <= lo) | (v > hi)
        if np.any(bad):
            raise DomainError(f"coupling outside curve domain ({lo:g}, {hi:g})")
        return v

    def __call__(self, v):
        vv = self._check(v)
        return _scalar_or_array(v, self._func(vv))

    def derivative(self, v):
        vv = self._check(v)
        return _scalar_or_array(v, self._deriv(vv))

    def second_derivative(self, v, rel_step: float = 1e-4):
        vv = self._check(v)
        if self._second is not None:
            return _scalar_or_array(v, self._second(vv))
        h = rel_step * vv
        return _scalar_or_array(v, (self._deriv(vv + h) - self._deriv(vv - h)) / (2 * h))

    def kinetic_energy(self, v):
        """s(v) = F(v) - v F'(v), the mean kinetic energy at coupling v."""
        vv = self._check(v)
        return _scalar_or_array(v, self._func(vv) - vv * self._deriv(vv))

    def search_bounds(self) -> tuple[float, float]:
        lo, hi = self.domain
        if self.is_sampled:
            return lo, hi
        lo = max(lo * (1 + 1e-12), SEARCH_FLOOR) if lo > 0 else SEARCH_FLOOR
        return lo, min(hi, SEARCH_CEIL)

    def tabulate(self, v=None) -> dict[str, np.ndarray]:
        if v is None:
            if self.samples is None:
                raise DomainError("analytic curve needs an explicit v grid")
            return dict(self.samples)
        v = np.asarray(v, dtype=float)
        return {"v": v, "F": np.asarray(self(v)), "Fprime": np.asarray(self.derivative(v))}

    def to_csv(self, path, v=None, config=None):
        return write_columns(path, self.tabulate(v), config)

    def __repr__(self):
        kind = "sampled" if self.is_sampled else "analytic"
        return f"SpectralCurve({self.label or kind}, n={self.n}, ell={self.ell}, domain={self.domain})"


def concavity_report(v, F, dF=None, tol: float = 1e-8) -> dict:
    """Second divided differences of sampled F and monotonicity of F'."""
    v = np.asarray(v, dtype=float)
    F = np.asarray(F, dtype=float)
    if v.size < 3:
        d2 = np.zeros(0)
    else:
        s1 = np.diff(F) / np.diff(v)
        d2 = 2 * np.diff(s1) / (v[2:] - v[:-2])
    worst = float(d2.max()) if d2.size else -math.inf
    ok = worst <= tol
    slope_ok = True
    if dF is not None:
        dF = np.asarray(dF, dtype=float)
        slope_ok = bool(np.all(np.diff(dF) <= tol * np.maximum(1.0, np.abs(dF[1:]))))
    return {"concave": bool(ok and slope_ok), "max_second_difference": worst, "slope_monotone": slope_ok}


class KineticPotential:
    """Monotone decreasing map s -> fbar(s)."""

    def __init__(self, func: Callable, deriv: Callable, domain: tuple[float, float], *, label: str = ""):
        self._func = func
        self._deriv = deriv
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label
        self.samples: dict[str, np.ndarray] | None = None

    @classmethod
    def from_samples(cls, s, fbar, dfbar, *, label: str = "", coupling=None) -> "KineticPotential":
        s, fbar, dfbar = _check_samples(s, fbar, dfbar)
        interp = _LogHermite(s, fbar, dfbar)
        kp = cls(interp, interp.derivative, (s[0], s[-1]), label=label)
        kp.samples = {"s": s, "fbar": fbar, "fbar_prime": dfbar}
        if coupling is not None:
            kp.samples["v"] = np.asarray(coupling, dtype=float)
        return kp

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.domain
        if np.any(s < lo * (1 - 1e-12)) or np.any(s > hi * (1 + 1e-12)):
            raise DomainError(f"kinetic energy outside domain ({lo:g}, {hi:g})")
        return s

    def __call__(self, s):
        ss = self._check(s)
        return _scalar_or_array(s, self._func(ss))

    def derivative(self, s):
        ss = self._check(s)
        return _scalar_or_array(s, self._deriv(ss))

    def search_bounds(self) -> tuple[float, float]:
        lo, hi = self.domain
        if self.is_sampled:
            return lo, hi
        return max(lo, SEARCH_FLOOR), min(hi, SEARCH_CEIL)

    def is_monotone_decreasing(self, s=None) -> bool:
        if s is None:
            s = self.samples["s"] if self.is_sampled else np.geomspace(*self.search_bounds(), 400)
        vals = np.asarray(self(s))
        return bool(np.all(np.diff(vals) < 0))

    def to_csv(self, path, s=None, config=None):
        if s is None:
            s = self.samples["s"]
        s = np.asarray(s, dtype=float)
        return write_columns(path, {"s": s, "fbar": np.asarray(self(s))}, config)


class KFunction:
    """Map r -> K(r); ``P`` is set when K(r) = P**2 / r**2 exactly."""

    def __init__(self, func: Callable, domain: tuple[float, float], *, P: float | None = None, label: str = ""):
        self._func = func
        self.domain = (float(domain[0]), float(domain[1]))
        self.P = P
        self.label = label
        self.samples: dict[str, np.ndarray] | None = None

    @classmethod
    def inverse_square(cls, P: float, domain=(0.0, math.inf), label: str = "") -> "KFunction":
        P2 = float(P) ** 2
        return cls(lambda r: P2 / np.asarray(r, dtype=float) ** 2, domain, P=float(P), label=label)

    @classmethod
    def from_samples(cls, r, K, dK=None, *, label: str = "", coupling=None) -> "KFunction":
        r, K = _check_samples(r, K)
        if np.any(K <= 0):
            raise DomainError("K-function samples must be positive")
        t, lk = np.log(r), np.log(K)
        if dK is None:
            interp = PchipInterpolator(t, lk)
        else:
            interp = CubicHermiteSpline(t, lk, np.asarray(dK, dtype=float) * r / K)
        kf = cls(lambda x: np.exp(interp(np.log(x))), (r[0], r[-1]), label=label)
        kf.samples = {"r": r, "K": K}
        if coupling is not None:
            kf.samples["v"] = np.asarray(coupling, dtype=float)
        return kf

    @property
    def form(self) -> str:
        return "inverse_square" if self.P is not None else "sampled"

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    def __call__(self, r):
        rr = np.asarray(r, dtype=float)
        lo, hi = self.domain
        if np.any(rr <= 0) or np.any(rr < lo * (1 - 1e-12)) or np.any(rr > hi * (1 + 1e-12)):
            raise DomainError(f"radius outside K-function domain ({lo:g}, {hi:g})")
        return _scalar_or_array(r, self._func(rr))

    def search_bounds(self) -> tuple[float, float]:
        lo, hi = self.domain
        if self.is_sampled:
            return lo, hi
        return max(lo, SEARCH_FLOOR), min(hi, SEARCH_CEIL)

    def scaled(self, b: float) -> "KFunction":
        """K(r/b)/b**2, the K-function of A f(r/b) + B."""
        lo, hi = self.domain
        base = self._func
        out = KFunction(lambda r: base(np.asarray(r) / b) / b**2, (lo * b, hi * b), P=self.P, label=self.label)
        return out

    def to_csv(self, path, r=None, config=None):
        if r is None:
            r = self.samples["r"]
        r = np.asarray(r, dtype=float)
        return write_columns(path, {"r": r, "K": np.asarray(self(r))}, config)
