"""Envelope bounds for shapes written as smooth transformations f = g(h).

A basis shape h with a known spectral curve H(v) generates the tangential
family f_t(r) = a(t) h(r) + b(t), each member touching f at r = t.  When g
is convex every member lies below f and max_t [H(a v) + b v] is a lower
bound on F(v); when g is concave the members lie above f and the minimum
over t is an upper bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import KFunction, SpectralCurve
from .errors import BasisUnsuitableError, DomainError, NoCertificateError, TangencyError
from .io import config_hash, write_json
from .kinetic import curve_from_coupling_form, energy_from_kfunction, golden_extremum
from .models import PotentialShape, exact_kfunction, exact_spectral_curve

CONVEXITY_TOL = 1e-8


@dataclass
class EnvelopeBasis:
    """Basis shape h with its spectral curve H and K-function."""

    shape_h: PotentialShape
    curve_H: SpectralCurve
    kfunction_K: KFunction | None = None

    @classmethod
    def from_shape(cls, h: PotentialShape, n: int = 1, ell: int = 0) -> "EnvelopeBasis":
        """Basis built from the closed-form curve and K-function of ``h``."""
        return cls(h, exact_spectral_curve(h, n, ell), exact_kfunction(h, n, ell))

    @property
    def name(self) -> str:
        return self.shape_h.describe()

    def consistency_error(self, v) -> float:
        """Largest |min_r[K + v h] - H(v)| over the couplings ``v``."""
        if self.kfunction_K is None:
            raise DomainError("basis has no K-function")
        v = np.asarray(v, dtype=float)
        E = energy_from_kfunction(self.kfunction_K, self.shape_h, v)
        return float(np.max(np.abs(E - self.curve_H(v))))


class AffineShape(PotentialShape):
    """a h(r) + b for a basis shape h and a > 0."""

    kind = "affine"

    def __init__(self, base: PotentialShape, a: float, b: float):
        if not a > 0:
            raise DomainError("affine shapes need a positive slope")
        self.base, self.a, self.b = base, float(a), float(b)
        self.coulomb_strength = a * base.coulomb_strength
        self.tail = base.tail
        self.limit_at_infinity = a * base.limit_at_infinity + b

    def _f(self, r):
        return self.a * self.base._f(r) + self.b

    def _df(self, r):
        return self.a * self.base._df(r)

    def describe(self):
        return f"{self.a!r}*({self.base.describe()}) + {self.b!r}"


@dataclass
class TransformationProfile:
    """Samples of g = f o h^-1 along an r grid, with its convexity class."""

    f: PotentialShape
    h: PotentialShape
    r: np.ndarray
    h_values: np.ndarray
    g_values: np.ndarray
    g_slopes: np.ndarray
    convexity_sign: str
    affine: bool
    max_violation: float
    info: dict = field(default_factory=dict)

    def g(self, y):
        """g(y) = f(h^-1(y))."""
        return self.f._f(np.asarray(self.h.inverse(y), dtype=float))

    def g_prime(self, y):
        r = np.asarray(self.h.inverse(y), dtype=float)
        return self.f._df(r) / self.h._df(r)

    def touch_coefficients(self, t):
        """a(t) = g'(h(t)) and b(t) = g(h(t)) - h(t) g'(h(t))."""
        t = np.asarray(t, dtype=float)
        dh = self.h._df(t)
        if np.any(~np.isfinite(dh)) or np.any(dh == 0):
            raise TangencyError("basis derivative vanishes or is undefined at the touch radius")
        a = self.f._df(t) / dh
        if np.any(~np.isfinite(a)):
            raise TangencyError("transformation is not differentiable at the touch radius")
        b = self.f._f(t) - self.h._f(t) * a
        return a, b

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.r[0]), float(self.r[-1])


def build_transformation(f: PotentialShape, h: PotentialShape, r_grid, tol: float = CONVEXITY_TOL) -> TransformationProfile:
    """Sample g = f o h^-1 on ``r_grid`` and classify its convexity.

    The second differences are divided differences of the slopes
    g'(h) = f'(r)/h'(r) with respect to h.  A slope spread below ``tol``
    times its scale is treated as affine, reported as convex.
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size < 3 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise DomainError("r grid must hold at least three increasing positive radii")
    hv = h(r)
    dh = np.diff(hv)
    if not (np.all(dh > 0) or np.all(dh < 0)):
        raise BasisUnsuitableError("basis shape is not strictly monotone on the grid")
    slopes = f.derivative(r) / h.derivative(r)
    gv = f(r)
    d2 = np.diff(slopes) / dh
    scale = float(np.max(np.abs(slopes)))
    affine = bool(np.max(np.abs(np.diff(slopes))) <= tol * max(scale, 1e-300))
    ref = float(np.max(np.abs(d2))) if d2.size else 0.0
    if affine or np.min(d2) >= -tol * ref:
        sign, violation = "convex", float(max(0.0, -np.min(d2)))
    elif np.max(d2) <= tol * ref:
        sign, violation = "concave", float(max(0.0, np.max(d2)))
    else:
        sign, violation = "indefinite", float(min(-np.min(d2), np.max(d2)))
    return TransformationProfile(
        f, h, r, hv, gv, slopes, sign, affine, violation, info={"second_differences": d2}
    )


def tangential_potential(profile: TransformationProfile, basis: EnvelopeBasis | PotentialShape, t: float) -> AffineShape:
    """The tangential shape a(t) h + b(t) touching f at r = t."""
    lo, hi = profile.t_range
    if not lo <= t <= hi:
        raise DomainError(f"touch radius {t} outside the profile grid [{lo:g}, {hi:g}]")
    a, b = profile.touch_coefficients(float(t))
    return AffineShape(profile.h, float(a), float(b))


@dataclass
class BoundRecord:
    v: float
    value: float
    kind: str
    basis: str
    touch_point: float
    at_grid_edge: bool = False

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "value": self.value,
            "kind": self.kind,
            "basis": self.basis,
            "touch_point": self.touch_point,
            "at_grid_edge": self.at_grid_edge,
        }


def _kind(profile: TransformationProfile) -> str:
    if profile.convexity_sign == "convex":
        return "lower"
    if profile.convexity_sign == "concave":
        return "upper"
    raise NoCertificateError(
        "transformation has indefinite convexity; use curve_from_coupling_form for an uncertified estimate"
    )


def envelope_bounds(profile: TransformationProfile, basis: EnvelopeBasis, v) -> list[BoundRecord]:
    """Certified bounds at each coupling in ``v``.

    The optimum over t is restricted to the profile grid, which keeps the
    bound valid (a sub-family of tangents) but loosens it when the optimal
    touch radius falls outside; such records carry ``at_grid_edge``.
    """
    kind = _kind(profile)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(v <= 0):
        raise DomainError("coupling must be positive")
    H = basis.curve_H
    v1 = H.domain[0]
    maximize = kind == "lower"
    bad = -math.inf if maximize else math.inf

    def objective(t):
        a, b = profile.touch_coefficients(t)
        u = a * v
        ok = u > v1
        val = np.full(np.shape(u), bad)
        val[ok] = H._func(u[ok]) + b[ok] * v[ok]
        return val

    lo, hi = profile.t_range
    t_lo = np.full(v.shape, lo)
    t_hi = np.full(v.shape, hi)
    t_star, value = golden_extremum(objective, t_lo, t_hi, maximize=maximize, edge_tol=-math.inf)
    edge = (np.log(t_star / lo) < 1e-6) | (np.log(hi / t_star) < 1e-6)
    return [
        BoundRecord(float(vi), float(val), kind, basis.name, float(ts), bool(e))
        for vi, val, ts, e in zip(v, value, t_star, edge)
    ]


def envelope_bound(profile: TransformationProfile, basis: EnvelopeBasis, v: float) -> BoundRecord:
    """Certified bound on F(v): lower for convex g, upper for concave g."""
    return envelope_bounds(profile, basis, [float(v)])[0]


def envelope_curve(profile: TransformationProfile, basis: EnvelopeBasis, v_grid) -> SpectralCurve:
    """The same approximation written as min over u of [H - u H' + v g(H')]."""
    return curve_from_coupling_form(basis.curve_H, profile.g, v_grid)


def write_bound_reports(path, records, config=None):
    """Write bound records as a JSON document."""
    doc = {"records": [r.to_dict() for r in records]}
    if config is not None:
        doc["config_hash"] = config_hash(config)
    write_json(path, doc)
    return path


def bound_reports_json(records) -> str:
    return json.dumps([r.to_dict() for r in records], sort_keys=True)
