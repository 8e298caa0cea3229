"""Legendre-transform machinery linking F(v), fbar(s) and K(r).

Every transform here is a pointwise one-dimensional max or min whose
objective is unimodal by the concavity of F (or convexity of fbar).  They
are all solved by :func:`golden_extremum`, a golden-section search run in
the logarithm of the search variable and vectorized across all evaluation
points, finished with one parabolic step.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .curves import KFunction, KineticPotential, SpectralCurve
from .errors import BoundaryExtremumError, DomainError
from .models import PotentialShape

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_extremum(
    objective: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    *,
    maximize: bool = True,
    tol: float = 1e-10,
    edge_tol: float = 1e-7,
    what: str = "extremum",
    points=None,
):
    """Vectorized golden-section search on [lo, hi] in log space.

    Parameters
    ----------
    objective : callable
        Maps an array of parameter values (same shape as ``lo``) to objective
        values, elementwise.
    lo, hi : array_like
        Positive search limits; broadcast together.
    maximize : bool
        Search for a maximum (default) or a minimum.
    tol : float
        Final width of the bracket in ln(parameter).
    edge_tol : float
        An optimum within this distance (in ln) of a limit is reported as a
        boundary extremum.
    points : array_like, optional
        Labels of the evaluation points, carried into the error.

    Returns
    -------
    x, value : ndarray
        Optimizer and optimal objective value for every element.

    Raises
    ------
    BoundaryExtremumError
        If any optimum is pinned to a search limit.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    if np.any(lo <= 0) or np.any(hi <= lo):
        raise DomainError("golden search needs 0 < lo < hi")
    sgn = 1.0 if maximize else -1.0

    def obj(t):
        return sgn * np.asarray(objective(np.exp(t)), dtype=float)

    A, B = np.log(lo).copy(), np.log(hi).copy()
    a, b = A.copy(), B.copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = obj(c), obj(d)
    n_iter = int(math.ceil(math.log(max(float(np.max(b - a)), tol) / tol) / math.log(1 / _INVPHI))) + 1
    for _ in range(n_iter):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        x_new = np.where(left, new_c, new_d)
        f_new = obj(x_new)
        fc, fd, c, d = (
            np.where(left, f_new, fd),
            np.where(left, fc, f_new),
            np.where(left, new_c, d),
            np.where(left, c, new_d),
        )
    x = np.where(fc >= fd, c, d)
    fx = np.maximum(fc, fd)
    # one parabolic step through (c, d, midpoint)
    m = 0.5 * (a + b)
    fm = obj(m)
    xs = np.stack([c, m, d])
    fs = np.stack([fc, fm, fd])
    den = (xs[1] - xs[0]) * (fs[1] - fs[2]) - (xs[1] - xs[2]) * (fs[1] - fs[0])
    num = (xs[1] - xs[0]) ** 2 * (fs[1] - fs[2]) - (xs[1] - xs[2]) ** 2 * (fs[1] - fs[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        xp = xs[1] - 0.5 * num / den
    ok = np.isfinite(xp) & (xp > a) & (xp < b)
    if np.any(ok):
        # objectives close over the full point array, so evaluate everywhere
        fp = obj(np.where(ok, xp, x))
        better = ok & (fp > fx)
        x = np.where(better, xp, x)
        fx = np.where(better, fp, fx)
    better = fm > fx
    x = np.where(better, m, x)
    fx = np.where(better, fm, fx)

    at_lo = x - A < edge_tol
    at_hi = B - x < edge_tol
    if np.any(at_lo | at_hi):
        x1 = np.atleast_1d(x)
        pts = np.broadcast_to(np.atleast_1d(points if points is not None else np.exp(x1)), x1.shape)
        bad = np.atleast_1d(at_lo | at_hi)
        side = "both" if (np.any(at_lo) and np.any(at_hi)) else ("low" if np.any(at_lo) else "high")
        raise BoundaryExtremumError(
            f"{what} pinned to the search boundary at {int(np.count_nonzero(bad))} point(s)",
            points=pts[bad],
            boundary=np.exp(x1[bad]),
            side=side,
        )
    return np.exp(x), sgn * fx


def _grid(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1 or np.any(arr <= 0):
        raise DomainError(f"{name} grid must be a 1-D array of positive values")
    return arr


def kinetic_from_curve(curve: SpectralCurve, s_grid) -> KineticPotential:
    """fbar(s) = max over v of [F(v) - s]/v, sampled on ``s_grid``."""
    s = _grid(s_grid, "s")
    lo, hi = curve.search_bounds()
    v_star, fbar = golden_extremum(
        lambda v: (curve._func(v) - s) / v, lo, hi, what="kinetic-potential maximum", points=s
    )
    kp = KineticPotential.from_samples(s, fbar, -1.0 / v_star, coupling=v_star, label="legendre") if s.size > 1 else None
    if kp is None:
        return KineticPotential(lambda x: np.full_like(np.asarray(x, float), fbar[0]), lambda x: -1 / v_star[0], (s[0], s[0]))
    return kp


def curve_from_kinetic(kp: KineticPotential, v_grid, *, n: int = 1, ell: int = 0) -> SpectralCurve:
    """F(v) = min over s of [s + v fbar(s)], sampled on ``v_grid``."""
    v = _grid(v_grid, "v")
    lo, hi = kp.search_bounds()
    s_star, F = golden_extremum(
        lambda s: s + v * kp._func(s), lo, hi, maximize=False, what="energy minimum over s", points=v
    )
    return SpectralCurve.from_samples(v, F, kp._func(s_star), n=n, ell=ell, label="legendre")


def kfunction_from_curve(curve: SpectralCurve, shape: PotentialShape, r_grid) -> KFunction:
    """K(r) = max over v of [F(v) - v f(r)], sampled on ``r_grid``."""
    r = _grid(r_grid, "r")
    fr = shape(r)
    lo, hi = curve.search_bounds()
    v_star, K = golden_extremum(
        lambda v: curve._func(v) - v * fr, lo, hi, what="K-function maximum", points=r
    )
    dK = -v_star * shape.derivative(r)
    if np.any(K <= 0):
        raise DomainError("K-function must be positive; curve and shape are inconsistent")
    return KFunction.from_samples(r, K, dK, coupling=v_star, label="legendre")


def energy_from_kfunction(k: KFunction, shape: PotentialShape, v):
    """min over r of [K(r) + v f(r)] for a scalar or array of couplings."""
    vv = np.atleast_1d(np.asarray(v, dtype=float))
    if np.any(vv <= 0):
        raise DomainError("coupling must be positive")
    lo, hi = k.search_bounds()
    _, E = golden_extremum(
        lambda r: k._func(r) + vv * shape._f(r), lo, hi, maximize=False, what="energy minimum over r", points=vv
    )
    return float(E[0]) if np.ndim(v) == 0 else E


def curve_from_coupling_form(curve_h: SpectralCurve, g: Callable, v_grid, *, n: int | None = None, ell: int | None = None) -> SpectralCurve:
    """F(v) = min over u of [H(u) - u H'(u) + v g(H'(u))].

    Exact when ``g`` is affine; the envelope approximation otherwise.
    """
    v = _grid(v_grid, "v")
    lo, hi = curve_h.search_bounds()

    def objective(u):
        dH = curve_h._deriv(u)
        return curve_h._func(u) - u * dH + v * g(dH)

    u_star, F = golden_extremum(objective, lo, hi, maximize=False, what="coupling-form minimum", points=v)
    dF = g(curve_h._deriv(u_star))
    return SpectralCurve.from_samples(
        v, F, dF, n=curve_h.n if n is None else n, ell=curve_h.ell if ell is None else ell, label="coupling form"
    )


def convexity_product(curve: SpectralCurve, kp: KineticPotential, v, rel_step: float = 1e-3):
    """F''(v) fbar''(s(v)) from centered differences; should equal -1/v**3."""
    v = np.asarray(v, dtype=float)
    hv = rel_step * v
    F2 = (curve._func(v + hv) - 2 * curve._func(v) + curve._func(v - hv)) / hv**2
    s = curve._func(v) - v * curve._deriv(v)
    hs = rel_step * s
    f2 = (kp._func(s + hs) - 2 * kp._func(s) + kp._func(s - hs)) / hs**2
    return F2 * f2
