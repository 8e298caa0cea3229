"""Radial Schrodinger eigensolver for H = -Delta + v f(r) in three dimensions.

The reduced radial equation ``-u'' + [l(l+1)/r**2 + v f(r)] u = E u`` is
integrated with Numerov's method on the mesh ``x = ln r + r/rho``, which is
logarithmic near the origin and linear beyond ``r ~ rho``.  With
``u = sqrt(dr/dx) w`` the equation becomes ``w'' = g(x) w`` with

    g = (dr/dx)**2 (V_eff - E) + (rho**4/4 + rho**3 r) / (rho + r)**4,

the last term being minus one half of the Schwarzian derivative of r(x).

States are isolated by Sturm node counting of the outward solution against
a Dirichlet wall placed far into the classically forbidden region, then
refined with Brent's method on a discrete Wronskian between the outward
and inward solutions at the outer turning point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.optimize import brentq, minimize_scalar
from scipy.special import wrightomega

from .curves import SpectralCurve
from .errors import (
    DomainError,
    InvariantViolationError,
    NoBoundStateError,
    NumericalInstabilityError,
    UnboundedSearchError,
)
from .models import PotentialShape

log = logging.getLogger(__name__)

_BIG = 1e150


@njit(cache=True)
def _count_nodes(a, b, E, h2, w0, w1, end):
    wm, w = w0, w1
    cm = 1.0 - h2 * (a[0] - E * b[0]) / 12.0
    c = 1.0 - h2 * (a[1] - E * b[1]) / 12.0
    nodes = 0
    for i in range(1, end):
        cp = 1.0 - h2 * (a[i + 1] - E * b[i + 1]) / 12.0
        wp = ((12.0 - 10.0 * c) * w - cm * wm) / cp
        if (wp < 0.0) != (w < 0.0):
            nodes += 1
        if abs(wp) > _BIG:
            wp /= _BIG
            w /= _BIG
        wm, w = w, wp
        cm, c = c, cp
    return nodes


@njit(cache=True)
def _integrate_out(a, b, E, h2, w0, w1, end, out):
    out[0] = w0
    out[1] = w1
    cm = 1.0 - h2 * (a[0] - E * b[0]) / 12.0
    c = 1.0 - h2 * (a[1] - E * b[1]) / 12.0
    for i in range(1, end):
        cp = 1.0 - h2 * (a[i + 1] - E * b[i + 1]) / 12.0
        out[i + 1] = ((12.0 - 10.0 * c) * out[i] - cm * out[i - 1]) / cp
        if abs(out[i + 1]) > _BIG:
            for j in range(i + 2):
                out[j] /= _BIG
        cm, c = c, cp


@njit(cache=True)
def _integrate_in(a, b, E, h2, start, stop, out):
    out[start] = 0.0
    out[start - 1] = 1.0
    cp = 1.0 - h2 * (a[start] - E * b[start]) / 12.0
    c = 1.0 - h2 * (a[start - 1] - E * b[start - 1]) / 12.0
    for i in range(start - 1, stop, -1):
        cm = 1.0 - h2 * (a[i - 1] - E * b[i - 1]) / 12.0
        out[i - 1] = ((12.0 - 10.0 * c) * out[i] - cp * out[i + 1]) / cm
        if abs(out[i - 1]) > _BIG:
            for j in range(i - 1, start + 1):
                out[j] /= _BIG
        cp, c = c, cm


@dataclass(frozen=True)
class GridControls:
    """Integration controls.

    ``crossover`` is the radius rho where the mesh turns from logarithmic to
    linear; ``None`` picks it from the length scale of the state.
    ``decay_margin`` is the WKB attenuation exponent integral(kappa dr)
    required between the outer turning point and the wall.
    """

    r_min: float = 1e-6
    step: float = 0.005
    crossover: float | None = None
    decay_margin: float = 36.0
    max_points: int = 4_000_000

    def __post_init__(self):
        if not (self.r_min > 0 and self.step > 0 and self.decay_margin > 0):
            raise DomainError("grid controls must be positive")


@dataclass(frozen=True)
class RadialProblem:
    shape: PotentialShape
    v: float
    n: int = 1
    ell: int = 0
    grid: GridControls = field(default_factory=GridControls)

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError("coupling v must be positive")
        if int(self.n) < 1 or int(self.ell) < 0:
            raise DomainError("states need n >= 1 and ell >= 0")
        if self.shape.coulomb_strength == -math.inf:
            raise DomainError("shape is more singular than Coulomb at the origin")


@dataclass
class EigenSolution:
    energy: float
    nodes: int
    norm_check: float
    expectation_f: float
    converged: bool
    residual: float
    mesh: dict = field(default_factory=dict)
    r: np.ndarray | None = field(default=None, repr=False)
    u: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "nodes": self.nodes,
            "norm_check": self.norm_check,
            "expectation_f": self.expectation_f,
            "converged": self.converged,
            "residual": self.residual,
            "mesh": dict(self.mesh),
        }


class _Mesh:
    """Uniform x-mesh with the potential pre-evaluated; grows on demand."""

    def __init__(self, shape, v, ell, rho, h, r_min, r_end, max_points):
        self.shape, self.v, self.ell = shape, v, ell
        self.rho, self.h, self.r_min = rho, h, r_min
        self.max_points = max_points
        self.x0 = math.log(r_min) + r_min / rho
        self.capped = False
        self._build(r_end)

    def _x_of(self, r):
        return math.log(r) + r / self.rho

    def _build(self, r_end):
        npts = int(math.ceil((self._x_of(r_end) - self.x0) / self.h)) + 1
        if npts > self.max_points:
            npts = self.max_points
            self.capped = True
        npts = max(npts, 64)
        rho = self.rho
        x = self.x0 + self.h * np.arange(npts)
        r = rho * np.real(wrightomega(x - math.log(rho)))
        rp = r * rho / (rho + r)
        schwarz = (0.25 * rho**4 + rho**3 * r) / (rho + r) ** 4
        f = self.shape._f(r)
        V = self.v * f + self.ell * (self.ell + 1) / r**2
        self.r, self.rp, self.f, self.V = r, rp, f, V
        self.b = rp * rp
        self.a = self.b * V + schwarz

    def ensure(self, r_needed):
        if r_needed > self.r[-1] and not self.capped:
            self._build(max(r_needed, 1.5 * self.r[-1]))

    @property
    def size(self):
        return self.r.size

    def turning_index(self, E):
        allowed = np.nonzero(self.V <= E)[0]
        if allowed.size == 0:
            return int(np.argmin(self.V))
        return int(allowed[-1])

    def wall_index(self, E, margin):
        """Index of the Dirichlet wall for energy E, or None if the mesh is too short."""
        i0 = self.turning_index(E)
        kappa = np.sqrt(np.maximum(self.V[i0:] - E, 0.0))
        cum = np.cumsum(kappa * self.rp[i0:]) * self.h
        j = int(np.searchsorted(cum, margin))
        if j >= cum.size:
            return None
        return max(i0 + j, 8)


class _Shooter:
    def __init__(self, problem: RadialProblem):
        self.problem = problem
        shape, v, n, ell = problem.shape, problem.v, problem.n, problem.ell
        g = problem.grid
        self.lower_bound, r_star = lower_bound_details(shape, v)
        self.r_star = r_star
        self.length = 2.0 * r_star * (n + ell) ** 2
        rho = g.crossover or self.length
        r_min = g.r_min * min(1.0, self.length)
        self.mesh = _Mesh(shape, v, ell, rho, g.step, r_min, 40 * self.length, g.max_points)
        self.h2 = g.step**2
        self.margin = g.decay_margin
        cs = shape.coulomb_strength
        c1 = v * cs / (2 * (ell + 1))
        r0, r1 = self.mesh.r[0], self.mesh.r[1]
        u0 = r0 ** (ell + 1) * (1 + c1 * r0)
        u1 = r1 ** (ell + 1) * (1 + c1 * r1)
        self.w0 = u0 / math.sqrt(self.mesh.rp[0])
        self.w1 = u1 / math.sqrt(self.mesh.rp[1])

    def wall(self, E):
        m = self.mesh
        for _ in range(60):
            idx = m.wall_index(E, self.margin)
            if idx is not None:
                return idx
            if m.capped:
                return m.size - 1
            m.ensure(2.0 * m.r[-1])
        return m.size - 1

    def count(self, E, end=None):
        if end is None:
            end = self.wall(E)
        m = self.mesh
        return _count_nodes(m.a, m.b, E, self.h2, self.w0, self.w1, end)

    def probe(self, E, n):
        """Node count, growing the mesh only when a truncated count is inconclusive.

        A wall at the current mesh end only raises eigenvalues, so a
        truncated count that already reaches ``n`` is a valid lower bound.
        """
        m = self.mesh
        idx = m.wall_index(E, self.margin)
        if idx is not None:
            return self.count(E, idx)
        c = self.count(E, m.size - 1)
        if c >= n:
            return c
        return self.count(E)

    def wronskian(self, E, end, k):
        m = self.mesh
        wo = np.empty(k + 2)
        _integrate_out(m.a, m.b, E, self.h2, self.w0, self.w1, k + 1, wo)
        wi = np.empty(end + 1)
        _integrate_in(m.a, m.b, E, self.h2, end, k, wi)
        c = 1.0 - self.h2 * (m.a[k : k + 2] - E * m.b[k : k + 2]) / 12.0
        yo, yi = c * wo[k : k + 2], c * wi[k : k + 2]
        norm = math.hypot(wo[k], wo[k + 1]) * math.hypot(wi[k], wi[k + 1])
        return (yo[0] * yi[1] - yo[1] * yi[0]) / norm

    def wavefunction(self, E, end, k):
        m = self.mesh
        wo = np.empty(k + 2)
        _integrate_out(m.a, m.b, E, self.h2, self.w0, self.w1, k + 1, wo)
        wi = np.empty(end + 1)
        _integrate_in(m.a, m.b, E, self.h2, end, k, wi)
        scale = (wo[k] * wi[k] + wo[k + 1] * wi[k + 1]) / (wi[k] ** 2 + wi[k + 1] ** 2)
        return np.concatenate([wo[: k + 1], scale * wi[k + 1 : end + 1]])


def lower_bound_details(shape: PotentialShape, v: float) -> tuple[float, float]:
    """min over r of 1/(4 r**2) + v f(r), and the minimizing radius."""
    r = np.geomspace(1e-9, 1e7, 2001)
    obj = 0.25 / r**2 + v * shape._f(r)
    i = int(np.argmin(obj))
    if i == 0 or not np.isfinite(obj[i]):
        raise InvariantViolationError("operator lower bound is unbounded below for this shape")
    limit = v * shape.limit_at_infinity
    if i == r.size - 1:
        return float(min(obj[i], limit)), 1.0
    res = minimize_scalar(
        lambda t: 0.25 * math.exp(-2 * t) + v * float(shape._f(np.array([math.exp(t)]))[0]),
        bracket=(math.log(r[i - 1]), math.log(r[i]), math.log(r[i + 1])),
        tol=1e-12,
    )
    val = min(float(res.fun), float(obj[i]))
    r_star = math.exp(res.x) if res.fun <= obj[i] else float(r[i])
    if math.isfinite(limit) and limit < val:
        return float(limit), 1.0
    return val, r_star


def energy_lower_bound(shape: PotentialShape, v: float) -> float:
    """Rigorous lower bound min_r [1/(4r^2) + v f(r)] on the ground-state energy."""
    if not v > 0:
        raise DomainError("coupling v must be positive")
    return lower_bound_details(shape, v)[0]


def _threshold_count(shape: PotentialShape, v: float, ell: int, grid: GridControls) -> tuple[int, dict]:
    """Number of bound states below the continuum, from the threshold-energy solution."""
    E_inf = v * shape.limit_at_infinity
    try:
        _, r_star = lower_bound_details(shape, v)
    except InvariantViolationError:
        r_star = 1.0
    length = max(2.0 * r_star, 1e-3)
    probe = np.geomspace(length, 1e7, 4000)
    tail = probe**2 * v * np.abs(shape._f(probe) - shape.limit_at_infinity)
    big = np.nonzero(tail > 1e-10 * (ell + 1) ** 2)[0]
    R = probe[big[-1]] * 2 if big.size else 20 * length
    R = max(R, 20 * length)
    mesh = _Mesh(shape, v, ell, length, grid.step, grid.r_min * min(1.0, length), R, grid.max_points)
    c1 = v * shape.coulomb_strength / (2 * (ell + 1))
    r0, r1 = mesh.r[0], mesh.r[1]
    w0 = r0 ** (ell + 1) * (1 + c1 * r0) / math.sqrt(mesh.rp[0])
    w1 = r1 ** (ell + 1) * (1 + c1 * r1) / math.sqrt(mesh.rp[1])
    out = np.empty(mesh.size)
    end = mesh.size - 1
    _integrate_out(mesh.a, mesh.b, E_inf, grid.step**2, w0, w1, end, out)
    u = out * np.sqrt(mesh.rp)
    nodes = int(np.count_nonzero(np.diff(np.signbit(u[: end + 1]))))
    # u ~ A r^(l+1) + B r^-l beyond the range of the potential
    ra, rb = mesh.r[end - 50], mesh.r[end]
    M = np.array([[ra ** (ell + 1), ra ** (-ell)], [rb ** (ell + 1), rb ** (-ell)]])
    A, B = np.linalg.solve(M, [u[end - 50], u[end]])
    ahead = False
    if A * B < 0:
        r_cross = (-B / A) ** (1.0 / (2 * ell + 1))
        ahead = r_cross > rb
    count = nodes + int(ahead)
    return count, {"threshold_energy": E_inf, "threshold_nodes": nodes, "node_at_large_r": ahead, "r_end": float(rb)}


def count_bound_states(shape: PotentialShape, v: float, ell: int = 0, grid: GridControls | None = None) -> int:
    """Bound states with angular momentum ell below the continuum (short-range shapes)."""
    grid = grid or GridControls()
    if shape.tail != "short_range":
        return math.inf
    return _threshold_count(shape, v, ell, grid)[0]


def solve_state(problem: RadialProblem, *, keep_wavefunction: bool = False) -> EigenSolution:
    """Eigenvalue and normalized wavefunction diagnostics for one state.

    Raises
    ------
    NoBoundStateError
        When the requested state does not exist at this coupling.
    NumericalInstabilityError
        When the isolated state fails its node-count or Wronskian checks.
    """
    shape, v, n, ell = problem.shape, float(problem.v), int(problem.n), int(problem.ell)
    sh = _Shooter(problem)
    E_lo = sh.lower_bound - 1e-3 * abs(sh.lower_bound) - 1e-10
    if sh.count(E_lo) > 0:
        raise NumericalInstabilityError("node count nonzero below the operator lower bound")
    ca = 0
    evidence: dict = {"v": v, "n": n, "ell": ell, "lower_bound": sh.lower_bound}

    if shape.tail == "confining":
        # kinetic scale at the lower-bound radius; keeps the first probe near the state
        step = 0.25 * (n + ell) ** 2 / sh.r_star**2
        E_hi = E_lo + step
        cb = sh.probe(E_hi, n)
        it = 0
        while cb < n:
            step *= 2.0
            E_hi = E_lo + step
            cb = sh.probe(E_hi, n)
            it += 1
            if it > 200:
                raise UnboundedSearchError("could not bracket the requested state from above")
    else:
        E_inf = v * shape.limit_at_infinity
        evidence["threshold_energy"] = E_inf
        if shape.tail == "short_range":
            nb, info = _threshold_count(shape, v, ell, problem.grid)
            evidence.update(info)
            if nb < n:
                raise NoBoundStateError(
                    f"state n={n}, ell={ell} is not bound at v={v:g} ({nb} bound states)", evidence=evidence
                )
            E_hi, cb = E_inf, nb
        else:
            delta = 0.5 * (E_inf - E_lo)
            E_hi = E_inf - delta
            cb = sh.count(E_hi)
            while cb < n:
                delta *= 0.25
                if delta < 1e-14 * max(1.0, abs(E_lo)) or sh.mesh.capped:
                    evidence["count_near_threshold"] = cb
                    raise NoBoundStateError(f"state n={n}, ell={ell} not found at v={v:g}", evidence=evidence)
                E_hi = E_inf - delta
                cb = sh.count(E_hi)

    Ea, Eb = E_lo, E_hi

    # the continuum threshold is never an acceptable bracket end
    open_top = shape.tail == "short_range"

    def bisect(Ea, ca, Eb, cb, end=None):
        nonlocal open_top
        for _ in range(400):
            if ca == n - 1 and cb == n and not open_top:
                break
            Em = 0.5 * (Ea + Eb)
            if Eb - Ea <= 4e-16 * max(1.0, abs(Em)):
                break
            c = sh.probe(Em, n) if end is None else sh.count(Em, end)
            if c >= n:
                Eb, cb = Em, c
                open_top = False
            else:
                Ea, ca = Em, c
        return Ea, ca, Eb, cb

    Ea, ca, Eb, cb = bisect(Ea, ca, Eb, cb)
    end = sh.wall(Eb)
    for _ in range(5):
        ca_f, cb_f = sh.count(Ea, end), sh.count(Eb, end)
        if ca_f == n - 1 and cb_f == n:
            break
        if ca_f > n - 1:
            Ea, ca = E_lo, 0
        if cb_f < n:
            Eb = Eb + 0.5 * (Eb - Ea)
            end = sh.wall(Eb)
        Ea, ca, Eb, cb = bisect(Ea, min(ca_f, n - 1), Eb, max(cb_f, n), end)
    else:
        raise NumericalInstabilityError(f"could not isolate state n={n} (counts {ca_f}, {cb_f})")

    k = sh.mesh.turning_index(0.5 * (Ea + Eb))
    k = min(max(k, 4), end - 4)
    fa, fb = sh.wronskian(Ea, end, k), sh.wronskian(Eb, end, k)
    if fa == 0.0:
        E = Ea
    elif fb == 0.0:
        E = Eb
    elif fa * fb > 0:
        raise NumericalInstabilityError("matching defect does not change sign across the isolated bracket")
    else:
        E = brentq(lambda e: sh.wronskian(e, end, k), Ea, Eb, xtol=1e-14 * max(1.0, abs(Ea)), rtol=1e-15, maxiter=200)
    residual = abs(sh.wronskian(E, end, k))

    m = sh.mesh
    w = sh.wavefunction(E, end, k)
    weight = m.b[: end + 1] * w * w
    norm = simpson(weight, dx=m.h)
    # contribution of (0, r_min) where u ~ r^(l+1)
    u0sq = weight[0] / m.rp[0]
    norm += u0sq * m.r[0] / (2 * ell + 3)
    w = w / math.sqrt(norm)
    weight = weight / norm
    norm_check = float(simpson(weight, dx=m.h) + u0sq / norm * m.r[0] / (2 * ell + 3))
    expect_f = float(simpson(weight * m.f[: end + 1], dx=m.h))
    amp = np.abs(w)
    sig = amp > 1e-10 * amp.max()
    ws = w[sig]
    nodes = int(np.count_nonzero(np.diff(np.signbit(ws))))
    converged = nodes == n - 1 and abs(norm_check - 1) < 1e-8 and np.isfinite(expect_f)
    mesh_stats = {
        "points": int(end + 1),
        "step": m.h,
        "crossover": m.rho,
        "r_min": float(m.r[0]),
        "r_max": float(m.r[end]),
        "r_match": float(m.r[k]),
        "capped": bool(m.capped),
    }
    if nodes != n - 1:
        raise NumericalInstabilityError(f"wavefunction has {nodes} nodes, expected {n - 1}")
    sol = EigenSolution(float(E), nodes, norm_check, expect_f, bool(converged), float(residual), mesh_stats)
    if keep_wavefunction:
        sol.r = m.r[: end + 1].copy()
        sol.u = w * np.sqrt(m.rp[: end + 1])
    return sol


def spectral_curve(
    shape: PotentialShape,
    n: int = 1,
    ell: int = 0,
    v_grid=None,
    *,
    grid: GridControls | None = None,
    label: str = "",
) -> SpectralCurve:
    """Sample F(v) and F'(v) = <f> (Hellmann-Feynman) on an increasing v grid.

    Points where the state is not bound are listed in ``curve.failed``; at
    least two points must succeed.
    """
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.ndim != 1 or v_grid.size < 2 or np.any(v_grid <= 0) or np.any(np.diff(v_grid) <= 0):
        raise DomainError("v grid must be an increasing array of positive couplings")
    grid = grid or GridControls()
    vs, Es, dEs, failed = [], [], [], []
    for v in v_grid:
        try:
            sol = solve_state(RadialProblem(shape, float(v), n, ell, grid))
        except NoBoundStateError:
            failed.append(float(v))
            continue
        vs.append(float(v))
        Es.append(sol.energy)
        dEs.append(sol.expectation_f)
    if len(vs) < 2:
        raise NoBoundStateError(
            f"fewer than two grid couplings bind state n={n}, ell={ell}", evidence={"failed": failed}
        )
    v1 = 0.0 if shape.tail in ("confining", "long_range") else None
    curve = SpectralCurve.from_samples(
        vs, Es, dEs, n=n, ell=ell, failed=failed, label=label or f"solver {shape.describe()}", critical_coupling=v1
    )
    if failed:
        log.warning("spectral curve: %d grid points below critical coupling", len(failed))
    return curve


def detect_critical_coupling(
    shape: PotentialShape, n: int = 1, ell: int = 0, *, grid: GridControls | None = None, rtol: float = 1e-6
) -> float:
    """Smallest coupling at which state (n, ell) is bound; 0 if it binds for all v > 0."""
    if shape.tail in ("confining", "long_range"):
        return 0.0
    grid = grid or GridControls()

    def bound(v):
        return _threshold_count(shape, v, ell, grid)[0] >= n

    hi = 1.0
    while not bound(hi):
        hi *= 2.0
        if hi > 1e9:
            raise UnboundedSearchError(f"no state n={n}, ell={ell} found for couplings up to 1e9")
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if bound(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
