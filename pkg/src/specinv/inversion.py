"""Reconstruct a potential shape from one spectral curve F(v).

Each step takes the current shape f_k and its own curve F_k, forms

    K_k(r)     = max_u [F_k(u) - u f_k(r)]
    f_{k+1}(r) = max_v [(F(v) - K_k(r)) / v]

with F the target curve, and tabulates f_{k+1} on a fixed log-spaced r
grid.  The next curve F_{k+1} comes from the eigensolver.  For pure-power
and log targets the second iterate is exact; for other targets the
iterates converge towards the shape that produced F.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression

from .curves import KFunction, SpectralCurve
from .errors import (
    BoundaryExtremumError,
    DivergenceError,
    DomainError,
    IterateUnsolvableError,
    NoBoundStateError,
    NumericalInstabilityError,
    UnsupportedModelError,
)
from .io import config_hash, write_columns, write_json
from .kinetic import golden_extremum, kfunction_from_curve
from .models import PotentialShape, Tabulated, exact_spectral_curve
from .solver import GridControls, spectral_curve

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-6


def default_v_window(v1: float) -> tuple[float, float]:
    """Coupling window used to score an iterate's curve against the target."""
    if v1 <= 0:
        return 0.5, 100.0
    lo, hi = max(1.2 * v1, v1 + 0.5), 50.0 * v1
    if lo >= hi:
        # the 50 v1 ceiling collapses for v1 < 1/98; continue the v1 = 0 rule
        return v1 + 0.5, 100.0
    return lo, hi


@dataclass
class InversionConfig:
    """Settings for one inversion run.

    Parameters
    ----------
    target_curve : SpectralCurve
        The curve F(v) to invert.
    seed : PotentialShape
        Starting shape f_0.
    n, ell : int
        State labels of the target curve.
    r_window : (float, float)
        Radii on which iterates are tabulated.
    r_points : int
        Number of log-spaced radii in ``r_window``.
    v_window : (float, float), optional
        Couplings on which curve errors are measured; defaults from the
        target's critical coupling.
    v_points : int
        Size of the scoring grid in ``v_window``.
    max_iterations : int
        Number of steps f_k -> f_{k+1} to take at most.
    tolerance : float
        Stop once the relative curve error falls to this value.
    seed_kfunction : KFunction, optional
        Replaces the K-function computed from the seed (excited-state seeds).
    points_per_decade : int
        Density of the coupling grid on which iterate curves are solved.
    target_source : PotentialShape, optional
        Shape that generated a sampled target; lets the engine re-solve the
        target on a wider coupling range when a maximum hits its edge.
    """

    target_curve: SpectralCurve
    seed: PotentialShape
    n: int = 1
    ell: int = 0
    r_window: tuple[float, float] = (0.05, 10.0)
    r_points: int = 200
    v_window: tuple[float, float] | None = None
    v_points: int = 24
    max_iterations: int = 3
    tolerance: float = 1e-6
    seed_kfunction: KFunction | None = None
    points_per_decade: int = 16
    v_margin: float = 1.5
    solver_grid: GridControls = field(default_factory=GridControls)
    target_source: PotentialShape | None = None

    def __post_init__(self):
        lo, hi = self.r_window
        if not 0 < lo < hi:
            raise DomainError("r_window must satisfy 0 < r_lo < r_hi")
        if self.r_points < 3 or self.v_points < 2:
            raise DomainError("r_points must be >= 3 and v_points >= 2")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 0:
            raise DomainError("max_iterations must be non-negative")
        if self.n < 1 or self.ell < 0:
            raise DomainError("need n >= 1 and ell >= 0")
        v_lo, v_hi = self.target_curve.domain
        if self.v_window is None:
            a, b = default_v_window(self.target_curve.critical_coupling)
            a, b = max(a, v_lo), min(b, v_hi)
            if a >= b:
                raise DomainError(f"target domain ({v_lo:g}, {v_hi:g}) leaves no default v_window; pass one explicitly")
            self.v_window = (a, b)
        a, b = self.v_window
        if not (v_lo <= a < b <= v_hi * (1 + 1e-12)):
            raise DomainError(f"v_window {self.v_window} not inside the target domain ({v_lo:g}, {v_hi:g})")

    @property
    def r_grid(self) -> np.ndarray:
        return np.geomspace(self.r_window[0], self.r_window[1], self.r_points)

    @property
    def v_score_grid(self) -> np.ndarray:
        return np.geomspace(self.v_window[0], self.v_window[1], self.v_points)

    def describe(self) -> dict:
        return {
            "target": self.target_curve.label,
            "seed": self.seed.describe(),
            "n": self.n,
            "ell": self.ell,
            "r_window": list(self.r_window),
            "r_points": self.r_points,
            "v_window": list(self.v_window),
            "v_points": self.v_points,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "seed_kfunction": None if self.seed_kfunction is None else self.seed_kfunction.label or "custom",
            "points_per_decade": self.points_per_decade,
        }


@dataclass
class InversionState:
    """Iterate k: its shape, curve, K-function and error metrics."""

    k: int
    shape: PotentialShape
    f_values: np.ndarray
    curve: SpectralCurve
    curve_error: float
    shape_delta: float | None = None
    kfun: KFunction | None = None
    couplings: np.ndarray | None = None
    projected: bool = False
    timings: dict = field(default_factory=dict)

    def metrics(self, with_timings: bool = False) -> dict:
        out = {
            "k": self.k,
            "curve_error": self.curve_error,
            "shape_delta": self.shape_delta,
            "projected": self.projected,
            "shape": self.shape.describe(),
        }
        if with_timings:
            out["timings"] = dict(self.timings)
        return out


@dataclass
class InversionResult:
    config: InversionConfig
    history: list[InversionState]
    converged: bool

    @property
    def final(self) -> InversionState:
        return self.history[-1]

    @property
    def errors(self) -> list[float]:
        return [s.curve_error for s in self.history]

    def export(self, directory, *, config: dict | None = None, timings: bool = False) -> Path:
        """Write one ``r,f`` and one ``v,F,error`` table per iterate plus a manifest."""
        return export_history(self, directory, config=config, timings=timings)


def excited_state_seed(n: int, ell: int = 0) -> KFunction:
    """K(r) = (n + ell)**2 / r**2, the Coulomb K-function of state (n, ell)."""
    if n < 1 or ell < 0:
        raise DomainError("need n >= 1 and ell >= 0")
    return KFunction.inverse_square(float(n + ell), label=f"coulomb seed n={n} ell={ell}")


def curve_error(curve: SpectralCurve, target: SpectralCurve, v) -> float:
    """sup over v of |F_k - F| / max(|F|, s), s = F - v F' the kinetic energy.

    Using the kinetic energy as a floor keeps the measure finite where F
    crosses zero.
    """
    v = np.asarray(v, dtype=float)
    F = np.asarray(target(v))
    s = np.asarray(target.kinetic_energy(v))
    Fk = np.asarray(curve(v))
    return float(np.max(np.abs(Fk - F) / np.maximum(np.abs(F), s)))


def target_curve_from_shape(
    shape: PotentialShape,
    n: int = 1,
    ell: int = 0,
    v_range: tuple[float, float] = (1e-6, 1e5),
    *,
    points_per_decade: int = 16,
    grid: GridControls | None = None,
) -> SpectralCurve:
    """Solver-generated target curve on a log-spaced coupling range."""
    lo, hi = v_range
    count = max(8, int(math.ceil(points_per_decade * math.log10(hi / lo))) + 1)
    return spectral_curve(shape, n, ell, np.geomspace(lo, hi, count), grid=grid, label=f"solver {shape.describe()}")


def _widen_target(cfg: InversionConfig, side: str) -> bool:
    """Re-solve a sampled target on a range 100x wider at the pinned side(s)."""
    tc = cfg.target_curve
    if cfg.target_source is None or not tc.is_sampled:
        return False
    lo, hi = tc.domain
    if side in ("low", "both"):
        lo /= 100.0
    if side in ("high", "both"):
        hi *= 100.0
    log.warning("widening target coupling range to [%g, %g]", lo, hi)
    cfg.target_curve = target_curve_from_shape(
        cfg.target_source, cfg.n, cfg.ell, (lo, hi), points_per_decade=cfg.points_per_decade, grid=cfg.solver_grid
    )
    return True


def _curve_of(shape, cfg: InversionConfig, v_grid) -> SpectralCurve:
    """Closed form when available, otherwise a solver curve on ``v_grid``."""
    if not isinstance(shape, Tabulated):
        try:
            return exact_spectral_curve(shape, cfg.n, cfg.ell)
        except UnsupportedModelError:
            pass
    try:
        return spectral_curve(shape, cfg.n, cfg.ell, v_grid, grid=cfg.solver_grid)
    except (NoBoundStateError, NumericalInstabilityError) as exc:
        raise IterateUnsolvableError(f"eigensolver failed on iterate {shape.describe()}: {exc}") from exc


def _coupling_grid(cfg: InversionConfig, couplings) -> np.ndarray:
    """Grid covering the couplings tied to the r grid, plus the scoring grid."""
    lo = float(np.min(couplings)) / cfg.v_margin
    hi = float(np.max(couplings)) * cfg.v_margin
    count = max(8, int(math.ceil(cfg.points_per_decade * math.log10(hi / lo))) + 1)
    grid = np.concatenate([np.geomspace(lo, hi, count), cfg.v_score_grid])
    return np.unique(grid)


def reconstruct_shape(target: SpectralCurve, kfun_values, r):
    """f(r) = max_v [(F(v) - K(r)) / v] pointwise; returns f and the maximizing v."""
    K = np.asarray(kfun_values, dtype=float)
    lo, hi = target.search_bounds()
    v_star, f = golden_extremum(
        lambda v: (target._func(v) - K) / v, lo, hi, what="shape maximum over v", points=r
    )
    return f, v_star


def _project(f, r, k):
    """Isotonic projection of a slightly non-monotone iterate."""
    drops = np.diff(f)
    if np.all(drops >= 0):
        return f, False
    worst = float(-np.min(drops))
    if worst > MONOTONE_TOL * max(1.0, float(np.max(np.abs(f)))):
        log.warning("iterate %d: non-monotone by %.3g; applying isotonic projection", k, worst)
    return isotonic_regression(f).x, True


def _kfunction_step(state: InversionState, cfg: InversionConfig, r) -> KFunction:
    if state.k == 0 and cfg.seed_kfunction is not None:
        return cfg.seed_kfunction
    try:
        return kfunction_from_curve(state.curve, state.shape, r)
    except BoundaryExtremumError:
        if not state.curve.is_sampled:
            raise
        # widen the coupling grid once and retry
        v = state.curve.samples["v"]
        wider = np.unique(np.concatenate([np.geomspace(v[0] / 10, v[0], 6), v, np.geomspace(v[-1], v[-1] * 10, 6)]))
        state.curve = _curve_of(state.shape, cfg, wider)
        return kfunction_from_curve(state.curve, state.shape, r)


def invert_step(state: InversionState, cfg: InversionConfig) -> InversionState:
    """One step f_k -> f_{k+1}, including the eigensolver curve of f_{k+1}."""
    t0 = time.perf_counter()
    r = cfg.r_grid
    kfun = _kfunction_step(state, cfg, r)
    state.kfun = kfun
    K = np.asarray(kfun(r))
    t1 = time.perf_counter()

    try:
        f, v_star = reconstruct_shape(cfg.target_curve, K, r)
    except BoundaryExtremumError as exc:
        if not _widen_target(cfg, exc.side):
            raise
        f, v_star = reconstruct_shape(cfg.target_curve, K, r)
    # envelope theorem: dK/dr = -u* f_k'(r) when K came from the max over u
    slopes = None
    if kfun.is_sampled and "v" in kfun.samples:
        slopes = kfun.samples["v"] * state.shape.derivative(r) / v_star
    elif kfun.P is not None:
        slopes = 2 * kfun.P**2 / r**3 / v_star
    f, projected = _project(f, r, state.k + 1)
    shape = Tabulated(r, f, None if projected else slopes, extrapolate=True, monotone_tol=0.0)
    t2 = time.perf_counter()

    curve = _curve_of(shape, cfg, _coupling_grid(cfg, v_star))
    err = curve_error(curve, cfg.target_curve, cfg.v_score_grid)
    t3 = time.perf_counter()
    return InversionState(
        k=state.k + 1,
        shape=shape,
        f_values=f,
        curve=curve,
        curve_error=err,
        shape_delta=float(np.max(np.abs(f - state.f_values))),
        couplings=v_star,
        projected=projected,
        timings={"kfunction": t1 - t0, "reconstruct": t2 - t1, "curve": t3 - t2},
    )


def initial_state(cfg: InversionConfig) -> InversionState:
    r = cfg.r_grid
    seed_curve = _curve_of(cfg.seed, cfg, np.geomspace(cfg.v_window[0] / 10, cfg.v_window[1] * 10, 64))
    return InversionState(
        k=0,
        shape=cfg.seed,
        f_values=np.asarray(cfg.seed(r)),
        curve=seed_curve,
        curve_error=curve_error(seed_curve, cfg.target_curve, cfg.v_score_grid),
    )


def run_inversion(cfg: InversionConfig, *, divergence_window: int = 3) -> InversionResult:
    """Iterate from the seed until the curve error meets the tolerance.

    Raises
    ------
    DivergenceError
        If the curve error grows for ``divergence_window`` consecutive steps.
    """
    state = initial_state(cfg)
    history = [state]
    rises = 0
    while state.curve_error > cfg.tolerance and state.k < cfg.max_iterations:
        nxt = invert_step(state, cfg)
        rises = rises + 1 if nxt.curve_error > state.curve_error else 0
        history.append(nxt)
        log.info("iterate %d: curve error %.3e, shape delta %.3e", nxt.k, nxt.curve_error, nxt.shape_delta)
        state = nxt
        if rises >= divergence_window:
            raise DivergenceError(
                f"curve error increased for {rises} consecutive iterations",
                history=[s.metrics() for s in history],
            )
    return InversionResult(cfg, history, state.curve_error <= cfg.tolerance)


def export_history(result: InversionResult, directory, *, config: dict | None = None, timings: bool = False) -> Path:
    """Write per-iterate CSV tables and a JSON manifest into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    meta = config if config is not None else cfg.describe()
    r = cfg.r_grid
    v = cfg.v_score_grid
    F = np.asarray(cfg.target_curve(v))
    denom = np.maximum(np.abs(F), np.asarray(cfg.target_curve.kinetic_energy(v)))
    files = []
    for st in result.history:
        shape_path = out / f"iterate_{st.k}_shape.csv"
        write_columns(shape_path, {"r": r, "f": st.f_values}, meta)
        Fk = np.asarray(st.curve(v))
        curve_path = out / f"iterate_{st.k}_curve.csv"
        write_columns(curve_path, {"v": v, "F": Fk, "error": np.abs(Fk - F) / denom}, meta)
        files += [shape_path.name, curve_path.name]
    manifest = {
        "config": meta,
        "config_hash": config_hash(meta),
        "converged": result.converged,
        "iterations": [st.metrics(with_timings=timings) for st in result.history],
        "files": files,
    }
    write_json(out / "manifest.json", manifest)
    return out
