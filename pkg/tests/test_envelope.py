import json

import numpy as np
import pytest

from specinv.envelope import (
    EnvelopeBasis,
    build_transformation,
    envelope_bound,
    envelope_bounds,
    envelope_curve,
    tangential_potential,
    write_bound_reports,
)
from specinv.errors import BasisUnsuitableError, NoCertificateError
from specinv.models import Coulomb, CoulombPlus, Hulthen, Power, PotentialShape, Tabulated, scale_shift
from specinv.solver import RadialProblem, solve_state

R_GRID = np.geomspace(0.01, 100, 400)
COUL = EnvelopeBasis.from_shape(Coulomb())
OSC = EnvelopeBasis.from_shape(Power(2))


class Bowl(PotentialShape):
    """(r - 1)^2, not monotone on r > 0."""

    kind = "bowl"

    def _f(self, r):
        return (r - 1.0) ** 2

    def _df(self, r):
        return 2.0 * (r - 1.0)


def solver_energy(shape, v):
    return solve_state(RadialProblem(shape, v)).energy


def test_basis_consistency():
    v = np.geomspace(0.3, 30, 12)
    assert COUL.consistency_error(v) < 1e-6
    assert OSC.consistency_error(v) < 1e-6 * 30


def test_identity_profile_is_affine():
    prof = build_transformation(Coulomb(), Coulomb(), R_GRID)
    assert prof.affine
    assert prof.convexity_sign in ("convex", "concave")
    assert np.allclose(prof.g_slopes, 1.0)


def test_coulomb_plus_linear_is_convex_in_coulomb_basis():
    prof = build_transformation(CoulombPlus("linear", 1, 1), Coulomb(), R_GRID)
    assert prof.convexity_sign == "convex"
    # g(h) = h - 1/h has g'' = -2/h^3 > 0 for h < 0
    y = prof.h_values[::40]
    assert np.allclose(prof.g(y), y - 1 / y, rtol=1e-9)
    assert np.all(prof.info["second_differences"] > 0)


def test_touch_coefficients_example():
    prof = build_transformation(CoulombPlus("linear", 1, 1), Coulomb(), R_GRID)
    tang = tangential_potential(prof, COUL, 1.0)
    assert tang.a == pytest.approx(2.0, abs=1e-12)
    assert tang.b == pytest.approx(2.0, abs=1e-12)
    r = np.array([0.5, 2.0])
    assert np.allclose(tang(r), -2 / r + 2)


@pytest.mark.parametrize(
    "f,h",
    [
        (CoulombPlus("linear", 1, 0.5), Coulomb()),
        (CoulombPlus("oscillator", 1, 0.5), Power(2)),
        (Hulthen(), Coulomb()),
        (CoulombPlus("log", 1, 0.5), Coulomb()),
    ],
    ids=str,
)
def test_tangency(f, h):
    prof = build_transformation(f, h, R_GRID)
    for t in (0.05, 0.7, 3.0, 40.0):
        tang = tangential_potential(prof, h, t)
        assert abs(tang(t) - f(t)) < 1e-8 * max(1.0, abs(f(t)))
        assert abs(tang.derivative(t) - f.derivative(t)) < 1e-8 * max(1.0, abs(f.derivative(t)))


@pytest.mark.parametrize("f,h", [(CoulombPlus("linear", 1, 0.5), Coulomb()), (CoulombPlus("oscillator", 1, 0.5), Coulomb())], ids=str)
def test_convex_tangents_lie_below(f, h):
    prof = build_transformation(f, h, R_GRID)
    assert prof.convexity_sign == "convex"
    for t in (0.1, 1.0, 10.0):
        tang = tangential_potential(prof, h, t)
        assert np.all(tang(R_GRID) <= f(R_GRID) + 1e-10 * np.abs(f(R_GRID)))


def test_concave_tangents_lie_above():
    f = CoulombPlus("linear", 1, 0.5)
    prof = build_transformation(f, Power(2), R_GRID)
    assert prof.convexity_sign == "concave"
    for t in (0.1, 1.0, 10.0):
        tang = tangential_potential(prof, Power(2), t)
        assert np.all(tang(R_GRID) >= f(R_GRID) - 1e-10 * np.abs(f(R_GRID)))


def test_envelope_reconstructs_shape():
    f = CoulombPlus("linear", 1, 0.5)
    prof = build_transformation(f, Coulomb(), R_GRID)
    t = np.geomspace(0.01, 100, 4000)
    a, b = prof.touch_coefficients(t)
    r = np.sqrt(R_GRID[1:] * R_GRID[:-1])
    env = np.max(a[:, None] * Coulomb()(r)[None, :] + b[:, None], axis=0)
    assert np.max(np.abs(env - f(r)) / np.maximum(1, np.abs(f(r)))) < 1e-4


def test_affine_profile_gives_exact_energy():
    f = scale_shift(Coulomb(), 2.0, 1.0, 0.5)
    prof = build_transformation(f, Coulomb(), R_GRID)
    for v in (0.5, 2.0, 7.0):
        rec = envelope_bound(prof, COUL, v)
        assert rec.value == pytest.approx(-(v**2) + 0.5 * v, rel=1e-10)


@pytest.mark.parametrize("w", ["linear", "oscillator", "log"])
@pytest.mark.parametrize("v", [1.0, 5.0, 20.0])
def test_bound_direction_against_solver(w, v):
    f = CoulombPlus(w, 1, 0.5)
    E = solver_energy(f, v)
    low = envelope_bound(build_transformation(f, Coulomb(), R_GRID), COUL, v)
    up = envelope_bound(build_transformation(f, Power(2), R_GRID), OSC, v)
    assert low.kind == "lower" and up.kind == "upper"
    assert low.value <= E + 1e-8
    assert up.value >= E - 1e-8


def test_hulthen_in_coulomb_basis_matches_solver_direction():
    prof = build_transformation(Hulthen(), Coulomb(), R_GRID)
    assert prof.convexity_sign in ("convex", "concave")
    for v in (2.0, 5.0, 20.0):
        rec = envelope_bound(prof, COUL, v)
        E = solver_energy(Hulthen(), v)
        if rec.kind == "lower":
            assert rec.value <= E + 1e-8
        else:
            assert rec.value >= E - 1e-8


@pytest.mark.parametrize(
    "f,basis",
    [(CoulombPlus("linear", 1, 0.5), COUL), (CoulombPlus("log", 1, 0.5), COUL), (CoulombPlus("oscillator", 1, 0.5), OSC)],
    ids=str,
)
def test_formulations_agree(f, basis):
    prof = build_transformation(f, basis.shape_h, R_GRID)
    v = np.array([1.0, 3.0, 10.0])
    recs = envelope_bounds(prof, basis, v)
    alt = envelope_curve(prof, basis, v)
    for rec, Fa in zip(recs, alt.samples["F"]):
        assert rec.value == pytest.approx(Fa, abs=1e-8)


def test_indefinite_profile_refuses_certificate():
    r = np.linspace(0.05, 5, 200)
    wiggle = Tabulated(r, np.tanh(r - 2), 1 / np.cosh(r - 2) ** 2)
    prof = build_transformation(wiggle, Power(1), r)
    assert prof.convexity_sign == "indefinite"
    with pytest.raises(NoCertificateError):
        envelope_bound(prof, EnvelopeBasis.from_shape(Power(1)), 1.0)


def test_non_monotone_basis_rejected():
    with pytest.raises(BasisUnsuitableError):
        build_transformation(Coulomb(), Bowl(), R_GRID)


def test_bound_report_json(tmp_path):
    prof = build_transformation(CoulombPlus("linear", 1, 0.5), Coulomb(), R_GRID)
    recs = envelope_bounds(prof, COUL, [1.0, 5.0])
    path = write_bound_reports(tmp_path / "bounds.json", recs, {"a": 1})
    doc = json.loads(path.read_text())
    assert {"v", "value", "kind", "basis", "touch_point"} <= set(doc["records"][0])
    assert doc["records"][1]["kind"] == "lower"
    assert "config_hash" in doc
