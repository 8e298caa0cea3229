import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ai_zeros

from specinv.errors import DomainError, RangeError, UnsupportedModelError
from specinv.models import (
    Coulomb,
    CoulombPlus,
    Hulthen,
    Log,
    Power,
    Tabulated,
    eval_shape,
    exact_kfunction,
    exact_kinetic_potential,
    exact_spectral_curve,
    p_from_energy,
    parse_shape,
    power_constants,
    scale_shift,
    unit_eigenvalue,
)

ALL_SHAPES = [
    Coulomb(),
    Hulthen(),
    Log(),
    Power(2),
    Power(1),
    Power(-0.5),
    CoulombPlus("linear", 1, 0.5),
    CoulombPlus("oscillator", 1, 0.5),
    CoulombPlus("log", 1, 0.5),
]


def test_eval_shape_examples():
    assert eval_shape(Coulomb(), 2.0) == pytest.approx(-0.5, abs=1e-15)
    assert eval_shape(Power(2), 3.0) == pytest.approx(9.0, abs=1e-14)
    r = np.array([1e-6, 1e-8])
    assert np.allclose(r * Hulthen()(r), -1.0, atol=1e-5)


def test_hulthen_matches_definition():
    r = np.geomspace(1e-3, 50, 200)
    assert np.allclose(Hulthen()(r), -1.0 / (np.exp(r) - 1.0), rtol=1e-13)


@pytest.mark.parametrize("shape", ALL_SHAPES, ids=lambda s: s.describe())
def test_shapes_monotone_with_consistent_derivative(shape):
    r = np.geomspace(1e-3, 30, 400)
    f = shape(r)
    assert np.all(np.diff(f) > 0)
    h = 1e-6 * r
    fd = (shape(r + h) - shape(r - h)) / (2 * h)
    assert np.allclose(shape.derivative(r), fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("shape", ALL_SHAPES, ids=lambda s: s.describe())
def test_no_worse_than_coulomb_at_origin(shape):
    r = np.array([1e-7, 1e-8])
    assert np.all(np.isfinite(r * shape(r)))
    assert np.all(r * shape(r) >= -1.0 - 1e-6)


def test_rejects_nonpositive_radius():
    with pytest.raises(DomainError):
        Coulomb()(0.0)
    with pytest.raises(DomainError):
        Log()(np.array([1.0, -1.0]))


def test_power_validation():
    with pytest.raises(DomainError):
        Power(0)
    with pytest.raises(DomainError):
        Power(-2)


def test_parse_shape():
    assert isinstance(parse_shape("coulomb"), Coulomb)
    assert isinstance(parse_shape("hulthen"), Hulthen)
    assert parse_shape("power 2").q == 2
    s = parse_shape("coulomb_plus linear 1 0.5")
    assert s(2.0) == pytest.approx(-0.5 + 1.0)
    with pytest.raises(DomainError):
        parse_shape("yukawa")


def test_scale_shift_examples():
    assert scale_shift(Coulomb(), 2.0, 1.0, 0.0)(2.0) == pytest.approx(-1.0)
    assert scale_shift(Power(1), 1.0, 2.0, 0.0)(3.0) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        scale_shift(Coulomb(), -1.0, 1.0, 0.0)


# tabulated shapes ---------------------------------------------------------------


def test_tabulated_reproduces_smooth_shape():
    r = np.geomspace(0.05, 10, 200)
    f = Hulthen()
    tab = Tabulated(r, f(r), f.derivative(r))
    x = np.geomspace(0.06, 9, 333)
    assert np.max(np.abs(tab(x) - f(x))) < 1e-6
    tab_pchip = Tabulated(r, f(r))
    assert np.max(np.abs(tab_pchip(x) - f(x))) < 1e-3


def test_tabulated_range_policy():
    r = np.geomspace(0.1, 10, 50)
    tab = Tabulated(r, Coulomb()(r))
    with pytest.raises(RangeError):
        tab(0.05)
    ext = Tabulated(r, Coulomb()(r), extrapolate=True)
    # Coulomb tail matched at the two smallest nodes is exact for -1/r
    assert ext(0.01) == pytest.approx(-100.0, rel=1e-10)
    slope = (ext.f[-1] - ext.f[-2]) / (r[-1] - r[-2])
    assert ext(20.0) == pytest.approx(ext.f[-1] + slope * 10.0)
    assert ext.coulomb_strength == pytest.approx(-1.0)


def test_tabulated_rejects_bad_tables():
    with pytest.raises(DomainError):
        Tabulated([1.0, 0.5, 2.0], [0.0, 1.0, 2.0])
    with pytest.raises(DomainError):
        Tabulated([0.5, 1.0, 2.0], [1.0, 0.0, 2.0])


def test_tabulated_csv_round_trip(tmp_path):
    r = np.geomspace(0.1, 10, 20)
    tab = Tabulated(r, Log()(r))
    path = tab.to_csv(tmp_path / "shape.csv")
    first = path.read_text().splitlines()
    assert first[0].startswith("# specinv")
    assert first[1] == "r,f"
    back = Tabulated.from_csv(path)
    assert np.array_equal(back.r, tab.r) and np.array_equal(back.f, tab.f)


# exact curves -------------------------------------------------------------------


def test_exact_curve_examples():
    assert exact_spectral_curve(Hulthen(), 1)(4.0) == pytest.approx(-2.25, abs=1e-14)
    assert exact_spectral_curve(Coulomb())(1.0) == pytest.approx(-0.25, abs=1e-14)
    assert exact_spectral_curve(Power(2))(1.0) == pytest.approx(3.0, abs=1e-14)
    assert exact_spectral_curve(Coulomb(), 2, 1)(3.0) == pytest.approx(-9 / 36)
    with pytest.raises(UnsupportedModelError):
        exact_spectral_curve(Hulthen(), 1, 1)
    with pytest.raises(UnsupportedModelError):
        exact_spectral_curve(CoulombPlus("linear"), 1, 0)


@pytest.mark.parametrize(
    "shape,n",
    [(Hulthen(), 1), (Hulthen(), 2), (Coulomb(), 1), (Power(2), 1), (Power(1), 2), (Power(-0.5), 1), (Log(), 1)],
    ids=str,
)
def test_exact_curves_concave(shape, n):
    curve = exact_spectral_curve(shape, n)
    v = np.geomspace(max(1.0, curve.domain[0]) * 1.1, 1e3, 60)
    F = curve(v)
    d2 = np.diff(np.diff(F) / np.diff(v))
    assert np.all(d2 <= 1e-9 * np.abs(F[1:-1]))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hulthen_asymptotics(n):
    curve = exact_spectral_curve(Hulthen(), n)
    for v in (1e3, 1e4):
        assert curve(v) / v**2 == pytest.approx(-1 / (4 * n * n), rel=2 * n * n / v)


def test_unit_eigenvalues_closed_forms():
    for n in (1, 2, 3):
        for ell in (0, 1, 2):
            assert unit_eigenvalue(-1, n, ell) == -1 / (4 * (n + ell) ** 2)
            assert unit_eigenvalue(2, n, ell) == 4 * n + 2 * ell - 1


def test_unit_eigenvalue_linear_is_airy_zero():
    # -u'' + r u = E u with u(0) = 0 has E_n = -a_n (Airy zeros)
    zeros = -ai_zeros(3)[0]
    for n in (1, 2, 3):
        assert unit_eigenvalue(1, n, 0) == pytest.approx(zeros[n - 1], rel=1e-9)


def test_unit_eigenvalue_log_against_fd_oracle():
    from oracle import fd_eigenvalue

    ref = fd_eigenvalue(np.log, 1.0, R=25.0)
    assert unit_eigenvalue(0.0, 1, 0) == pytest.approx(ref, rel=1e-7)


def test_p_constants_closed_forms():
    for n in (1, 2, 3):
        for ell in (0, 1, 2):
            assert power_constants(-1, n, ell).P_nl == pytest.approx(n + ell, rel=1e-12)
            assert power_constants(2, n, ell).P_nl == pytest.approx(2 * n + ell - 0.5, rel=1e-12)
            assert p_from_energy(2, 4 * n + 2 * ell - 1) == pytest.approx(2 * n + ell - 0.5, rel=1e-12)


def test_p_monotone_in_q():
    qs = [-1.0, -0.8, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0]
    P = [power_constants(q, 1, 0).P_nl for q in qs]
    assert all(p > 0 for p in P)
    assert np.all(np.diff(P) > 0)


def test_log_p_matches_small_q_limit():
    # P(q) is continuous through the log case
    p_log = power_constants(0.0, 1, 0).P_nl
    lo, hi = power_constants(-0.02, 1, 0).P_nl, power_constants(0.02, 1, 0).P_nl
    assert lo < p_log < hi
    assert p_log == pytest.approx(0.5 * (lo + hi), rel=1e-3)


def test_exact_kfunction_examples():
    r = np.geomspace(0.1, 10, 17)
    assert np.allclose(exact_kfunction(Coulomb())(r), 1 / r**2, rtol=1e-14)
    assert np.allclose(exact_kfunction(Power(2))(r), 2.25 / r**2, rtol=1e-12)
    P = power_constants(0.0).P_nl
    assert np.allclose(exact_kfunction(Log())(r), P**2 / r**2, rtol=1e-14)
    with pytest.raises(UnsupportedModelError):
        exact_kfunction(Hulthen())


@pytest.mark.parametrize("shape", [Coulomb(), Power(2), Power(1), Power(-0.5), Log()], ids=str)
def test_kfunction_invariant_under_scale_shift(shape):
    r = np.geomspace(0.1, 10, 25)
    base = exact_kfunction(shape)(r)
    for A, b, B in [(2.0, 1.0, 0.0), (0.5, 1.0, 3.0), (3.0, 1.0, -1.0)]:
        assert np.allclose(exact_kfunction(scale_shift(shape, A, b, B))(r), base, rtol=1e-13)


def test_hulthen_kinetic_potential_formula():
    kp = exact_kinetic_potential(Hulthen(), 1)
    assert kp(2.0) == pytest.approx(-1.0, abs=1e-15)
    kp2 = exact_kinetic_potential(Hulthen(), 2)
    s = np.geomspace(0.01, 100, 20)
    assert np.allclose(kp2(s), -0.5 * (np.sqrt(s + 1) - 1), rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    A=st.floats(0.1, 10),
    b=st.floats(0.1, 10),
    B=st.floats(-5, 5),
    v=st.floats(0.5, 50),
)
def test_scaled_curve_law(A, b, B, v):
    # A f(r/b) + B at coupling v has energy F(v A b^2)/b^2 + v B
    shape = Power(1)
    scaled = exact_spectral_curve(scale_shift(shape, A, b, B))
    base = exact_spectral_curve(shape)
    assert scaled(v) == pytest.approx(base(v * A * b * b) / b**2 + v * B, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(1e-3, 1e3), n=st.integers(1, 3))
def test_hulthen_kinetic_potential_is_legendre_dual(s, n):
    # fbar(s) = F'(v) at the v where F - v F' = s
    v = math.sqrt(4 * n * n * s + n**4)
    curve = exact_spectral_curve(Hulthen(), n)
    assert curve.kinetic_energy(v) == pytest.approx(s, rel=1e-10)
    assert exact_kinetic_potential(Hulthen(), n)(s) == pytest.approx(curve.derivative(v), rel=1e-10, abs=1e-14)
