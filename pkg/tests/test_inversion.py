import json

import numpy as np
import pytest

import specinv.inversion as inv
from specinv.errors import DivergenceError, DomainError
from specinv.inversion import (
    InversionConfig,
    InversionState,
    excited_state_seed,
    initial_state,
    invert_step,
    run_inversion,
    target_curve_from_shape,
)
from specinv.kinetic import energy_from_kfunction
from specinv.models import Coulomb, Hulthen, Log, Power, exact_spectral_curve

WIDE = dict(r_window=(0.002, 25.0), r_points=300)
INNER = (0.1, 5.0)


def inner_error(cfg, f, exact):
    r = cfg.r_grid
    m = (r >= INNER[0]) & (r <= INNER[1])
    return float(np.max(np.abs(f[m] - exact(r[m]))))


def hulthen_first_iterate(r):
    # the same shape for every n when the seed is K = (n + ell)^2 / r^2
    return -0.5 * (np.sqrt(4 / r**2 + 1) - 1)


@pytest.fixture(scope="module")
def hulthen_run():
    cfg = InversionConfig(exact_spectral_curve(Hulthen()), Coulomb(), max_iterations=2)
    return run_inversion(cfg)


def test_hulthen_first_step_is_closed_form(hulthen_run):
    r = hulthen_run.config.r_grid
    assert np.max(np.abs(hulthen_run.history[1].f_values - hulthen_first_iterate(r))) < 1e-6


def test_hulthen_errors_decrease(hulthen_run):
    errs = hulthen_run.errors
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert hulthen_run.final.k == 2
    assert not hulthen_run.converged


def test_one_step_consistency(hulthen_run):
    st = hulthen_run.history[1]
    assert st.kfun is not None
    # couplings whose minimizing radius lies inside the tabulated window
    u = st.kfun.samples["v"]
    v = np.geomspace(max(u.min(), st.curve.domain[0]) * 1.05, u.max() / 1.05, 15)
    E = energy_from_kfunction(st.kfun, st.shape, v)
    F = st.curve(v)
    scale = np.maximum(np.abs(F), st.curve.kinetic_energy(v))
    assert np.max(np.abs(E - F) / scale) < 1e-5


def test_iterates_are_monotone(hulthen_run):
    for st in hulthen_run.history[1:]:
        assert np.all(np.diff(st.f_values) >= 0)


def test_excited_state_seed():
    r = np.array([0.5, 1.0, 2.0])
    assert np.allclose(excited_state_seed(2, 0)(r), 4 / r**2)
    assert np.allclose(excited_state_seed(1, 0)(r), 1 / r**2)
    with pytest.raises(DomainError):
        excited_state_seed(0)


def test_excited_hulthen_first_step():
    cfg = InversionConfig(
        exact_spectral_curve(Hulthen(), 2), Coulomb(), n=2, max_iterations=1, seed_kfunction=excited_state_seed(2)
    )
    nxt = invert_step(initial_state(cfg), cfg)
    assert np.max(np.abs(nxt.f_values - hulthen_first_iterate(cfg.r_grid))) < 1e-6


def test_power_first_step_is_a_pure_power():
    q = 1.0
    cfg = InversionConfig(exact_spectral_curve(Power(q)), Coulomb(), max_iterations=1, **WIDE)
    st = invert_step(initial_state(cfg), cfg)
    ratio = st.f_values / cfg.r_grid**q
    assert np.ptp(ratio) / np.mean(ratio) < 1e-8
    assert np.mean(ratio) > 0


def test_power_second_step_is_exact():
    cfg = InversionConfig(exact_spectral_curve(Power(1)), Coulomb(), max_iterations=2, tolerance=1e-12, **WIDE)
    res = run_inversion(cfg)
    assert inner_error(cfg, res.history[2].f_values, lambda r: r) < 1e-4


def test_fixed_point_for_own_curve():
    cfg = InversionConfig(exact_spectral_curve(Power(2)), Power(2), max_iterations=1, **WIDE)
    st = invert_step(initial_state(cfg), cfg)
    r = cfg.r_grid
    assert np.max(np.abs(st.f_values - r**2) / np.maximum(1, r**2)) < 1e-8


def test_seed_independence_for_power_target():
    target = exact_spectral_curve(Power(1))
    out = []
    for seed in (Coulomb(), Power(2)):
        cfg = InversionConfig(target, seed, max_iterations=2, tolerance=1e-12, **WIDE)
        out.append(run_inversion(cfg).history[2].f_values)
    m = (cfg.r_grid >= INNER[0]) & (cfg.r_grid <= INNER[1])
    assert np.max(np.abs(out[0][m] - out[1][m])) < 1e-4


def test_log_second_step_is_exact():
    cfg = InversionConfig(exact_spectral_curve(Log()), Coulomb(), max_iterations=2, tolerance=1e-12, **WIDE)
    res = run_inversion(cfg)
    assert inner_error(cfg, res.history[2].f_values, np.log) < 1e-4


def test_divergence_detection(monkeypatch):
    cfg = InversionConfig(exact_spectral_curve(Hulthen()), Coulomb(), max_iterations=10)
    errors = iter([2.0, 3.0, 4.0, 5.0, 6.0])

    def rising(state, cfg):
        return InversionState(state.k + 1, state.shape, state.f_values, state.curve, next(errors), 0.0)

    monkeypatch.setattr(inv, "invert_step", rising)
    with pytest.raises(DivergenceError) as info:
        run_inversion(cfg)
    assert info.value.exit_code == 5
    assert [h["curve_error"] for h in info.value.history][1:] == [2.0, 3.0, 4.0]


def test_config_validation():
    target = exact_spectral_curve(Hulthen())
    with pytest.raises(DomainError):
        InversionConfig(target, Coulomb(), r_window=(0.0, 1.0))
    with pytest.raises(DomainError):
        InversionConfig(target, Coulomb(), v_window=(0.5, 10.0))
    with pytest.raises(DomainError):
        InversionConfig(target, Coulomb(), tolerance=0.0)
    assert InversionConfig(target, Coulomb()).v_window == pytest.approx((1.5, 50.0))
    assert InversionConfig(exact_spectral_curve(Coulomb()), Power(2)).v_window == (0.5, 100.0)


def test_project_repairs_small_violations():
    r = np.linspace(1, 2, 5)
    f, projected = inv._project(np.array([0.0, 1.0, 0.9, 2.0, 3.0]), r, 1)
    assert projected
    assert np.all(np.diff(f) >= 0)
    same, flag = inv._project(np.arange(5.0), r, 1)
    assert not flag and np.array_equal(same, np.arange(5.0))


def test_sampled_target_curve():
    curve = target_curve_from_shape(Hulthen(), v_range=(1.5, 40))
    assert curve.is_sampled
    v = curve.samples["v"]
    assert np.allclose(curve.samples["F"], -(((v - 1) / 2) ** 2), rtol=1e-6)
    assert curve(4.0) == pytest.approx(-2.25, rel=1e-4)


def test_export(tmp_path, hulthen_run):
    out = hulthen_run.export(tmp_path / "run")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == [
        "iterate_0_shape.csv",
        "iterate_0_curve.csv",
        "iterate_1_shape.csv",
        "iterate_1_curve.csv",
        "iterate_2_shape.csv",
        "iterate_2_curve.csv",
    ]
    assert [m["k"] for m in manifest["iterations"]] == [0, 1, 2]
    assert "timings" not in manifest["iterations"][1]
    lines = (out / "iterate_1_shape.csv").read_text().splitlines()
    assert lines[0].startswith("# specinv") and lines[1] == "r,f"
    assert (out / "iterate_2_curve.csv").read_text().splitlines()[1] == "v,F,error"
    timed = json.loads((hulthen_run.export(tmp_path / "t", timings=True) / "manifest.json").read_text())
    assert "timings" in timed["iterations"][1]


def test_default_window_for_small_critical_coupling():
    from specinv.curves import SpectralCurve
    from specinv.inversion import default_v_window

    assert default_v_window(0.005) == (0.505, 100.0)
    v = np.geomspace(0.01, 40, 30)
    sampled = SpectralCurve.from_samples(v, -(v**2) / 4, -v / 2)
    assert InversionConfig(sampled, Coulomb()).v_window == pytest.approx((0.51, 40.0))
