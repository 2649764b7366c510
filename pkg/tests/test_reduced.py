import math

import numpy as np
import pytest
from scipy.linalg import expm

from gssm.errors import ValidationError
from gssm.pade import RationalMap
from gssm.reduced import (Forcing, ReducedField, backbone, double_well_field,
                          forced_response, forcing_projection,
                          integrate_reduced, lift, lyapunov_estimate,
                          poincare_sample, psd_estimate)
from gssm.series import MultiSeries
from gssm.ssm import (PolarNormalForm, PolySystem, compute_ssm,
                      spectral_analysis)
from gssm.systems import make_system
from gssm.trajectory import TrajectoryData, trajectory_from_csv, trajectory_to_csv


def test_exponential_decay():
    f = ReducedField.from_series(MultiSeries(1, 1, 1, {(1,): [-1.0]}))
    tr = integrate_reduced(f, [1.0], (0.0, 1.0))
    assert abs(tr.values[-1, 0] - math.exp(-1.0)) < 1e-8
    assert tr.flags == []


def test_forward_backward_reversibility():
    f = double_well_field(amplitude=0.0)
    ic = np.array([0.4, -0.2])
    fwd = integrate_reduced(f, ic, (0.0, 1.0))
    back = integrate_reduced(f, fwd.values[-1], (1.0, 0.0))
    assert np.allclose(back.values[-1], ic, atol=1e-6)


def test_blowup_is_flagged_not_fatal():
    f = ReducedField.from_series(MultiSeries(1, 1, 2, {(2,): [1.0]}))
    tr = integrate_reduced(f, [1.0], (0.0, 2.0))
    assert any("blowup" in fl for fl in tr.flags)
    # u' = u^2 from 1 has its pole at t = 1
    assert abs(tr.times[-1] - 1.0) < 1e-3
    assert np.linalg.norm(tr.values[-1]) > 1e5


def test_pole_crossing_terminates_rational_field():
    num = MultiSeries(1, 1, 1, {(1,): [1.0]})
    den = MultiSeries(1, 1, 1, {(0,): [1.0], (1,): [-1.0]})
    rmap = RationalMap(num, den, (1, 1))
    f = ReducedField.from_rationals([rmap])
    tr = integrate_reduced(f, [0.5], (0.0, 10.0))
    assert any("pole" in fl for fl in tr.flags)
    assert tr.values[-1, 0] < 1.0
    with pytest.raises(ValidationError):
        integrate_reduced(f, [1.0 - 1e-9], (0.0, 1.0))


def test_lift_of_linear_flow_is_the_eigenplane_flow():
    sys = make_system("shaw_pierre").realization
    a = sys.linear_part
    lin = PolySystem(a, MultiSeries.zero(4, 4, 2))
    spec = spectral_analysis(lin, 2)
    model = compute_ssm(lin, spec, 3, style="graph")
    from gssm.ssm import realify_reduced
    field = ReducedField.from_series(realify_reduced(model))
    ab0 = np.array([0.03, -0.01])
    tr = integrate_reduced(field, ab0, (0.0, 2.0), rtol=1e-12, atol=1e-14)
    lifted = lift(model, tr)
    p0 = complex(ab0[0], ab0[1])
    x0 = model.W.evaluate([p0, np.conj(p0)]).real
    for t, x in zip(lifted.times[::100], lifted.values[::100]):
        assert np.allclose(x, expm(a * t) @ x0, atol=1e-10)


def test_lift_fixed_point_and_pole_samples():
    sys = make_system("shaw_pierre").realization
    spec = spectral_analysis(sys, 2)
    model = compute_ssm(sys, spec, 3, style="graph")
    still = TrajectoryData(np.linspace(0, 1, 5), np.zeros((5, 2)))
    lifted = lift(model, still)
    assert np.allclose(lifted.values, 0.0)
    num = MultiSeries(1, 2, 1, {(1,): [1.0, 2.0]})
    den = MultiSeries(1, 1, 1, {(0,): [1.0], (1,): [-1.0]})
    chart = RationalMap(num, den, (1, 1))
    tr = TrajectoryData([0.0, 1.0], [[0.5], [1.0]])
    out = lift(chart, tr)
    assert np.allclose(out.values[0], [1.0, 2.0])
    assert np.all(np.isnan(out.values[1]))
    assert any("pole" in fl for fl in out.flags)


def test_backbone_constant_for_linear_field():
    polar = PolarNormalForm(np.array([-0.5]), np.array([2.0]))
    curve = backbone(polar, np.linspace(0, 1, 5), component="kappa")
    assert np.allclose(curve[:, 1], -0.5)
    curve = backbone(polar, [0.0, 0.5, 1.0])
    assert np.allclose(curve[:, 1], 2.0)


def test_frc_linear_resonance_peak():
    c, w0, eps_f = 0.02, 1.5, 0.05
    polar = PolarNormalForm(np.array([-c]), np.array([w0]))
    grid = np.linspace(0.05, eps_f / c, 50)
    branch = forced_response(polar, polar, eps_f, grid)
    arr = branch.as_array()
    # peak response exactly eps_f/c, at the linear natural frequency
    imax = np.argmax(arr[:, 0])
    assert np.isclose(arr[imax, 0], eps_f / c)
    assert np.isclose(arr[imax, 1], w0, atol=1e-12)
    assert all(p.stable for p in branch.points)
    assert max(abs(p.residual) for p in branch.points) <= 1e-10
    # the two branches coincide where the square root vanishes
    top = [p for p in branch.points if np.isclose(p.rho, eps_f / c)]
    assert len(top) == 1


def test_frc_rejects_bad_inputs():
    polar = PolarNormalForm(np.array([-0.1]), np.array([1.0]))
    with pytest.raises(ValidationError):
        forced_response(polar, polar, 0.0, [0.1])
    with pytest.raises(ValidationError):
        forced_response(polar, polar, 0.1, [0.0, 0.1])
    # infeasible grid -> empty branch, not an error
    branch = forced_response(polar, polar, 1e-4, [0.5, 1.0])
    assert branch.points == []


def test_forcing_projection_uses_left_eigenvector():
    sys = make_system("shaw_pierre").realization
    spec = spectral_analysis(sys, 2)
    model = compute_ssm(sys, spec, 3, style="normal-form")
    vec = np.array([0.0, 1.0, 0.0, 0.0])
    got = forcing_projection(model, vec, 0.05)
    want = 0.05 * abs(np.dot(spec.master_left[0], vec)) / 2.0
    assert np.isclose(got, want, atol=1e-14)
    stripped = compute_ssm(sys, spec, 3)
    stripped.master_left = None
    with pytest.raises(ValidationError):
        forcing_projection(stripped, vec, 0.05)


def test_poincare_of_forced_linear_system_converges_to_a_point():
    lin = MultiSeries(2, 2, 1, {(1, 0): [0.0, -1.0], (0, 1): [1.0, -0.2]})
    f = ReducedField.from_series(lin, Forcing(1.0, 2.0, [0.0, 1.0]))
    ps = poincare_sample(f, [0.3, 0.0], 5, skip=40)
    assert ps.n_samples == 5
    assert np.max(np.ptp(ps.values, axis=0)) < 1e-4


def test_poincare_unforced_needs_explicit_frequency():
    lin = MultiSeries(2, 2, 1, {(1, 0): [0.0, -1.0], (0, 1): [1.0, -0.2]})
    f = ReducedField.from_series(lin)
    with pytest.raises(ValidationError):
        poincare_sample(f, [0.3, 0.0], 3)
    ps = poincare_sample(f, [0.3, 0.0], 4, skip=0, omega=2.0)
    # autonomous decay: stroboscopic samples shrink monotonically
    norms = np.linalg.norm(ps.values, axis=1)
    assert np.all(np.diff(norms) < 0)


def test_lyapunov_linear_fields():
    stable = ReducedField.from_series(MultiSeries(1, 1, 1, {(1,): [-1.0]}))
    est = lyapunov_estimate(stable, [1.0], horizon=20.0, transient=1.0)
    assert abs(est.value + 1.0) < 1e-3
    saddle = ReducedField.from_series(
        MultiSeries(2, 2, 1, {(1, 0): [1.0, 0.0], (0, 1): [0.0, -1.0]}))
    est = lyapunov_estimate(saddle, [0.01, 0.01], horizon=20.0, transient=0.0)
    assert abs(est.value - 1.0) < 1e-2


def test_lyapunov_saturation_diagnostic():
    saddle = ReducedField.from_series(
        MultiSeries(2, 2, 1, {(1, 0): [1.0, 0.0], (0, 1): [0.0, -1.0]}))
    est = lyapunov_estimate(saddle, [0.01, 0.01], perturbation_size=0.9,
                            horizon=10.0, renorm_interval=5.0, transient=0.0)
    assert any("saturated" in fl for fl in est.flags)


def test_psd_finds_sinusoid_bins():
    t = np.arange(0, 200, 0.01)
    x = np.sin(2 * np.pi * 0.7 * t) + 0.5 * np.sin(2 * np.pi * 1.3 * t) + 2.0
    tr = TrajectoryData(t, x)
    freq, power = psd_estimate(tr)
    order = np.argsort(power)[::-1]
    assert {round(freq[order[0]], 3), round(freq[order[1]], 3)} == {0.7, 1.3}
    # mean removed: no power at DC
    assert power[0] < 1e-20
    bad = TrajectoryData(np.array([0.0, 0.1, 0.3]), np.zeros(3))
    with pytest.raises(ValidationError):
        psd_estimate(bad)


def test_double_well_chaos_markers():
    f = double_well_field()
    est = lyapunov_estimate(f, [0.1, 0.0], horizon=120.0)
    assert est.value > 0.05
    tr = integrate_reduced(f, [0.1, 0.0], (0.0, 200.0), n_out=8001)
    freq, power = psd_estimate(tr, 0)
    assert power.max() / power.sum() < 0.9
    ps = poincare_sample(f, [0.1, 0.0], 30, skip=20)
    steps = np.linalg.norm(np.diff(ps.values, axis=0), axis=1)
    assert np.min(steps) > 0.05
    assert np.max(np.abs(ps.values)) < 10.0


def test_trajectory_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    tr = TrajectoryData(np.linspace(0, 1, 17), rng.standard_normal((17, 3)))
    path = tmp_path / "traj.csv"
    trajectory_to_csv(tr, str(path))
    back = trajectory_from_csv(str(path))
    assert np.array_equal(back.times, tr.times)
    assert np.array_equal(back.values, tr.values)
    with open(path) as fh:
        assert fh.readline().strip() == "t,x1,x2,x3"
