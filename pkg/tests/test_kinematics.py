import math

import numpy as np
import pytest

from bellowkin.io import read_csv
from bellowkin.kinematics import (
    PlanarPose,
    cc_pose,
    jacobian,
    resolved_rates,
    shape,
    tip_pose,
    tip_twist,
    wrap_angle,
    write_rr_trace,
    write_shape_csv,
)
from bellowkin.modal import ModalModel


def constant_curvature_model(kappa0: float, L: float) -> ModalModel:
    # theta(s, q) = kappa0 * s * q, so the backbone is a circular arc for any q
    A_raw = np.zeros((2, 2))
    A_raw[1, 1] = kappa0
    return ModalModel.from_raw(A_raw, L=L)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(2 * math.pi + 0.3) == pytest.approx(0.3)


def test_cc_pose_straight():
    p = cc_pose(0.0, 500.0)
    assert (p.x, p.z, p.theta) == (0.0, 500.0, 0.0)


def test_cc_pose_quarter_circle():
    r = 120.0
    p = cc_pose(1.0 / r, (math.pi / 2) * r)
    assert p.x == pytest.approx(r, rel=1e-12)
    assert p.z == pytest.approx(r, rel=1e-12)
    assert p.theta == pytest.approx(math.pi / 2, rel=1e-12)


def test_cc_pose_guard_continuity():
    # guarded series returns the true value kappa*s^2/2, which for
    # kappa = 1e-12, s = 100 sits 5e-9 LU off the straight limit; the naive
    # closed form loses it entirely to cancellation (1 - cos underflows to 0)
    a = cc_pose(1e-12, 100.0)
    b = cc_pose(0.0, 100.0)
    assert a.x == pytest.approx(0.5e-12 * 100.0 ** 2, rel=1e-12)
    assert abs(a.x - b.x) <= 5.1e-9
    assert abs(a.z - b.z) <= 1e-9
    # far below the guard the straight limit is matched tightly
    c = cc_pose(1e-14, 100.0)
    assert abs(c.x - b.x) <= 1e-9 and abs(c.z - b.z) <= 1e-9


def test_cc_pose_rejects_negative_arc():
    with pytest.raises(ValueError):
        cc_pose(0.1, -1.0)


def test_straight_shape_stations():
    m = ModalModel(A=np.zeros((3, 3)), L=400.0)
    poses = shape(m, 7.0, 5)
    xs = [p.x for p in poses]
    assert np.allclose(xs, [0, 100, 200, 300, 400], atol=1e-9)
    assert np.allclose([p.z for p in poses], 0.0, atol=1e-9)
    assert np.allclose([p.theta for p in poses], 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        shape(m, 7.0, 1)


def test_quadrature_tip_matches_closed_form():
    # straight-along-+x quadrature frame vs straight-along-+z closed form:
    # tip x pairs with closed-form z and vice versa
    L = 500.0
    q = 10.0
    for kL in np.arange(0.0, math.pi + 1e-12, 0.1):
        m = constant_curvature_model(kL / (L * q), L)
        tip = tip_pose(m, q)
        ref = cc_pose(kL / L, L)
        scale = max(1.0, abs(ref.z), abs(ref.x))
        assert abs(tip.x - ref.z) / scale <= 1e-9
        assert abs(tip.z - ref.x) / scale <= 1e-9
        assert tip.theta == pytest.approx(wrap_angle(kL), abs=1e-12)


def test_calibrated_tip_within_fit_residual(reference_model, reference_dataset,
                                            reference_report):
    j = int(np.argmax(np.asarray(reference_dataset.pressures) == 21.0))
    data_tip = reference_dataset.points[j][-1] - reference_dataset.points[j][0]
    tip = tip_pose(reference_model, 21.0)
    err_mm = np.linalg.norm(tip.position - data_tip) * reference_model.unit_scale
    assert err_mm <= reference_report.per_pressure[j]["max_tip_err_mm"] + 1e-9


def test_jacobian_zero_model():
    m = ModalModel(A=np.zeros((3, 3)), L=500.0)
    assert np.array_equal(jacobian(m, 5.0), [0.0, 0.0, 0.0])


def test_jacobian_constant_curvature_symbolic():
    # theta = k0*s*q gives kappa = k0*q; differentiate the closed-form tip
    # x = sin(kL)/k, z = (1-cos(kL))/k with respect to q by the chain rule
    k0 = 2.4e-4
    L = 500.0
    q = 10.0
    m = constant_curvature_model(k0, L)
    k = k0 * q
    dk = k0
    dx_dq = dk * (L * math.cos(k * L) / k - math.sin(k * L) / k ** 2)
    dz_dq = dk * (L * math.sin(k * L) / k - (1 - math.cos(k * L)) / k ** 2)
    J = jacobian(m, q)
    assert J[0] == pytest.approx(dx_dq, rel=1e-9)
    assert J[1] == pytest.approx(dz_dq, rel=1e-9)
    assert J[2] == pytest.approx(k0 * L, rel=1e-12)


def test_jacobian_matches_finite_difference(reference_model):
    h = 1e-4
    for q in [2.0, 10.0, 19.0]:
        up = tip_pose(reference_model, q + h)
        dn = tip_pose(reference_model, q - h)
        fd = (up.position - dn.position) / (2 * h)
        J = jacobian(reference_model, q)[:2]
        assert np.max(np.abs(J - fd)) / max(np.max(np.abs(fd)), 1e-12) <= 1e-6


def test_tip_twist_linear_in_rate(reference_model):
    t0 = tip_twist(reference_model, 10.0, 0.0)
    assert (t0.vx, t0.vz, t0.omega) == (0.0, 0.0, 0.0)
    t1 = tip_twist(reference_model, 10.0, 0.7)
    t2 = tip_twist(reference_model, 10.0, 1.4)
    assert t2.vx == 2 * t1.vx and t2.vz == 2 * t1.vz and t2.omega == 2 * t1.omega


def test_tip_twist_matches_ramp_differencing(reference_model):
    h = 0.05
    q = 12.0
    tw = tip_twist(reference_model, q, 1.0)
    up = tip_pose(reference_model, q + h)
    dn = tip_pose(reference_model, q - h)
    fd_v = (up.position - dn.position) / (2 * h)
    fd_w = (up.theta - dn.theta) / (2 * h)
    assert np.allclose(tw.velocity, fd_v, rtol=0, atol=2e-3 * max(1.0, np.max(np.abs(fd_v))))
    assert tw.omega == pytest.approx(fd_w, abs=1e-5)


def test_arc_length_preserved(reference_model):
    def polyline_len(n):
        pts = np.array([[p.x, p.z] for p in shape(reference_model, 21.0, n)])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    L = reference_model.L
    assert abs(polyline_len(200) - L) / L <= 1e-4
    # chord shortfall decays like n^-2
    e50 = abs(polyline_len(50) - L)
    e100 = abs(polyline_len(100) - L)
    assert e50 / e100 >= 3.0


def test_resolved_rates_already_at_target(reference_model):
    target = tip_pose(reference_model, 9.0).position
    res = resolved_rates(reference_model, target, q0=9.0)
    assert res.converged
    assert res.iterations <= 1
    assert abs(res.q - 9.0) <= 1e-9


def test_resolved_rates_tracks_pressure_target(reference_model):
    target = tip_pose(reference_model, 15.0).position
    res = resolved_rates(reference_model, target, q0=5.0, tol=1e-4)
    assert res.converged
    assert res.err <= 0.0978
    assert abs(res.q - 15.0) <= 0.016
    # task error non-increasing once inside the basin
    errs = [row[4] for row in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(errs[5:], errs[6:]))


def test_resolved_rates_unreachable_target(reference_model):
    res = resolved_rates(reference_model, [10 * reference_model.L, 0.0],
                         q0=5.0, max_iter=150)
    assert not res.converged
    assert res.stalled or res.iterations == 150
    assert math.isfinite(res.err) and math.isfinite(res.q)


def test_resolved_rates_rejects_bad_gains(reference_model):
    with pytest.raises(ValueError):
        resolved_rates(reference_model, [0, 0], q0=5.0, alpha=0.0)
    with pytest.raises(ValueError):
        resolved_rates(reference_model, [0, 0], q0=5.0, tol=0.0)


def test_shape_csv_round_trip(tmp_path, reference_model):
    path = tmp_path / "shape.csv"
    write_shape_csv(path, reference_model, 10.0, 9)
    header, rows = read_csv(path)
    assert header == ["s", "x", "z", "theta"]
    assert len(rows) == 9
    poses = shape(reference_model, 10.0, 9)
    for row, p in zip(rows, poses):
        assert float(row[1]) == p.x and float(row[2]) == p.z


def test_rr_trace_csv(tmp_path, reference_model):
    target = tip_pose(reference_model, 12.0).position
    res = resolved_rates(reference_model, target, q0=8.0)
    path = tmp_path / "trace.csv"
    write_rr_trace(path, res)
    header, rows = read_csv(path)
    assert header == ["iter", "q", "x", "z", "err"]
    assert len(rows) == len(res.trace)
    assert int(rows[0][0]) == 0


def test_pose_requires_finite_components():
    with pytest.raises(ValueError):
        PlanarPose(x=math.nan, z=0.0, theta=0.0)
