import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvmag.core import NVParams
from nvmag.errors import DegenerateInput, DuplicateLines, InconsistentResonances, SingularNormalMatrix
from nvmag.forward import LATTICE_AXES, FieldVector, ResonancePair, resonance_lines, resonances_all_axes
from nvmag.inverse import HyperfineMode
from nvmag.vector import (
    SYMMETRY_GROUP,
    ConeSet,
    blue_solve,
    calibration_rotation,
    cones_from_pairs,
    orbit_angle,
    pair_lines,
    pair_resonances,
    pair_resonances_consistent,
    reconstruct,
    reconstruct_lines,
    reconstruct_pairs,
    reconstruct_report,
    sign_index,
    sign_tuple,
    symmetry_images,
)

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(
    lambda v: tuple(np.asarray(v) / np.linalg.norm(v))
)


# ---- symmetry group --------------------------------------------------------


def test_group_order_and_orthogonality():
    g = SYMMETRY_GROUP
    assert g.shape == (48, 3, 3)
    np.testing.assert_array_equal(g[0], np.eye(3))
    for m in g:
        np.testing.assert_array_equal(m @ m.T, np.eye(3))
    assert len({m.tobytes() for m in g}) == 48
    assert sorted(set(np.round(np.linalg.det(g)).astype(int))) == [-1, 1]


def test_group_closed_under_products():
    keys = {m.tobytes() for m in SYMMETRY_GROUP}
    for a in SYMMETRY_GROUP[::5]:
        for b in SYMMETRY_GROUP[::7]:
            assert (a @ b).tobytes() in keys


def test_group_permutes_nv_axes_up_to_sign():
    for m in SYMMETRY_GROUP:
        img = np.abs(LATTICE_AXES @ m.T)
        for row in img:
            assert any(np.allclose(row, np.abs(ax)) for ax in LATTICE_AXES)


@pytest.mark.parametrize(
    "v, n",
    [((0, 0, 1), 6), ((1, 1, 1), 8), ((1, 1, 0), 12), ((1, 1, 2), 24), ((0.1, 0.35, 0.9), 48)],
)
def test_orbit_sizes(v, n):
    assert len(symmetry_images(FieldVector.from_components(*v))) == n


def test_orbit_angle_zero_for_images():
    v = np.array([0.2, -0.5, 0.84])
    v /= np.linalg.norm(v)
    for m in SYMMETRY_GROUP:
        assert orbit_angle(m @ v, v) < 1e-15
    assert orbit_angle((1, 0, 0), (0, 0, 1)) == 0.0
    assert orbit_angle((1, 0, 0), (1, 1, 0)) == pytest.approx(math.pi / 4)


# ---- sign tuples and the least-squares solve -------------------------------


def test_sign_tuple_order():
    assert sign_tuple(0) == (1, 1, 1, 1)
    assert sign_tuple(1) == (1, 1, 1, -1)
    assert sign_tuple(8) == (-1, 1, 1, 1)
    for i in range(16):
        assert sign_index(sign_tuple(i)) == i
    with pytest.raises(ValueError):
        sign_index((1, 1, 0, 1))


def test_unweighted_solution_is_scaled_transpose():
    rng = np.random.default_rng(0)
    n = LATTICE_AXES
    for _ in range(20):
        c = rng.uniform(0, 1, 4)
        cones = ConeSet(tuple(c))
        for idx in (0, 5, 11):
            s = np.array(sign_tuple(idx))
            b_hat, ssr = blue_solve(cones, s)
            est = math.sqrt(3) / 4 * (n * math.sqrt(3)).T @ (s * c)
            np.testing.assert_allclose(b_hat, est / np.linalg.norm(est), atol=1e-14)
            assert ssr == pytest.approx(np.sum((s * c - n @ est) ** 2), abs=1e-14)


@given(unit)
def test_noiseless_cones_recover_orbit(b):
    fv = reconstruct(ConeSet.from_direction(b))
    assert orbit_angle(fv.b_hat, b) < 1e-9
    assert fv.ssr < 1e-18


@given(unit, st.integers(0, 3))
def test_three_cone_mode(b, drop):
    cones = ConeSet.from_direction(b)
    fv = reconstruct(cones, drop_axis=drop)
    keep = [k for k in range(4) if k != drop]
    c_fit = np.abs(LATTICE_AXES @ np.asarray(fv.b_hat))[keep]
    np.testing.assert_allclose(c_fit, np.asarray(cones.cos_theta)[keep], atol=1e-6)
    # a cone with cos(theta) near zero leaves its sign undetermined to second order
    if min(np.asarray(cones.cos_theta)[keep]) > 1e-3:
        assert orbit_angle(fv.b_hat, b) < 1e-8


def test_tie_break_prefers_plus_signs():
    fv = reconstruct(ConeSet.from_direction(np.ones(3) / math.sqrt(3)))
    np.testing.assert_allclose(fv.b_hat, np.ones(3) / math.sqrt(3), atol=1e-14)
    assert fv.signs[0] == 1


def test_weighted_equals_unweighted_without_noise():
    b = np.array([0.3, -0.4, 0.866])
    b /= np.linalg.norm(b)
    c = np.abs(LATTICE_AXES @ b)
    cones = ConeSet(tuple(c), var_cos=(1e-4, 4e-4, 1e-6, 2e-5), b_mt=(1.0,) * 4)
    a = reconstruct(cones, weighted=True)
    u = reconstruct(cones, weighted=False)
    np.testing.assert_allclose(a.b_hat, u.b_hat, atol=1e-12)


def test_weighted_requires_variances_in_blue_solve():
    with pytest.raises(ValueError):
        blue_solve(ConeSet((0.5,) * 4), (1, 1, 1, 1), weighted=True)


def test_singular_weights_rejected():
    cones = ConeSet((0.5, 0.5, 0.5, 0.5), var_cos=(1.0, 1.0, 1e30, 1e30))
    with pytest.raises(SingularNormalMatrix):
        blue_solve(cones, (1, 1, 1, 1), weighted=True)


def test_cone_set_validation():
    with pytest.raises(ValueError):
        ConeSet((0.1, 0.2, 0.3))
    with pytest.raises(ValueError):
        ConeSet((1.2, 0.2, 0.3, 0.1))


def test_magnitude_fusion_inverse_variance():
    cones = ConeSet((1.0, 1 / 3, 1 / 3, 1 / 3), b_mt=(1.0, 2.0, 2.0, 2.0), var_b_mt=(1.0, 1.0, 1.0, 1.0))
    assert reconstruct(cones).b_mt == pytest.approx(1.75)
    assert reconstruct(ConeSet((1.0, 1 / 3, 1 / 3, 1 / 3), b_mt=(1.0, 2.0, 2.0, 2.0))).b_mt == 1.75
    cones = ConeSet((1.0, 1 / 3, 1 / 3, 1 / 3), b_mt=(1.0, 2.0, 2.0, 2.0), var_b_mt=(0.01, 1.0, 1.0, 1.0))
    assert reconstruct(cones).b_mt < 1.05


# ---- full chain ------------------------------------------------------------


@given(unit, st.floats(1.0, 50.0), st.sampled_from([0.0, 4.0]))
def test_chain_round_trip(b, mag, e):
    p = NVParams(e_mhz=e)
    fv = FieldVector(mag, b)
    pairs = resonances_all_axes(p, fv)
    recs = [reconstruct_pairs(p, pairs)]
    lines = resonance_lines(p, fv)
    if np.min(np.diff(lines)) > 1e-6:
        # coinciding lines cannot be paired from a bare line list
        recs.append(reconstruct_lines(p, lines))
    for rec in recs:
        assert orbit_angle(rec.b_hat, b) < 1e-6
        assert rec.b_mt == pytest.approx(mag, rel=1e-9)


def test_chain_agrees_with_cone_path():
    p = NVParams()
    fv = FieldVector.from_components(3.0, -7.0, 2.0)
    pairs = resonances_all_axes(p, fv)
    a = reconstruct_pairs(p, pairs, weighted=False)
    b = reconstruct(cones_from_pairs(p, pairs))
    np.testing.assert_allclose(a.b_hat, b.b_hat, atol=1e-12)
    assert a.b_mt == pytest.approx(b.b_mt, rel=1e-12)
    assert a.signs == b.signs


def test_three_pair_input_drops_last_axis():
    p = NVParams()
    fv = FieldVector.from_components(1.0, 2.0, 5.0)
    pairs = resonances_all_axes(p, fv)
    rec = reconstruct_pairs(p, pairs[:3])
    assert orbit_angle(rec.b_hat, fv.b_hat) < 1e-8
    rec = reconstruct_pairs(p, [pairs[0], pairs[2], pairs[3]], drop_axis=1)
    assert orbit_angle(rec.b_hat, fv.b_hat) < 1e-8


def test_report_rows():
    p = NVParams()
    fv = FieldVector.from_components(1.0, 2.0, 5.0)
    pairs = [ResonancePair(q.f_l_mhz, q.f_u_mhz, 0.01, 0.01) for q in resonances_all_axes(p, fv)]
    rep = reconstruct_report(p, pairs)
    rows = rep.axis_rows(p.gamma_mhz_per_mt)
    assert len(rows) == 4
    expected = np.degrees(np.arccos(np.abs(LATTICE_AXES @ np.asarray(fv.b_hat))))
    np.testing.assert_allclose([r["theta_deg"] for r in rows], expected, atol=1e-6)
    assert all(r["sigma_b_mt"] > 0 for r in rows)
    assert rep.field.sigma_b_mt > 0


def test_pairing_is_nested():
    pairs = pair_resonances([2900, 2800, 2950, 2750, 2880, 2860, 2990, 2700])
    assert [(q.f_l_mhz, q.f_u_mhz) for q in pairs] == [
        (2700, 2990), (2750, 2950), (2800, 2900), (2860, 2880)
    ]  # fmt: skip
    with pytest.raises(DuplicateLines):
        pair_resonances([2800, 2800, 2900, 2950])
    with pytest.raises(DuplicateLines):
        reconstruct_lines(NVParams(), [2800, 2800, 2900, 2950, 2700, 3000, 2850, 2890])


def test_consistent_pairing_matches_truth():
    p = NVParams()
    fv = FieldVector.from_components(4.0, -9.0, 13.0)
    truth = sorted((q.f_l_mhz, q.f_u_mhz) for q in resonances_all_axes(p, fv))
    got = pair_resonances_consistent(p, resonance_lines(p, fv))
    np.testing.assert_allclose([(q.f_l_mhz, q.f_u_mhz) for q in got], truth)


def test_crossed_splittings_fall_back_to_consistent_pairing():
    # two axes whose splittings cross: the nested pairing is wrong here
    p = NVParams()
    v = np.array([0.75, 0.6875, 0.125])
    fv = FieldVector(49.0, tuple(v / np.linalg.norm(v)))
    lines = resonance_lines(p, fv)
    truth = sorted((q.f_l_mhz, q.f_u_mhz) for q in resonances_all_axes(p, fv))
    nested = [(q.f_l_mhz, q.f_u_mhz) for q in pair_resonances(lines)]
    assert not np.allclose(nested, truth)
    got = [(q.f_l_mhz, q.f_u_mhz) for q in pair_lines(p, lines)]
    np.testing.assert_allclose(got, truth)
    assert orbit_angle(reconstruct_lines(p, lines).b_hat, fv.b_hat) < 1e-8


def test_inconsistent_lines_raise():
    with pytest.raises(InconsistentResonances):
        reconstruct_lines(NVParams(), [1000, 1001, 1002, 1003, 1004, 1005, 1006, 1007])


def test_hyperfine_lines_chain():
    p = NVParams()
    fv = FieldVector.from_components(2.0, 5.0, -3.0)
    lines = resonance_lines(p, fv)
    a_hf = 2.16
    n14 = np.concatenate([lines - a_hf, lines, lines + a_hf])
    rec = reconstruct_lines(p, n14, hyperfine=HyperfineMode.N14)
    assert orbit_angle(rec.b_hat, fv.b_hat) < 1e-9
    n15 = np.concatenate([lines - 1.5, lines + 1.5])
    rec = reconstruct_lines(p, n15, hyperfine=HyperfineMode.N15)
    assert orbit_angle(rec.b_hat, fv.b_hat) < 1e-9


# ---- calibration -----------------------------------------------------------


def test_calibration_exact_rotation():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    m = [rng.normal(size=3), rng.normal(size=3)]
    cal = calibration_rotation(m, [q @ m[0], q @ m[1]])
    np.testing.assert_allclose(cal.rotation, q, atol=1e-12)
    assert cal.residual_rad < 1e-12
    assert np.linalg.det(cal.rotation) == pytest.approx(1.0)


def test_calibration_symmetry_picks_closest_image():
    a = np.array([1.0, 0.2, 0.1])
    b = np.array([0.3, 1.0, -0.2])
    target_angle = math.radians(95.0)
    t1 = np.array([1.0, 0.0, 0.0])
    t2 = np.array([math.cos(target_angle), math.sin(target_angle), 0.0])
    cal = calibration_rotation([a, b], [t1, t2], use_symmetry=True)
    imgs = SYMMETRY_GROUP @ (b / np.linalg.norm(b))
    angles = [math.degrees(math.acos(np.clip(u @ a / np.linalg.norm(a), -1, 1))) for u in imgs]
    best = min(angles, key=lambda x: abs(x - 95.0))
    assert cal.measured_angle_deg == pytest.approx(best, abs=1e-9)


def test_calibration_degenerate():
    with pytest.raises(DegenerateInput):
        calibration_rotation([(1, 0, 0), (2, 0, 0)], [(1, 0, 0), (0, 1, 0)])


def test_coil_calibration_example():
    # two coil directions, each known only up to the cubic group
    y_coil = np.array([0.74, 0.66, 0.14])
    z_coil = np.array([0.81, 0.47, 0.34])
    a = y_coil / np.linalg.norm(y_coil)
    imgs = SYMMETRY_GROUP @ (z_coil / np.linalg.norm(z_coil))
    angles = np.degrees(np.arccos(np.clip(imgs @ a, -1, 1)))
    assert np.min(np.abs(angles - 98.0)) < 0.05
    cal = calibration_rotation([y_coil, z_coil], [[0, 1, 0], [0, 0, 1]], use_symmetry=True)
    # the image closest to a right angle with these rounded components
    assert cal.measured_angle_deg == pytest.approx(89.43, abs=0.01)
    np.testing.assert_allclose(cal.rotation @ cal.rotation.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(cal.rotation) == pytest.approx(1.0)
