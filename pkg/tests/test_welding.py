import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerarnold.errors import (
    DegenerateScale,
    HolomorphyViolation,
    IllConditioned,
    OrderMismatch,
    SlopeCollapse,
)
from eulerarnold.spectral import FourierField, evaluate_with_derivative, grid
from eulerarnold.welding import (
    CircleDiffeo,
    InteriorCoefficients,
    MobiusMap,
    WeldingKernel,
    _compose,
    config_hash,
    interior_coefficients,
    invert_circle_diffeo,
    mobius_from_triple,
    normalize_curve,
    read_curve_csv,
    solve_welding,
    weld,
    welding_matrix,
    welding_residual,
)


def sine_diffeo(amp, k, M):
    return CircleDiffeo.from_displacement(FourierField.from_trig(k, sin={k: amp}), M)


def circle_defect(points):
    """Max deviation of the points from their best-fit circle (algebraic fit)."""
    x, y = points.real, points.imag
    A = np.c_[x, y, np.ones_like(x)]
    sol, *_ = np.linalg.lstsq(A, x**2 + y**2, rcond=None)
    cx, cy = sol[0] / 2, sol[1] / 2
    r = math.sqrt(sol[2] + cx**2 + cy**2)
    return float(np.max(np.abs(np.abs(points - (cx + 1j * cy)) - r)))


# --- circle diffeomorphisms ------------------------------------------------


def test_diffeo_check_and_shape():
    eta = sine_diffeo(0.1, 1, 64)
    ok, mismatch = eta.check()
    assert ok and mismatch < 1e-12
    with pytest.raises(ValueError):
        CircleDiffeo(np.zeros(3), np.zeros(4), np.ones(3))
    bad = CircleDiffeo(grid(8), grid(8), np.r_[np.ones(7), -1.0])
    with pytest.raises(SlopeCollapse):
        bad.check()


def test_resample_is_spectral():
    eta = sine_diffeo(0.2, 3, 32)
    fine = eta.resample(128)
    exact = sine_diffeo(0.2, 3, 128)
    assert np.max(np.abs(fine.eta - exact.eta)) < 1e-13
    assert np.max(np.abs(fine.eta_prime - exact.eta_prime)) < 1e-12


def test_invert_identity_and_rotation():
    inv = invert_circle_diffeo(CircleDiffeo.identity(32))
    assert np.max(np.abs(inv.eta - inv.theta)) < 1e-14
    inv = invert_circle_diffeo(CircleDiffeo.rotation(0.4, 32))
    assert np.max(np.abs(inv.eta - (inv.theta - 0.4))) < 1e-14
    assert np.allclose(inv.eta_prime, 1.0)


def test_invert_composition_residual():
    eta = sine_diffeo(0.1, 1, 512)
    inv = invert_circle_diffeo(eta)
    d = FourierField.from_trig(1, sin={1: 0.1})
    back = inv.eta + evaluate_with_derivative(d, inv.eta)[0]
    assert np.max(np.abs(back - inv.theta)) < 1e-10
    # derivative of the inverse
    expect = 1.0 / (1.0 + 0.1 * np.cos(inv.eta))
    assert np.max(np.abs(inv.eta_prime - expect)) < 1e-12


def test_invert_refuses_collapsed_slope():
    with pytest.raises(SlopeCollapse):
        invert_circle_diffeo(sine_diffeo(0.99995, 1, 64))


@settings(max_examples=25)
@given(st.floats(min_value=-0.45, max_value=0.45), st.integers(min_value=1, max_value=4),
       st.floats(min_value=-3, max_value=3))
def test_invert_roundtrip_property(amp, k, shift):
    d = FourierField.from_trig(k, sin={k: amp / k}, cos={1: 0.1})
    th = grid(128)
    v, dv = evaluate_with_derivative(d, th)
    eta = CircleDiffeo(th, th + shift + v, 1 + dv)
    inv = invert_circle_diffeo(eta)
    back = inv.eta + shift + evaluate_with_derivative(d, inv.eta)[0]
    assert np.max(np.abs(back - th)) < 1e-10
    assert np.all(np.diff(inv.eta) > 0)


# --- kernel ----------------------------------------------------------------


@pytest.mark.parametrize("eta", [CircleDiffeo.identity(32), CircleDiffeo.rotation(1.3, 32)])
def test_trivial_kernels_vanish(eta):
    assert np.max(np.abs(welding_matrix(eta))) < 1e-13


def test_diagonal_matches_off_diagonal_limit():
    eta = sine_diffeo(0.1, 1, 64)
    kern = WeldingKernel(eta)
    K = welding_matrix(eta, prefactor=1.0)
    for j in (0, 9, 23, 40):
        th = eta.theta[j]
        vals = []
        for h in (1e-4, 5e-5):
            vals.append(0.5 * (kern(np.array([th]), np.array([th + h]))[0]
                               + kern(np.array([th]), np.array([th - h]))[0]))
        # symmetric average is even in h, so Richardson removes the h^2 term
        limit = (4 * vals[1] - vals[0]) / 3
        assert K[j, j] * eta.M == pytest.approx(limit, abs=1e-6)


def test_kernel_evaluator_matches_matrix_off_diagonal():
    eta = sine_diffeo(0.2, 2, 32)
    K = welding_matrix(eta, prefactor=1.0) * eta.M
    kern = WeldingKernel(eta)
    i, j = 3, 17
    assert kern(eta.theta[[i]], eta.theta[[j]])[0] == pytest.approx(K[i, j], abs=1e-10)


# --- solving -----------------------------------------------------------------


@pytest.mark.parametrize("eta", [CircleDiffeo.identity(64), CircleDiffeo.rotation(2.1, 64)])
def test_trivial_weldings_are_unit_circle(eta):
    sol = solve_welding(eta)
    assert np.max(np.abs(sol.W - np.exp(1j * sol.theta))) < 1e-14
    curve, _ = weld(eta)
    assert np.max(np.abs(np.abs(curve.points) - 1)) < 1e-14


def test_interior_coefficients_trivial():
    a = interior_coefficients(solve_welding(CircleDiffeo.identity(32)))
    assert a.mode(1) == pytest.approx(1.0, abs=1e-14)
    assert np.sum(np.abs(a.values) ** 2) - 1 < 1e-28
    a = interior_coefficients(solve_welding(CircleDiffeo.rotation(0.9, 32)))
    assert a.mode(1) == pytest.approx(np.exp(0.9j), abs=1e-14)
    others = np.delete(a.values, a.K + 1)
    assert np.max(np.abs(others)) < 1e-14


@pytest.mark.parametrize("alpha,a", [(0.0, 0.3), (1.0, 0.5 - 0.2j), (-2.0, 0.7j)])
def test_mobius_welding_is_circle(alpha, a):
    eta = MobiusMap(alpha, a).circle_diffeo(512)
    curve, _ = weld(eta)
    assert circle_defect(curve.points) < 1e-6
    # the normalized interior map is itself Mobius, z / (1 - q z): a_n = q^(n-1)
    c = curve.coefficients
    q = c.mode(2)
    for n in range(3, 8):
        assert abs(c.mode(n) - q ** (n - 1)) < 1e-6


def test_sine_welding_is_holomorphic():
    sol = solve_welding(sine_diffeo(0.1, 2, 512))
    a = interior_coefficients(sol)
    assert a.negative_energy_fraction() < 1e-8
    assert sol.residual < 1e-12


def test_holomorphy_converges_under_refinement():
    fr = [interior_coefficients(solve_welding(sine_diffeo(0.1, 2, M))).negative_energy_fraction()
          for M in (32, 64, 128)]
    assert fr[0] > fr[1] > fr[2]


@pytest.mark.parametrize("prefactor", [1j * math.pi, 0.25j, -0.5j])
def test_wrong_prefactor_breaks_holomorphy(prefactor):
    sol = solve_welding(sine_diffeo(0.1, 2, 256), prefactor=prefactor)
    with pytest.raises(HolomorphyViolation):
        interior_coefficients(sol)


def test_ill_conditioned_is_reported():
    with pytest.raises(IllConditioned):
        solve_welding(sine_diffeo(0.1, 2, 64), condition_limit=1.0)


def test_interior_boundary_values_reproduce_samples():
    rng = np.random.default_rng(1)
    z = rng.normal(size=16) + 1j * rng.normal(size=16)
    th = grid(16)
    assert np.max(np.abs(_compose(z, th) - z)) < 1e-14
    coeffs = InteriorCoefficients(np.array([0, 0, 0, 1, 0.5], dtype=complex), 2)
    assert np.allclose(coeffs.boundary_values(th), np.exp(1j * th) + 0.5 * np.exp(2j * th))


# --- normalization --------------------------------------------------------


def test_normalize_undoes_affine_map():
    eta = sine_diffeo(0.1, 2, 128)
    sol = solve_welding(eta)
    a = interior_coefficients(sol)
    base = normalize_curve(sol, a)
    v, s = 0.3 - 1.2j, 2.5 * np.exp(0.4j)
    sol.W = s * sol.W + v
    moved = InteriorCoefficients(s * a.values, a.K)
    moved.values[a.K] += v
    again = normalize_curve(sol, moved)
    assert np.max(np.abs(again.points - base.points)) < 1e-13
    assert again.coefficients.mode(0) == 0 and again.coefficients.mode(1) == pytest.approx(1)


def test_normalize_unit_circle_unchanged():
    curve, _ = weld(CircleDiffeo.identity(32))
    assert curve.a0 == pytest.approx(0, abs=1e-15) and curve.a1 == pytest.approx(1)
    assert np.max(np.abs(curve.points - np.exp(1j * curve.theta))) < 1e-14


def test_normalize_rejects_degenerate_scale():
    sol = solve_welding(CircleDiffeo.identity(8))
    with pytest.raises(DegenerateScale):
        normalize_curve(sol, InteriorCoefficients(np.zeros(5, dtype=complex), 2))


def test_normalized_curve_fixes_origin():
    curve, sol = weld(sine_diffeo(0.15, 3, 256))
    c = curve.coefficients
    assert c.mode(0) == 0 and c.mode(1) == pytest.approx(1.0)
    # points are W(theta_j), which the interior map reaches at the inverse angles
    direct = c.boundary_values(sol.inverse.eta)
    assert np.max(np.abs(direct - curve.points)) < 1e-8


def test_curve_csv_and_sidecar(tmp_path):
    curve, _ = weld(sine_diffeo(0.1, 2, 32))
    text = curve.to_csv(tmp_path / "c.csv")
    lines = text.splitlines()
    assert lines[0] == "theta,re,im" and len(lines) == 32 + 2
    assert lines[1].split(",")[1:] == lines[-1].split(",")[1:]
    th, z = read_curve_csv(tmp_path / "c.csv")
    assert np.array_equal(z[:-1], curve.points)
    doc = json.loads(curve.sidecar(config_hash("x"), t=0.1))
    assert doc["config_hash"] == config_hash("x") and doc["t"] == 0.1
    assert {"a0", "a1", "solver_residual", "negative_energy_fraction"} <= set(doc)


# --- Mobius utilities --------------------------------------------------------


def test_mobius_boundary_map_consistency():
    m = MobiusMap(0.8, 0.4 - 0.3j)
    th = grid(64)
    assert np.max(np.abs(np.exp(1j * m.boundary_angle(th)) - m(np.exp(1j * th)))) < 1e-14
    assert np.all(np.diff(m.boundary_angle(th)) > 0)
    h = 1e-6
    fd = (m.boundary_angle(th + h) - m.boundary_angle(th - h)) / (2 * h)
    assert np.max(np.abs(fd - m.boundary_slope(th))) < 1e-8
    with pytest.raises(ValueError):
        MobiusMap(0.0, 1.0)


def test_mobius_from_triple_examples():
    m = mobius_from_triple([0, 1, 2], [0, 1, 2])
    assert abs(m.a) < 1e-14 and abs(np.angle(np.exp(1j * m.alpha))) < 1e-14
    m = mobius_from_triple([0, 1, 2], [0.5, 1.5, 2.5])
    assert abs(m.a) < 1e-14 and np.exp(1j * m.alpha) == pytest.approx(np.exp(0.5j))
    src, tgt = np.array([0, np.pi / 2, np.pi]), np.array([0.1, 1.7, 3.2])
    m = mobius_from_triple(src, tgt)
    assert np.max(np.abs(m(np.exp(1j * src)) - np.exp(1j * tgt))) < 1e-12


def test_mobius_from_triple_order_mismatch():
    with pytest.raises(OrderMismatch):
        mobius_from_triple([0, 1, 2], [0, 2, 1])
    with pytest.raises(OrderMismatch):
        mobius_from_triple([0, 1, 1], [0, 1, 2])


@settings(max_examples=40)
@given(st.lists(st.floats(0, 2 * math.pi), min_size=3, max_size=3, unique=True),
       st.floats(0, 2 * math.pi), st.complex_numbers(max_magnitude=0.8))
def test_mobius_from_triple_recovers_map(src, alpha, a):
    src = np.array(src)
    z = np.exp(1j * src)
    if min(abs(z[0] - z[1]), abs(z[1] - z[2]), abs(z[0] - z[2])) < 1e-2:
        return
    m0 = MobiusMap(alpha, a)
    tgt = m0.boundary_angle(src)
    m = mobius_from_triple(src, tgt)
    w = np.exp(1j * grid(16))
    assert np.max(np.abs(m(w) - m0(w))) < 1e-8


# --- round trip -------------------------------------------------------------


def test_welding_residual_identity():
    eta = CircleDiffeo.identity(64)
    curve, _ = weld(eta)
    assert welding_residual(curve, eta) < 1e-14


def test_welding_residual_decreases_under_refinement():
    res = []
    for M in (128, 256, 512):
        eta = sine_diffeo(0.1, 2, M)
        curve, _ = weld(eta)
        res.append(welding_residual(curve, eta))
    assert res[0] > res[1] > res[2]


def test_welding_residual_flags_wrong_diffeo():
    eta = sine_diffeo(0.1, 2, 128)
    curve, _ = weld(eta)
    assert welding_residual(curve, sine_diffeo(0.12, 2, 128)) > 100 * welding_residual(curve, eta)


def test_welding_residual_degrades_as_slope_collapses():
    res = []
    for amp in (0.3, 0.6, 0.8):
        eta = sine_diffeo(amp / 2, 2, 256)
        curve, _ = weld(eta, holomorphy_tol=1.0)
        res.append(welding_residual(curve, eta))
    assert res[0] < res[1] < res[2]


# --- symmetries and determinism -----------------------------------------------


def test_left_rotation_reparametrizes_same_curve():
    eta = sine_diffeo(0.1, 2, 256)
    c0, _ = weld(eta)
    c1, _ = weld(CircleDiffeo(eta.theta, eta.eta + 0.7, eta.eta_prime))
    assert np.max(np.abs(_compose(c0.points, eta.theta - 0.7) - c1.points)) < 1e-10


def test_right_rotation_rotates_curve():
    d = FourierField.from_trig(2, sin={2: 0.1})
    th = grid(256)
    c0, _ = weld(CircleDiffeo.from_displacement(d, 256))
    v, dv = evaluate_with_derivative(d, th + 0.7)
    c2, _ = weld(CircleDiffeo(th, th + 0.7 + v, 1 + dv))
    assert np.max(np.abs(c0.points * np.exp(-0.7j) - c2.points)) < 1e-10


def test_welding_is_deterministic():
    eta = sine_diffeo(0.1, 2, 128)
    a, _ = weld(eta)
    b, _ = weld(eta)
    assert a.to_csv() == b.to_csv()
