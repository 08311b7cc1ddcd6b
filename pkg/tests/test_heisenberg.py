import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nilmetry.heisenberg import (F_lambda, IntegrabilityError, Lift, PlanarMap, VerticalLine,
                                 boundary_d2, cube_root_shear_h0, cube_root_shear_map, det_estimate,
                                 dilate, discrete_curl, f_lambda, h_inv, h_mul, hpoint,
                                 inversion_j, inversion_j_components, lift_apply, lift_gradient,
                                 lift_h0, line_image_analysis, planar_diameter, planar_f_lambda,
                                 planar_from_grid, planar_identity, planar_map, projection)
from nilmetry.lie_core import bch_product
from nilmetry.metrics import koranyi_distance

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
hpoints = arrays(np.float64, 3, elements=coords)
ORIGIN = np.zeros(3)


def log_radial(rng, n):
    """Points with Koranyi size spread over [1e-3, 1e3]."""
    u = rng.normal(size=(n, 3))
    u /= koranyi_distance(ORIGIN, u)[:, None]
    return dilate(np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n)), u)


def test_product_examples():
    assert np.array_equal(h_mul([1, 0, 0], [0, 1, 0]), [1, 1, -2])
    p = np.array([2.0, -3.0, 7.0])
    assert np.array_equal(h_mul(p, h_inv(p)), ORIGIN)


def test_product_matches_bch(heis, rng):
    p, q = rng.uniform(-10, 10, (2, 10_000, 3))
    assert np.max(np.abs(h_mul(p, q) - bch_product(heis, p, q))) <= 1e-12


def test_product_associative(rng):
    p, q, s = rng.uniform(-10, 10, (3, 10_000, 3))
    assert np.max(np.abs(h_mul(h_mul(p, q), s) - h_mul(p, h_mul(q, s)))) <= 1e-12


def test_inversion_values():
    assert np.array_equal(inversion_j([1.0, 0, 0]), [-1, 0, 0])
    assert np.array_equal(inversion_j([0, 0, 1.0]), [0, 0, -1])
    with pytest.raises(ValueError):
        inversion_j(ORIGIN)


def test_inversion_forms_agree(rng):
    p = rng.uniform(-10, 10, (10_000, 3))
    assert np.max(np.abs(inversion_j(p) - inversion_j_components(p))) <= 1e-14


def test_inversion_involution(rng):
    p = log_radial(rng, 10_000)
    back = inversion_j(inversion_j(p))
    assert np.max(np.abs(back - p) / (1 + np.abs(p))) <= 1e-12


def test_inversion_swaps_zero_and_infinity(rng):
    p = log_radial(rng, 20_000)
    ratio = boundary_d2(inversion_j(p), ORIGIN) / boundary_d2(p, None)
    assert 0.2 < ratio.min() and ratio.max() < 5.0


def test_f_lambda():
    assert np.array_equal(f_lambda(2.0, [3, 4, 7]), [6, 2, 7])
    assert np.array_equal(f_lambda(1.0, [3, 4, 7]), [3, 4, 7])
    with pytest.raises(ValueError):
        f_lambda(0.0, ORIGIN)


@settings(max_examples=80, deadline=None)
@given(hpoints, hpoints, st.floats(0.1, 10))
def test_f_lambda_automorphism(p, q, lam):
    lhs = f_lambda(lam, h_mul(p, q))
    rhs = h_mul(f_lambda(lam, p), f_lambda(lam, q))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


def test_F_lambda_values():
    assert np.array_equal(F_lambda(2.0, ORIGIN), ORIGIN)
    for n in (1, 10, 100):
        assert F_lambda(2.0, hpoint(n + 1j * n))[1] == pytest.approx(4 * n / 17, abs=1e-9)


def test_F_lambda_continuous_at_zero(rng):
    u = rng.normal(size=(200, 3))
    for r in (1e-2, 1e-4, 1e-6):
        small = dilate(r, u)
        assert koranyi_distance(ORIGIN, F_lambda(2.0, small)).max() <= 10 * r * np.abs(u).max()


def test_F_lambda_inverse(rng):
    p = log_radial(rng, 1000)
    back = F_lambda(0.5, F_lambda(2.0, p))
    assert np.max(np.abs(back - p) / np.abs(p).max(axis=1, keepdims=True)) <= 1e-10


def test_F_lambda_dilation_equivariant(rng):
    p = log_radial(rng, 10_000)
    a = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), 10_000))
    lhs = dilate(a, F_lambda(2.0, p))
    rhs = F_lambda(2.0, dilate(a, p))
    # coordinatewise in units of each point's homogeneous scale
    size = koranyi_distance(ORIGIN, lhs)
    err = np.abs(lhs - rhs) / np.stack([size, size, size ** 2], axis=-1)
    assert err.max() <= 1e-10


def _bilipschitz_band(rng, n, lam=2.0):
    p, q = log_radial(rng, n), log_radial(rng, n)
    # include near-origin points and near pairs
    q[: n // 4] = h_mul(p[: n // 4], dilate(1e-3, rng.normal(size=(n // 4, 3))))
    ratio = koranyi_distance(F_lambda(lam, p), F_lambda(lam, q)) / koranyi_distance(p, q)
    return max(ratio.max(), 1 / ratio.min())


def test_F_lambda_bilipschitz_band():
    c1 = _bilipschitz_band(np.random.default_rng(1), 100_000)
    c2 = _bilipschitz_band(np.random.default_rng(2), 200_000)
    assert c1 < 20
    assert abs(c2 - c1) <= 0.1 * c1


def test_F_lambda_asymptotics():
    errs = []
    for t in 10.0 ** np.arange(2, 7):
        out = F_lambda(2.0, hpoint(3 + 4j, t))
        errs.append((abs(out[0] - 1.5), abs(out[1] - 8.0), abs(out[2] / t - 1)))
    errs = np.array(errs)
    assert np.all(np.diff(errs[:, 0]) < 0) and np.all(np.diff(errs[:, 1]) < 0)
    assert errs[-1].max() <= 1e-2


def test_boundary_d2():
    assert boundary_d2(ORIGIN, None) == 1.0
    assert boundary_d2(None, None) == 0.0
    assert boundary_d2([1.0, 0, 0], None) == 0.5
    p = np.array([1.0, 2.0, 3.0])
    assert boundary_d2(p, p) == 0.0
    q = np.array([-1.0, 0.5, 2.0])
    assert boundary_d2(p, q) == boundary_d2(q, p)


def test_vertical_line_validation():
    with pytest.raises(ValueError):
        VerticalLine(0j, 1.0, -1.0)
    with pytest.raises(ValueError):
        VerticalLine(0j, -1.0, 1.0, samples=1)
    ts = VerticalLine(0j, -1e3, 1e3, 101, "log").heights()
    assert ts[0] == -1e3 and ts[-1] == 1e3 and 0.0 in ts


def test_identity_line_image():
    res = line_image_analysis(lambda p: p, VerticalLine(2 - 1j, -100, 100, 201))
    assert res.pi_diameter == 0.0 and res.hausdorff == 0.0
    assert res.best_base == 2 - 1j


def test_F_lambda_line_image_converges_to_base():
    bases = []
    for reach in (1e2, 1e4, 1e6):
        line = VerticalLine(3 + 4j, -reach, reach, 801, "log")
        res = line_image_analysis(lambda p: F_lambda(2.0, p), line)
        bases.append(res.best_base)
    # the far ends approach q_{x/lam + i lam y}; the best base settles as the range grows
    assert abs(bases[2] - bases[1]) < abs(bases[1] - bases[0]) + 1e-9


@pytest.mark.parametrize("n", [4, 8, 16])
def test_F_lambda_line_diameter(n):
    line = VerticalLine(n + 1j * n, -1e6, 1e6, 2001, "log")
    res = line_image_analysis(lambda p: F_lambda(2.0, p), line)
    assert res.pi_diameter >= 0.9 * (2 * n - 4 * n / 17)


def test_planar_diameter_hull_path(rng):
    pts = rng.normal(size=(5000, 2))
    brute = planar_diameter(pts[:2000])
    assert planar_diameter(pts) >= brute


def test_det_estimates(rng):
    z = rng.uniform(-5, 5, (50, 2))
    assert np.allclose(det_estimate(planar_identity(), z), 1.0, atol=1e-8)
    assert np.allclose(det_estimate(planar_f_lambda(3.0), z), 1.0, atol=1e-8)
    f = cube_root_shear_map()
    z = z[np.abs(np.abs(z[:, 1]) - 1) > 1e-3]
    assert np.allclose(det_estimate(f, z), 1.0, atol=1e-6)


def test_lift_gradient_values():
    f = cube_root_shear_map()
    assert np.allclose(lift_gradient(planar_identity(), np.array([[3.0, -2.0]])), 0, atol=1e-8)
    assert np.allclose(lift_gradient(f, np.array([0.3, 8.0])), [0, -8 / 3], atol=1e-6)
    assert np.allclose(lift_gradient(f, np.array([0.3, 0.5])), [0, 0], atol=1e-6)


def test_lift_h0_values():
    f = cube_root_shear_map()
    assert lift_h0(planar_identity(), (2.0, -3.0)) == pytest.approx(0.0, abs=1e-9)
    assert lift_h0(f, (0, 8.0)) - lift_h0(f, (0, 1.0)) == pytest.approx(-15.0, abs=1e-6)
    assert lift_h0(f, (0, 0.9)) - lift_h0(f, (0, -0.9)) == pytest.approx(0.0, abs=1e-8)


def test_lift_h0_matches_closed_form_up_to_constant(rng):
    f = cube_root_shear_map()
    z = rng.uniform(-6, 6, (8, 2))
    ours = np.array([lift_h0(f, p) for p in z])
    closed = cube_root_shear_h0(z[:, 1])
    assert np.allclose(ours - closed, 1.0, atol=1e-6)


def test_curl_vanishes_off_kinks(rng):
    f = cube_root_shear_map()
    z = rng.uniform(-5, 5, (300, 2))
    z = z[np.abs(np.abs(z[:, 1]) - 1) > 0.05]
    scale = 1 + np.abs(lift_gradient(f, z)).max()
    assert np.abs(discrete_curl(f, z)).max() <= 1e-6 * scale


def test_integrability_error_on_non_constant_det():
    bad = PlanarMap(lambda p: np.stack([p[..., 0] * (1 + p[..., 1] ** 2), p[..., 1]], axis=-1), 1.0)
    with pytest.raises(IntegrabilityError):
        lift_h0(bad, (1.0, 2.0))


def test_lift_commutes_with_projection(rng):
    f = cube_root_shear_map()
    lift = Lift(f)
    p = rng.uniform(-4, 4, (60, 3))
    out = lift(p)
    assert np.array_equal(out[:, :2], f(p[:, :2]))
    assert np.allclose(lift.inverse(out), p, atol=1e-9)


def test_lift_of_identity_is_identity(rng):
    p = rng.uniform(-4, 4, (20, 3))
    assert np.allclose(lift_apply(planar_identity(), p), p, atol=1e-12)


def test_lift_maps_vertical_to_vertical():
    res = line_image_analysis(Lift(cube_root_shear_map()), VerticalLine(1.5 - 2j, -1e3, 1e3, 201))
    assert res.pi_diameter == 0.0


def test_lift_of_automorphism_planar_part(rng):
    # f_lambda's lift is the group automorphism f_lambda
    p = rng.uniform(-4, 4, (20, 3))
    assert np.allclose(Lift(planar_f_lambda(2.0))(p), f_lambda(2.0, p), atol=1e-7)


def test_rescaled_lift(rng):
    lift = Lift(cube_root_shear_map())
    g = lambda y: np.where(np.abs(y) <= 1, y, np.cbrt(y))  # noqa: E731
    for a in (0.5, 3.0):
        p = rng.uniform(-4, 4, (10, 3))
        got = dilate(a, lift(dilate(1 / a, p)))
        x, y, t = p.T
        want = np.stack([x + a * g(y / a), y, t + a * a * (cube_root_shear_h0(y / a) + 1.0)], axis=-1)
        assert np.max(np.abs(got - want)) <= 1e-8 * (1 + np.abs(want).max())


def test_lift_vertical_shift_uniqueness(rng):
    lift = Lift(cube_root_shear_map())
    z = rng.uniform(-3, 3, (5, 2))
    t = rng.uniform(-3, 3, 5)
    a = lift(np.column_stack([z, t]))
    b = lift(np.column_stack([z, t + 1.0]))
    assert np.allclose(b[:, 2] - a[:, 2], 1.0, atol=1e-12)


def test_lift_cache_concurrent():
    lift = Lift(cube_root_shear_map())
    z = np.array([[0.5, 2.0], [1.0, -3.0], [0.0, 0.7]])
    expected = np.array([lift_h0(lift.f, p) for p in z])
    results = []

    def worker():
        results.append(lift.h0(z))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert all(np.array_equal(r, expected) for r in results)


def test_planar_map_selectors(tmp_path):
    assert planar_map("id").name == "id"
    assert planar_map("f_lambda:2").det == 1.0
    assert planar_map("paper_example").name == "cube_root_shear"
    xs = np.linspace(-2, 2, 9)
    rows = [(x, y, 2 * x, y / 2) for x in xs for y in xs]
    path = tmp_path / "grid.txt"
    np.savetxt(path, rows)
    f = planar_map(f"@{path}")
    assert f.det == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(f(np.array([[0.5, -1.0]])), [[1.0, -0.5]])
    with pytest.raises(ValueError):
        planar_map("nonesuch")
    with pytest.raises(ValueError):
        planar_from_grid(_write(tmp_path / "bad.txt", [[0, 0, 0]]))


def _write(path, rows):
    np.savetxt(path, rows)
    return path


def test_projection():
    assert projection([1.0, 2.0, 3.0]) == 1 + 2j
