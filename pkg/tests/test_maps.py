import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nilmetry.lie_core import bch_product, dilation, dilation_matrix, make_builtin
from nilmetry.maps import (Automorphism, Composite, Custom, Dilation, Identity, LeftTranslation,
                           LSLipschitzFunction, Shear, abs_function, automorphism_validate,
                           cone_rescaled_shear, constant_function, linear_distance_classifier,
                           linear_function, parse_function, parse_map, power_function,
                           qi_constants_bound, quasimap_apply, shear_affine_defect, shear_apply,
                           shear_compose, shear_matrix, zero_function)

coords = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def builtin_family(alg, rng):
    """Random members of the built-in LS-Lipschitz family."""
    dr, d1 = alg.layer_dims[-1], alg.layer_dims[0]
    kind = rng.integers(4)
    if kind == 0:
        return abs_function(alg, rng.normal(size=dr))
    if kind == 1:
        return power_function(alg, rng.uniform(0.1, 0.9), rng.normal(size=dr))
    if kind == 2:
        return linear_function(alg, rng.normal(size=(dr, d1)))
    return constant_function(alg, rng.normal(size=dr))


def test_shear_example(heis):
    assert np.array_equal(shear_apply(heis, abs_function(heis), [3, 4, 7]), [3, 4, 12])
    assert np.array_equal(shear_apply(heis, zero_function(heis), [3, 4, 7]), [3, 4, 7])


def test_shear_dimension_mismatch(heis):
    g = abs_function(make_builtin("quaternion_heisenberg"))
    with pytest.raises(ValueError):
        shear_apply(heis, g, np.zeros(3))


@pytest.mark.parametrize("name", ["heisenberg3", "filiform3", "quaternion_heisenberg"])
def test_shear_group_laws(name, rng):
    alg = make_builtin(name)
    n = rng.uniform(-10, 10, (1000, alg.dim))
    for _ in range(5):
        g1, g2 = builtin_family(alg, rng), builtin_family(alg, rng)
        lhs = shear_apply(alg, g1, shear_apply(alg, g2, n))
        assert np.max(np.abs(lhs - shear_apply(alg, shear_compose(g1, g2), n))) <= 1e-12
        back = shear_apply(alg, -g1, shear_apply(alg, g1, n))
        assert np.max(np.abs(back - n)) <= 1e-12
        assert np.array_equal(Shear(alg, g1).inverse()(Shear(alg, g1)(n)), back)


def test_shear_fixes_lower_layers(rng):
    alg = make_builtin("filiform3")
    n = rng.normal(size=(50, alg.dim))
    out = shear_apply(alg, abs_function(alg), n)
    assert np.array_equal(out[:, :3], n[:, :3])


def test_compose_constants(heis):
    g = abs_function(heis) + power_function(heis, 0.5)
    assert (g.L, g.A) == (1.5, 0.5)
    assert np.array_equal((abs_function(heis) - abs_function(heis))(np.ones((4, 2))), np.zeros((4, 1)))


def test_audit_rejects_false_constants(heis):
    with pytest.raises(ValueError):
        LSLipschitzFunction(lambda x: 3 * np.linalg.norm(x, axis=-1)[..., None], 1.0, 0.0,
                            dims=(2, 1))
    with pytest.raises(ValueError):
        power_function(heis, 1.5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 2, elements=coords), arrays(np.float64, 2, elements=coords),
       st.floats(0.05, 0.95))
def test_power_declared_constants(x, y, alpha):
    g = power_function(make_builtin("heisenberg3"), alpha)
    lhs = np.abs(g(x) - g(y))[0]
    assert lhs <= g.L * np.linalg.norm(x - y) + g.A + 1e-9


def test_automorphism_validation(heis):
    assert automorphism_validate(heis, dilation_matrix(heis, 3.0)).ok
    assert automorphism_validate(heis, np.eye(3)).ok
    rep = automorphism_validate(heis, shear_matrix(heis, [[1.5, -2.0]]))
    assert rep.ok and rep.graded is False
    assert "homomorphism" in automorphism_validate(heis, np.diag([1.0, 1.0, 2.0])).kinds()
    assert "singular" in automorphism_validate(heis, np.diag([1.0, 0.0, 0.0])).kinds()
    with pytest.raises(ValueError):
        Automorphism(heis, np.diag([1.0, 1.0, 2.0]))


def test_automorphism_is_homomorphism(heis, rng):
    m = shear_matrix(heis, [[0.3, 2.0]]) @ dilation_matrix(heis, 2.0)
    aut = Automorphism(heis, m)
    x, y = rng.uniform(-5, 5, (2, 100, 3))
    assert np.allclose(aut(bch_product(heis, x, y)), bch_product(heis, aut(x), aut(y)), atol=1e-10)
    assert np.allclose(aut.inverse()(aut(x)), x, atol=1e-12)


def test_left_translation(heis):
    assert np.array_equal(quasimap_apply(LeftTranslation(heis, np.array([1.0, 0, 0])), [0, 1, 0]),
                          [1, 1, -2])
    assert np.array_equal(LeftTranslation(heis, np.zeros(3))([3, 4, 5]), [3, 4, 5])


def test_composite_cancels(heis, rng):
    g = abs_function(heis)
    n = rng.normal(size=(20, 3))
    comp = Composite((Shear(heis, g), Shear(heis, -g)))
    assert np.max(np.abs(comp(n) - n)) <= 1e-12
    mixed = Shear(heis, g) @ LeftTranslation(heis, np.array([1.0, 2, 3])) @ Dilation(heis, 2.0)
    assert np.allclose(mixed.inverse()(mixed(n)), n, atol=1e-12)
    with pytest.raises(ValueError):
        Composite(())


def test_qi_constants_bound():
    assert qi_constants_bound(1, 0, 1, 2) == (2.0, 2.0)
    assert qi_constants_bound(0, 0, 1, 1) == (1.0, 1.0)
    with pytest.raises(ValueError):
        qi_constants_bound(1, 0, 0.5, 2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(1, 5), st.integers(1, 4),
       st.floats(0, 1))
def test_qi_constants_monotone(L, A, M, r, bump):
    base = qi_constants_bound(L, A, M, r)[1]
    assert qi_constants_bound(L + bump, A, M, r)[1] >= base
    assert qi_constants_bound(L, A + bump, M, r)[1] >= base
    assert qi_constants_bound(L, A, M + bump, r)[1] >= base


def test_affine_defect(heis, rng):
    samples = rng.uniform(-10, 10, (100, 2))
    zero = shear_affine_defect(heis, zero_function(heis), Identity(heis), samples)
    assert np.array_equal(zero, np.zeros((100, 1)))
    lin = [[2.0, -1.0]]
    defect = shear_affine_defect(heis, linear_function(heis, lin),
                                 Automorphism(heis, shear_matrix(heis, lin)), samples)
    assert np.max(np.abs(defect)) <= 1e-12
    d = shear_affine_defect(heis, abs_function(heis), Identity(heis), [[3.0, 4.0]])
    assert d[0, 0] == -5.0


def test_classifier():
    line = make_builtin("abelian(1)")
    radii = [10, 100, 1000, 10_000]
    lin = linear_distance_classifier(linear_function(line, [[2.0]]), radii)
    assert np.all(lin.deviations <= 1e-9 * 10_000) and lin.slope == 0.0
    assert linear_distance_classifier(abs_function(line), radii).slope == pytest.approx(1.0, abs=0.05)
    assert linear_distance_classifier(power_function(line, 0.5), radii).slope == pytest.approx(0.5, abs=0.1)
    with pytest.raises(ValueError):
        linear_distance_classifier(abs_function(line), [1.0])


def test_cone_rescaled_shear(heis, rng):
    g = abs_function(heis)
    assert np.allclose(cone_rescaled_shear(heis, g, 0.1, [3, 4, 0]), [3, 4, 0.5], atol=1e-15)
    n = rng.uniform(-5, 5, (200, 3))
    assert np.array_equal(cone_rescaled_shear(heis, g, 1.0, n), shear_apply(heis, g, n))
    for lam in (0.3, 2.0, 17.0):
        composed = dilation(heis, lam, shear_apply(heis, g, dilation(heis, 1 / lam, n)))
        assert np.allclose(cone_rescaled_shear(heis, g, lam, n), composed, rtol=1e-12, atol=1e-12)
    with pytest.raises(ValueError):
        cone_rescaled_shear(heis, g, 0.0, n)


def test_parse_map(heis, tmp_path):
    m = parse_map(heis, "shear(abs) . ltrans(1,0,0)")
    assert np.array_equal(m(np.array([0.0, 1, 0])), [1, 1, -2 + np.sqrt(2)])
    assert isinstance(parse_map(heis, "dilate(0.5)"), Dilation)
    assert parse_function(heis, "-power:0.5").label == "-power(0.5)"
    path = tmp_path / "aut.txt"
    np.savetxt(path, dilation_matrix(heis, 2.0))
    aut = parse_map(heis, f"aut(@{path})")
    assert np.array_equal(aut([1.0, 1, 1]), [2, 2, 4])
    f = parse_map(heis, "Flambda:2")
    assert isinstance(f, Custom)
    with pytest.raises(ValueError):
        parse_map(heis, "warp(3)")
    with pytest.raises(ValueError):
        parse_map(make_builtin("filiform3"), "Flambda:2")
