import numpy as np
import pytest

from calfib import fibration as fib
from calfib.core import complex_structure, to_real
from calfib.models import make_eguchi_hanson, make_flat, make_kn, make_fubini_study

C2, C3, EH = make_flat(2), make_flat(3), make_eguchi_hanson(1.0)


def test_alpha_examples():
    assert np.allclose(fib.alpha(C2, to_real([1, 1])), [0, 1])
    assert np.allclose(fib.alpha(C2, to_real([0, 0])), [0, 0])
    # mu~ = |z1|^2 - |z2|^2, xi = Im(i z1 z2)
    assert np.allclose(fib.alpha(C2, to_real([2, 1j])), [3, 0])
    assert np.allclose(fib.alpha(C2, to_real([2, 1])), [3, 2])


def test_classify():
    assert fib.classify(C2, to_real([1, 1])) == (True, 0)
    reg, d = fib.classify(C2, np.zeros(4))
    assert not reg and d >= 1
    assert not fib.classify(C3, to_real([0, 0, 1]))[0]


@pytest.mark.parametrize("model", [C2, C3, EH], ids=["c2", "c3", "eh"])
def test_fibers_are_special_lagrangian(model, rng):
    for _ in range(10):
        c = rng.normal(size=model.n)
        fp = fib.sample_fiber(model, c, 1, rng)[0]
        assert np.max(np.abs(fp.alpha - c)) <= 1e-10
        assert fp.classification == "regular"
        assert len(fp.frame) == model.n
        lag, special = fib.slag_residual(model, fp)
        assert lag <= 1e-7 and special <= 1e-7


def test_kn_fibers_are_special_lagrangian(rng):
    kn = make_kn(make_fubini_study(1))
    c = np.array([0.3, 0.2])
    for fp in fib.sample_fiber(kn, c, 5, rng):
        assert max(fib.slag_residual(kn, fp)) <= 1e-7


def test_slag_residual_detects_non_fiber_frame(rng):
    fp = fib.sample_fiber(C2, [0.5, 0.5], 1, rng)[0]
    # a complex line is not Lagrangian
    u = fp.frame[0]
    lag, _ = fib.frame_slag_residual(C2, fp.x, [u, complex_structure(2) @ u])
    assert lag > 0.1


def test_slag_residual_needs_frame():
    with pytest.raises(ValueError):
        fib.slag_residual(C2, fib.fiber_point(C2, np.zeros(4)))


def test_bad_level_shape():
    with pytest.raises(ValueError):
        fib.project_to_fiber(C2, [1.0, 2.0, 3.0], to_real([1, 1]))


def test_cylinder_structure(rng):
    fp = fib.sample_fiber(C2, [0.4, -0.3], 1, rng)[0]
    tr = fib.trace_eta_flow(C2, fp.x, np.linspace(-5, 5, 21))
    assert tr.drift <= 1e-6
    assert tr.rate_defect <= 1e-6
    assert fib.orbit_trace(C2, fp.x, np.array([1])) <= 1e-6


def test_cone_count_c2_origin():
    res = fib.cone_sheet_count(C2, np.zeros(4))
    assert res.count == 2


def test_cone_count_c3_stratum():
    res = fib.cone_sheet_count(C3, to_real([0, 0, 1]))
    assert res.count == 2


def test_cone_count_rejects_regular_point():
    with pytest.raises(ValueError):
        fib.cone_sheet_count(C2, to_real([1, 1]))


@pytest.mark.parametrize("model", [C2, C3], ids=["c2", "c3"])
def test_singular_image_planes(model, rng):
    planes = fib.singular_image_planes(model)
    assert len(planes) == model.n * (model.n - 1) // 2
    pts = fib.sample_singular_points(model, 1000, rng)
    assert max(fib.plane_distance(planes, fib.alpha(model, x)) for x in pts) <= 1e-12
    # a regular image typically misses every plane
    fp = fib.sample_fiber(model, np.full(model.n, 0.7), 1, rng)[0]
    assert fib.plane_distance(planes, fp.alpha) > 0.1


def test_c2_plane_is_origin():
    (p,) = fib.singular_image_planes(C2)
    assert p.distance([0, 0]) == 0 and p.distance([3, 4]) == pytest.approx(5)


def test_planes_flat_only():
    with pytest.raises(TypeError):
        fib.singular_image_planes(EH)


def test_plane_descriptor_rank():
    with pytest.raises(ValueError):
        fib.PlaneDescriptor(np.zeros((2, 3)), np.zeros(2))


def test_openness(rng):
    fp = fib.sample_fiber(C3, [0.2, 0.3, 0.4], 1, rng)[0]
    assert fib.openness_probe(C3, fp, rng=rng) == 20


def test_orbit_distance():
    p = to_real([1.0, 2.0])
    q = to_real([1j, -2j])
    assert fib.orbit_distance(C2.action, p, q) < 1e-8
    assert fib.orbit_distance(C2.action, p, to_real([2.0, 1.0])) > 0.5
