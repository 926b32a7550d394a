import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcnfchaos.cone import (
    Cone, ConeError, MatrixFamily, find_cone, image_interval, lyapunov_lower_bound,
    matrix_family, min_gain, minimal_invariant_interval, verify_cone,
)

REFERENCE_CONE = (0.8062, 2.0227)


@pytest.fixture(scope="module")
def family():
    from conftest import CONVERTER_BCNF

    return matrix_family(CONVERTER_BCNF, 6, 8, 2, 3)


def test_family_matches_direct_products(converter_bcnf, family):
    AL, AR = converter_bcnf.A_L, converter_bcnf.A_R
    assert len(family) == 6
    for p, q, M in family:
        want = np.eye(2)
        for _ in range(p):
            want = AL @ want
        for _ in range(q):
            want = AR @ want
        assert np.allclose(M, want, rtol=1e-12)


def test_cone_validation():
    with pytest.raises(ConeError):
        Cone(0.0, math.pi)
    with pytest.raises(ConeError):
        Cone(1.0, 0.5)
    c = Cone(0.5, 1.0)
    assert c.contains([math.cos(0.7), math.sin(0.7)])
    assert c.contains([-math.cos(0.7), -math.sin(0.7)])
    assert not c.contains([1.0, 0.0])


def test_min_gain_against_dense_grid(rng):
    for _ in range(200):
        M = rng.normal(size=(2, 2))
        t0 = rng.uniform(0, math.pi)
        t1 = t0 + rng.uniform(0, 3)
        g, _ = min_gain(M, t0, t1)
        th = np.linspace(t0, t1, 20001)
        grid = np.linalg.norm(M @ np.vstack([np.cos(th), np.sin(th)]), axis=0).min()
        assert g <= grid + 1e-12
        assert g >= grid - 1e-6


def test_image_interval_against_samples(family, rng):
    cone = Cone(0.7, 2.1)
    for _, _, M in family:
        lo, hi = image_interval(M, cone)
        th = np.linspace(cone.theta0, cone.theta1, 2001)
        ang = np.arctan2(*(M @ np.vstack([np.cos(th), np.sin(th)]))[::-1])
        rel = lo + (ang - lo) % math.pi
        assert rel.min() >= lo - 1e-9 and rel.max() <= hi + 1e-9


def test_minimal_interval_converter(family):
    lo, hi = minimal_invariant_interval(family)
    assert lo == pytest.approx(REFERENCE_CONE[0], abs=5e-4)
    assert hi == pytest.approx(REFERENCE_CONE[1], abs=5e-4)


def test_find_cone_converter(family):
    cone, cert = find_cone(family)
    assert cert.certified and cert.c > 1.01
    assert abs(cone.theta0 - REFERENCE_CONE[0]) < 0.05
    assert abs(cone.theta1 - REFERENCE_CONE[1]) < 0.05


def test_certified_cone_property(family, rng):
    cone, cert = find_cone(family)
    for v in cone.sample(1000, rng):
        for _, _, M in family:
            w = M @ v
            assert cone.contains(w)
            assert np.linalg.norm(w) >= cert.c * np.linalg.norm(v) - 1e-9


def test_verify_rejects_width_zero_and_bad_det(family):
    cert = verify_cone(family, Cone(1.0, 1.0))
    assert not cert.contracting_invariant
    with pytest.raises(ConeError):
        verify_cone(MatrixFamily.of(np.diag([1.0, -1.0])), Cone(0.1, 0.2))
    with pytest.raises(ConeError):
        verify_cone(MatrixFamily([]), Cone(0.1, 0.2))


def test_rotation_has_no_cone():
    r = np.array([[math.cos(0.3), -math.sin(0.3)], [math.sin(0.3), math.cos(0.3)]])
    assert find_cone(MatrixFamily.of(2 * r)) is None


def test_diagonal_oracle():
    # diag(3, 1/2): the cone |theta| <= 0.5 maps into itself and expands by
    # at least the gain at theta = 0.5
    M = np.diag([3.0, 0.5])
    cert = verify_cone(MatrixFamily.of(M), Cone(-0.5, 0.5))
    assert cert.certified
    want = math.hypot(3 * math.cos(0.5), 0.5 * math.sin(0.5))
    assert cert.c == pytest.approx(want)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.1, 10.0))
def test_scaling_invariance(s):
    from conftest import CONVERTER_BCNF

    fam = matrix_family(CONVERTER_BCNF, 6, 8, 2, 3)
    cone = Cone(0.8, 2.03)
    a = verify_cone(fam, cone)
    b = verify_cone(fam.scaled(s), cone)
    assert a.contracting_invariant == b.contracting_invariant
    assert b.c == pytest.approx(s * a.c, rel=1e-10)


def test_lyapunov_bound():
    b = lyapunov_lower_bound(1.2, 8, 3)
    assert b.bcnf == pytest.approx(math.log(1.2) / 11)
    assert b.robust == pytest.approx(math.log(1.1) / 11)
    with pytest.raises(ConeError):
        lyapunov_lower_bound(1.0, 8, 3)


def test_matrix_family_bounds():
    from conftest import CONVERTER_BCNF

    with pytest.raises(ConeError):
        matrix_family(CONVERTER_BCNF, 3, 2, 1, 1)
