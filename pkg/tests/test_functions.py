import numpy as np
import pytest

from ssep_hydro.functions import CatalogError, Profile, constant, make_profile


def test_constant_profile_broadcasts():
    f = constant(0.3)
    u = np.random.default_rng(0).random((5, 7, 2))
    np.testing.assert_array_equal(f(u), np.full((5, 7), 0.3))


def test_catalog_values():
    cos = make_profile({"kind": "cosine", "base": 0.5, "amp": 0.25, "axis": 0})
    assert cos(np.array([0.0, 0.7])) == pytest.approx(0.75)
    assert cos(np.array([1.0, 0.2])) == pytest.approx(0.25)
    sp = make_profile({"kind": "sine_product", "base": 0.5, "amp": 0.25})
    assert sp(np.array([0.5, 0.5])) == pytest.approx(0.75)
    assert sp(np.array([0.0, 0.5])) == pytest.approx(0.5)
    aff = make_profile({"kind": "affine", "base": 0.3, "slope": [0.2, 0.1]})
    assert aff(np.array([1.0, 1.0])) == pytest.approx(0.6)


def test_describe_roundtrip():
    desc = {"kind": "cosine", "base": 0.4, "amp": 0.1, "axis": 1, "freq": 2.0}
    p = make_profile(desc)
    assert make_profile(p.describe()) == p
    assert make_profile(p) is p


def test_extrema_and_sup_norm():
    p = make_profile({"kind": "cosine", "base": 0.5, "amp": -0.25})
    assert p.extrema(2) == pytest.approx((0.25, 0.75))
    assert p.sup_norm(2) == pytest.approx(0.75)


def test_unknown_kind_rejected():
    with pytest.raises(CatalogError):
        make_profile({"kind": "spline"})
    with pytest.raises(CatalogError):
        make_profile({"kind": "constant"})
    assert isinstance(constant(0.1), Profile)
