import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssep_hydro.geometry import (GeometryError, Lattice, MappingParams, boundary_gap,
                                 classify_boundary, coordinate_map, enumerate_sites,
                                 macro_position, neighbors, project_site, project_to_boundary)


@pytest.mark.parametrize("d,n,size", [(2, 4, 9), (3, 3, 8), (2, 2, 1), (1, 5, 4)])
def test_site_counts(d, n, size):
    lat = Lattice(d, n)
    assert lat.size == size
    assert len(enumerate_sites(lat)) == size


def test_degenerate_lattice_single_site():
    lat = Lattice(2, 2)
    assert enumerate_sites(lat) == [(1, 1)]
    assert lat.edges.shape == (0, 2)


def test_lexicographic_order_and_index():
    lat = Lattice(2, 4)
    sites = enumerate_sites(lat)
    assert sites[:4] == [(1, 1), (1, 2), (1, 3), (2, 1)]
    for k, s in enumerate(sites):
        assert lat.index(s) == k
    with pytest.raises(GeometryError):
        lat.index((0, 1))


def test_invalid_lattice():
    with pytest.raises(GeometryError):
        Lattice(0, 4)
    with pytest.raises(GeometryError):
        Lattice(2, 1)


def test_classify_boundary_examples():
    lat = Lattice(2, 4)
    info = classify_boundary(lat, (1, 2))
    assert info.strata == {(0, "+")} and not info.corner
    info = classify_boundary(lat, (1, 1))
    assert info.strata == {(0, "+"), (1, "+")} and info.corner
    assert classify_boundary(lat, (3, 3)).strata == {(0, "-"), (1, "-")}
    assert not classify_boundary(lat, (2, 2)).on_boundary


def test_degenerate_site_touches_both_faces():
    info = classify_boundary(Lattice(1, 2), (1,))
    assert info.strata == {(0, "+"), (0, "-")}


@pytest.mark.parametrize("d,n", [(1, 6), (2, 3), (2, 5), (3, 4), (3, 6)])
def test_boundary_shell_count(d, n):
    lat = Lattice(d, n)
    interior = max(n - 3, 0) ** d
    assert lat.boundary_mask.sum() == (n - 1) ** d - interior


def test_neighbors_examples():
    lat = Lattice(2, 4)
    assert set(neighbors(lat, (2, 2))) == {(1, 2), (3, 2), (2, 1), (2, 3)}
    assert set(neighbors(lat, (1, 1))) == {(2, 1), (1, 2)}
    assert neighbors(Lattice(2, 2), (1, 1)) == []


@pytest.mark.parametrize("d,n", [(1, 5), (2, 4), (3, 3)])
def test_edges_match_neighbors(d, n):
    lat = Lattice(d, n)
    expected = set()
    for k, s in enumerate(enumerate_sites(lat)):
        for y in neighbors(lat, s):
            j = lat.index(y)
            expected.add((min(k, j), max(k, j)))
    assert {tuple(e) for e in lat.edges.tolist()} == expected
    assert len(lat.edges) == d * (n - 2) * (n - 1) ** (d - 1)


def test_projection_examples():
    np.testing.assert_array_equal(project_to_boundary([0.3, 0.5]), [0.0, 0.5])
    np.testing.assert_array_equal(project_to_boundary([0.5, 0.5]), [0.0, 0.5])
    np.testing.assert_array_equal(project_to_boundary([0.9, 0.4]), [1.0, 0.4])
    np.testing.assert_array_equal(project_site(Lattice(2, 4), (1, 2)), [0.0, 0.5])
    np.testing.assert_array_equal(project_site(Lattice(2, 4), (2, 2)), [0.0, 0.5])
    np.testing.assert_array_equal(project_site(Lattice(2, 4), (3, 2)), [1.0, 0.5])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=4))
def test_projection_idempotent_and_nearest(u):
    p = project_to_boundary(u)
    assert np.any((p == 0) | (p == 1))
    np.testing.assert_array_equal(project_to_boundary(p), p)
    u = np.asarray(u)
    best = min(np.min(u), np.min(1 - u))
    assert np.abs(p - u).sum() == pytest.approx(best, abs=1e-12)


@given(st.integers(1, 3), st.integers(2, 9), st.data())
def test_project_site_agrees_with_float_projection(d, n, data):
    site = data.draw(st.lists(st.integers(1, n - 1), min_size=d, max_size=d))
    np.testing.assert_array_equal(project_site(Lattice(d, n), site),
                                  project_to_boundary(np.asarray(site) / n))


def test_mapping_examples():
    np.testing.assert_array_equal(macro_position(4, MappingParams(2.0, 3.0), [1, 2]), [0.25, 0.5])
    table = coordinate_map(100, MappingParams(0.5, 2.0))
    assert table[1] == pytest.approx(0.05, abs=1e-15)
    assert table[100] - table[99] == pytest.approx(0.05, abs=1e-14)
    np.testing.assert_allclose(np.diff(table)[1:-1], (1 - 0.1) / 98, rtol=1e-12)
    assert macro_position(10, MappingParams(0.0, 1.0), [0])[0] == 0.0


def test_mapping_requires_boundary_layer_room():
    with pytest.raises(GeometryError):
        coordinate_map(4, MappingParams(0.5, 1.0))  # gap = 1/2
    with pytest.raises(GeometryError):
        coordinate_map(2, MappingParams(0.0, 10.0))
    with pytest.raises(GeometryError):
        MappingParams(-1.0, 1.0)
    with pytest.raises(GeometryError):
        MappingParams(1.0, 0.0)


def test_mapping_theta_zero_is_identity_on_shell():
    n, params = 10, MappingParams(0.0, 1.0)
    table = coordinate_map(n, params)
    np.testing.assert_allclose(table[[0, 1, n - 1, n]], [0, 0.1, 0.9, 1.0], atol=1e-15)


@settings(max_examples=60)
@given(st.floats(0.0, 0.99), st.floats(0.5, 20.0), st.integers(3, 400))
def test_mapping_monotone_and_telescoping(theta, c, n):
    params = MappingParams(theta, c)
    gap = boundary_gap(n, params)
    if gap >= 0.5:
        with pytest.raises(GeometryError):
            coordinate_map(n, params)
        return
    table = coordinate_map(n, params)
    steps = np.diff(table)
    assert np.all(steps > 0)
    assert steps.sum() == pytest.approx(1.0, abs=1e-12)
    assert steps[0] == pytest.approx(gap, rel=1e-12)
    assert steps[-1] == pytest.approx(gap, rel=1e-9)
    np.testing.assert_allclose(steps[1:-1], steps[1], rtol=1e-9)


def test_interior_gap_scales_like_one_over_n():
    params = MappingParams(0.5, 1.0)
    ratios = [n * np.diff(coordinate_map(n, params))[n // 2] for n in (100, 10_000, 1_000_000)]
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    assert ratios[-1] == pytest.approx(1.0, abs=1e-2)


@given(st.floats(1.0, 5.0), st.integers(2, 50))
def test_mapping_is_x_over_n_for_slow_boundaries(theta, n):
    np.testing.assert_allclose(coordinate_map(n, MappingParams(theta, 1.0)), np.arange(n + 1) / n)


def test_macro_position_rejects_outside_points():
    with pytest.raises(GeometryError):
        macro_position(4, MappingParams(1.0, 1.0), [5, 1])
