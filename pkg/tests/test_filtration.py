from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topoprobe.errors import CapacityError, ParameterError
from topoprobe.filtration import (
    RipsFiltration,
    build_distance_matrix,
    complete_complex_size,
    covering_radius,
    enclosing_radius,
    export_filtration,
    landmark_subsample,
    read_filtration_text,
    rips_filtration,
)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def equilateral(s=2.0):
    return np.array([[0.0, 0.0], [s, 0.0], [s / 2, s * sqrt(3) / 2]])


def test_distance_matrix_examples():
    dm = build_distance_matrix(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert dm[0, 1] == dm[1, 0] == 5.0
    assert build_distance_matrix(np.array([[1.0, 2.0]])).shape == (1, 1)
    dup = build_distance_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert dup[0, 1] == 0.0


def test_distance_matrix_properties():
    pts = np.random.default_rng(0).normal(size=(30, 4))
    dm = build_distance_matrix(pts)
    assert np.abs(dm - dm.T).max() <= 1e-12
    assert np.all(np.diag(dm) == 0) and np.all(dm >= 0)


def test_equilateral_triangle():
    # side 2 keeps all three pairwise distances bit-identical
    filt = rips_filtration(build_distance_matrix(equilateral()), 1, 2.5)
    dims = filt.dims.tolist()
    assert dims == [0, 0, 0, 1, 1, 1, 2]
    np.testing.assert_allclose(filt.diameters, [0, 0, 0, 2, 2, 2, 2])


def test_square_threshold_excludes_diagonals():
    filt = rips_filtration(build_distance_matrix(SQUARE), 1, 1.2)
    assert filt.count(0) == 4 and filt.count(1) == 4 and filt.count(2) == 0
    assert np.all(filt.diameters[filt.dims == 1] == 1.0)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_complete_complex_count(n):
    pts = np.random.default_rng(n).normal(size=(n, 3))
    filt = rips_filtration(build_distance_matrix(pts), 1, np.inf)
    assert len(filt) == n + comb(n, 2) + comb(n, 3) == complete_complex_size(n, 1)
    filt2 = rips_filtration(build_distance_matrix(pts), 2, np.inf)
    assert len(filt2) == complete_complex_size(n, 2)


def test_sort_order_and_face_closure():
    pts = np.random.default_rng(3).normal(size=(12, 3))
    filt = rips_filtration(build_distance_matrix(pts), 2, 1.8)
    filt.validate()
    assert np.all(np.diff(filt.diameters) >= 0)
    dm = build_distance_matrix(pts)
    for s in filt.simplices:
        sub = dm[np.ix_(s.vertices, s.vertices)]
        assert s.diameter == sub.max()
        assert list(s.vertices) == sorted(set(s.vertices))


def test_ties_broken_by_dimension_then_vertices():
    filt = rips_filtration(build_distance_matrix(SQUARE), 1, 2.0)
    simplices = filt.simplices
    at_one = [s.vertices for s in simplices if s.diameter == 1.0]
    assert at_one == [(0, 1), (0, 3), (1, 2), (2, 3)]
    at_diag = [s.vertices for s in simplices if s.diameter > 1.0]
    assert at_diag == [(0, 2), (1, 3), (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]


def test_default_threshold_is_enclosing_radius():
    pts = np.random.default_rng(5).normal(size=(15, 2))
    dm = build_distance_matrix(pts)
    assert rips_filtration(dm).threshold == enclosing_radius(dm) == dm.max(axis=1).min()


def test_bad_arguments():
    dm = build_distance_matrix(SQUARE)
    with pytest.raises(ParameterError):
        rips_filtration(dm, -1)
    with pytest.raises(ParameterError):
        rips_filtration(dm, 1, 0.0)
    with pytest.raises(ParameterError):
        rips_filtration(np.ones((2, 3)))


def test_capacity_guard_names_cap():
    pts = np.random.default_rng(0).normal(size=(20, 3))
    with pytest.raises(CapacityError) as err:
        rips_filtration(build_distance_matrix(pts), 1, np.inf, max_simplices=100)
    assert err.value.cap == 100 and "100" in str(err.value)


def test_landmarks_collinear_trace():
    line = np.arange(11, dtype=float)[:, None]
    _, idx = landmark_subsample(line, 3, start=0)
    assert idx.tolist() == [0, 10, 5]


def test_landmarks_edge_cases():
    pts = np.random.default_rng(1).normal(size=(25, 3))
    sub, idx = landmark_subsample(pts, 25, seed=4)
    assert sorted(idx.tolist()) == list(range(25))
    sub, idx = landmark_subsample(pts, 1, seed=4)
    assert idx.shape == (1,) and np.array_equal(sub[0], pts[idx[0]])
    again = landmark_subsample(pts, 1, seed=4)[1]
    assert again.tolist() == idx.tolist()
    with pytest.raises(ParameterError):
        landmark_subsample(pts, 26)


def test_covering_radius_shrinks_with_k():
    pts = np.random.default_rng(2).uniform(size=(400, 2))
    radii = [covering_radius(pts, landmark_subsample(pts, k, start=0)[0]) for k in (1, 5, 20, 80, 400)]
    assert all(a >= b for a, b in zip(radii, radii[1:]))
    assert radii[-1] == 0.0


def test_export_roundtrip(tmp_path):
    filt = rips_filtration(build_distance_matrix(equilateral()), 1, 3.0)
    text = export_filtration(filt, tmp_path / "f.txt")
    assert text.splitlines()[0] == "0; 0; 0"
    assert text.splitlines()[-1] == "2; 0,1,2; 2"
    parsed = read_filtration_text((tmp_path / "f.txt").read_text())
    assert parsed == filt.simplices


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 9), st.floats(0.3, 3.0))
def test_face_closure_property(seed, n, thr):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    filt = rips_filtration(build_distance_matrix(pts), 1, thr)
    filt.validate()
    present = {s.vertices: s.diameter for s in filt.simplices}
    for verts, diam in present.items():
        for drop in range(len(verts)):
            face = verts[:drop] + verts[drop + 1:]
            if face:
                assert present[face] <= diam
