import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topoprobe.analysis import (
    ClusterAssignment,
    DbscanParams,
    dbscan,
    default_eps,
    knn_distances,
    pca_fit,
    pca_project,
    project_clusters_to_data,
)
from topoprobe.errors import ParameterError, ShapeError


def two_blobs(n=50, seed=0):
    gen = np.random.default_rng(seed)
    return np.vstack([gen.normal(0, 0.1, (n, 2)), gen.normal(10, 0.1, (n, 2))])


# ------------------------------------------------------------------ DBSCAN

def test_two_blobs():
    res = dbscan(two_blobs(), DbscanParams(0.5, 5))
    assert res.k == 2 and res.n_noise == 0 and res.sizes == [50, 50]
    assert set(res.labels[:50]) == {0} and set(res.labels[50:]) == {1}


def test_all_noise_when_sparse():
    pts = np.arange(10, dtype=float)[:, None] * 10
    res = dbscan(pts, DbscanParams(1.0, 2))
    assert res.k == 0 and res.n_noise == 10 and res.sizes == []


def test_grid_forms_one_cluster():
    g = np.stack(np.meshgrid(np.arange(10.0), np.arange(10.0)), -1).reshape(-1, 2)
    res = dbscan(g, DbscanParams(1.01, 4))
    assert res.k == 1 and res.n_noise == 0


def test_border_point_is_assigned():
    # core points at 0, 0.1, 0.2; 0.9 is within eps of 0.2 only
    pts = np.array([[0.0], [0.1], [0.2], [0.9]])
    res = dbscan(pts, DbscanParams(0.75, 3))
    assert res.labels.tolist() == [0, 0, 0, 0]


def test_label_permutation_on_shuffled_input():
    pts = two_blobs(seed=3)
    base = dbscan(pts, DbscanParams(0.5, 5)).labels
    perm = np.random.default_rng(1).permutation(len(pts))
    shuffled = dbscan(pts[perm], DbscanParams(0.5, 5)).labels
    mapping = dict(zip(base[perm].tolist(), shuffled.tolist()))
    assert len(set(mapping.values())) == len(mapping)
    assert np.array_equal(np.vectorize(mapping.get)(base[perm]), shuffled)


def test_empty_and_params():
    assert dbscan(np.empty((0, 3)), DbscanParams(1.0)).k == 0
    with pytest.raises(ParameterError):
        DbscanParams(0.0)
    with pytest.raises(ParameterError):
        DbscanParams(1.0, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 120), st.floats(0.05, 2.0), st.integers(1, 8))
def test_partition_law(seed, n, eps, min_pts):
    pts = np.random.default_rng(seed).normal(size=(n, 3))
    res = dbscan(pts, DbscanParams(eps, min_pts))
    assert sum(res.sizes) + res.n_noise == n
    assert all(s >= 1 for s in res.sizes)
    idx = project_clusters_to_data(res, pts)
    union = np.concatenate(idx + [np.flatnonzero(res.labels == -1)])
    assert sorted(union.tolist()) == list(range(n))


def test_knn_and_default_eps():
    line = np.arange(20, dtype=float)[:, None]
    np.testing.assert_allclose(knn_distances(line, 1), 1.0)
    assert default_eps(line, min_pts=2) == 1.0
    with pytest.raises(ParameterError):
        knn_distances(line[:3], 3)


def test_cluster_csv():
    text = ClusterAssignment([0, -1, 1]).to_csv()
    assert text == "index,label\n0,0\n1,-1\n2,1\n"


# -------------------------------------------------------------- projection

def test_projection_examples():
    assignment = ClusterAssignment([1, 0, -1, 1, 0])
    original = np.arange(10, dtype=float).reshape(5, 2)
    idx = project_clusters_to_data(assignment, original)
    assert [i.tolist() for i in idx] == [[1, 4], [0, 3]]
    np.testing.assert_array_equal(original[idx[1]], [[0, 1], [6, 7]])
    with pytest.raises(ShapeError):
        project_clusters_to_data(assignment, original[:4])


# --------------------------------------------------------------------- PCA

def test_collinear_points():
    t = np.linspace(-1, 1, 11)
    pts = np.stack([t, 2 * t, -2 * t], 1)
    model = pca_fit(pts, 1)
    np.testing.assert_allclose(np.abs(model.components[0]), np.array([1, 2, 2]) / 3, atol=1e-12)
    proj = pca_project(model, pts)
    np.testing.assert_allclose(np.abs(proj[:, 0]), 3 * np.abs(t), atol=1e-12)
    full = pca_fit(pts, 3)
    np.testing.assert_allclose(full.explained_variance[1:], 0, atol=1e-12)


def test_isotropic_variance():
    pts = np.random.default_rng(0).normal(size=(10_000, 4))
    model = pca_fit(pts, 4)
    assert np.all(np.abs(model.explained_variance - 1) < 0.2)


def test_full_rank_projection_is_lossless():
    pts = np.random.default_rng(1).normal(size=(60, 5))
    model = pca_fit(pts, 5)
    proj = pca_project(model, pts)
    np.testing.assert_allclose(proj @ model.components + model.mean, pts, atol=1e-10)


def test_projection_properties():
    gen = np.random.default_rng(2)
    pts = gen.normal(size=(200, 6)) @ gen.normal(size=(6, 6))
    model = pca_fit(pts, 3)
    proj = pca_project(model, pts)
    np.testing.assert_allclose(proj.var(axis=0, ddof=1), model.explained_variance, rtol=1e-9)
    np.testing.assert_allclose(pca_project(model, pts.mean(axis=0, keepdims=True)), 0, atol=1e-10)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(3), atol=1e-12)
    assert np.all(np.diff(model.explained_variance) <= 0)
    a, b = pts[:100], pts[100:]
    d_in = np.linalg.norm(a - b, axis=1)
    d_out = np.linalg.norm(proj[:100] - proj[100:], axis=1)
    assert np.all(d_out <= d_in + 1e-9)


def test_sign_convention_is_stable():
    pts = np.random.default_rng(4).normal(size=(50, 3))
    a = pca_fit(pts, 2).components
    b = pca_fit(pts[::-1], 2).components
    np.testing.assert_allclose(a, b, atol=1e-10)
    for row in a:
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_errors():
    pts = np.zeros((5, 3))
    with pytest.raises(ParameterError):
        pca_fit(pts, 4)
    with pytest.raises(ParameterError):
        pca_fit(pts[:1], 1)
    with pytest.raises(ShapeError):
        pca_project(pca_fit(pts + np.arange(15).reshape(5, 3) ** 2, 2), np.zeros((2, 4)))
