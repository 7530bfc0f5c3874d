import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from geninterval.linalg import (
    ParallelVectorsError,
    RankDeficientError,
    inf_norm,
    jacobi_eigh,
    orthogonalize,
    p_norm,
    principal_components,
)


def test_p_norm_examples():
    assert p_norm([3, 4], 2) == 5.0
    assert p_norm([1, -7, 2], np.inf) == 7.0
    assert p_norm([1, 1, 1], 1) == 3.0


@pytest.mark.parametrize("v,p", [([], 2), ([1.0], 0.5), ([np.nan], 2)])
def test_p_norm_errors(v, p):
    with pytest.raises(ValueError):
        p_norm(v, p)


def test_p_norm_large_p_approaches_max():
    rng = np.random.default_rng(3)
    for _ in range(200):
        v = rng.standard_normal(rng.integers(1, 30))
        assert p_norm(v, 64) == pytest.approx(p_norm(v, np.inf), rel=0.05)


def test_inf_norm_examples():
    assert inf_norm(np.eye(3)) == 1.0
    assert inf_norm([[1, -2], [3, 4]]) == 7.0
    assert inf_norm(np.zeros((2, 5))) == 0.0
    with pytest.raises(ValueError):
        inf_norm(np.zeros((0, 3)))


def test_inf_norm_submultiplicative():
    rng = np.random.default_rng(0)
    ulp = np.finfo(float).eps
    for _ in range(1000):
        m, n = rng.integers(1, 12, size=2)
        a = rng.standard_normal((m, n)) * rng.uniform(0.1, 10)
        x = rng.standard_normal(n)
        lhs = p_norm(a @ x, np.inf)
        rhs = inf_norm(a) * p_norm(x, np.inf)
        assert lhs <= rhs * (1 + 4 * n * ulp)


def test_jacobi_matches_reference():
    rng = np.random.default_rng(1)
    for n in (1, 2, 5, 8, 17):
        a = rng.standard_normal((n, n))
        a = a + a.T
        w, v = jacobi_eigh(a)
        np.testing.assert_allclose(w, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-10)
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)
        np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)


def test_pca_collinear():
    pts = np.array([[-1, -1], [1, 1], [2, 2], [-2, -2]], dtype=float)
    res = principal_components(pts, 1)
    np.testing.assert_allclose(res.components[0], np.ones(2) / np.sqrt(2), atol=1e-12)
    with pytest.raises(RankDeficientError) as err:
        principal_components(pts, 2)
    assert err.value.rank == 1
    assert len(err.value.valid) == 1
    assert err.value.computed.eigenvalues[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_isotropic_against_direct_covariance():
    x = np.random.default_rng(7).standard_normal((500, 2))
    res = principal_components(x, 2)
    # oracle: covariance eigenvalues computed independently
    ref = np.sort(np.linalg.eigvalsh(np.cov(x.T, ddof=1)))[::-1]
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-10)
    assert 0.7 <= res.eigenvalues[0] / res.eigenvalues[1] <= 1.5


def test_pca_identical_samples():
    with pytest.raises(RankDeficientError) as err:
        principal_components(np.ones((5, 3)), 1)
    assert err.value.rank == 0


@pytest.mark.parametrize("shape,k", [((1, 3), 1), ((4, 3), 0), ((4, 3), 4)])
def test_pca_argument_errors(shape, k):
    with pytest.raises(ValueError):
        principal_components(np.random.default_rng(0).standard_normal(shape), k)


@pytest.mark.parametrize("n,d", [(40, 6), (8, 30)])
def test_pca_invariants_and_reconstruction(n, d):
    x = np.random.default_rng(n * d).standard_normal((n, d)) * np.linspace(3, 0.5, d)
    k = min(n - 1, d)
    res = principal_components(x, k)
    c = res.components
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), 1.0, atol=1e-9)
    off = c @ c.T - np.eye(k)
    assert np.abs(off).max() < 1e-7
    assert np.all(np.diff(res.eigenvalues) <= 1e-12)
    for row in c:
        first = row[np.abs(row) > 1e-12][0]
        assert first > 0
    recon = (x - res.mean) @ c.T @ c + res.mean
    err = np.linalg.norm(recon - x, axis=1) / np.linalg.norm(x, axis=1)
    assert err.max() < 1e-6


def test_pca_gram_route_matches_covariance_route():
    x = np.random.default_rng(5).standard_normal((12, 20))
    a = principal_components(x, 5)
    b = principal_components(np.vstack([x, x]), 5)  # N > d: covariance route
    # duplicated rows keep the principal directions
    np.testing.assert_allclose(np.abs(a.components @ b.components.T), np.eye(5), atol=1e-8)


def test_orthogonalize():
    np.testing.assert_allclose(orthogonalize([1, 1], [1, 0]), [0, 1])
    np.testing.assert_array_equal(orthogonalize([0, 3], [2, 0]), [0, 3])
    with pytest.raises(ParallelVectorsError):
        orthogonalize([2, 0], [1, 0])
    with pytest.raises(ValueError):
        orthogonalize([1, 0], [0, 0])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, 6, elements=st.floats(-1e3, 1e3)))
def test_orthogonalize_property(v, u):
    if np.linalg.norm(u) < 1e-6:
        return
    try:
        w = orthogonalize(v, u)
    except ParallelVectorsError:
        return
    assert abs(w @ u) <= 1e-9 * np.linalg.norm(v) * np.linalg.norm(u) + 1e-300
