"""Dense vector/matrix helpers: p-norms, the matrix infinity norm, PCA.

Vectors and matrices are plain float64 numpy arrays. Every entry point
rejects non-finite input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
MAX_SWEEPS = 100


class RankDeficientError(ValueError):
    """Raised when fewer than ``k`` covariance eigenvalues are numerically nonzero.

    ``valid`` holds the usable leading components, ``computed`` the full
    requested decomposition (trailing eigenvalues ~0, components arbitrary).
    """

    def __init__(self, message, rank, valid, computed):
        super().__init__(message)
        self.rank = rank
        self.valid = valid
        self.computed = computed


class ParallelVectorsError(ValueError):
    pass


@dataclass(frozen=True)
class PCAResult:
    mean: np.ndarray
    components: np.ndarray  # (k, d), unit rows
    eigenvalues: np.ndarray  # (k,), non-increasing

    def __len__(self):
        return len(self.eigenvalues)

    def head(self, k):
        return PCAResult(self.mean, self.components[:k], self.eigenvalues[:k])


def _as_finite(a, name="input"):
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def p_norm(v, p=2.0):
    """(sum |v_i|^p)^(1/p); ``p=np.inf`` gives the max absolute entry."""
    v = _as_finite(v, "vector").ravel()
    if v.size == 0:
        raise ValueError("p_norm of an empty vector")
    if p == np.inf:
        return float(np.max(np.abs(v)))
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(v)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # scaling keeps a**p from overflowing for large p
    return float(scale * np.sum((a / scale) ** p) ** (1.0 / p))


def inf_norm(m):
    """Maximum absolute row sum."""
    m = _as_finite(m, "matrix")
    if m.ndim != 2 or m.size == 0:
        raise ValueError("inf_norm needs a non-empty 2-D matrix")
    return float(np.max(np.sum(np.abs(m), axis=1)))


def _round_robin(n):
    """Yield n-1 rounds of n/2 disjoint (p, q) index pairs covering all pairs once."""
    order = np.arange(n)
    half = n // 2
    for _ in range(n - 1):
        p, q = order[:half], order[::-1][:half]
        yield np.minimum(p, q), np.maximum(p, q)
        order = np.concatenate(([order[0]], np.roll(order[1:], 1)))


def jacobi_eigh(a, tol=JACOBI_TOL, max_sweeps=MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations within a round act on disjoint index pairs, so each round is
    applied as one vectorized update. Iterates until every off-diagonal entry
    is at most ``tol * trace`` (or ``tol`` times the largest diagonal magnitude
    for indefinite input). Returns eigenvalues in descending order and the
    matching eigenvectors as columns.
    """
    a = _as_finite(a, "matrix")
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("jacobi_eigh needs a square matrix")
    a = 0.5 * (a + a.T)
    pad = n % 2
    if pad:
        a = np.pad(a, ((0, 1), (0, 1)))
    m = a.shape[0]
    v = np.eye(m)
    scale = max(abs(np.trace(a)), np.max(np.abs(np.diag(a))) if m else 0.0)
    thresh = tol * scale

    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if m < 2 or off.max() <= thresh:
            break
        for p, q in _round_robin(m):
            apq = a[p, q]
            rotate = np.abs(apq) > thresh
            if not rotate.any():
                continue
            p, q, apq = p[rotate], q[rotate], apq[rotate]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq

    if pad:
        a, v = a[:n, :n], v[:n, :n]
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def _fix_signs(components):
    out = components.copy()
    for row in out:
        big = np.flatnonzero(np.abs(row) > 1e-12 * np.abs(row).max())
        if big.size and row[big[0]] < 0:
            row *= -1.0
    return out


def principal_components(samples, k):
    """Top-k principal components of the rows of ``samples``.

    Covariance uses the N-1 divisor. When N < d the decomposition runs on the
    N x N Gram matrix and is mapped back to input space.

    Raises RankDeficientError if fewer than k eigenvalues exceed
    ``JACOBI_TOL * trace``.
    """
    x = _as_finite(samples, "samples")
    if x.ndim != 2:
        raise ValueError("samples must be an (N, d) matrix")
    n, d = x.shape
    if n < 2:
        raise ValueError("principal_components needs at least 2 samples")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} outside [1, {min(n, d)}]")

    mean = x.mean(axis=0)
    xc = x - mean
    if n < d:
        w, u = jacobi_eigh(xc @ xc.T / (n - 1))
        w, u = w[:k], u[:, :k]
        comps = xc.T @ u
        norms = np.linalg.norm(comps, axis=0)
        comps = comps / np.where(norms > 0, norms, 1.0)
        comps = comps.T
    else:
        w, vecs = jacobi_eigh(xc.T @ xc / (n - 1))
        w, comps = w[:k], vecs[:, :k].T
    w = np.maximum(w, 0.0)

    trace = float(np.sum(xc * xc) / (n - 1))
    rank = int(np.sum(w > JACOBI_TOL * trace)) if trace > 0 else 0
    if rank < k and n < d:
        # Gram route leaves null directions undefined; complete them orthonormally
        basis = comps[:rank]
        extra = []
        rng = np.random.default_rng(0)
        while len(extra) < k - rank:
            cand = rng.standard_normal(d)
            for b in list(basis) + extra:
                cand -= (cand @ b) * b
            nrm = np.linalg.norm(cand)
            if nrm > 1e-8:
                extra.append(cand / nrm)
        comps = np.vstack([basis] + [np.array(extra)])

    result = PCAResult(mean, _fix_signs(comps), w)
    if rank < k:
        raise RankDeficientError(
            f"covariance has numerical rank {rank} < requested k={k}",
            rank=rank,
            valid=result.head(rank),
            computed=result,
        )
    return result


def orthogonalize(v, u):
    """Remove from ``v`` its component along ``u``."""
    v = _as_finite(v, "v")
    u = _as_finite(u, "u")
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise ValueError("cannot orthogonalize against a zero vector")
    uh = u / nu
    out = v - (v @ uh) * uh
    if np.linalg.norm(out) <= 1e-12 * max(np.linalg.norm(v), np.finfo(float).tiny):
        raise ParallelVectorsError("v is parallel to u; orthogonal part vanishes")
    return out
