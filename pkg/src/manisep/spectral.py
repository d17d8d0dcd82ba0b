"""Smallest eigenpairs of sparse PSD Laplacians, alignment against analytic
eigenfunctions, spectral clustering, and out-of-sample extension.

Eigenvectors are normalized in the empirical L2 sense ((1/n) sum u_i^2 = 1)
so they are directly comparable with unit-norm eigenfunctions under the
sampling measure; eigenvalues are reported raw and on the Dirichlet scale.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import lobpcg
from scipy.spatial import cKDTree

from .graph import INDICATOR, KernelProfile, LaplacianMatrix
from .manifolds import AnalyticEigenfunction, PointCloud, reference_groups, spectrum_values
from .rng import stream

__all__ = [
    "SolverError",
    "EigenSystem",
    "EmbeddingMatrix",
    "AlignmentResult",
    "ClusterResult",
    "smallest_eigenpairs",
    "empirical_error",
    "align_to_groups",
    "align_to_reference",
    "spectral_cluster",
    "extend",
    "embedding_to_csv",
    "eigenvalues_to_csv",
]

DENSE_CUTOFF = 1200
GAP_TOL = 1e-6


class SolverError(RuntimeError):
    """Eigensolver failure; carries whatever partial state was reached."""

    def __init__(self, message, eigenvalues=None, residuals=None, iterations=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.residuals = residuals
        self.iterations = iterations


@dataclass
class EigenSystem:
    """First S eigenpairs, ascending, vectors L2(pi_n)-orthonormal."""

    eigenvalues: np.ndarray
    normalized: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    clusters: list
    iterations: int
    method: str

    @property
    def S(self) -> int:
        return len(self.eigenvalues)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass
class EmbeddingMatrix:
    """n x S representation: eigensystem columns evaluated at the samples."""

    coords: np.ndarray
    source: str
    r: float
    cloud: Optional[PointCloud] = None
    kernel: KernelProfile = INDICATOR
    _tree: object = field(default=None, repr=False, compare=False)

    @property
    def S(self) -> int:
        return self.coords.shape[1]

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.cloud.xs)
        return self._tree


def _eigengap_clusters(values: np.ndarray) -> list:
    clusters = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > GAP_TOL * max(1.0, abs(values[i])):
            clusters.append(slice(start, i))
            start = i
    return clusters


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for s in range(out.shape[1]):
        col = out[:, s]
        lead = np.argmax(np.abs(col))
        if col[lead] < 0:
            out[:, s] = -col
    return out


def smallest_eigenpairs(
    lap: LaplacianMatrix,
    S: int,
    tol: float = 1e-8,
    max_iter: int = 5000,
    seed: int = 0,
    dense_cutoff: int = DENSE_CUTOFF,
) -> EigenSystem:
    """First S eigenpairs of the PSD Laplacian.

    Small problems go through a dense symmetric solve; larger ones use a
    blocked preconditioned iteration (block size max(2S, 8), diagonal
    preconditioner) started from a seeded subspace.  Failure to meet the
    residual tolerance raises SolverError with partial diagnostics.
    """
    n = lap.n
    if not 1 <= S <= n:
        raise SolverError(f"requested {S} eigenpairs from an n={n} matrix")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    L = lap.matrix
    scale = max(1.0, float(L.diagonal().max(initial=0.0)))
    block = max(2 * S, 8)

    if n <= dense_cutoff or 5 * block >= n:
        dense = L.toarray()
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, S - 1])
        iterations = 1
        method = "dense"
    else:
        rng = stream(seed, "eigs")
        X = rng.standard_normal((n, block))
        X, _ = np.linalg.qr(X)
        # Jacobi-style preconditioner, regularized so isolated vertices
        # (zero diagonal) cannot dominate the search directions
        deg = L.diagonal()
        mean_deg = float(deg.mean())
        precond = sp.diags(1.0 / (deg + mean_deg)) if mean_deg > 0 else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vals, vecs = lobpcg(
                L,
                X,
                M=precond,
                largest=False,
                tol=tol * scale,
                maxiter=max_iter,
            )
        order = np.argsort(vals, kind="stable")[:S]
        vals, vecs = vals[order], vecs[:, order]
        iterations = max_iter
        method = "lobpcg"

    vals = np.asarray(vals, dtype=float)
    vecs = np.asarray(vecs, dtype=float)
    res = np.linalg.norm(L @ vecs - vecs * vals, axis=0)
    ok = res <= 10.0 * tol * scale if method == "lobpcg" else np.ones_like(res, dtype=bool)
    if not np.all(ok):
        raise SolverError(
            f"eigensolver did not reach tolerance (worst residual {res.max():.3e})",
            eigenvalues=vals,
            residuals=res,
            iterations=iterations,
        )

    # exact ordering with stable ties
    order = np.argsort(vals, kind="stable")
    vals, vecs, res = vals[order], vecs[:, order], res[order]
    clusters = _eigengap_clusters(vals)
    # orthonormal within numerically degenerate clusters, then scale to pi_n
    for sl in clusters:
        if sl.stop - sl.start > 1:
            q, _ = np.linalg.qr(vecs[:, sl])
            vecs[:, sl] = q
    vecs = _fix_signs(vecs) * np.sqrt(n)
    return EigenSystem(
        eigenvalues=vals,
        normalized=lap.normalized_eigenvalue(vals),
        vectors=vecs,
        residuals=res,
        clusters=clusters,
        iterations=iterations,
        method=method,
    )


def empirical_error(u: np.ndarray, theta: np.ndarray) -> float:
    """Root mean square difference, the L2(pi_n) distance."""
    u = np.asarray(u, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if u.shape != theta.shape:
        raise ValueError("length mismatch")
    return float(np.sqrt(np.mean((u - theta) ** 2)))


@dataclass
class AlignmentResult:
    embedding: np.ndarray
    errors: np.ndarray
    groups: list
    straddled: bool


def align_to_groups(eig: EigenSystem, groups: Sequence[np.ndarray]) -> AlignmentResult:
    """Align computed eigenvectors to reference blocks, group by group.

    Each reference block is an (n, g) matrix of eigenfunction values for one
    multiplicity group; the matching computed vectors are the next g columns
    in order.  Within a group the L2(pi_n)-optimal orthogonal transform
    (Procrustes) is applied, which can only reduce the empirical error.
    """
    sizes = [g.shape[1] for g in groups]
    if sum(sizes) != eig.S:
        raise ValueError(
            f"reference group sizes {sizes} do not partition {eig.S} computed vectors"
        )
    n = eig.n
    aligned = np.empty_like(eig.vectors)
    errors = np.empty(eig.S)
    boundaries = set(np.cumsum(sizes)[:-1])
    straddled = any(
        sl.start < b < sl.stop for b in boundaries for sl in eig.clusters
    )
    start = 0
    for block in groups:
        g = block.shape[1]
        U = eig.vectors[:, start : start + g]
        A = U.T @ block / n
        P, _, Qt = np.linalg.svd(A)
        R = P @ Qt
        out = U @ R
        aligned[:, start : start + g] = out
        for c in range(g):
            errors[start + c] = empirical_error(out[:, c], block[:, c])
        start += g
    return AlignmentResult(embedding=aligned, errors=errors, groups=list(groups),
                           straddled=straddled)


def align_to_reference(
    eig: EigenSystem,
    spectrum: Sequence[AnalyticEigenfunction],
    cloud: PointCloud,
    ignore_component: bool = False,
    renormalize: bool = False,
) -> AlignmentResult:
    """Evaluate an analytic spectrum on the cloud and align to it.

    With renormalize=True the reference columns are rescaled to unit
    L2(pi_n) norm within each group, comparing subspaces rather than the
    population-normalized functions.
    """
    values = spectrum_values(spectrum, cloud, ignore_component=ignore_component)
    blocks = []
    for sl in reference_groups(spectrum):
        block = values[:, sl]
        if renormalize:
            norms = np.sqrt((block**2).mean(axis=0))
            block = block / np.where(norms > 0, norms, 1.0)
        blocks.append(block)
    return align_to_groups(eig, blocks)


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


@dataclass
class ClusterResult:
    labels: np.ndarray
    inertia: float
    accuracy: Optional[float] = None


def _kmeans_once(X: np.ndarray, K: int, rng: np.random.Generator, iters: int = 100):
    n = len(X)
    # k-means++ seeding
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[c:] = X[rng.integers(n, size=K - c)]
            break
        probs = d2 / total
        centers[c] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    labels = np.zeros(n, dtype=np.int64)
    for it in range(iters):
        dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(K):
            mask = labels == c
            if mask.any():
                centers[c] = X[mask].mean(axis=0)
    inertia = float(((X - centers[labels]) ** 2).sum())
    return labels, inertia


def permutation_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Best label-matching accuracy over permutations (Hungarian assignment)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    kp = int(pred.max()) + 1
    kt = int(truth.max()) + 1
    K = max(kp, kt)
    conf = np.zeros((K, K))
    for p, t in zip(pred, truth):
        conf[p, t] += 1
    row, col = linear_sum_assignment(-conf)
    return float(conf[row, col].sum()) / len(pred)


def spectral_cluster(
    embedding: EmbeddingMatrix,
    K: int,
    restarts: int = 8,
    seed: int = 0,
    true_labels: Optional[np.ndarray] = None,
) -> ClusterResult:
    """k-means on the first K embedding coordinates, best of `restarts`
    seeded initializations; accuracy is permutation-matched against the true
    component labels when given."""
    if K < 2:
        raise ValueError("need K >= 2 clusters")
    X = embedding.coords[:, :K]
    best = None
    for t in range(restarts):
        labels, inertia = _kmeans_once(X, K, stream(seed, "kmeans", t))
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    labels, inertia = best
    acc = None
    if true_labels is not None:
        acc = permutation_accuracy(labels, true_labels)
    return ClusterResult(labels=labels, inertia=inertia, accuracy=acc)


# ---------------------------------------------------------------------------
# out-of-sample extension
# ---------------------------------------------------------------------------


def extend(embedding: EmbeddingMatrix, queries: np.ndarray, r: Optional[float] = None) -> np.ndarray:
    """Kernel-weighted average of training rows within radius r of each
    query; the nearest training point when the ball is empty."""
    if embedding.cloud is None or embedding.cloud.n == 0:
        raise ValueError("embedding has no training cloud")
    if r is None:
        r = embedding.r
    queries = np.asarray(queries, dtype=float)
    single = queries.ndim == 1
    Q = queries.reshape(1, -1) if single else queries
    tree = embedding.tree()
    out = np.empty((len(Q), embedding.S))
    neighborhoods = tree.query_ball_point(Q, r)
    for qi, idx in enumerate(neighborhoods):
        if len(idx) == 0:
            _, nearest = tree.query(Q[qi])
            out[qi] = embedding.coords[nearest]
            continue
        idx = np.asarray(idx)
        dist = np.sqrt(((embedding.cloud.xs[idx] - Q[qi]) ** 2).sum(axis=1))
        w = embedding.kernel(dist / r)
        total = w.sum()
        if total <= 0:
            _, nearest = tree.query(Q[qi])
            out[qi] = embedding.coords[nearest]
        else:
            out[qi] = (w[:, None] * embedding.coords[idx]).sum(axis=0) / total
    return out[0] if single else out


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def embedding_to_csv(embedding: EmbeddingMatrix, path) -> None:
    ks = embedding.cloud.ks if embedding.cloud is not None else np.zeros(len(embedding.coords), dtype=int)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "true_k"] + [f"coord_{s + 1}" for s in range(embedding.S)])
        for i, row in enumerate(embedding.coords):
            writer.writerow([i, int(ks[i])] + [repr(float(v)) for v in row])


def eigenvalues_to_csv(eig: EigenSystem, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "raw", "normalized", "residual"])
        for s in range(eig.S):
            writer.writerow(
                [s + 1, repr(float(eig.eigenvalues[s])), repr(float(eig.normalized[s])), repr(float(eig.residuals[s]))]
            )
