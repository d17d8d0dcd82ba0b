"""Radius neighborhood graphs, graph Laplacians, and discrete Dirichlet
energies with their normalization constants."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.special import gamma

from .manifolds import PointCloud

__all__ = [
    "KernelProfile",
    "INDICATOR",
    "bump_profile",
    "unit_ball_volume",
    "surface_tension",
    "NeighborGraph",
    "LaplacianMatrix",
    "build_graph",
    "laplacian",
    "dirichlet",
    "dirichlet_split",
    "connected_components",
    "export_graph_csv",
]


@dataclass(frozen=True)
class KernelProfile:
    """Nonincreasing weight profile h supported on [0, 1].

    exponent q selects h(t) = (1 - t^2)_+^q; q = 0 is the hard indicator.
    """

    name: str
    exponent: float

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = t <= 1.0
        if self.exponent == 0.0:
            return inside.astype(float)
        body = np.clip(1.0 - t**2, 0.0, None) ** self.exponent
        return np.where(inside, body, 0.0)


INDICATOR = KernelProfile("indicator", 0.0)


def bump_profile(d_v: int) -> KernelProfile:
    """Profile (1 - t^2)_+^(d_v/2): the effective signal kernel left behind
    after averaging an indicator over a d_v-dimensional fiber."""
    if d_v < 0:
        raise ValueError("fiber dimension must be nonnegative")
    if d_v == 0:
        return INDICATOR
    return KernelProfile(f"bump{d_v}", d_v / 2.0)


def unit_ball_volume(d: int) -> float:
    """Volume of the d-dimensional Euclidean unit ball; 1 for d = 0."""
    return math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)


@lru_cache(maxsize=None)
def _surface_tension(exponent: float, d: int) -> float:
    # int_{|y|<=1} y_1^2 (1-|y|^2)^q dy = V_d * (1/2) * B((d+2)/2, q+1)
    if exponent == 0.0:
        return unit_ball_volume(d) / (d + 2)
    from scipy.special import beta

    return unit_ball_volume(d) * 0.5 * beta((d + 2) / 2.0, exponent + 1.0)


def surface_tension(kernel: KernelProfile, d: int) -> float:
    """Second moment of the kernel, sigma_h = int |y_1|^2 h(|y|) dy over R^d.

    Closed form for the supported profiles; the indicator gives V_d/(d+2).
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return _surface_tension(kernel.exponent, d)


@dataclass
class NeighborGraph:
    """Sparse symmetric weights W_ij = h(|X_i - X_j| / r), no self-loops."""

    n: int
    r: float
    kernel: KernelProfile
    weights: sp.csr_matrix
    dim: int  # intrinsic dimension used for Dirichlet scaling

    def degree(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle edges as (i, j, w)."""
        coo = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


@dataclass
class LaplacianMatrix:
    """L = D - W with the constants needed to normalize quadratic forms.

    The discrete Dirichlet energy of a vector U (all ordered pairs) is
    2 U^T L U / (sigma_h n^2 r^(dim+2)); `extra` carries the additional
    divisor used by fiber-averaged weights (the unit-ball volume of the
    fiber dimension), 1 otherwise.
    """

    matrix: sp.csr_matrix
    weights: sp.csr_matrix
    n: int
    r: float
    sigma_h: float
    dim: int
    extra: float = 1.0
    signal_dim: Optional[int] = None

    @property
    def dirichlet_scale(self) -> float:
        return self.sigma_h * self.n**2 * self.r ** (self.dim + 2) * self.extra

    def normalized_eigenvalue(self, raw: np.ndarray) -> np.ndarray:
        """Map raw matrix eigenvalues to the Dirichlet-normalized scale on
        which they approximate the continuum operator's spectrum."""
        return 2.0 * np.asarray(raw) * self.n / self.dirichlet_scale


def _pairs_within(points: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tree = cKDTree(points)
    pairs = tree.query_pairs(r, output_type="ndarray")
    if len(pairs) == 0:
        return (np.empty(0, dtype=np.int64),) * 2 + (np.empty(0),)
    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.sqrt(((points[i] - points[j]) ** 2).sum(axis=1))
    return i, j, dist


def _symmetric_csr(n, i, j, w) -> sp.csr_matrix:
    keep = w != 0.0
    i, j, w = i[keep], j[keep], w[keep]
    mat = sp.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n))
    out = mat.tocsr()
    out.sort_indices()
    return out


def build_graph(
    cloud: Union[PointCloud, np.ndarray],
    r: float,
    kernel: KernelProfile = INDICATOR,
    dim: Optional[int] = None,
) -> NeighborGraph:
    """Exact radius graph: W_ij = h(|X_i - X_j| / r) for pairs within r.

    Accepts a PointCloud (intrinsic dimension read off the model) or a raw
    (n, D) array, in which case `dim` must be given.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if isinstance(cloud, PointCloud):
        points = cloud.xs
        if dim is None:
            dim = cloud.model.d
    else:
        points = np.asarray(cloud, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if dim is None:
            raise ValueError("dim is required when building from a raw array")
    n = len(points)
    if n == 0:
        raise ValueError("empty point set")
    i, j, dist = _pairs_within(points, r)
    w = kernel(dist / r)
    return NeighborGraph(n=n, r=r, kernel=kernel, weights=_symmetric_csr(n, i, j, w), dim=dim)


def laplacian(graph: NeighborGraph, extra: float = 1.0, sigma_dim: Optional[int] = None,
              signal_dim: Optional[int] = None) -> LaplacianMatrix:
    """Unnormalized Laplacian D - W with recorded scaling constants.

    sigma_dim overrides the dimension in which the kernel's surface tension
    is taken (fiber-averaged weights measure distances on the signal factor).
    """
    W = graph.weights
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = (sp.diags(deg) - W).tocsr()
    L.sort_indices()
    return LaplacianMatrix(
        matrix=L,
        weights=W,
        n=graph.n,
        r=graph.r,
        sigma_h=surface_tension(graph.kernel, sigma_dim if sigma_dim is not None else graph.dim),
        dim=graph.dim,
        extra=extra,
        signal_dim=signal_dim,
    )


def dirichlet(lap: LaplacianMatrix, U: np.ndarray) -> float:
    """Normalized Dirichlet energy of U via the edge sum over ordered pairs,
    equal to 2 U^T L U / (sigma_h n^2 r^(dim+2) extra)."""
    U = np.asarray(U, dtype=float)
    if U.shape != (lap.n,):
        raise ValueError(f"expected a length-{lap.n} vector")
    coo = sp.triu(lap.weights, k=1).tocoo()
    diff = U[coo.row] - U[coo.col]
    return 2.0 * float(np.dot(coo.data, diff**2)) / lap.dirichlet_scale


def dirichlet_split(
    lap: LaplacianMatrix, labels: np.ndarray, U: np.ndarray
) -> tuple[float, float, np.ndarray]:
    """Split the Dirichlet energy into within- and cross-component parts.

    Per-component energies use the 1/n_k^2 normalization; the weighted sum
    sum_k (n_k/n)^2 b_k plus the cross part reassembles the total energy.
    Components with no points or a single point report 0.
    """
    U = np.asarray(U, dtype=float)
    labels = np.asarray(labels)
    if U.shape != (lap.n,) or labels.shape != (lap.n,):
        raise ValueError("labels and U must match the graph size")
    coo = sp.triu(lap.weights, k=1).tocoo()
    diff2 = (U[coo.row] - U[coo.col]) ** 2
    contrib = coo.data * diff2
    denom = lap.sigma_h * lap.r ** (lap.dim + 2) * lap.extra

    uniq = np.unique(labels)
    b_k = np.zeros(len(uniq))
    same = labels[coo.row] == labels[coo.col]
    cross_sum = contrib[~same].sum()
    counts = np.array([(labels == lab).sum() for lab in uniq])
    for idx, lab in enumerate(uniq):
        mask = same & (labels[coo.row] == lab)
        if counts[idx] > 0:
            b_k[idx] = 2.0 * contrib[mask].sum() / (denom * counts[idx] ** 2)
    b_w = float(((counts / lap.n) ** 2 * b_k).sum())
    b_c = 2.0 * float(cross_sum) / (denom * lap.n**2)
    return b_w, b_c, b_k


def connected_components(graph: NeighborGraph) -> np.ndarray:
    """Component labels (0-based, in order of first appearance) by union-find."""
    parent = np.arange(graph.n)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    i, j, _ = graph.edge_arrays()
    for a, b in zip(i, j):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(graph.n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def export_graph_csv(graph: NeighborGraph, path, mode: Optional[str] = None) -> None:
    """Triplet CSV (i, j, w), upper triangle; optional mode column."""
    i, j, w = graph.edge_arrays()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "w"] + (["mode"] if mode else []))
        for a, b, v in zip(i, j, w):
            row = [int(a), int(b), repr(float(v))]
            if mode:
                row.append(mode)
            writer.writerow(row)
