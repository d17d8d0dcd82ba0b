"""Augmentation-averaged neighborhood weights.

Two routes to the averaged weight matrix: a Monte Carlo estimate of the
probability that independent augmentations of two samples land within
radius r of each other, and the closed-form fiber-overlap kernel that this
probability approaches for small r.  Both produce weights that depend on the
samples only through their invariant coordinates, which is what lets the
downstream spectral step separate components that sit closer than r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .graph import (
    INDICATOR,
    LaplacianMatrix,
    NeighborGraph,
    bump_profile,
    build_graph,
    laplacian,
    surface_tension,
    unit_ball_volume,
)
from .manifolds import (
    Manifold,
    MultiManifoldModel,
    OffsetCopy,
    PointCloud,
    Product,
    min_separation,
)
from .rng import stream

__all__ = ["AimlWeights", "mc_weights", "kernel_weights", "aiml_laplacian",
           "signal_dirichlet"]


@dataclass
class AimlWeights:
    """Sparse symmetric averaged weights in [0, 1].

    aug_counts carries the per-entry Monte Carlo sample count on the same
    sparsity pattern (0 where an entry came from the closed form).
    """

    n: int
    r: float
    mode: str
    weights: sp.csr_matrix
    n_aug: Optional[int] = None
    aug_counts: Optional[sp.csr_matrix] = None

    def edge_arrays(self):
        coo = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]


def _signal_factor(comp: Manifold) -> Manifold:
    if isinstance(comp, OffsetCopy):
        return _signal_factor(comp.base)
    if isinstance(comp, Product):
        return comp.signal
    return comp


def _signal_points(comp: Manifold, phis: np.ndarray) -> np.ndarray:
    """Embed invariant coordinates in the signal factor's own ambient space,
    where Euclidean distance is the chord of the signal geodesic."""
    factor = _signal_factor(comp)
    return factor.embed(phis, np.empty((len(phis), 0)))


def _same_component_pairs(cloud: PointCloud, r: float):
    """Candidate pairs (global indices) per component: exactly the pairs
    whose fibers can come within r, i.e. signal chord <= r."""
    for k, comp in enumerate(cloud.model.components):
        idx = np.nonzero(cloud.ks == k)[0]
        if len(idx) < 2:
            continue
        pts = _signal_points(comp, cloud.phis[idx])
        pairs = cKDTree(pts).query_pairs(r, output_type="ndarray")
        if len(pairs):
            yield k, idx[pairs[:, 0]], idx[pairs[:, 1]]


def _offset_and_base(comp: Manifold):
    if isinstance(comp, OffsetCopy):
        return comp.offset, comp.base
    return 0.0, comp


def _cross_component_pairs(cloud: PointCloud, r: float):
    """Pairs from different components whose fibers can possibly meet
    within r.

    Offset copies of the same base admit the exact rule: the closest two
    fibers can get is sqrt(gap^2 + signal_chord^2), so candidates are the
    pairs with signal chord below sqrt(r^2 - gap^2).  Heterogeneous pairs
    fall back to ambient distance within r plus both fiber diameters.
    """
    model = cloud.model
    out = []
    index = [np.nonzero(cloud.ks == k)[0] for k in range(model.K)]
    for a in range(model.K):
        for b in range(a + 1, model.K):
            ia, ib = index[a], index[b]
            if len(ia) == 0 or len(ib) == 0:
                continue
            off_a, base_a = _offset_and_base(model.components[a])
            off_b, base_b = _offset_and_base(model.components[b])
            if base_a == base_b:
                gap = abs(off_a - off_b)
                if gap > r:
                    continue
                cut = math.sqrt(r * r - gap * gap)
                pts_a = _signal_points(model.components[a], cloud.phis[ia])
                pts_b = _signal_points(model.components[b], cloud.phis[ib])
                hits = cKDTree(pts_a).query_ball_tree(cKDTree(pts_b), cut)
            else:
                slack = (model.components[a].fiber_extrinsic_diameter()
                         + model.components[b].fiber_extrinsic_diameter())
                hits = cKDTree(cloud.xs[ia]).query_ball_tree(
                    cKDTree(cloud.xs[ib]), r + slack
                )
            for pa, cols in enumerate(hits):
                for pb in cols:
                    out.append((ia[pa], ib[pb]))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(out, dtype=np.int64)


def _mc_pair_estimate(cloud: PointCloud, i: int, j: int, r: float, n_aug: int,
                      seed: int) -> float:
    comp_i = cloud.model.components[cloud.ks[i]]
    comp_j = cloud.model.components[cloud.ks[j]]
    rng = stream(seed, "mc", int(i), int(j))
    psi_i = comp_i.sample_nuisance(rng, n_aug)
    psi_j = comp_j.sample_nuisance(rng, n_aug)
    xi = comp_i.embed(np.broadcast_to(cloud.phis[i], (n_aug, cloud.model.d_s)), psi_i)
    xj = comp_j.embed(np.broadcast_to(cloud.phis[j], (n_aug, cloud.model.d_s)), psi_j)
    dist2 = ((xi - xj) ** 2).sum(axis=1)
    return float(np.count_nonzero(dist2 <= r * r)) / n_aug


def _indicator_weights(cloud: PointCloud, r: float, mode: str,
                       n_aug: Optional[int]) -> AimlWeights:
    graph = build_graph(cloud, r, INDICATOR)
    return AimlWeights(n=cloud.n, r=r, mode=mode, weights=graph.weights, n_aug=n_aug)


def mc_weights(cloud: PointCloud, r: float, n_aug: int = 1024, seed: int = 0) -> AimlWeights:
    """Monte Carlo averaged weights: the fraction of n_aug independent
    augmentation pairs of (X_i, X_j) that land within distance r.

    Pairs that cannot have positive weight (signal chord beyond r for same
    component, ambient separation beyond r plus fiber slack across
    components) are skipped; they are exactly zero.  Trivial fibers reduce
    to the plain radius indicator.
    """
    if n_aug < 1:
        raise ValueError("need at least one augmentation draw")
    model = cloud.model
    if model.d_v == 0:
        return _indicator_weights(cloud, r, "monte-carlo", n_aug)

    rows, cols, vals, counts = [], [], [], []
    for _, ii, jj in _same_component_pairs(cloud, r):
        for a, b in zip(ii, jj):
            w = _mc_pair_estimate(cloud, a, b, r, n_aug, seed)
            if w > 0.0:
                rows.append(a)
                cols.append(b)
                vals.append(w)
                counts.append(n_aug)
    for a, b in _cross_component_pairs(cloud, r):
        w = _mc_pair_estimate(cloud, a, b, r, n_aug, seed)
        if w > 0.0:
            rows.append(a)
            cols.append(b)
            vals.append(w)
            counts.append(n_aug)
    W = _sym(cloud.n, rows, cols, vals)
    C = _sym(cloud.n, rows, cols, counts)
    return AimlWeights(n=cloud.n, r=r, mode="monte-carlo", weights=W, n_aug=n_aug,
                       aug_counts=C)


def kernel_weights(cloud: PointCloud, r: float, cross_seed: int = 0,
                   cross_n_aug: int = 1024) -> AimlWeights:
    """Closed-form averaged weights for same-component pairs:

        W_ij = r^d_v * (V_{d_v} / Vol fiber) * (1 - geo^2 / r^2)_+^(d_v/2)

    with geo the signal geodesic distance, clamped into [0, 1].  Cross
    component entries are exactly zero when the separation exceeds r and
    fall back to the Monte Carlo estimate otherwise.
    """
    model = cloud.model
    if model.d_v == 0:
        return _indicator_weights(cloud, r, "kernel", None)

    v_ball = unit_ball_volume(model.d_v)
    rows, cols, vals, counts = [], [], [], []
    for k, ii, jj in _same_component_pairs(cloud, r):
        comp = model.components[k]
        geo = comp.signal_geodesic(cloud.phis[ii], cloud.phis[jj])
        body = np.clip(1.0 - (geo / r) ** 2, 0.0, None) ** (model.d_v / 2.0)
        w = np.clip(r**model.d_v * v_ball / comp.nuisance_volume * body, 0.0, 1.0)
        keep = w > 0.0
        rows.extend(ii[keep])
        cols.extend(jj[keep])
        vals.extend(w[keep])
        counts.extend([0] * int(keep.sum()))

    if min_separation(model) <= r:
        for a, b in _cross_component_pairs(cloud, r):
            w = _mc_pair_estimate(cloud, a, b, r, cross_n_aug, cross_seed)
            if w > 0.0:
                rows.append(a)
                cols.append(b)
                vals.append(w)
                counts.append(cross_n_aug)

    W = _sym(cloud.n, rows, cols, vals)
    C = _sym(cloud.n, rows, cols, counts)
    return AimlWeights(n=cloud.n, r=r, mode="kernel", weights=W, aug_counts=C)


def _sym(n, rows, cols, vals) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    mat = sp.coo_matrix(
        (np.r_[vals, vals], (np.r_[rows, cols], np.r_[cols, rows])), shape=(n, n)
    ).tocsr()
    mat.sort_indices()
    return mat


def aiml_laplacian(weights: AimlWeights, model: MultiManifoldModel) -> LaplacianMatrix:
    """Laplacian of the averaged weights with scaling constants matching the
    effective signal kernel: surface tension of (1-t^2)^(d_v/2) in the signal
    dimension and an extra fiber unit-ball volume divisor.  With trivial
    fibers this coincides with the plain graph Laplacian."""
    graph = NeighborGraph(
        n=weights.n, r=weights.r, kernel=bump_profile(model.d_v),
        weights=weights.weights, dim=model.d,
    )
    return laplacian(
        graph,
        extra=unit_ball_volume(model.d_v),
        sigma_dim=model.d_s,
        signal_dim=model.d_s,
    )


def signal_dirichlet(cloud: PointCloud, r: float, U: np.ndarray) -> float:
    """Intermediate Dirichlet energy measured directly on the invariant
    coordinates with the effective kernel and the r^(d_s+2) scaling.

    Diagnostic only; requires closed-form signal geodesics.
    """
    model = cloud.model
    U = np.asarray(U, dtype=float)
    if U.shape != (cloud.n,):
        raise ValueError(f"expected a length-{cloud.n} vector")
    kernel = bump_profile(model.d_v)
    sigma = surface_tension(kernel, model.d_s)
    total = 0.0
    for k, ii, jj in _same_component_pairs(cloud, r):
        comp = model.components[k]
        geo = comp.signal_geodesic(cloud.phis[ii], cloud.phis[jj])
        h = kernel(geo / r)
        total += 2.0 * float(np.dot(h, (U[ii] - U[jj]) ** 2))
    return total / (sigma * cloud.n**2 * r ** (model.d_s + 2))
