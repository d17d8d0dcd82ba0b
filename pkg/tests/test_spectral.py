import math

import numpy as np
import pytest
import scipy.linalg

from manisep.graph import LaplacianMatrix, build_graph, laplacian
from manisep.manifolds import (
    Circle,
    analytic_spectrum,
    parallel_copies_model,
    sample_cloud,
)
from manisep.spectral import (
    EmbeddingMatrix,
    SolverError,
    align_to_groups,
    align_to_reference,
    empirical_error,
    extend,
    smallest_eigenpairs,
    spectral_cluster,
)

import scipy.sparse as sp


def path_laplacian(n, r=1.0):
    """Unweighted path graph wrapped in the Laplacian container."""
    W = sp.diags([np.ones(n - 1), np.ones(n - 1)], [1, -1]).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    return LaplacianMatrix(
        matrix=(sp.diags(deg) - W).tocsr(), weights=W, n=n, r=r, sigma_h=2 / 3, dim=1
    )


def random_geometric_laplacian(n, r, seed, d=2):
    pts = np.random.default_rng(seed).uniform(0, 1, (n, d))
    return laplacian(build_graph(pts, r=r, dim=d))


class TestSolver:
    def test_path_graph_closed_form(self):
        # eigenvalues 2(1 - cos(pi k / 3)) = {0, 1, 3}
        lap = path_laplacian(3)
        eig = smallest_eigenpairs(lap, 3, tol=1e-10, seed=0)
        assert np.allclose(eig.eigenvalues, [0.0, 1.0, 3.0], atol=1e-12)
        closed = [2 * (1 - math.cos(math.pi * k / 3)) for k in range(3)]
        assert np.allclose(sorted(closed), eig.eigenvalues, atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_oracle_small(self, seed):
        lap = random_geometric_laplacian(150 + 30 * seed, 0.2, seed)
        S = 6
        eig = smallest_eigenpairs(lap, S, tol=1e-9, seed=0)
        ref = scipy.linalg.eigh(lap.matrix.toarray(), eigvals_only=True)
        assert np.max(np.abs(eig.eigenvalues - ref[:S])) <= 1e-8

    def test_lobpcg_path_matches_dense(self):
        lap = random_geometric_laplacian(1500, 0.09, 3)
        S = 4
        eig = smallest_eigenpairs(lap, S, tol=1e-8, seed=0, dense_cutoff=100)
        assert eig.method == "lobpcg"
        ref = scipy.linalg.eigh(lap.matrix.toarray(), eigvals_only=True)
        assert np.max(np.abs(eig.eigenvalues - ref[:S])) <= 1e-5
        # subspace agreement per eigengap cluster
        dense_vals, dense_vecs = scipy.linalg.eigh(lap.matrix.toarray())
        for sl in eig.clusters:
            mine = eig.vectors[:, sl] / math.sqrt(lap.n)
            ref_block = dense_vecs[:, sl]
            angles = scipy.linalg.subspace_angles(mine, ref_block)
            assert np.max(angles) <= 1e-4

    def test_disconnected_zero_modes(self):
        model = parallel_copies_model(Circle(), 0.5)
        cloud = sample_cloud(model, 600, seed=4)
        lap = laplacian(build_graph(cloud, r=0.2))
        eig = smallest_eigenpairs(lap, 2, tol=1e-9, seed=0)
        assert np.max(np.abs(eig.eigenvalues)) <= 1e-10
        # eigenvector span contains the component indicators
        V = eig.vectors / math.sqrt(cloud.n)
        for k in range(2):
            ind = (cloud.ks == k).astype(float)
            ind /= np.linalg.norm(ind)
            proj = V @ (V.T @ ind)
            assert np.linalg.norm(proj - ind) <= 1e-8

    def test_orthonormal_in_empirical_norm(self):
        lap = random_geometric_laplacian(400, 0.15, 1)
        eig = smallest_eigenpairs(lap, 5, tol=1e-9, seed=0)
        G = eig.vectors.T @ eig.vectors / lap.n
        assert np.max(np.abs(G - np.eye(5))) <= 1e-8

    def test_determinism(self):
        lap = random_geometric_laplacian(1500, 0.09, 3)
        a = smallest_eigenpairs(lap, 3, tol=1e-7, seed=5, dense_cutoff=100)
        b = smallest_eigenpairs(lap, 3, tol=1e-7, seed=5, dense_cutoff=100)
        assert a.vectors.tobytes() == b.vectors.tobytes()
        assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()

    def test_too_many_pairs_rejected(self):
        lap = path_laplacian(3)
        with pytest.raises(SolverError):
            smallest_eigenpairs(lap, 4, seed=0)

    def test_residuals_reported(self):
        lap = random_geometric_laplacian(200, 0.2, 0)
        eig = smallest_eigenpairs(lap, 3, tol=1e-9, seed=0)
        for s in range(3):
            res = np.linalg.norm(
                lap.matrix @ (eig.vectors[:, s] / math.sqrt(lap.n))
                - eig.eigenvalues[s] * eig.vectors[:, s] / math.sqrt(lap.n)
            )
            assert res == pytest.approx(eig.residuals[s], abs=1e-12)


class TestEmpiricalError:
    def test_zero_for_identical(self):
        u = np.random.default_rng(0).standard_normal(50)
        assert empirical_error(u, u) == 0.0

    def test_sign_flip_of_unit_vector(self):
        rng = np.random.default_rng(1)
        theta = rng.standard_normal(100)
        theta /= math.sqrt(np.mean(theta**2))
        assert empirical_error(-theta, theta) == pytest.approx(2.0, rel=1e-12)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(2)
        u, v = rng.standard_normal((2, 37))
        naive = math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)) / 37)
        assert empirical_error(u, v) == pytest.approx(naive, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            empirical_error(np.ones(3), np.ones(4))


class TestAlignment:
    def _indicator_system(self, n=400, seed=3):
        model = parallel_copies_model(Circle(), 0.5)
        cloud = sample_cloud(model, n, seed=seed)
        lap = laplacian(build_graph(cloud, r=0.2))
        eig = smallest_eigenpairs(lap, 2, tol=1e-9, seed=0)
        return model, cloud, eig

    def test_sign_flip_aligned_exactly(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal(60)
        u /= math.sqrt(np.mean(u**2))
        eig = _fake_eigensystem(np.c_[-u])
        res = align_to_groups(eig, [np.c_[u]])
        assert res.errors[0] <= 1e-12

    def test_rotated_pair_aligned_exactly(self):
        t = np.linspace(0, 2 * math.pi, 101)[:-1]
        ref = np.c_[math.sqrt(2) * np.cos(t), math.sqrt(2) * np.sin(t)]
        ang = 0.7
        R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        eig = _fake_eigensystem(ref @ R)
        res = align_to_groups(eig, [ref])
        assert np.max(res.errors) <= 1e-12

    def test_alignment_never_hurts(self):
        rng = np.random.default_rng(4)
        t = rng.uniform(0, 2 * math.pi, 300)
        ref = np.c_[math.sqrt(2) * np.cos(t), math.sqrt(2) * np.sin(t)]
        noisy = ref + 0.05 * rng.standard_normal(ref.shape)
        # orthonormalize in the empirical inner product
        q, _ = np.linalg.qr(noisy / math.sqrt(len(t)))
        vecs = q * math.sqrt(len(t))
        eig = _fake_eigensystem(vecs)
        res = align_to_groups(eig, [ref])
        pre = [empirical_error(vecs[:, c], ref[:, c]) for c in range(2)]
        assert res.errors.sum() <= sum(pre) + 1e-12

    def test_indicator_alignment_after_renormalize(self):
        model, cloud, eig = self._indicator_system()
        spec = analytic_spectrum(model, "full", 2)
        res = align_to_reference(eig, spec, cloud, renormalize=True)
        assert np.max(res.errors) <= 1e-7

    def test_group_size_mismatch_rejected(self):
        _, _, eig = self._indicator_system()
        with pytest.raises(ValueError):
            align_to_groups(eig, [np.ones((eig.n, 3))])


def _fake_eigensystem(vectors):
    from manisep.spectral import EigenSystem

    n, S = vectors.shape
    return EigenSystem(
        eigenvalues=np.zeros(S),
        normalized=np.zeros(S),
        vectors=vectors,
        residuals=np.zeros(S),
        clusters=[slice(0, S)],
        iterations=1,
        method="dense",
    )


class TestClustering:
    def test_exact_indicators_recovered(self):
        model = parallel_copies_model(Circle(), 0.5)
        cloud = sample_cloud(model, 500, seed=1)
        lap = laplacian(build_graph(cloud, r=0.2))
        eig = smallest_eigenpairs(lap, 2, tol=1e-9, seed=0)
        emb = EmbeddingMatrix(coords=eig.vectors, source="cml", r=0.2, cloud=cloud)
        res = spectral_cluster(emb, 2, restarts=4, seed=0, true_labels=cloud.ks)
        assert res.accuracy == 1.0

    def test_single_manifold_majority_bound(self):
        rng = np.random.default_rng(0)
        coords = np.c_[np.ones(100), rng.standard_normal(100) * 1e-3]
        emb = EmbeddingMatrix(coords=coords, source="cml", r=0.1)
        res = spectral_cluster(emb, 2, restarts=4, seed=0,
                               true_labels=np.zeros(100, dtype=int))
        assert res.accuracy >= 0.5

    def test_perturbed_indicators(self):
        # nearest-centroid oracle: 1e-3 noise cannot move a point across
        # the midpoint of two unit-separated centroids
        rng = np.random.default_rng(3)
        truth = rng.integers(0, 2, 400)
        coords = np.c_[truth == 0, truth == 1].astype(float) * math.sqrt(2)
        coords += 1e-3 * rng.standard_normal(coords.shape)
        emb = EmbeddingMatrix(coords=coords, source="cml", r=0.1)
        res = spectral_cluster(emb, 2, restarts=4, seed=0, true_labels=truth)
        assert res.accuracy == 1.0

    def test_needs_two_clusters(self):
        emb = EmbeddingMatrix(coords=np.ones((10, 2)), source="cml", r=0.1)
        with pytest.raises(ValueError):
            spectral_cluster(emb, 1)


class TestExtend:
    def _embedding(self):
        model = parallel_copies_model(Circle(), 0.5)
        cloud = sample_cloud(model, 500, seed=2)
        lap = laplacian(build_graph(cloud, r=0.2))
        eig = smallest_eigenpairs(lap, 2, tol=1e-9, seed=0)
        return model, cloud, EmbeddingMatrix(
            coords=eig.vectors, source="cml", r=0.2, cloud=cloud
        )

    def test_training_point_with_private_ball(self):
        coords = np.array([[1.0, 0.0], [0.0, 1.0]])
        cloudlike = _tiny_cloud(np.array([[0.0, 0.0], [10.0, 0.0]]))
        emb = EmbeddingMatrix(coords=coords, source="cml", r=1.0, cloud=cloudlike)
        out = extend(emb, np.array([0.0, 0.0]))
        assert np.array_equal(out, coords[0])

    def test_equidistant_equal_rows(self):
        coords = np.array([[0.5, 0.5], [0.5, 0.5]])
        cloudlike = _tiny_cloud(np.array([[-1.0, 0.0], [1.0, 0.0]]))
        emb = EmbeddingMatrix(coords=coords, source="cml", r=2.5, cloud=cloudlike)
        out = extend(emb, np.array([0.0, 0.0]))
        assert np.allclose(out, [0.5, 0.5])

    def test_deep_interior_query_is_pure(self):
        # rotate the zero eigenspace onto the indicator basis, then extend
        model, cloud, emb = self._embedding()
        lap = laplacian(build_graph(cloud, r=0.2))
        eig = smallest_eigenpairs(lap, 2, tol=1e-9, seed=0)
        spec = analytic_spectrum(model, "full", 2)
        aligned = align_to_reference(eig, spec, cloud, renormalize=True)
        emb = EmbeddingMatrix(coords=aligned.embedding, source="cml", r=0.2, cloud=cloud)
        comp = model.components[0]
        query = comp.embed(np.array([[0.3]]), np.empty((1, 0)))[0]
        vec = extend(emb, query)
        assert abs(vec[1]) <= 1e-8
        assert vec[0] == pytest.approx(math.sqrt(cloud.n / (cloud.ks == 0).sum()), rel=1e-6)

    def test_empty_ball_falls_back_to_nearest(self):
        model, cloud, emb = self._embedding()
        far = np.array([50.0, 0.0, 0.0])
        out = extend(emb, far, r=0.01)
        _, nearest = emb.tree().query(far)
        assert np.array_equal(out, emb.coords[nearest])


def _tiny_cloud(xs):
    from manisep.manifolds import MultiManifoldModel, PointCloud, Box

    model = MultiManifoldModel((Box(sides=(1.0,) * xs.shape[1]),), (1.0,))
    n = len(xs)
    return PointCloud(
        model, xs, np.zeros(n, dtype=np.int64), xs.copy(), np.empty((n, 0))
    )
