"""Synthetic multi-manifold models: construction, sampling, augmentation,
separation distances, and closed-form operator spectra.

The catalogue is deliberately small — circles, flat boxes, products of the
two, offset copies along a fresh ambient axis, and a unit cube with one grid
cell carved out.  Everything the experiments need (volumes, reach, geodesics,
Laplacian eigenfunctions) stays analytic on this catalogue.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import stream

__all__ = [
    "Circle",
    "Box",
    "Product",
    "OffsetCopy",
    "CubeMinusSlab",
    "MultiManifoldModel",
    "Sample",
    "PointCloud",
    "AnalyticEigenfunction",
    "RegimeReport",
    "ClosedFormError",
    "sample_cloud",
    "augment",
    "augment_cloud",
    "min_separation",
    "parallel_copies_model",
    "lowerbound_model",
    "analytic_spectrum",
    "reference_groups",
    "spectrum_values",
    "validate_regime",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "cloud_to_csv",
    "cloud_from_csv",
]


class ClosedFormError(ValueError):
    """Raised when a closed-form quantity is requested for a geometry that
    only supports numeric treatment."""


# ---------------------------------------------------------------------------
# manifold kinds
# ---------------------------------------------------------------------------


class Manifold:
    """Shared behaviour for the supported kinds.

    A manifold exposes its intrinsic dimensions ``d = d_s + d_v``, analytic
    geometric constants, latent sampling, the isometric embedding, and (where
    closed forms exist) Laplace–Beltrami modes for the uniform density.
    """

    # subclasses set these
    ambient_dim: int
    d: int
    d_s: int
    d_v: int

    @property
    def volume(self) -> float:
        raise NotImplementedError

    @property
    def signal_volume(self) -> float:
        return self.volume

    @property
    def nuisance_volume(self) -> float:
        # counting measure for a point fiber
        return 1.0

    @property
    def reach(self) -> float:
        raise NotImplementedError

    @property
    def injectivity_radius(self) -> float:
        raise NotImplementedError

    @property
    def curvature_bound(self) -> float:
        raise NotImplementedError

    @property
    def density_bound(self) -> float:
        """C such that uniform/C <= signal density <= C * uniform."""
        return 1.0

    @property
    def uniform_signal(self) -> bool:
        return self.density_bound == 1.0

    def sample_latent(self, rng: np.random.Generator, n: int):
        """Draw (phi, psi) latent coordinates, shapes (n, d_s) and (n, d_v)."""
        raise NotImplementedError

    def sample_nuisance(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Fresh uniform fiber coordinates, shape (n, d_v)."""
        raise NotImplementedError

    def embed(self, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def signal_geodesic(self, phi_a: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
        """Geodesic distance on the signal factor, rowwise."""
        raise NotImplementedError

    def signal_candidate_cut(self, r: float) -> float:
        """Geodesic cutoff g such that any pair of fibers with positive
        closeness probability at radius r has signal geodesic <= g."""
        raise NotImplementedError

    def fiber_extrinsic_diameter(self) -> float:
        return 0.0

    def lb_modes(self, count: int, signal_only: bool = False):
        """First `count` Laplace–Beltrami modes for the uniform density.

        Returns a list of (lb_eigenvalue, evaluator, key) with evaluators
        mapping latent arrays (phi, psi) to values, normalized to unit
        L2 norm under the uniform probability measure.
        """
        raise ClosedFormError(
            f"{type(self).__name__} has no closed-form spectrum; "
            "use a numeric discretization instead"
        )


def _wrap_distance(a: np.ndarray, b: np.ndarray, period: float) -> np.ndarray:
    delta = np.abs(a - b) % period
    return np.minimum(delta, period - delta)


@dataclass(frozen=True)
class Circle(Manifold):
    """Round circle of given radius, optionally offset in its plane.

    ``tilt`` in [0, 1) adds a sinusoidal density 1 + tilt*sin(2*pi*u/len)
    (in arc length u) so the bounded-density regime can be exercised; the
    default is uniform.
    """

    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    tilt: float = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")
        if not 0.0 <= self.tilt < 1.0:
            raise ValueError("density tilt must lie in [0, 1)")

    ambient_dim = 2
    d = 1
    d_s = 1
    d_v = 0

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.radius

    @property
    def volume(self) -> float:
        return self.circumference

    @property
    def reach(self) -> float:
        return self.radius

    @property
    def injectivity_radius(self) -> float:
        return math.pi * self.radius

    @property
    def curvature_bound(self) -> float:
        return 1.0 / self.radius**2

    @property
    def density_bound(self) -> float:
        return 1.0 if self.tilt == 0.0 else 1.0 / (1.0 - self.tilt)

    def sample_latent(self, rng, n):
        ell = self.circumference
        if self.tilt == 0.0:
            u = rng.uniform(0.0, ell, n)
        else:
            # rejection against the uniform envelope
            u = np.empty(n)
            filled = 0
            while filled < n:
                m = max(n - filled, 16)
                cand = rng.uniform(0.0, ell, m)
                accept_p = (1.0 + self.tilt * np.sin(2.0 * math.pi * cand / ell)) / (
                    1.0 + self.tilt
                )
                keep = cand[rng.uniform(size=m) < accept_p]
                take = min(len(keep), n - filled)
                u[filled : filled + take] = keep[:take]
                filled += take
        return u.reshape(n, 1), np.empty((n, 0))

    def sample_nuisance(self, rng, n):
        return np.empty((n, 0))

    def embed(self, phi, psi):
        u = np.asarray(phi).reshape(-1)
        ang = u / self.radius
        return np.c_[
            self.center[0] + self.radius * np.cos(ang),
            self.center[1] + self.radius * np.sin(ang),
        ]

    def signal_geodesic(self, phi_a, phi_b):
        a = np.asarray(phi_a).reshape(-1)
        b = np.asarray(phi_b).reshape(-1)
        return _wrap_distance(a, b, self.circumference)

    def chord(self, geodesic: np.ndarray) -> np.ndarray:
        return 2.0 * self.radius * np.sin(np.minimum(geodesic, self.injectivity_radius) / (2.0 * self.radius))

    def signal_candidate_cut(self, r):
        if r >= 2.0 * self.radius:
            return self.injectivity_radius
        return 2.0 * self.radius * math.asin(r / (2.0 * self.radius))

    def extrinsic_diameter(self) -> float:
        return 2.0 * self.radius

    def lb_modes(self, count, signal_only=False):
        if self.tilt != 0.0:
            raise ClosedFormError("closed-form spectra require a uniform density")
        rho = self.radius
        modes = [(0.0, _const_evaluator(), "m0")]
        m = 1
        while len(modes) < count:
            lam = (m / rho) ** 2
            modes.append((lam, _circle_evaluator(rho, m, np.cos), f"m{m}c"))
            modes.append((lam, _circle_evaluator(rho, m, np.sin), f"m{m}s"))
            m += 1
        return modes[:count]


def _const_evaluator():
    def ev(phi, psi):
        return np.ones(len(phi))

    return ev


def _circle_evaluator(rho, m, fn):
    def ev(phi, psi):
        u = np.asarray(phi)[:, 0]
        return math.sqrt(2.0) * fn(m * u / rho)

    return ev


@dataclass(frozen=True)
class Box(Manifold):
    """Axis-aligned flat box (cube when sides are equal), uniform density.

    Flat and convex, so latent coordinates coincide with the embedded offsets
    and geodesics are Euclidean.  No closed-form spectrum is exposed (the
    boundary breaks the closed-manifold assumptions the spectra rely on).
    """

    sides: tuple[float, ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.sides) == 0 or any(s <= 0 for s in self.sides):
            raise ValueError("box sides must be positive")
        if self.origin == ():
            object.__setattr__(self, "origin", (0.0,) * len(self.sides))
        if len(self.origin) != len(self.sides):
            raise ValueError("origin and sides must have equal length")

    @property
    def ambient_dim(self):
        return len(self.sides)

    @property
    def d(self):
        return len(self.sides)

    @property
    def d_s(self):
        return len(self.sides)

    d_v = 0

    @property
    def volume(self):
        return float(np.prod(self.sides))

    reach = math.inf
    injectivity_radius = math.inf
    curvature_bound = 0.0

    def sample_latent(self, rng, n):
        phi = rng.uniform(0.0, 1.0, (n, self.d)) * np.asarray(self.sides)
        return phi, np.empty((n, 0))

    def sample_nuisance(self, rng, n):
        return rng.uniform(0.0, 1.0, (n, self.d)) * np.asarray(self.sides)

    def embed(self, phi, psi):
        return np.asarray(self.origin) + np.asarray(phi)

    def signal_geodesic(self, phi_a, phi_b):
        diff = np.asarray(phi_a) - np.asarray(phi_b)
        return np.sqrt((diff**2).sum(axis=1))

    def signal_candidate_cut(self, r):
        return r

    def extrinsic_diameter(self) -> float:
        return float(np.sqrt(np.sum(np.asarray(self.sides) ** 2)))

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=float)
        return lo, lo + np.asarray(self.sides, dtype=float)


@dataclass(frozen=True)
class Product(Manifold):
    """Isometric product of a signal factor and a nuisance fiber.

    Samples carry latent coordinates (phi, psi); augmentation resamples psi
    uniformly on the fiber and leaves phi untouched.
    """

    signal: Manifold
    nuisance: Manifold

    def __post_init__(self):
        for factor in (self.signal, self.nuisance):
            if isinstance(factor, (Product, OffsetCopy)):
                raise ValueError("product factors must be plain manifolds")
            if factor.d_v != 0:
                raise ValueError("product factors cannot have fibers of their own")
        if not self.nuisance.uniform_signal:
            raise ValueError("the fiber density must be uniform")

    @property
    def ambient_dim(self):
        return self.signal.ambient_dim + self.nuisance.ambient_dim

    @property
    def d(self):
        return self.signal.d + self.nuisance.d

    @property
    def d_s(self):
        return self.signal.d

    @property
    def d_v(self):
        return self.nuisance.d

    @property
    def volume(self):
        return self.signal.volume * self.nuisance.volume

    @property
    def signal_volume(self):
        return self.signal.volume

    @property
    def nuisance_volume(self):
        return self.nuisance.volume

    @property
    def reach(self):
        return min(self.signal.reach, self.nuisance.reach)

    @property
    def injectivity_radius(self):
        return min(self.signal.injectivity_radius, self.nuisance.injectivity_radius)

    @property
    def curvature_bound(self):
        return max(self.signal.curvature_bound, self.nuisance.curvature_bound)

    @property
    def density_bound(self):
        return self.signal.density_bound

    def sample_latent(self, rng, n):
        phi, _ = self.signal.sample_latent(rng, n)
        psi, _ = self.nuisance.sample_latent(rng, n)
        return phi, psi

    def sample_nuisance(self, rng, n):
        psi, _ = self.nuisance.sample_latent(rng, n)
        return psi

    def embed(self, phi, psi):
        xs = self.signal.embed(phi, np.empty((len(phi), 0)))
        xv = self.nuisance.embed(psi, np.empty((len(psi), 0)))
        return np.c_[xs, xv]

    def signal_geodesic(self, phi_a, phi_b):
        return self.signal.signal_geodesic(phi_a, phi_b)

    def signal_candidate_cut(self, r):
        return self.signal.signal_candidate_cut(r)

    def fiber_extrinsic_diameter(self):
        return self.nuisance.extrinsic_diameter()

    def lb_modes(self, count, signal_only=False):
        if signal_only:
            return self.signal.lb_modes(count, signal_only=False)
        smodes = self.signal.lb_modes(count, signal_only=False)
        vmodes = self.nuisance.lb_modes(count, signal_only=False)
        combined = []
        for ls, evs, ks in smodes:
            for lv, evv, kv in vmodes:
                combined.append((ls + lv, _product_evaluator(evs, evv), f"{ks}*{kv}"))
        combined.sort(key=lambda t: (t[0], t[2]))
        return combined[:count]


def _product_evaluator(ev_signal, ev_nuisance):
    def ev(phi, psi):
        return ev_signal(phi, None) * ev_nuisance(psi, None)

    return ev


@dataclass(frozen=True)
class OffsetCopy(Manifold):
    """A base manifold shifted to height `offset` along one fresh ambient axis."""

    base: Manifold
    offset: float = 0.0

    def __post_init__(self):
        if isinstance(self.base, OffsetCopy):
            raise ValueError("offset copies do not nest")

    @property
    def ambient_dim(self):
        return self.base.ambient_dim + 1

    @property
    def d(self):
        return self.base.d

    @property
    def d_s(self):
        return self.base.d_s

    @property
    def d_v(self):
        return self.base.d_v

    @property
    def volume(self):
        return self.base.volume

    @property
    def signal_volume(self):
        return self.base.signal_volume

    @property
    def nuisance_volume(self):
        return self.base.nuisance_volume

    @property
    def reach(self):
        return self.base.reach

    @property
    def injectivity_radius(self):
        return self.base.injectivity_radius

    @property
    def curvature_bound(self):
        return self.base.curvature_bound

    @property
    def density_bound(self):
        return self.base.density_bound

    def sample_latent(self, rng, n):
        return self.base.sample_latent(rng, n)

    def sample_nuisance(self, rng, n):
        return self.base.sample_nuisance(rng, n)

    def embed(self, phi, psi):
        xb = self.base.embed(phi, psi)
        return np.c_[xb, np.full(len(xb), self.offset)]

    def signal_geodesic(self, phi_a, phi_b):
        return self.base.signal_geodesic(phi_a, phi_b)

    def signal_candidate_cut(self, r):
        return self.base.signal_candidate_cut(r)

    def fiber_extrinsic_diameter(self):
        return self.base.fiber_extrinsic_diameter()

    def lb_modes(self, count, signal_only=False):
        return self.base.lb_modes(count, signal_only=signal_only)


@dataclass(frozen=True)
class CubeMinusSlab(Manifold):
    """The unit cube [0,1]^d with grid cell Q_l removed.

    The cube is divided into M^d congruent cells; `cell` indexes them
    (1-based, row-major).  Uniform density on the remaining region.  Used by
    the testing-lower-bound constructions together with the centered subcube
    of the removed cell.
    """

    dim: int
    grid: int
    cell: int

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("grid count must be at least 2")
        if not 1 <= self.cell <= self.grid**self.dim:
            raise ValueError("cell index out of range")

    @property
    def ambient_dim(self):
        return self.dim

    @property
    def d(self):
        return self.dim

    @property
    def d_s(self):
        return self.dim

    d_v = 0

    @property
    def volume(self):
        return 1.0 - self.grid ** (-self.dim)

    reach = math.inf
    injectivity_radius = math.inf
    curvature_bound = 0.0

    @property
    def removed_cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.unravel_index(self.cell - 1, (self.grid,) * self.dim)
        lo = np.asarray(idx, dtype=float) / self.grid
        return lo, lo + 1.0 / self.grid

    def contains(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.removed_cell_bounds
        x = np.atleast_2d(x)
        in_cube = np.all((x >= 0.0) & (x <= 1.0), axis=1)
        in_cell = np.all((x > lo) & (x < hi), axis=1)
        return in_cube & ~in_cell

    def sample_latent(self, rng, n):
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            m = max(n - filled, 16)
            cand = rng.uniform(0.0, 1.0, (m, self.dim))
            keep = cand[self.contains(cand)]
            take = min(len(keep), n - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out, np.empty((n, 0))

    def sample_nuisance(self, rng, n):
        return np.empty((n, 0))

    def embed(self, phi, psi):
        return np.asarray(phi)

    def signal_geodesic(self, phi_a, phi_b):
        raise ClosedFormError("no closed-form geodesics on a cube with a hole")

    def signal_candidate_cut(self, r):
        return r


# ---------------------------------------------------------------------------
# the mixture model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiManifoldModel:
    """Union of K component manifolds with mixture weights."""

    components: tuple[Manifold, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if len(comps) < 1:
            raise ValueError("need at least one component")
        if len(w) != len(comps):
            raise ValueError("one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        dims = {(c.ambient_dim) for c in comps}
        if len(dims) != 1:
            raise ValueError("components must share the ambient dimension")
        intr = {(c.d, c.d_s, c.d_v) for c in comps}
        if len(intr) != 1:
            raise ValueError("components must share intrinsic dimensions")

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def ambient_dim(self) -> int:
        return self.components[0].ambient_dim

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def d_s(self) -> int:
        return self.components[0].d_s

    @property
    def d_v(self) -> int:
        return self.components[0].d_v

    def fiber_extrinsic_diameter(self) -> float:
        return max(c.fiber_extrinsic_diameter() for c in self.components)


@dataclass(frozen=True)
class Sample:
    """One embedded point with its latent coordinates and true component."""

    x: np.ndarray
    k: int
    phi: np.ndarray
    psi: np.ndarray


@dataclass
class PointCloud:
    """n samples stored columnwise, immutable by convention after creation."""

    model: MultiManifoldModel
    xs: np.ndarray
    ks: np.ndarray
    phis: np.ndarray
    psis: np.ndarray
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.xs)

    @property
    def n(self) -> int:
        return len(self.xs)

    def sample(self, i: int) -> Sample:
        return Sample(self.xs[i], int(self.ks[i]), self.phis[i], self.psis[i])

    def component_counts(self) -> np.ndarray:
        return np.bincount(self.ks, minlength=self.model.K)


def sample_cloud(model: MultiManifoldModel, n: int, seed: int) -> PointCloud:
    """Draw n i.i.d. samples: component by the mixture weights, then latent
    coordinates by the component's signal/nuisance densities."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    ks = stream(seed, "component").choice(model.K, size=n, p=np.asarray(model.weights))
    xs = np.empty((n, model.ambient_dim))
    phis = np.empty((n, model.d_s))
    psis = np.empty((n, model.d_v))
    for k, comp in enumerate(model.components):
        idx = np.nonzero(ks == k)[0]
        if len(idx) == 0:
            continue
        phi, psi = comp.sample_latent(stream(seed, "latent", k), len(idx))
        phis[idx] = phi
        psis[idx] = psi
        xs[idx] = comp.embed(phi, psi)
    return PointCloud(model, xs, ks.astype(np.int64), phis, psis, seed)


def augment(model: MultiManifoldModel, s: Sample, seed: int) -> Sample:
    """Resample the fiber coordinate of one sample; phi and k are preserved.

    Trivial fibers (d_v = 0) return the sample unchanged.
    """
    comp = model.components[s.k]
    if comp.d_v == 0:
        return s
    psi = comp.sample_nuisance(stream(seed, "augment"), 1)[0]
    x = comp.embed(s.phi.reshape(1, -1), psi.reshape(1, -1))[0]
    return Sample(x, s.k, s.phi.copy(), psi)


def augment_cloud(cloud: PointCloud, seed: int) -> PointCloud:
    """Augment every sample of a cloud independently (vectorized)."""
    model = cloud.model
    if model.d_v == 0:
        return cloud
    xs = cloud.xs.copy()
    psis = cloud.psis.copy()
    for k, comp in enumerate(model.components):
        idx = np.nonzero(cloud.ks == k)[0]
        if len(idx) == 0:
            continue
        psi = comp.sample_nuisance(stream(seed, "augment", k), len(idx))
        psis[idx] = psi
        xs[idx] = comp.embed(cloud.phis[idx], psi)
    return PointCloud(model, xs, cloud.ks, cloud.phis, psis, seed)


# ---------------------------------------------------------------------------
# separation distances
# ---------------------------------------------------------------------------


def _strip_offset(m: Manifold) -> tuple[Manifold, float]:
    if isinstance(m, OffsetCopy):
        return m.base, m.offset
    return m, None


def _pair_separation(a: Manifold, b: Manifold) -> float:
    base_a, off_a = _strip_offset(a)
    base_b, off_b = _strip_offset(b)
    if off_a is not None and off_b is not None and base_a == base_b:
        return abs(off_a - off_b)
    if isinstance(a, Circle) and isinstance(b, Circle):
        dc = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
        if dc >= a.radius + b.radius:
            return dc - a.radius - b.radius
        inner, outer = sorted((a.radius, b.radius))
        if dc + inner <= outer:
            return outer - dc - inner
        return 0.0
    if isinstance(a, Box) and isinstance(b, Box):
        alo, ahi = a.bounds
        blo, bhi = b.bounds
        gaps = np.maximum(0.0, np.maximum(alo - bhi, blo - ahi))
        return float(np.sqrt((gaps**2).sum()))
    if isinstance(a, CubeMinusSlab) and isinstance(b, Box):
        qlo, qhi = a.removed_cell_bounds
        blo, bhi = b.bounds
        if np.any(blo < qlo) or np.any(bhi > qhi):
            raise ValueError("companion box must sit inside the removed cell")
        return float(min(np.min(blo - qlo), np.min(qhi - bhi)))
    if isinstance(a, Box) and isinstance(b, CubeMinusSlab):
        return _pair_separation(b, a)
    raise ValueError(
        f"no analytic separation rule for {type(a).__name__} / {type(b).__name__}"
    )


def min_separation(model: MultiManifoldModel) -> float:
    """Smallest Euclidean distance between any two components.

    A single-component model reports 0, matching the null-hypothesis
    convention for "one manifold".
    """
    if model.K == 1:
        return 0.0
    best = math.inf
    for i in range(model.K):
        for j in range(i + 1, model.K):
            best = min(best, _pair_separation(model.components[i], model.components[j]))
    return best


def parallel_copies_model(base: Manifold, z: float) -> MultiManifoldModel:
    """Two copies of `base` at heights 0 and z along a fresh ambient axis."""
    if z <= 0:
        raise ValueError("the copies must be strictly separated (z > 0)")
    return MultiManifoldModel(
        components=(OffsetCopy(base, 0.0), OffsetCopy(base, z)),
        weights=(0.5, 0.5),
    )


def lowerbound_model(dim: int, grid: int, cell: int) -> MultiManifoldModel:
    """Unit cube with one grid cell removed, plus the centered third-size
    subcube of that cell.  Uniform density over the union, so the component
    weights are proportional to volumes; the separation is 1/(3*grid)."""
    hole = CubeMinusSlab(dim=dim, grid=grid, cell=cell)
    lo, hi = hole.removed_cell_bounds
    center = (lo + hi) / 2.0
    side = 1.0 / (3.0 * grid)
    inner = Box(sides=(side,) * dim, origin=tuple(center - side / 2.0))
    v1 = hole.volume
    v2 = inner.volume
    return MultiManifoldModel(
        components=(hole, inner), weights=(v1 / (v1 + v2), v2 / (v1 + v2))
    )


# ---------------------------------------------------------------------------
# closed-form spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticEigenfunction:
    """One eigenpair of the componentwise weighted Laplacian.

    `operator` is "full" for the operator acting on the embedded manifolds
    and "signal" for the operator acting on the augmentation-invariant
    factors.  Eigenfunctions are supported on a single component and carry
    the 1/sqrt(w_k) normalization that makes them unit-norm under the
    mixture measure.
    """

    eigenvalue: float
    group: int
    operator: str
    component: int
    _evaluator: Callable = field(repr=False)
    key: str = ""

    def evaluate(self, cloud: PointCloud, ignore_component: bool = False) -> np.ndarray:
        vals = self._evaluator(cloud.phis, cloud.psis)
        if ignore_component:
            return vals
        mask = cloud.ks == self.component
        return np.where(mask, vals, 0.0)


def analytic_spectrum(
    model: MultiManifoldModel, operator: str, count: int
) -> list[AnalyticEigenfunction]:
    """First `count` eigenpairs of the tensorized operator, sorted ascending.

    operator: "full" weights component k by w_k / Vol(M_k); "signal" uses the
    invariant factors with the extra 1/Vol(fiber) prefactor.  Requires
    uniform densities and component kinds with closed-form modes.
    """
    if operator not in ("full", "signal"):
        raise ValueError("operator must be 'full' or 'signal'")
    for comp in model.components:
        if not comp.uniform_signal:
            raise ClosedFormError("closed-form spectra require uniform densities")
    entries = []
    for k, comp in enumerate(model.components):
        w = model.weights[k]
        modes = comp.lb_modes(count, signal_only=(operator == "signal"))
        scale = w / comp.volume
        for lb, ev, key in modes:
            entries.append((lb * scale, k, key, _component_evaluator(ev, w)))
    entries.sort(key=lambda t: (t[0], t[1], t[2]))
    entries = entries[:count]

    out = []
    group = -1
    prev = None
    for lam, k, key, ev in entries:
        if prev is None or abs(lam - prev) > 1e-9 * max(1.0, abs(lam)):
            group += 1
        prev = lam
        out.append(
            AnalyticEigenfunction(
                eigenvalue=lam,
                group=group,
                operator=operator,
                component=k,
                _evaluator=ev,
                key=key,
            )
        )
    return out


def _component_evaluator(ev, w):
    root_w = math.sqrt(w)

    def scaled(phi, psi):
        return ev(phi, psi) / root_w

    return scaled


def reference_groups(spectrum: Sequence[AnalyticEigenfunction]) -> list[slice]:
    """Contiguous index ranges of equal-eigenvalue groups."""
    groups = []
    start = 0
    for i in range(1, len(spectrum) + 1):
        if i == len(spectrum) or spectrum[i].group != spectrum[start].group:
            groups.append(slice(start, i))
            start = i
    return groups


def spectrum_values(
    spectrum: Sequence[AnalyticEigenfunction],
    cloud: PointCloud,
    ignore_component: bool = False,
) -> np.ndarray:
    """Evaluate a spectrum at the cloud's samples, one column per eigenpair."""
    return np.column_stack(
        [f.evaluate(cloud, ignore_component=ignore_component) for f in spectrum]
    )


# ---------------------------------------------------------------------------
# regime diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeReport:
    radius: float
    radius_cap: float
    radius_ok: bool
    ratio_full: float
    ratio_signal: float
    separation: float
    separation_ok: bool
    density_bound: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def validate_regime(model: MultiManifoldModel, r: float, n: int) -> RegimeReport:
    """Report how (r, n) sits relative to the kernel-radius cap, the
    connectivity-rate scales in both intrinsic dimensions, and the
    component separation.  Natural log throughout; worst case over
    components for the geometric constants."""
    cap_terms = [1.0]
    for comp in model.components:
        cap_terms.append(comp.injectivity_radius)
        if comp.curvature_bound > 0:
            cap_terms.append(comp.curvature_bound**-0.5)
        cap_terms.append(comp.reach / 2.0)
    cap = min(cap_terms)
    rate = math.log(n) / n
    delta = min_separation(model)
    return RegimeReport(
        radius=r,
        radius_cap=cap,
        radius_ok=2.0 * r < cap,
        ratio_full=r / rate ** (1.0 / model.d),
        ratio_signal=r / rate ** (1.0 / model.d_s),
        separation=delta,
        separation_ok=delta > r,
        density_bound=max(c.density_bound for c in model.components),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _manifold_to_dict(m: Manifold) -> dict:
    if isinstance(m, Circle):
        return {
            "kind": "circle",
            "radius": m.radius,
            "center": list(m.center),
            "tilt": m.tilt,
        }
    if isinstance(m, Box):
        return {"kind": "box", "sides": list(m.sides), "origin": list(m.origin)}
    if isinstance(m, Product):
        return {
            "kind": "product",
            "signal": _manifold_to_dict(m.signal),
            "nuisance": _manifold_to_dict(m.nuisance),
        }
    if isinstance(m, OffsetCopy):
        return {
            "kind": "offset-copy",
            "base": _manifold_to_dict(m.base),
            "offset": m.offset,
        }
    if isinstance(m, CubeMinusSlab):
        return {
            "kind": "cube-minus-slab",
            "dim": m.dim,
            "grid": m.grid,
            "cell": m.cell,
        }
    raise TypeError(f"cannot serialize {type(m).__name__}")


def _manifold_from_dict(spec: dict) -> Manifold:
    kind = spec["kind"]
    if kind == "circle":
        return Circle(
            radius=spec["radius"],
            center=tuple(spec.get("center", (0.0, 0.0))),
            tilt=spec.get("tilt", 0.0),
        )
    if kind == "box":
        return Box(sides=tuple(spec["sides"]), origin=tuple(spec.get("origin", ())))
    if kind == "product":
        return Product(
            signal=_manifold_from_dict(spec["signal"]),
            nuisance=_manifold_from_dict(spec["nuisance"]),
        )
    if kind == "offset-copy":
        return OffsetCopy(base=_manifold_from_dict(spec["base"]), offset=spec["offset"])
    if kind == "cube-minus-slab":
        return CubeMinusSlab(dim=spec["dim"], grid=spec["grid"], cell=spec["cell"])
    raise ValueError(f"unknown manifold kind {kind!r}")


manifold_to_dict = _manifold_to_dict
manifold_from_dict = _manifold_from_dict


def model_to_dict(model: MultiManifoldModel) -> dict:
    return {
        "components": [_manifold_to_dict(c) for c in model.components],
        "weights": list(model.weights),
    }


def model_from_dict(spec: dict) -> MultiManifoldModel:
    return MultiManifoldModel(
        components=tuple(_manifold_from_dict(c) for c in spec["components"]),
        weights=tuple(spec["weights"]),
    )


def save_model(model: MultiManifoldModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MultiManifoldModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def cloud_to_csv(cloud: PointCloud, path) -> None:
    """Columnar export: index, component, embedded coordinates, latents."""
    D, ds, dv = cloud.model.ambient_dim, cloud.model.d_s, cloud.model.d_v
    header = (
        ["index", "k"]
        + [f"x_{j + 1}" for j in range(D)]
        + [f"phi_{j + 1}" for j in range(ds)]
        + [f"psi_{j + 1}" for j in range(dv)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(cloud.n):
            row = [i, int(cloud.ks[i])]
            row += [repr(float(v)) for v in cloud.xs[i]]
            row += [repr(float(v)) for v in cloud.phis[i]]
            row += [repr(float(v)) for v in cloud.psis[i]]
            writer.writerow(row)


def cloud_from_csv(path, model: MultiManifoldModel) -> PointCloud:
    D, ds, dv = model.ambient_dim, model.d_s, model.d_v
    ks, xs, phis, psis = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            ks.append(int(row[1]))
            vals = [float(v) for v in row[2:]]
            xs.append(vals[:D])
            phis.append(vals[D : D + ds])
            psis.append(vals[D + ds : D + ds + dv])
    n = len(ks)
    return PointCloud(
        model,
        np.asarray(xs).reshape(n, D),
        np.asarray(ks, dtype=np.int64),
        np.asarray(phis).reshape(n, ds),
        np.asarray(psis).reshape(n, dv),
    )
