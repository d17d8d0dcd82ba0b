"""Information-theoretic limits for telling one manifold from two.

The construction carves one of M^dim grid cells out of the unit cube and
keeps its centered third-size subcube; the chi-squared divergence between
"uniform cube" and the uniform mixture over all carved instances admits a
closed-form bound, and the matching likelihood-ratio test can be simulated
directly.  Both are evaluated here, in the full dimension and in the
invariant dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .rng import stream

__all__ = [
    "LowerBoundConfig",
    "chi2_bound",
    "aiml_chi2_bound",
    "grid_schedule",
    "LrTestResult",
    "simulate_lr_test",
]


@dataclass(frozen=True)
class LowerBoundConfig:
    """Instance size for the carved-cube construction.

    dim is the effective dimension (the full intrinsic dimension, or the
    invariant dimension when fibers are observed); Delta is the volume of
    the ring between a grid cell and its kept subcube.
    """

    n: int
    dim: int
    grid: int

    def __post_init__(self):
        if self.n < 1 or self.dim < 1:
            raise ValueError("need n >= 1 and dim >= 1")
        if self.grid < 2:
            raise ValueError("grid count must be at least 2")
        if self.delta >= 0.5:
            raise ValueError("Delta must stay below 1/2")

    @property
    def cells(self) -> int:
        return self.grid**self.dim

    @property
    def delta(self) -> float:
        return self.grid ** (-self.dim) - (3 * self.grid) ** (-self.dim)


def grid_schedule(n: int, dim: int) -> int:
    """The grid count ceil((2n / log n)^(1/dim)) that drives the bound to 0."""
    return max(2, math.ceil((2.0 * n / math.log(n)) ** (1.0 / dim)))


def chi2_bound(cfg: LowerBoundConfig) -> float:
    """Closed-form chi-squared bound
    exp(n Delta/(1-Delta))/L + n Delta^2/((1-Delta) sqrt(1-2 Delta)).

    Evaluated in extended precision when the exponent is large enough to
    overflow doubles.
    """
    d = cfg.delta
    L = cfg.cells
    expo = cfg.n * d / (1.0 - d)
    tail = cfg.n * d * d / ((1.0 - d) * math.sqrt(1.0 - 2.0 * d))
    if expo > 700.0:
        import mpmath

        with mpmath.workdps(50):
            val = mpmath.e**expo / L + tail
            return float(val)
    return math.exp(expo) / L + tail


def aiml_chi2_bound(n: int, d_s: int, grid: int) -> float:
    """Same bound with the invariant dimension in place of the full one."""
    return chi2_bound(LowerBoundConfig(n=n, dim=d_s, grid=grid))


@dataclass
class LrTestResult:
    type1: float
    type2: float
    error_sum: float
    type1_se: float
    type2_se: float
    threshold: float
    trials: int
    alpha: float

    @property
    def error_sum_se(self) -> float:
        return math.hypot(self.type1_se, self.type2_se)


def _slab_occupancy(x: np.ndarray, grid: int, dim: int) -> np.ndarray:
    """Which carved-ring regions contain at least one of the points.

    Returns a boolean array over the M^dim cells: True where some point lies
    in the cell but outside its centered third-size subcube.
    """
    cells = np.clip((x * grid).astype(np.int64), 0, grid - 1)
    frac = x * grid - cells  # position within the cell, in [0, 1)
    in_subcube = np.all(np.abs(frac - 0.5) <= 1.0 / 6.0, axis=1)
    flat = np.ravel_multi_index(cells.T, (grid,) * dim)
    occupied = np.zeros(grid**dim, dtype=bool)
    occupied[flat[~in_subcube]] = True
    return occupied


def _mixture_likelihood(x: np.ndarray, cfg: LowerBoundConfig) -> float:
    """Averaged likelihood ratio (1/L) sum_l F_l at the observed points."""
    occupied = _slab_occupancy(x, cfg.grid, cfg.dim)
    free = cfg.cells - int(occupied.sum())
    # F_l = (1-Delta)^(-n) when no point hits ring l, else 0
    f = math.exp(-cfg.n * math.log1p(-cfg.delta))
    return f * free / cfg.cells


def _sample_alternative(cfg: LowerBoundConfig, cell: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points on the carved instance for the given cell."""
    idx = np.unravel_index(cell, (cfg.grid,) * cfg.dim)
    lo = np.asarray(idx, dtype=float) / cfg.grid
    hi = lo + 1.0 / cfg.grid
    center = (lo + hi) / 2.0
    side = 1.0 / (3.0 * cfg.grid)

    vol_inner = (3.0 * cfg.grid) ** (-cfg.dim)
    p_inner = vol_inner / (1.0 - cfg.delta)

    inner = rng.uniform(size=cfg.n) < p_inner
    out = np.empty((cfg.n, cfg.dim))
    n_in = int(inner.sum())
    if n_in:
        out[inner] = center - side / 2.0 + rng.uniform(size=(n_in, cfg.dim)) * side
    need = cfg.n - n_in
    filled = 0
    rows = np.nonzero(~inner)[0]
    while filled < need:
        m = max(need - filled, 16)
        cand = rng.uniform(size=(m, cfg.dim))
        in_cell = np.all((cand >= lo) & (cand < hi), axis=1)
        keep = cand[~in_cell]
        take = min(len(keep), need - filled)
        out[rows[filled : filled + take]] = keep[:take]
        filled += take
    return out


def simulate_lr_test(
    cfg: LowerBoundConfig,
    alpha: float,
    trials: int,
    seed: int = 0,
) -> LrTestResult:
    """Monte Carlo error rates of the averaged likelihood-ratio test.

    The threshold is the empirical (1-alpha) quantile of the statistic under
    the null (an independent calibration batch); type I is estimated on
    fresh null draws and type II on draws where a cell is picked uniformly
    and the data comes from the matching carved instance.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")

    def null_stats(tag: str) -> np.ndarray:
        vals = np.empty(trials)
        for t in range(trials):
            x = stream(seed, tag, t).uniform(size=(cfg.n, cfg.dim))
            vals[t] = _mixture_likelihood(x, cfg)
        return vals

    if alpha >= 1.0:
        threshold = -math.inf
    else:
        calib = null_stats("calib")
        threshold = float(np.quantile(calib, 1.0 - alpha, method="higher"))

    null = null_stats("null")
    type1 = float(np.mean(null > threshold))

    rejected = 0
    for t in range(trials):
        rng = stream(seed, "alt", t)
        cell = int(rng.integers(cfg.cells))
        x = _sample_alternative(cfg, cell, rng)
        if _mixture_likelihood(x, cfg) > threshold:
            rejected += 1
    type2 = 1.0 - rejected / trials

    se1 = math.sqrt(max(type1 * (1 - type1), 1e-12) / trials)
    se2 = math.sqrt(max(type2 * (1 - type2), 1e-12) / trials)
    return LrTestResult(
        type1=type1,
        type2=type2,
        error_sum=type1 + type2,
        type1_se=se1,
        type2_se=se2,
        threshold=threshold,
        trials=trials,
        alpha=alpha,
    )
