"""Binary classification on frozen representations: label patterns over
components, full-batch logistic gradient descent, the hard-margin oracle it
converges toward in direction, and the misclassification rate."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .manifolds import PointCloud, Sample
from .spectral import EmbeddingMatrix, extend

__all__ = [
    "LabelPattern",
    "LabeledSet",
    "LogisticModel",
    "MaxMarginResult",
    "assign_labels",
    "logistic_loss",
    "logistic_gradient",
    "logistic_gd",
    "max_margin_oracle",
    "separability_margin",
    "misclassification",
]


@dataclass(frozen=True)
class LabelPattern:
    """One sign per component; samples inherit the sign of their manifold."""

    signs: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be -1 or +1")

    @property
    def degenerate(self) -> bool:
        return len(set(self.signs)) < 2


@dataclass
class LabeledSet:
    """m feature vectors with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray
    independent: bool = True

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if len(self.features) != len(self.labels) or len(self.labels) < 1:
            raise ValueError("need matching, nonempty features and labels")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")

    @property
    def m(self) -> int:
        return len(self.labels)


@dataclass
class LogisticModel:
    """Gradient-descent iterate with a power-of-two training trace."""

    beta: np.ndarray
    trace_steps: list[int] = field(default_factory=list)
    trace_loss: list[float] = field(default_factory=list)
    trace_norm: list[float] = field(default_factory=list)
    trace_cosine: list[float] = field(default_factory=list)


def assign_labels(pattern: LabelPattern, samples) -> np.ndarray:
    """Labels Y_i = pattern[k_i] for samples or a whole cloud."""
    if isinstance(samples, PointCloud):
        ks = samples.ks
    else:
        ks = np.asarray([s.k if isinstance(s, Sample) else int(s) for s in samples])
    signs = np.asarray(pattern.signs)
    if ks.max(initial=0) >= len(signs):
        raise ValueError("sample component index outside the pattern")
    return signs[ks].astype(float)


def logistic_loss(beta: np.ndarray, data: LabeledSet) -> float:
    z = data.labels * (data.features @ beta)
    # ln(1 + exp(-z)) without overflow
    return float(np.mean(np.logaddexp(0.0, -z)))


def logistic_gradient(beta: np.ndarray, data: LabeledSet) -> np.ndarray:
    z = data.labels * (data.features @ beta)
    sig = 0.5 * (1.0 - np.tanh(0.5 * z))  # sigmoid(-z), stable
    return -(data.features * (data.labels * sig)[:, None]).mean(axis=0)


def logistic_gd(data: LabeledSet, T: int, eta: float = 1.0) -> LogisticModel:
    """Full-batch gradient descent from beta = 0 with constant step size.

    The trace records loss, |beta|, and the direction cosine against the
    final iterate at every power-of-two step.
    """
    if T < 1:
        raise ValueError("need at least one step")
    if eta <= 0:
        raise ValueError("step size must be positive")
    S = data.features.shape[1]
    beta = np.zeros(S)
    checkpoints = []
    record = {0}
    p = 1
    while p <= T:
        record.add(p)
        p *= 2
    record.add(T)
    for t in range(1, T + 1):
        beta = beta - eta * logistic_gradient(beta, data)
        if t in record:
            loss = logistic_loss(beta, data)
            if not math.isfinite(loss):
                raise FloatingPointError(f"loss diverged at step {t}")
            checkpoints.append((t, loss, float(np.linalg.norm(beta)), beta.copy()))
    model = LogisticModel(beta=beta)
    bnorm = np.linalg.norm(beta)
    for t, loss, norm, b in checkpoints:
        model.trace_steps.append(t)
        model.trace_loss.append(loss)
        model.trace_norm.append(norm)
        cos = float(b @ beta / (np.linalg.norm(b) * bnorm)) if norm > 0 and bnorm > 0 else 0.0
        model.trace_cosine.append(cos)
    return model


@dataclass
class MaxMarginResult:
    feasible: bool
    beta: Optional[np.ndarray] = None
    support: Optional[tuple[int, ...]] = None

    @property
    def margin(self) -> Optional[float]:
        if not self.feasible:
            return None
        return 1.0 / float(np.linalg.norm(self.beta))


def _check_margins(beta: np.ndarray, A: np.ndarray, tol: float) -> bool:
    return bool(np.all(A @ beta >= 1.0 - tol))


def max_margin_oracle(data: LabeledSet, tol: float = 1e-9) -> MaxMarginResult:
    """Minimum-norm beta with Y_i beta^T x_i >= 1, or infeasible.

    For m <= 20 the optimum is found exactly by enumerating candidate active
    sets: the optimal beta is a nonnegative combination of active rows, so
    every subset of rows yields one candidate via its normal equations and
    the best feasible candidate with nonnegative multipliers is the optimum.
    Larger problems run projected gradient descent on the squared norm with
    feasibility restoration.
    """
    A = data.features * data.labels[:, None]  # rows y_i x_i
    m, S = A.shape
    if m <= 20:
        best = None
        for size in range(1, min(m, S + 1) + 1):
            for subset in itertools.combinations(range(m), size):
                sub = A[list(subset)]
                G = sub @ sub.T
                try:
                    alpha = np.linalg.solve(G, np.ones(size))
                except np.linalg.LinAlgError:
                    alpha, *_ = np.linalg.lstsq(G, np.ones(size), rcond=None)
                if np.any(alpha < -tol):
                    continue
                beta = sub.T @ alpha
                if not _check_margins(beta, A, 1e-7):
                    continue
                norm = np.linalg.norm(beta)
                if best is None or norm < best[0] - tol:
                    best = (norm, beta, subset)
        if best is None:
            return MaxMarginResult(feasible=False)
        return MaxMarginResult(feasible=True, beta=best[1], support=best[2])

    # dual coordinate ascent for larger sets: maximize sum(alpha) - |beta|^2/2
    # over alpha >= 0 with beta = A^T alpha; projected one coordinate at a time
    norms2 = (A**2).sum(axis=1)
    if np.any(norms2 == 0):
        # a zero feature row can never meet its margin constraint
        return MaxMarginResult(feasible=False)
    alpha = np.zeros(m)
    beta = np.zeros(S)
    for sweep in range(2000):
        delta_max = 0.0
        for i in range(m):
            g = 1.0 - A[i] @ beta
            step = g / norms2[i]
            new_alpha = max(0.0, alpha[i] + step)
            delta = new_alpha - alpha[i]
            if delta != 0.0:
                beta = beta + delta * A[i]
                alpha[i] = new_alpha
                delta_max = max(delta_max, abs(delta) * math.sqrt(norms2[i]))
        if delta_max < tol:
            break
    margins = A @ beta
    if margins.min() >= 1.0 - 1e-6:
        # restore exact feasibility by scaling onto the worst constraint
        beta = beta / min(margins.min(), 1.0)
        return MaxMarginResult(feasible=True, beta=beta)
    return MaxMarginResult(feasible=False)


def separability_margin(data: LabeledSet) -> Optional[float]:
    """Geometric margin 1/|beta*| of the hard-margin solution, or None."""
    result = max_margin_oracle(data)
    return result.margin


def misclassification(
    model: LogisticModel,
    embedding: EmbeddingMatrix,
    test_cloud: PointCloud,
    pattern: LabelPattern,
    r: Optional[float] = None,
) -> float:
    """Monte Carlo misclassification rate over a held-out cloud.

    Test points are mapped through the out-of-sample extension of the
    embedding; the classifier predicts +1 on strictly positive scores and -1
    otherwise (ties count as -1).
    """
    truth = assign_labels(pattern, test_cloud)
    feats = extend(embedding, test_cloud.xs, r=r)
    scores = feats @ model.beta
    pred = np.where(scores > 0.0, 1.0, -1.0)
    return float(np.mean(pred != truth))
