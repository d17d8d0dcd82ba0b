"""manisep: spectral representations on synthetic multi-manifold data.

Builds radius neighborhood graphs and augmentation-averaged weight matrices
over sampled multi-manifold models, extracts Laplacian eigenvector
representations, trains linear classifiers on top of them, and evaluates
the information-theoretic limits of manifold separation — all with seeded,
reproducible experiment sweeps.
"""

__version__ = "0.1.0"

from . import aiml, downstream, graph, harness, lowerbound, manifolds, spectral

__all__ = [
    "aiml",
    "downstream",
    "graph",
    "harness",
    "lowerbound",
    "manifolds",
    "spectral",
    "__version__",
]
