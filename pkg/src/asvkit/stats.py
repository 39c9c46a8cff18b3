"""Baum-Welch sufficient statistics and the occupancy-based quality metric.

An utterance is summarized against a UBM by its zeroth-order component
occupancies N_i and occupancy-weighted frame means E_i. Normalizing the
occupancies by the frame count gives a vector that behaves like an
utterance-specific set of mixture weights; its L1 distance from the UBM
weights is the quality score (larger when the utterance covers the
model sparsely, as short segments do). Population summaries and a PCA
projection support variability analyses over utterance sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gmm import DiagGmm

UNOBSERVED_OCCUPANCY = 1e-10


@dataclass
class BwStats:
    """Sufficient statistics of one utterance under a UBM.

    ``n``: (K,) zeroth-order occupancies, summing to the frame count.
    ``e``: (K, d) occupancy-normalized first-order means.
    ``frames``: number of frames accumulated.
    ``unobserved``: (K,) mask of components with negligible occupancy,
    whose ``e`` rows were substituted with the UBM means.
    """

    n: np.ndarray
    e: np.ndarray
    frames: int
    unobserved: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.unobserved is None:
            self.unobserved = np.zeros(len(self.n), dtype=bool)


@dataclass
class NbsPopulation:
    """Per-component mean and standard deviation of normalized occupancies."""

    mean: np.ndarray
    std: np.ndarray
    label: str | None = None


def accumulate_bw(ubm: DiagGmm, features: np.ndarray) -> BwStats:
    """Accumulate zeroth- and first-order statistics for one utterance.

    N_i sums the component posteriors over frames; E_i is the
    posterior-weighted frame mean. A component that receives
    (numerically) no posterior mass gets E_i set to the UBM mean, so its
    centered first-order statistic is exactly zero downstream, and is
    flagged in ``unobserved``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("features must be a non-empty (frames, dim) matrix")
    post = ubm.posteriors(features)
    n = post.sum(axis=0)
    unobserved = n < UNOBSERVED_OCCUPANCY
    e = post.T @ features / np.maximum(n, UNOBSERVED_OCCUPANCY)[:, None]
    if unobserved.any():
        e[unobserved] = ubm.means_[unobserved]
    return BwStats(n=n, e=e, frames=features.shape[0], unobserved=unobserved)


def normalize_zeroth(stats: BwStats) -> np.ndarray:
    """Duration-normalized occupancies N_i / C; a (K,) vector summing to 1."""
    if stats.frames < 1:
        raise ValueError("statistics cover zero frames")
    return stats.n / stats.frames


def quality(nbs: np.ndarray, ubm: DiagGmm) -> float:
    """L1 distance between normalized occupancies and the UBM weights.

    Zero when the utterance occupies components exactly in proportion
    to the background weights; approaches 2 for maximally mismatched
    occupancy. Larger values indicate poorer statistics estimation.
    """
    nbs = np.asarray(nbs, dtype=np.float64)
    if nbs.shape != ubm.weights_.shape:
        raise ValueError(
            f"occupancy vector has {nbs.shape[0]} components, model has "
            f"{ubm.weights_.shape[0]}"
        )
    return float(np.abs(nbs - ubm.weights_).sum())


def nbs_population_stats(nbs_set, label: str | None = None) -> NbsPopulation:
    """Per-component sample mean and (unbiased) standard deviation."""
    rows = np.asarray(list(nbs_set), dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("need a non-empty collection of occupancy vectors")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.zeros(rows.shape[1])
    return NbsPopulation(mean=mean, std=std, label=label)


def pca_project(rows, n_components: int = 2):
    """Project row vectors onto their top principal components.

    Mean-centers the rows, eigendecomposes the sample covariance, and
    projects onto the leading eigenvectors (descending eigenvalue). Each
    basis vector's sign is fixed so its first nonzero coordinate is
    positive. Returns (projected (n, n_components), basis
    (dim, n_components)).
    """
    rows = np.asarray(list(rows), dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError("need at least two vectors for a PCA projection")
    if n_components > rows.shape[1]:
        raise ValueError("more components requested than dimensions available")
    centered = rows - rows.mean(axis=0)
    cov = centered.T @ centered / (rows.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    basis = eigvecs[:, order]
    for j in range(basis.shape[1]):
        nonzero = np.nonzero(basis[:, j])[0]
        if len(nonzero) and basis[nonzero[0], j] < 0:
            basis[:, j] = -basis[:, j]
    return centered @ basis, basis
