"""Diagonal-covariance Gaussian mixture modeling.

Provides the universal background model (UBM) estimator trained by EM
with k-means++ initialization, posterior (responsibility) computation,
mean-only MAP adaptation of target models, and the background-normalized
log-likelihood-ratio score used for verification trials.

All likelihood work is done in the log domain so finite inputs with
floored variances never produce non-finite values.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

_LOG_2PI = np.log(2.0 * np.pi)


class DiagGmm(BaseEstimator):
    """Gaussian mixture with diagonal covariances.

    Parameters
    ----------
    n_components : number of mixture components.
    n_iters : EM iterations after initialization.
    convergence_tol : relative change in total log-likelihood below
        which EM stops early.
    variance_floor_frac : per-dimension variance floor, as a fraction of
        the global per-dimension variance of the training data.
    kmeans_iters : Lloyd iterations used to refine the k-means++ seeding.
    random_state : seed for initialization.

    Fitted attributes: ``weights_`` (K,), ``means_`` (K, d),
    ``variances_`` (K, d), and ``log_likelihoods_``, the total training
    log-likelihood recorded at every EM iteration (non-decreasing).
    """

    def __init__(
        self,
        n_components: int = 512,
        n_iters: int = 20,
        convergence_tol: float = 0.0,
        variance_floor_frac: float = 1e-3,
        kmeans_iters: int = 10,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.n_iters = n_iters
        self.convergence_tol = convergence_tol
        self.variance_floor_frac = variance_floor_frac
        self.kmeans_iters = kmeans_iters
        self.random_state = random_state

    @classmethod
    def from_params(cls, weights, means, variances) -> "DiagGmm":
        """Build a model directly from parameter arrays."""
        weights = np.asarray(weights, dtype=np.float64)
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        if weights.ndim != 1 or means.ndim != 2 or variances.shape != means.shape:
            raise ValueError("expected weights (K,), means (K, d), variances (K, d)")
        if len(weights) != means.shape[0]:
            raise ValueError("weights and means disagree on component count")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-6:
            raise ValueError("weights must be non-negative and sum to 1")
        if np.any(variances <= 0):
            raise ValueError("variances must be strictly positive")
        model = cls(n_components=len(weights))
        model.weights_ = weights / weights.sum()
        model.means_ = means
        model.variances_ = variances
        model.log_likelihoods_ = []
        return model

    @property
    def dim(self) -> int:
        check_is_fitted(self, "means_")
        return self.means_.shape[1]

    # ------------------------------------------------------------------
    # likelihoods and posteriors

    def _check_dim(self, d: int):
        check_is_fitted(self, "means_")
        if d != self.means_.shape[1]:
            raise ValueError(f"feature dim {d} does not match model dim {self.means_.shape[1]}")

    def component_log_densities(self, features: np.ndarray) -> np.ndarray:
        """Per-component Gaussian log-densities, shape (n_frames, K)."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        self._check_dim(features.shape[1])
        inv_var = 1.0 / self.variances_
        # log N(x; mu_i, diag(var_i)) expanded so a single GEMM carries
        # the cross term; variances are shared across calls.
        const = -0.5 * (
            features.shape[1] * _LOG_2PI
            + np.log(self.variances_).sum(axis=1)
            + np.sum(self.means_**2 * inv_var, axis=1)
        )
        quad = features**2 @ (0.5 * inv_var).T
        cross = features @ (self.means_ * inv_var).T
        return const[None, :] + cross - quad

    def log_density(self, x: np.ndarray):
        """Log densities for a single frame.

        Returns (per-component log p_i(x), total log p(x)) where the
        total is logsumexp over log w_i + log p_i(x).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("log_density expects a single feature vector")
        comp = self.component_log_densities(x[None, :])[0]
        total = logsumexp(comp + np.log(self.weights_))
        return comp, float(total)

    def log_likelihood(self, features: np.ndarray) -> np.ndarray:
        """Per-frame total log-likelihood log p(x_t), shape (n_frames,)."""
        comp = self.component_log_densities(features)
        return logsumexp(comp + np.log(self.weights_)[None, :], axis=1)

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        """Component posteriors Pr(i | x_t), shape (n_frames, K).

        Rows sum to one; computed in the log domain.
        """
        comp = self.component_log_densities(features)
        log_joint = comp + np.log(self.weights_)[None, :]
        log_joint -= logsumexp(log_joint, axis=1, keepdims=True)
        return np.exp(log_joint)

    # ------------------------------------------------------------------
    # training

    def fit(self, X, y=None) -> "DiagGmm":
        """Train by EM on frames.

        ``X`` is a (n_frames, d) matrix or a sequence of such matrices
        (stacked in order, so results are reproducible for a fixed
        seed and input order).
        """
        if isinstance(X, (list, tuple)):
            if len(X) == 0:
                raise ValueError("empty training corpus")
            X = np.vstack([np.asarray(m, dtype=np.float64) for m in X])
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("training data must be (n_frames, dim)")
        n, d = X.shape
        K = self.n_components
        if n < K:
            raise ValueError(f"insufficient data: {n} frames for {K} components")

        rng = np.random.default_rng(self.random_state)
        global_var = np.maximum(X.var(axis=0), np.finfo(np.float64).tiny)
        floor = self.variance_floor_frac * global_var

        means = _kmeans(X, K, self.kmeans_iters, rng)
        self.weights_ = np.full(K, 1.0 / K)
        self.means_ = means
        self.variances_ = np.tile(np.maximum(global_var, floor), (K, 1))

        lls = []
        for _ in range(self.n_iters):
            comp = self.component_log_densities(X)
            log_joint = comp + np.log(self.weights_)[None, :]
            frame_ll = logsumexp(log_joint, axis=1)
            resp = np.exp(log_joint - frame_ll[:, None])
            lls.append(float(frame_ll.sum()))
            if (
                self.convergence_tol > 0
                and len(lls) > 1
                and abs(lls[-1] - lls[-2]) <= self.convergence_tol * abs(lls[-2])
            ):
                break

            nk = resp.sum(axis=0)
            # A starved component is re-seeded at the worst-fit frame.
            dead = nk < 1e-6
            weights = nk / n
            means = resp.T @ X / np.maximum(nk, 1e-10)[:, None]
            variances = resp.T @ (X**2) / np.maximum(nk, 1e-10)[:, None] - means**2
            if dead.any():
                worst = int(np.argmin(frame_ll))
                for i in np.where(dead)[0]:
                    means[i] = X[worst]
                    variances[i] = global_var
                    weights[i] = 1.0 / n
                weights /= weights.sum()
            self.weights_ = weights
            self.means_ = means
            self.variances_ = np.maximum(variances, floor)

        lls.append(float(self.log_likelihood(X).sum()))
        self.log_likelihoods_ = lls
        return self


def _kmeans(X: np.ndarray, K: int, n_iters: int, rng) -> np.ndarray:
    """k-means++ seeding followed by Lloyd iterations; returns centers."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[k:] = X[rng.integers(n, size=K - k)]
            break
        centers[k] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))

    for _ in range(n_iters):
        dist = (
            np.sum(X**2, axis=1)[:, None]
            - 2.0 * X @ centers.T
            + np.sum(centers**2, axis=1)[None, :]
        )
        assign = np.argmin(dist, axis=1)
        for k in range(K):
            member = assign == k
            if member.any():
                centers[k] = X[member].mean(axis=0)
            else:
                centers[k] = X[np.argmax(np.min(dist, axis=1))]
    return centers


def map_adapt_means(ubm: DiagGmm, stats, relevance: float = 16.0) -> DiagGmm:
    """Mean-only MAP adaptation of the UBM toward observed statistics.

    Each adapted mean is the interpolation alpha_i * E_i +
    (1 - alpha_i) * mu_i with alpha_i = N_i / (N_i + relevance);
    weights and variances are copied from the UBM unchanged.
    """
    check_is_fitted(ubm, "means_")
    if relevance <= 0:
        raise ValueError("relevance factor must be positive")
    if stats.n.shape[0] != ubm.means_.shape[0] or stats.e.shape[1] != ubm.means_.shape[1]:
        raise ValueError("statistics shape does not match the UBM")
    alpha = stats.n / (stats.n + relevance)
    means = alpha[:, None] * stats.e + (1.0 - alpha)[:, None] * ubm.means_
    return DiagGmm.from_params(ubm.weights_.copy(), means, ubm.variances_.copy())


def score_gmm_ubm(
    target: DiagGmm, ubm: DiagGmm, test: np.ndarray, average: bool = True
) -> float:
    """Log-likelihood ratio of test frames: target model vs background.

    By default the ratio is averaged over frames so scores are
    comparable across test durations; ``average=False`` gives the raw
    summed ratio.
    """
    test = np.asarray(test, dtype=np.float64)
    if test.ndim != 2 or test.shape[0] == 0:
        raise ValueError("test features must be a non-empty (frames, dim) matrix")
    if target.means_.shape != ubm.means_.shape:
        raise ValueError("target and background models must share K and d")
    ratio = float(target.log_likelihood(test).sum() - ubm.log_likelihood(test).sum())
    return ratio / test.shape[0] if average else ratio
