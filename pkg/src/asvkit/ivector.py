"""Total-variability subspace modeling and Gaussian PLDA.

The total-variability model explains an utterance's centered first-order
statistics as a low-rank factor model around the UBM mean supervector;
the posterior mean of the latent factor is the utterance's i-vector.
Gaussian PLDA then models i-vectors with a latent speaker subspace plus
a full-covariance residual, and scores verification trials with the
closed-form same-speaker vs. different-speaker likelihood ratio.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

_LOG_2PI = np.log(2.0 * np.pi)


def _solve_spd(a: np.ndarray, b: np.ndarray, jitter: float = 1e-10):
    """Solve a x = b for symmetric positive-definite a via Cholesky.

    Falls back to adding diagonal jitter if the factorization fails.
    Returns (solution, cho_factor) so callers can reuse the factor.
    """
    try:
        factor = scipy.linalg.cho_factor(a, lower=True)
    except scipy.linalg.LinAlgError:
        factor = scipy.linalg.cho_factor(
            a + jitter * np.eye(a.shape[0]), lower=True
        )
    return scipy.linalg.cho_solve(factor, b), factor


def _logdet_from_factor(factor) -> float:
    return 2.0 * float(np.log(np.diag(factor[0])).sum())


class TotalVariability(BaseEstimator):
    """Low-rank subspace over centered first-order statistics.

    Parameters
    ----------
    rank : latent dimension of the subspace.
    n_iters : EM iterations.
    init_scale : scale of the seeded Gaussian entries initializing the
        subspace matrix.
    random_state : initialization seed.

    Fitted attributes: ``mean_supervector_`` (K*d,) stacked UBM means,
    ``sigma_`` (K*d,) stacked UBM variances (held fixed during EM),
    ``phi_`` (K*d, rank), and ``objective_``, the per-iteration marginal
    log-likelihood of the statistics up to an additive constant
    (non-decreasing).
    """

    def __init__(
        self,
        rank: int = 400,
        n_iters: int = 5,
        init_scale: float = 1e-3,
        random_state: int = 0,
    ):
        self.rank = rank
        self.n_iters = n_iters
        self.init_scale = init_scale
        self.random_state = random_state

    # ------------------------------------------------------------------

    def _utterance_terms(self, stats):
        """Expanded occupancy and centered first-order supervector."""
        d = self.n_dims_
        if stats.n.shape[0] != self.n_components_ or stats.e.shape[1] != d:
            raise ValueError("statistics shape does not match the subspace model")
        n_expanded = np.repeat(stats.n, d)
        f_centered = (stats.n[:, None] * (stats.e - self._ubm_means_)).ravel()
        return n_expanded, f_centered

    def fit(self, stats_set, ubm) -> "TotalVariability":
        """EM over a collection of per-utterance statistics.

        The E-step computes each utterance's latent posterior; the
        M-step solves per-row weighted least squares for the subspace.
        The residual covariance stays pinned to the UBM variances.
        """
        check_is_fitted(ubm, "means_")
        stats_set = list(stats_set)
        if len(stats_set) == 0:
            raise ValueError("empty statistics collection")
        K, d = ubm.means_.shape
        if self.rank < 1 or self.rank > K * d:
            raise ValueError(f"rank must be in [1, {K * d}], got {self.rank}")

        self.n_components_ = K
        self.n_dims_ = d
        self._ubm_means_ = ubm.means_.copy()
        self.mean_supervector_ = ubm.means_.ravel().copy()
        self.sigma_ = ubm.variances_.ravel().copy()

        rng = np.random.default_rng(self.random_state)
        R = self.rank
        phi = rng.standard_normal((K * d, R)) * self.init_scale

        per_utt = [
            (st.n.astype(np.float64),) + self._utterance_terms(st) for st in stats_set
        ]
        inv_sigma = 1.0 / self.sigma_

        objective = []
        for _ in range(self.n_iters + 1):
            acc_a = np.zeros((K, R, R))
            acc_b = np.zeros((K * d, R))
            obj = 0.0
            for occupancy, n_exp, f_cent in per_utt:
                weighted = phi * (n_exp * inv_sigma)[:, None]
                precision = np.eye(R) + weighted.T @ phi
                b = phi.T @ (f_cent * inv_sigma)
                y, factor = _solve_spd(precision, b)
                obj += 0.5 * (float(b @ y) - _logdet_from_factor(factor))
                cov = scipy.linalg.cho_solve(factor, np.eye(R))
                eyy = cov + np.outer(y, y)
                acc_a += occupancy[:, None, None] * eyy[None, :, :]
                acc_b += np.outer(f_cent, y)
            objective.append(obj)
            if len(objective) == self.n_iters + 1:
                break
            new_phi = np.empty_like(phi)
            for k in range(K):
                rows = slice(k * d, (k + 1) * d)
                if np.trace(acc_a[k]) < 1e-12:
                    # component never observed; leave its rows untouched
                    new_phi[rows] = phi[rows]
                else:
                    new_phi[rows] = np.linalg.solve(acc_a[k], acc_b[rows].T).T
            phi = new_phi

        self.phi_ = phi
        self.objective_ = objective
        return self

    def transform(self, stats_set) -> np.ndarray:
        """Extract i-vectors; one row per utterance's statistics.

        Each i-vector is the latent posterior mean
        (I + Phi' Sigma^-1 N Phi)^-1 Phi' Sigma^-1 N (E - m), obtained
        with a symmetric positive-definite solve rather than an
        explicit inverse.
        """
        check_is_fitted(self, "phi_")
        inv_sigma = 1.0 / self.sigma_
        out = np.empty((len(stats_set), self.rank))
        for row, stats in enumerate(stats_set):
            n_exp, f_cent = self._utterance_terms(stats)
            weighted = self.phi_ * (n_exp * inv_sigma)[:, None]
            precision = np.eye(self.rank) + weighted.T @ self.phi_
            b = self.phi_.T @ (f_cent * inv_sigma)
            out[row], _ = _solve_spd(precision, b)
        return out

    def extract(self, stats) -> np.ndarray:
        """Extract a single utterance's i-vector."""
        return self.transform([stats])[0]

    @classmethod
    def from_params(cls, mean_supervector, phi, sigma, n_components, n_dims):
        mean_supervector = np.asarray(mean_supervector, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        sigma = np.asarray(sigma, dtype=np.float64)
        if phi.shape[0] != mean_supervector.shape[0] or sigma.shape != mean_supervector.shape:
            raise ValueError("inconsistent subspace parameter shapes")
        if mean_supervector.shape[0] != n_components * n_dims:
            raise ValueError("supervector length does not equal K * d")
        if np.any(sigma <= 0):
            raise ValueError("sigma entries must be strictly positive")
        model = cls(rank=phi.shape[1])
        model.n_components_ = n_components
        model.n_dims_ = n_dims
        model._ubm_means_ = mean_supervector.reshape(n_components, n_dims).copy()
        model.mean_supervector_ = mean_supervector
        model.sigma_ = sigma
        model.phi_ = phi
        model.objective_ = []
        return model


class Plda(BaseEstimator):
    """Gaussian PLDA with a latent speaker subspace.

    Models vectors as mean + V h + residual with h standard normal of
    dimension ``rank`` and a full-covariance residual. Trained by EM on
    labeled vectors; scores trials with the closed-form two-covariance
    likelihood ratio (between = V V', within = residual covariance).

    Fitted attributes: ``mean_`` (p,), ``v_`` (p, rank),
    ``residual_cov_`` (p, p), ``objective_`` (per-iteration marginal
    log-likelihood, non-decreasing).
    """

    def __init__(
        self,
        rank: int = 150,
        n_iters: int = 10,
        length_norm: bool = False,
        random_state: int = 0,
    ):
        self.rank = rank
        self.n_iters = n_iters
        self.length_norm = length_norm
        self.random_state = random_state

    def _prep(self, vectors: np.ndarray) -> np.ndarray:
        centered = np.atleast_2d(np.asarray(vectors, dtype=np.float64)) - self.mean_
        if self.length_norm:
            norms = np.linalg.norm(centered, axis=1, keepdims=True)
            centered = centered / np.maximum(norms, 1e-12)
        return centered

    def fit(self, vectors, labels) -> "Plda":
        vectors = np.asarray(vectors, dtype=np.float64)
        labels = np.asarray(labels)
        if vectors.ndim != 2 or vectors.shape[0] != labels.shape[0]:
            raise ValueError("need (n, dim) vectors with one label per row")
        p = vectors.shape[1]
        if self.rank > p:
            raise ValueError(f"speaker rank {self.rank} exceeds vector dim {p}")
        unique = np.unique(labels)
        if len(unique) < 2:
            raise ValueError("degenerate labeling: need at least two speakers")

        self.mean_ = vectors.mean(axis=0)
        data = self._prep(vectors)
        groups = [data[labels == lab] for lab in unique]
        counts = np.array([len(g) for g in groups])
        if not np.any(counts >= 2):
            raise ValueError("need at least one speaker with two or more vectors")
        sums = np.stack([g.sum(axis=0) for g in groups])
        total_scatter = data.T @ data
        n_total = data.shape[0]

        rng = np.random.default_rng(self.random_state)
        scale = np.sqrt(max(data.var(axis=0).mean(), 1e-12))
        v = rng.standard_normal((p, self.rank)) * scale / np.sqrt(self.rank)
        lam = total_scatter / n_total + 1e-6 * scale**2 * np.eye(p)

        objective = []
        for _ in range(self.n_iters + 1):
            lam_inv_v, lam_factor = _solve_spd(lam, v)
            logdet_lam = _logdet_from_factor(lam_factor)
            gram = v.T @ lam_inv_v

            obj = -0.5 * (
                n_total * p * _LOG_2PI
                + n_total * logdet_lam
                + float(np.einsum("ij,ij->", scipy.linalg.cho_solve(lam_factor, data.T).T, data))
            )
            acc_a = np.zeros((self.rank, self.rank))
            acc_c = np.zeros((p, self.rank))
            h_means = np.empty((len(groups), self.rank))
            for s, n_s in enumerate(counts):
                precision = np.eye(self.rank) + n_s * gram
                rhs = lam_inv_v.T @ sums[s]
                h, factor = _solve_spd(precision, rhs)
                h_means[s] = h
                obj += 0.5 * (float(rhs @ h) - _logdet_from_factor(factor))
                cov = scipy.linalg.cho_solve(factor, np.eye(self.rank))
                acc_a += n_s * (cov + np.outer(h, h))
                acc_c += np.outer(sums[s], h)
            objective.append(obj)
            if len(objective) == self.n_iters + 1:
                break

            v = np.linalg.solve(acc_a, acc_c.T).T
            lam = (total_scatter - v @ acc_c.T) / n_total
            lam = 0.5 * (lam + lam.T)

        self.v_ = v
        self.residual_cov_ = lam
        self.objective_ = objective
        self._score_terms_ = None
        return self

    @classmethod
    def from_params(cls, mean, v, residual_cov, length_norm: bool = False):
        mean = np.asarray(mean, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        residual_cov = np.asarray(residual_cov, dtype=np.float64)
        if v.shape[0] != mean.shape[0] or residual_cov.shape != (len(mean), len(mean)):
            raise ValueError("inconsistent PLDA parameter shapes")
        model = cls(rank=v.shape[1], length_norm=length_norm)
        model.mean_ = mean
        model.v_ = v
        model.residual_cov_ = residual_cov
        model.objective_ = []
        model._score_terms_ = None
        return model

    # ------------------------------------------------------------------
    # scoring

    def _prepare_scoring(self):
        """Precompute the quadratic forms of the two-covariance ratio.

        With between B = V V' and total T = B + within, the ratio for a
        centered pair (e, t) is
        0.5 e'Qe + 0.5 t'Qt + e'Pt + 0.5 (logdet T - logdet S) where
        S = T - B T^-1 B, Q = T^-1 - S^-1 and P = T^-1 B S^-1.
        """
        if getattr(self, "_score_terms_", None) is not None:
            return self._score_terms_
        check_is_fitted(self, "v_")
        between = self.v_ @ self.v_.T
        total = between + self.residual_cov_
        try:
            total_factor = scipy.linalg.cho_factor(total, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("PLDA covariance is not positive definite") from exc
        total_inv = scipy.linalg.cho_solve(total_factor, np.eye(len(total)))
        schur = total - between @ total_inv @ between
        try:
            schur_factor = scipy.linalg.cho_factor(schur, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("PLDA covariance is not positive definite") from exc
        schur_inv = scipy.linalg.cho_solve(schur_factor, np.eye(len(schur)))
        quad = total_inv - schur_inv
        cross = total_inv @ between @ schur_inv
        const = 0.5 * (_logdet_from_factor(total_factor) - _logdet_from_factor(schur_factor))
        self._score_terms_ = (quad, cross, const)
        return self._score_terms_

    def llr(self, enroll: np.ndarray, test: np.ndarray) -> float:
        """Verification log-likelihood ratio for one trial."""
        return float(self.llr_pairs(np.atleast_2d(enroll), np.atleast_2d(test))[0])

    def llr_pairs(self, enroll: np.ndarray, test: np.ndarray) -> np.ndarray:
        """Row-paired trial scores for matched (n, dim) arrays."""
        quad, cross, const = self._prepare_scoring()
        e = self._prep(enroll)
        t = self._prep(test)
        if e.shape != t.shape:
            raise ValueError("enroll and test arrays must be row-paired")
        return (
            0.5 * np.einsum("ij,jk,ik->i", e, quad, e)
            + 0.5 * np.einsum("ij,jk,ik->i", t, quad, t)
            + np.einsum("ij,jk,ik->i", e, cross, t)
            + const
        )

    def llr_matrix(self, enroll: np.ndarray, test: np.ndarray) -> np.ndarray:
        """All-pairs trial scores, shape (n_enroll, n_test)."""
        quad, cross, const = self._prepare_scoring()
        e = self._prep(enroll)
        t = self._prep(test)
        qe = 0.5 * np.einsum("ij,jk,ik->i", e, quad, e)
        qt = 0.5 * np.einsum("ij,jk,ik->i", t, quad, t)
        return qe[:, None] + qt[None, :] + e @ cross @ t.T + const
