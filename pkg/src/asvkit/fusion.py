"""Score-level fusion trained by regularized logistic regression.

Combines per-trial subsystem scores linearly (plus an optional
quality-product term) into a single decision score whose sign carries
the accept/reject decision. Training minimizes the prior-weighted
logistic cross-entropy with a deterministic damped-Newton optimizer, so
identical development data always yields an identical fusion model.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted


def _weighted_cross_entropy(margins, tar_mask, prior):
    """Average softplus loss, targets weighted by the effective prior."""
    loss = np.logaddexp(0.0, -margins)
    n_tar = tar_mask.sum()
    n_non = len(tar_mask) - n_tar
    return prior * loss[tar_mask].sum() / n_tar + (1.0 - prior) * loss[~tar_mask].sum() / n_non


class ScoreFusion(BaseEstimator):
    """Linear or quality-augmented fusion of subsystem scores.

    ``kind="linear"`` fits f = alpha' scores + theta; ``kind="quality"``
    adds beta * q_enroll * q_test. A trial is accepted iff f >= 0, so
    theta folds the operating threshold into the model. The development
    objective weights target and nontarget trials by ``effective_prior``
    and penalizes ||alpha||^2 by ``reg_lambda`` (theta and beta are
    unpenalized).

    Fitted attributes: ``alpha_``, ``theta_``, ``beta_`` (zero for
    linear fusion), ``cost_`` (optimal training objective),
    ``initial_cost_`` (objective at the starting point alpha = 0,
    theta = prior log-odds) and ``n_iters_``.
    """

    def __init__(
        self,
        kind: str = "linear",
        effective_prior: float = 0.5,
        reg_lambda: float = 1e-6,
        max_iters: int = 200,
        tol: float = 1e-10,
    ):
        self.kind = kind
        self.effective_prior = effective_prior
        self.reg_lambda = reg_lambda
        self.max_iters = max_iters
        self.tol = tol

    def _design(self, scores, quality):
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        if scores.ndim != 2:
            raise ValueError("scores must be (n_trials, n_systems)")
        columns = [scores]
        if self.kind == "quality":
            if quality is None:
                raise ValueError("quality fusion needs per-trial quality values")
            quality = np.asarray(quality, dtype=np.float64)
            if quality.shape != (scores.shape[0],):
                raise ValueError("need one quality value per trial")
            columns.append(quality[:, None])
        elif self.kind != "linear":
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        columns.append(np.ones((scores.shape[0], 1)))
        return np.hstack(columns)

    def fit(self, scores, labels, quality=None) -> "ScoreFusion":
        """Train on development trials.

        ``scores``: (n, n_systems); ``labels``: truthy for target
        trials; ``quality``: per-trial product q_enroll * q_test,
        required for quality fusion.
        """
        design = self._design(scores, quality)
        tar = np.asarray(labels).astype(bool)
        if tar.shape != (design.shape[0],):
            raise ValueError("need one label per trial")
        if tar.all() or not tar.any():
            raise ValueError("development set must contain both trial labels")
        prior = self.effective_prior
        if not 0.0 < prior < 1.0:
            raise ValueError("effective_prior must be inside (0, 1)")

        n_params = design.shape[1]
        n_systems = design.shape[1] - 1 - (1 if self.kind == "quality" else 0)
        reg_mask = np.zeros(n_params)
        reg_mask[:n_systems] = 1.0

        sign = np.where(tar, 1.0, -1.0)
        trial_w = np.where(tar, prior / tar.sum(), (1.0 - prior) / (~tar).sum())

        def cost(p):
            ce = _weighted_cross_entropy(sign * (design @ p), tar, prior)
            return ce + self.reg_lambda * float(p @ (reg_mask * p))

        params = np.zeros(n_params)
        params[-1] = np.log(prior / (1.0 - prior))
        current = cost(params)
        self.initial_cost_ = current

        n_done = 0
        for it in range(self.max_iters):
            f = design @ params
            # gradient and Hessian of the weighted cross-entropy
            sig = expit(-sign * f)
            grad = design.T @ (-sign * sig * trial_w) + 2.0 * self.reg_lambda * reg_mask * params
            curvature = trial_w * sig * (1.0 - sig)
            hess = design.T @ (design * curvature[:, None])
            hess += np.diag(2.0 * self.reg_lambda * reg_mask + 1e-12)
            step = np.linalg.solve(hess, -grad)

            t = 1.0
            slope = float(grad @ step)
            improved = False
            for _ in range(60):
                candidate = cost(params + t * step)
                if candidate <= current + 1e-4 * t * slope:
                    improved = True
                    break
                t *= 0.5
            if not improved:
                n_done = it
                break
            params = params + t * step
            previous, current = current, candidate
            n_done = it + 1
            if abs(previous - current) <= self.tol * max(1.0, abs(previous)):
                break

        self.alpha_ = params[:n_systems].copy()
        self.beta_ = float(params[n_systems]) if self.kind == "quality" else 0.0
        self.theta_ = float(params[-1])
        self.cost_ = float(current)
        self.n_iters_ = n_done
        return self

    def decision_function(self, scores, quality=None) -> np.ndarray:
        """Fused score per trial; accept iff >= 0."""
        check_is_fitted(self, "alpha_")
        design = self._design(scores, quality)
        if design.shape[1] - 1 - (1 if self.kind == "quality" else 0) != len(self.alpha_):
            raise ValueError("score columns do not match the fitted model")
        params = np.concatenate([self.alpha_, [self.beta_] if self.kind == "quality" else [], [self.theta_]])
        return design @ params

    def predict(self, scores, quality=None) -> np.ndarray:
        """Accept/reject decisions (boundary score 0 accepts)."""
        return self.decision_function(scores, quality) >= 0.0

    @classmethod
    def from_params(cls, kind, alpha, theta, beta=0.0, effective_prior=0.5):
        model = cls(kind=kind, effective_prior=effective_prior)
        model.alpha_ = np.asarray(alpha, dtype=np.float64)
        model.theta_ = float(theta)
        model.beta_ = float(beta)
        model.cost_ = float("nan")
        model.initial_cost_ = float("nan")
        model.n_iters_ = 0
        return model


def trial_quality(q_enroll, q_test) -> np.ndarray:
    """Per-trial quality feature: the product of the two side qualities."""
    return np.asarray(q_enroll, dtype=np.float64) * np.asarray(q_test, dtype=np.float64)
