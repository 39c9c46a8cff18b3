"""Detection error metrics for verification score sets.

Scores are swept over every distinct value (decision rule: accept iff
score >= threshold), producing the false-accept / false-reject
operating points from which the equal error rate and the minimum
detection cost are read off.
"""

from __future__ import annotations

import numpy as np


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be matching 1-D arrays")
    tar = scores[labels]
    non = scores[~labels]
    if len(tar) == 0 or len(non) == 0:
        raise ValueError("need both target and nontarget scores")
    return tar, non


def det_points(scores, labels):
    """Operating points of the threshold sweep.

    Thresholds are the distinct score values plus a reject-all
    sentinel; at each threshold t, P_fa = fraction of nontarget scores
    >= t and P_miss = fraction of target scores < t. Returns
    (thresholds, p_miss, p_fa) with P_fa non-increasing.
    """
    tar, non = _split_scores(scores, labels)
    thresholds = np.unique(np.concatenate([tar, non]))
    thresholds = np.append(thresholds, np.inf)
    tar_sorted = np.sort(tar)
    non_sorted = np.sort(non)
    p_miss = np.searchsorted(tar_sorted, thresholds, side="left") / len(tar)
    p_fa = (len(non) - np.searchsorted(non_sorted, thresholds, side="left")) / len(non)
    return thresholds, p_miss, p_fa


def compute_eer(scores, labels) -> float:
    """Equal error rate via the threshold sweep.

    Linear interpolation between the two adjacent operating points that
    bracket P_fa = P_miss.
    """
    _, p_miss, p_fa = det_points(scores, labels)
    diff = p_fa - p_miss  # strictly positive at the first point, <= 0 at the last
    idx = int(np.argmax(diff <= 0))
    d_prev = diff[idx - 1]
    t = d_prev / (d_prev - diff[idx])
    return float(p_fa[idx - 1] + t * (p_fa[idx] - p_fa[idx - 1]))


def compute_min_dcf(
    scores, labels, c_miss: float = 10.0, c_fa: float = 1.0, p_tar: float = 0.01
) -> float:
    """Minimum of the detection cost over all thresholds.

    Cost at a threshold is c_miss * P_miss * p_tar +
    c_fa * P_fa * (1 - p_tar); the sweep includes the accept-all and
    reject-all decisions.
    """
    _, p_miss, p_fa = det_points(scores, labels)
    dcf = c_miss * p_miss * p_tar + c_fa * p_fa * (1.0 - p_tar)
    return float(dcf.min())
