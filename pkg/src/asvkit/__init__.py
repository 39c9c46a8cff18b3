"""GMM-UBM and i-vector speaker verification with quality-augmented fusion."""

from .frontend import (
    AudioBuffer,
    FrontendConfig,
    InsufficientFramesError,
    TooShortError,
    append_deltas,
    cmvn,
    compute_mfcc,
    energy_sad,
    extract_features,
    truncate_active,
)
from .fusion import ScoreFusion, trial_quality
from .gmm import DiagGmm, map_adapt_means, score_gmm_ubm
from .ivector import Plda, TotalVariability
from .metrics import compute_eer, compute_min_dcf, det_points
from .stats import (
    BwStats,
    NbsPopulation,
    accumulate_bw,
    nbs_population_stats,
    normalize_zeroth,
    pca_project,
    quality,
)
from .synth import SynthConfig, SynthCorpus, make_duration_conditions, synth_corpus

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "BwStats",
    "DiagGmm",
    "FrontendConfig",
    "InsufficientFramesError",
    "NbsPopulation",
    "Plda",
    "ScoreFusion",
    "SynthConfig",
    "SynthCorpus",
    "TooShortError",
    "TotalVariability",
    "accumulate_bw",
    "append_deltas",
    "cmvn",
    "compute_eer",
    "compute_min_dcf",
    "compute_mfcc",
    "det_points",
    "energy_sad",
    "extract_features",
    "make_duration_conditions",
    "map_adapt_means",
    "nbs_population_stats",
    "normalize_zeroth",
    "pca_project",
    "quality",
    "score_gmm_ubm",
    "synth_corpus",
    "trial_quality",
    "truncate_active",
]
