"""Synthetic corpus generation with known ground truth.

Builds a hierarchy around a randomly drawn background mixture: each
speaker perturbs the component means, and utterances are sampled
frame-by-frame from the speaker's mixture. Because the generator
parameters are returned alongside the data, downstream estimates can be
checked against the truth. Everything is a pure function of the seed;
per-utterance child seeds keep output independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frontend import InsufficientFramesError, truncate_active
from .gmm import DiagGmm


@dataclass(frozen=True)
class SynthConfig:
    """Corpus dimensions and generator scales.

    ``speaker_shift_scale`` is the standard deviation of the additive
    per-speaker offset applied to every component mean coordinate;
    ``session_shift_scale`` adds a smaller per-utterance offset on top
    (off by default).
    """

    n_speakers: int = 50
    utts_per_speaker: int = 4
    frames_per_utt: int = 6000
    n_components: int = 64
    dim: int = 12
    speaker_shift_scale: float = 0.3
    session_shift_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_speakers", "utts_per_speaker", "frames_per_utt", "n_components", "dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.speaker_shift_scale < 0 or self.session_shift_scale < 0:
            raise ValueError("shift scales must be non-negative")


@dataclass
class SynthCorpus:
    utterances: list = field(default_factory=list)
    utt_ids: list = field(default_factory=list)
    speaker_ids: list = field(default_factory=list)
    generator_ubm: DiagGmm = None
    speaker_means: np.ndarray = None  # (n_speakers, K, d)

    def __len__(self):
        return len(self.utterances)

    def subset_by_speakers(self, speaker_ids) -> "SynthCorpus":
        """View of the corpus restricted to the given speakers."""
        keep = set(speaker_ids)
        idx = [i for i, s in enumerate(self.speaker_ids) if s in keep]
        return SynthCorpus(
            utterances=[self.utterances[i] for i in idx],
            utt_ids=[self.utt_ids[i] for i in idx],
            speaker_ids=[self.speaker_ids[i] for i in idx],
            generator_ubm=self.generator_ubm,
            speaker_means=self.speaker_means,
        )


def synth_corpus(cfg: SynthConfig) -> SynthCorpus:
    """Sample a labeled corpus from a randomly drawn speaker hierarchy.

    The background mixture gets Dirichlet weights, spread-out means and
    per-coordinate variances near one. Speaker offsets scale with
    ``speaker_shift_scale``; zero shift makes every speaker identical to
    the background.
    """
    root = np.random.SeedSequence(cfg.seed)
    n_utts = cfg.n_speakers * cfg.utts_per_speaker
    model_seed, *utt_seeds = root.spawn(1 + n_utts)
    rng = np.random.default_rng(model_seed)

    K, d = cfg.n_components, cfg.dim
    weights = rng.dirichlet(np.full(K, 5.0))
    means = rng.normal(0.0, 2.0, size=(K, d))
    variances = rng.uniform(0.5, 1.5, size=(K, d))
    ubm = DiagGmm.from_params(weights, means, variances)

    speaker_means = means[None, :, :] + cfg.speaker_shift_scale * rng.standard_normal(
        (cfg.n_speakers, K, d)
    )

    corpus = SynthCorpus(generator_ubm=ubm, speaker_means=speaker_means)
    sig = np.sqrt(variances)
    for s in range(cfg.n_speakers):
        for u in range(cfg.utts_per_speaker):
            utt_rng = np.random.default_rng(utt_seeds[s * cfg.utts_per_speaker + u])
            mean_su = speaker_means[s]
            if cfg.session_shift_scale > 0:
                mean_su = mean_su + cfg.session_shift_scale * utt_rng.standard_normal((K, d))
            comps = utt_rng.choice(K, size=cfg.frames_per_utt, p=weights)
            frames = mean_su[comps] + utt_rng.standard_normal(
                (cfg.frames_per_utt, d)
            ) * sig[comps]
            corpus.utterances.append(frames)
            corpus.utt_ids.append(f"spk{s:03d}_utt{u:02d}")
            corpus.speaker_ids.append(f"spk{s:03d}")
    return corpus


def make_duration_conditions(
    corpus: SynthCorpus, durations, mode: str = "eval_skip500", seed: int = 0
) -> dict:
    """Truncate every utterance to each requested frame count.

    Returns {duration: list of truncated matrices aligned with
    ``corpus.utt_ids``}. Utterances too short for a duration are
    reported together in one error.
    """
    root = np.random.SeedSequence(seed)
    out = {}
    for di, duration in enumerate(durations):
        children = root.spawn(len(corpus.utterances)) if mode == "random_start" else None
        truncated = []
        offenders = []
        for i, features in enumerate(corpus.utterances):
            utt_seed = int(children[i].generate_state(1)[0]) if children else 0
            try:
                truncated.append(truncate_active(features, duration, mode, seed=utt_seed))
            except InsufficientFramesError as exc:
                offenders.append(f"{corpus.utt_ids[i]} ({exc})")
        if offenders:
            raise InsufficientFramesError(
                f"{len(offenders)} utterance(s) too short for duration {duration}: "
                + "; ".join(offenders[:5])
                + ("; ..." if len(offenders) > 5 else "")
            )
        out[duration] = truncated
    return out
