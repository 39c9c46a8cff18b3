"""Acoustic front end for telephone-band speech.

Turns raw 8 kHz PCM audio into normalized cepstral feature matrices:
MFCC extraction, energy-based speech activity detection, delta and
double-delta appending, per-utterance mean/variance normalization, and
the active-frame truncation used to fabricate duration conditions.

A feature matrix is a plain float64 ndarray of shape (n_frames, dim).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft


class TooShortError(ValueError):
    """Audio does not cover a single analysis window."""


class InsufficientFramesError(ValueError):
    """Not enough active frames for the requested truncation."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM audio. ``samples`` is a 1-D int16 array."""

    samples: np.ndarray
    sample_rate: int = 8000

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-D sample array)")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class FrontendConfig:
    """Front-end parameters.

    Defaults: 19 cepstra from 20 ms Hamming windows with a 10 ms hop,
    24 triangular mel filters over 0..sample_rate/2, activity threshold
    30 dB below the per-utterance peak log-energy, and ±2 frame delta
    regression windows.
    """

    window_ms: float = 20.0
    hop_ms: float = 10.0
    n_cepstra: int = 19
    n_mel_filters: int = 24
    sad_threshold_db: float = 30.0
    delta_window: int = 2

    def __post_init__(self):
        if self.window_ms < self.hop_ms:
            raise ValueError("window_ms must be >= hop_ms")
        if self.hop_ms <= 0:
            raise ValueError("hop_ms must be positive")
        if self.n_cepstra < 1:
            raise ValueError("n_cepstra must be >= 1")
        if self.n_mel_filters < 1:
            raise ValueError("n_mel_filters must be >= 1")
        if self.sad_threshold_db <= 0:
            raise ValueError("sad_threshold_db must be positive")
        if self.delta_window < 1:
            raise ValueError("delta_window must be >= 1")

    def frame_length(self, sample_rate: int) -> int:
        return int(round(self.window_ms * sample_rate / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))


def _frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice a 1-D signal into overlapping frames, dropping the tail.

    Returns a (n_frames, frame_len) array. Requires len(x) >= frame_len.
    """
    n_frames = 1 + (len(x) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank over 0..sample_rate/2.

    Returns (n_filters, n_fft//2 + 1) with triangles placed on the
    continuous frequency axis and sampled at the FFT bin centers.
    """
    n_bins = n_fft // 2 + 1
    mel_edges = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0), n_filters + 2)
    hz_edges = _mel_to_hz(mel_edges)
    bin_hz = np.arange(n_bins) * sample_rate / n_fft

    fbank = np.zeros((n_filters, n_bins))
    for j in range(n_filters):
        left, center, right = hz_edges[j], hz_edges[j + 1], hz_edges[j + 2]
        up = (bin_hz - left) / (center - left)
        down = (right - bin_hz) / (right - center)
        fbank[j] = np.maximum(0.0, np.minimum(up, down))
    return fbank


def compute_mfcc(audio: AudioBuffer, cfg: FrontendConfig | None = None) -> np.ndarray:
    """Static mel-frequency cepstra, one row per frame.

    Hamming-windowed frames, power spectrum, triangular mel filterbank,
    log, then an orthonormal DCT-II keeping coefficients 1..n_cepstra
    (c0 is dropped). Returns (n_frames, n_cepstra); deltas, activity
    masking, and normalization are separate steps.
    """
    if cfg is None:
        cfg = FrontendConfig()
    x = audio.samples.astype(np.float64)
    frame_len = cfg.frame_length(audio.sample_rate)
    hop = cfg.hop_length(audio.sample_rate)
    if len(x) < frame_len:
        raise TooShortError(
            f"audio too short: {len(x)} samples, need at least one "
            f"{frame_len}-sample window"
        )

    frames = _frame_signal(x, frame_len, hop) * np.hamming(frame_len)

    n_fft = 1
    while n_fft < frame_len:
        n_fft *= 2
    power = np.abs(scipy.fft.rfft(frames, n_fft, axis=1)) ** 2

    fbank = mel_filterbank(cfg.n_mel_filters, n_fft, audio.sample_rate)
    mel_energy = power @ fbank.T
    # Silence frames produce zero filter outputs; floor before the log.
    np.maximum(mel_energy, np.finfo(np.float64).tiny, out=mel_energy)

    cep = scipy.fft.dct(np.log(mel_energy), type=2, norm="ortho", axis=1)
    return cep[:, 1 : cfg.n_cepstra + 1]


def energy_sad(audio: AudioBuffer, cfg: FrontendConfig | None = None) -> np.ndarray:
    """Per-frame speech activity mask from frame energy.

    Framing matches :func:`compute_mfcc`. A frame is active iff its
    energy exceeds the per-utterance peak by less than
    ``sad_threshold_db`` (i.e. energy > peak * 10**(-threshold/10)).
    Digital silence yields an all-false mask.
    """
    if cfg is None:
        cfg = FrontendConfig()
    x = audio.samples.astype(np.float64)
    frame_len = cfg.frame_length(audio.sample_rate)
    hop = cfg.hop_length(audio.sample_rate)
    if len(x) < frame_len:
        raise TooShortError(
            f"audio too short: {len(x)} samples, need at least one "
            f"{frame_len}-sample window"
        )
    energy = np.sum(_frame_signal(x, frame_len, hop) ** 2, axis=1)
    peak = energy.max()
    if peak <= 0.0:
        return np.zeros(len(energy), dtype=bool)
    return energy > peak * 10.0 ** (-cfg.sad_threshold_db / 10.0)


def append_deltas(static: np.ndarray, delta_window: int = 2) -> np.ndarray:
    """Append delta and double-delta columns to a feature matrix.

    Deltas are the slope of a linear regression over ±delta_window
    frames with edge replication; double-deltas are the deltas of the
    deltas. Output dim is exactly 3x the input dim.
    """
    static = np.asarray(static, dtype=np.float64)
    if static.ndim != 2 or static.shape[0] == 0:
        raise ValueError("static features must be a non-empty (frames, dim) matrix")

    def regress(feat):
        w = delta_window
        padded = np.pad(feat, ((w, w), (0, 0)), mode="edge")
        num = np.zeros_like(feat)
        for n in range(1, w + 1):
            num += n * (padded[w + n : w + n + len(feat)] - padded[w - n : w - n + len(feat)])
        return num / (2.0 * sum(n * n for n in range(1, w + 1)))

    d1 = regress(static)
    d2 = regress(d1)
    return np.hstack([static, d1, d2])


def cmvn(features: np.ndarray, variance_floor: float = 1e-10) -> np.ndarray:
    """Per-utterance standardization of every feature dimension.

    Each column is shifted to zero mean and scaled to unit variance.
    Columns whose variance falls below the floor (e.g. constant
    columns) come out as all zeros rather than blowing up.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("features must be a non-empty (frames, dim) matrix")
    mean = features.mean(axis=0)
    var = features.var(axis=0)
    return (features - mean) / np.sqrt(np.maximum(var, variance_floor))


EVAL_SKIP_FRAMES = 500


def truncate_active(
    features: np.ndarray, n: int, mode: str = "eval_skip500", seed: int = 0
) -> np.ndarray:
    """Cut ``n`` consecutive frames out of an active-frame matrix.

    ``eval_skip500`` discards the first 500 frames (sidesteps the
    text-dependent opening of a call) and returns the next ``n``;
    ``random_start`` draws the start uniformly from [0, n_frames - n]
    using ``seed``.
    """
    features = np.asarray(features)
    if features.ndim != 2:
        raise ValueError("features must be a (frames, dim) matrix")
    if n < 1:
        raise ValueError(f"truncation length must be >= 1, got {n}")
    n_frames = features.shape[0]

    if mode == "eval_skip500":
        need = EVAL_SKIP_FRAMES + n
        if need > n_frames:
            raise InsufficientFramesError(
                f"need {need} active frames (skip {EVAL_SKIP_FRAMES} + keep {n}), "
                f"have {n_frames}: short by {need - n_frames}"
            )
        start = EVAL_SKIP_FRAMES
    elif mode == "random_start":
        if n > n_frames:
            raise InsufficientFramesError(
                f"need {n} active frames, have {n_frames}: short by {n - n_frames}"
            )
        rng = np.random.default_rng(seed)
        start = int(rng.integers(0, n_frames - n + 1))
    else:
        raise ValueError(f"unknown truncation mode {mode!r}")

    return features[start : start + n].copy()


def extract_features(audio: AudioBuffer, cfg: FrontendConfig | None = None) -> np.ndarray:
    """Full front-end pipeline: MFCC -> activity masking -> deltas -> CMVN.

    Returns the normalized active-frame matrix (n_active, 3 * n_cepstra).
    Raises if no frame survives the activity mask.
    """
    if cfg is None:
        cfg = FrontendConfig()
    static = compute_mfcc(audio, cfg)
    mask = energy_sad(audio, cfg)
    active = static[mask]
    if active.shape[0] == 0:
        raise InsufficientFramesError("no active frames after speech activity detection")
    return cmvn(append_deltas(active, cfg.delta_window))
