"""On-disk formats for every pipeline artifact.

Binary formats are little-endian with a four-byte magic: features
("FTR1"), mixture models ("UBM1"), sufficient statistics ("BWS1"),
subspace models ("TVM1"), PLDA models ("PLD1") and i-vector archives
("IVC1"). Fusion models ("FUS1") and the trial/score/quality/manifest
files are plain ASCII. Malformed input raises :class:`FileFormatError`
carrying the byte offset of the problem.
"""

from __future__ import annotations

import struct
import wave

import numpy as np

from .frontend import AudioBuffer
from .fusion import ScoreFusion
from .gmm import DiagGmm
from .ivector import Plda, TotalVariability
from .stats import BwStats


class FileFormatError(ValueError):
    """A file does not follow its documented format."""

    def __init__(self, path, offset, message):
        super().__init__(f"{path}: at byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


def _read_exact(fh, n, path, what):
    offset = fh.tell()
    data = fh.read(n)
    if len(data) != n:
        raise FileFormatError(path, offset, f"truncated while reading {what}")
    return data


def _expect_magic(fh, magic, path):
    got = _read_exact(fh, 4, path, "magic")
    if got != magic:
        raise FileFormatError(path, 0, f"bad magic {got!r}, expected {magic!r}")


def _read_u32(fh, path, what):
    return struct.unpack("<I", _read_exact(fh, 4, path, what))[0]


def _read_f64_array(fh, count, path, what):
    raw = _read_exact(fh, 8 * count, path, what)
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


# ----------------------------------------------------------------------
# FTR1 feature matrices


def write_features(path, features):
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise ValueError("features must be a (frames, dim) matrix")
    with open(path, "wb") as fh:
        fh.write(b"FTR1")
        fh.write(struct.pack("<II", features.shape[0], features.shape[1]))
        fh.write(features.astype("<f4").tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"FTR1", path)
        n_frames = _read_u32(fh, path, "frame count")
        dim = _read_u32(fh, path, "feature dim")
        raw = _read_exact(fh, 4 * n_frames * dim, path, "feature payload")
        extra = fh.read(1)
        if extra:
            raise FileFormatError(path, fh.tell() - 1, "trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return data.reshape(n_frames, dim)


# ----------------------------------------------------------------------
# UBM1 mixture models


def write_gmm(path, gmm: DiagGmm):
    K, d = gmm.means_.shape
    with open(path, "wb") as fh:
        fh.write(b"UBM1")
        fh.write(struct.pack("<II", K, d))
        fh.write(gmm.weights_.astype("<f8").tobytes())
        fh.write(gmm.means_.astype("<f8").tobytes())
        fh.write(gmm.variances_.astype("<f8").tobytes())


def read_gmm(path) -> DiagGmm:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"UBM1", path)
        K = _read_u32(fh, path, "component count")
        d = _read_u32(fh, path, "feature dim")
        weights = _read_f64_array(fh, K, path, "weights")
        means = _read_f64_array(fh, K * d, path, "means").reshape(K, d)
        variances = _read_f64_array(fh, K * d, path, "variances").reshape(K, d)
    try:
        return DiagGmm.from_params(weights, means, variances)
    except ValueError as exc:
        raise FileFormatError(path, 12, f"invalid model parameters: {exc}") from exc


# ----------------------------------------------------------------------
# BWS1 sufficient statistics


def write_bw_stats(path, stats: BwStats):
    K, d = stats.e.shape
    with open(path, "wb") as fh:
        fh.write(b"BWS1")
        fh.write(struct.pack("<IIQ", K, d, stats.frames))
        fh.write(stats.n.astype("<f8").tobytes())
        fh.write(stats.e.astype("<f8").tobytes())


def read_bw_stats(path) -> BwStats:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"BWS1", path)
        K = _read_u32(fh, path, "component count")
        d = _read_u32(fh, path, "feature dim")
        frames = struct.unpack("<Q", _read_exact(fh, 8, path, "frame count"))[0]
        n = _read_f64_array(fh, K, path, "zeroth-order stats")
        e = _read_f64_array(fh, K * d, path, "first-order stats").reshape(K, d)
    return BwStats(n=n, e=e, frames=int(frames))


# ----------------------------------------------------------------------
# TVM1 subspace models


def write_tv(path, tv: TotalVariability):
    K, d = tv.n_components_, tv.n_dims_
    with open(path, "wb") as fh:
        fh.write(b"TVM1")
        fh.write(struct.pack("<III", K, d, tv.rank))
        fh.write(tv.mean_supervector_.astype("<f8").tobytes())
        fh.write(tv.sigma_.astype("<f8").tobytes())
        fh.write(tv.phi_.astype("<f8").tobytes())


def read_tv(path) -> TotalVariability:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"TVM1", path)
        K = _read_u32(fh, path, "component count")
        d = _read_u32(fh, path, "feature dim")
        rank = _read_u32(fh, path, "subspace rank")
        mean = _read_f64_array(fh, K * d, path, "mean supervector")
        sigma = _read_f64_array(fh, K * d, path, "sigma")
        phi = _read_f64_array(fh, K * d * rank, path, "subspace").reshape(K * d, rank)
    try:
        return TotalVariability.from_params(mean, phi, sigma, K, d)
    except ValueError as exc:
        raise FileFormatError(path, 16, f"invalid model parameters: {exc}") from exc


# ----------------------------------------------------------------------
# PLD1 models


def write_plda(path, plda: Plda):
    p, r = plda.v_.shape
    with open(path, "wb") as fh:
        fh.write(b"PLD1")
        fh.write(struct.pack("<II", p, r))
        fh.write(plda.mean_.astype("<f8").tobytes())
        fh.write(plda.v_.astype("<f8").tobytes())
        fh.write(plda.residual_cov_.astype("<f8").tobytes())


def read_plda(path) -> Plda:
    with open(path, "rb") as fh:
        _expect_magic(fh, b"PLD1", path)
        p = _read_u32(fh, path, "vector dim")
        r = _read_u32(fh, path, "speaker rank")
        mean = _read_f64_array(fh, p, path, "mean")
        v = _read_f64_array(fh, p * r, path, "speaker subspace").reshape(p, r)
        cov = _read_f64_array(fh, p * p, path, "residual covariance").reshape(p, p)
    return Plda.from_params(mean, v, cov)


# ----------------------------------------------------------------------
# IVC1 i-vector archives


def write_ivectors(path, ids, vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
        raise ValueError("need one id per i-vector row")
    with open(path, "wb") as fh:
        fh.write(b"IVC1")
        fh.write(struct.pack("<II", vectors.shape[0], vectors.shape[1]))
        for utt_id, row in zip(ids, vectors):
            encoded = str(utt_id).encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(row.astype("<f8").tobytes())


def read_ivectors(path):
    """Returns (ids, (count, rank) array)."""
    with open(path, "rb") as fh:
        _expect_magic(fh, b"IVC1", path)
        count = _read_u32(fh, path, "record count")
        rank = _read_u32(fh, path, "i-vector rank")
        ids = []
        vectors = np.empty((count, rank))
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, path, "id length"))
            ids.append(_read_exact(fh, id_len, path, "utterance id").decode("utf-8"))
            vectors[i] = _read_f64_array(fh, rank, path, "i-vector values")
    return ids, vectors


# ----------------------------------------------------------------------
# FUS1 fusion models (text)


def write_fusion(path, model: ScoreFusion):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("FUS1 version 1\n")
        fh.write(f"kind {model.kind}\n")
        fh.write("alpha " + " ".join(f"{a:.17g}" for a in model.alpha_) + "\n")
        fh.write(f"theta {model.theta_:.17g}\n")
        fh.write(f"beta {model.beta_:.17g}\n")
        fh.write(f"prior {model.effective_prior:.17g}\n")


def read_fusion(path) -> ScoreFusion:
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("FUS1"):
            raise FileFormatError(path, 0, "missing FUS1 header")
        for line in fh:
            if not line.strip():
                continue
            key, _, value = line.partition(" ")
            fields[key.strip()] = value.strip()
    try:
        return ScoreFusion.from_params(
            kind=fields["kind"],
            alpha=[float(v) for v in fields["alpha"].split()],
            theta=float(fields["theta"]),
            beta=float(fields["beta"]),
            effective_prior=float(fields["prior"]),
        )
    except (KeyError, ValueError) as exc:
        raise FileFormatError(path, 0, f"invalid fusion model field: {exc}") from exc


# ----------------------------------------------------------------------
# ASCII line formats


def write_trials(path, trials):
    """``trials`` is an iterable of (enroll_id, test_id, is_target)."""
    with open(path, "w", encoding="utf-8") as fh:
        for enroll, test, is_target in trials:
            kind = "target" if is_target else "nontarget"
            fh.write(f"{enroll} {test} {kind}\n")


def read_trials(path):
    trials = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in ("target", "nontarget"):
                raise FileFormatError(path, lineno, f"bad trial line: {line.strip()!r}")
            trials.append((parts[0], parts[1], parts[2] == "target"))
    return trials


def write_scores(path, records):
    """``records`` is an iterable of (enroll_id, test_id, score)."""
    with open(path, "w", encoding="utf-8") as fh:
        for enroll, test, score in records:
            fh.write(f"{enroll} {test} {score:.17g}\n")


def read_scores(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FileFormatError(path, lineno, f"bad score line: {line.strip()!r}")
            try:
                value = float(parts[2])
            except ValueError:
                raise FileFormatError(path, lineno, f"bad score value: {parts[2]!r}")
            records.append((parts[0], parts[1], value))
    return records


def write_quality(path, records):
    """``records`` is an iterable of (utt_id, quality)."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, q in records:
            fh.write(f"{utt_id} {q:.17g}\n")


def read_quality(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FileFormatError(path, lineno, f"bad quality line: {line.strip()!r}")
            try:
                values[parts[0]] = float(parts[1])
            except ValueError:
                raise FileFormatError(path, lineno, f"bad quality value: {parts[1]!r}")
    return values


def write_manifest(path, records):
    """``records`` is an iterable of (utt_id, speaker_id, n_frames)."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, speaker_id, n_frames in records:
            fh.write(f"{utt_id} {speaker_id} {n_frames}\n")


def read_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FileFormatError(path, lineno, f"bad manifest line: {line.strip()!r}")
            try:
                records.append((parts[0], parts[1], int(parts[2])))
            except ValueError:
                raise FileFormatError(path, lineno, f"bad frame count: {parts[2]!r}")
    return records


# ----------------------------------------------------------------------
# WAV input


def read_wav(path) -> AudioBuffer:
    """Read mono 16-bit PCM at 8 kHz; anything else is rejected."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {wav.getnchannels()} channels")
        if wav.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {wav.getsampwidth() * 8}-bit")
        if wav.getframerate() != 8000:
            raise ValueError(f"{path}: expected 8000 Hz sample rate, got {wav.getframerate()}")
        samples = np.frombuffer(wav.readframes(wav.getnframes()), dtype="<i2")
    return AudioBuffer(samples=samples, sample_rate=8000)
