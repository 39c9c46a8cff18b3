import numpy as np
import pytest

from asvkit.frontend import (
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


def tone(n_samples, freq=1000.0, amplitude=20000.0, sr=8000):
    t = np.arange(n_samples) / sr
    return (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.int16)


class TestComputeMfcc:
    def test_frame_length_is_window_times_rate(self):
        cfg = FrontendConfig()
        # 0.020 s * 8000 Hz
        assert cfg.frame_length(8000) == 160

    def test_static_dim_is_19(self):
        feats = compute_mfcc(AudioBuffer(tone(8000)), FrontendConfig())
        assert feats.shape[1] == 19

    def test_frame_count_matches_hop(self):
        # 8000 samples, 160-sample window, 80-sample hop -> 1 + (8000-160)//80
        feats = compute_mfcc(AudioBuffer(tone(8000)), FrontendConfig())
        assert feats.shape[0] == 1 + (8000 - 160) // 80

    def test_deterministic(self):
        audio = AudioBuffer(tone(4000))
        a = compute_mfcc(audio, FrontendConfig())
        b = compute_mfcc(AudioBuffer(tone(4000)), FrontendConfig())
        assert np.array_equal(a, b)

    def test_too_short_raises(self):
        with pytest.raises(TooShortError):
            compute_mfcc(AudioBuffer(tone(100)), FrontendConfig())

    def test_all_finite_even_on_silence(self):
        silence = AudioBuffer(np.zeros(2000, dtype=np.int16))
        assert np.all(np.isfinite(compute_mfcc(silence, FrontendConfig())))


class TestEnergySad:
    def test_constant_tone_all_active(self):
        # 1 kHz at 8 kHz: 20 samples per cycle, so every 160-sample frame
        # covers whole cycles and has identical energy
        mask = energy_sad(AudioBuffer(tone(8000)), FrontendConfig())
        assert mask.all()

    def test_digital_silence_all_inactive(self):
        mask = energy_sad(AudioBuffer(np.zeros(4000, dtype=np.int16)), FrontendConfig())
        assert not mask.any()

    def test_half_silence_half_tone_matches_energy_oracle(self):
        cfg = FrontendConfig()
        samples = np.concatenate([np.zeros(4000, dtype=np.int16), tone(4000)])
        audio = AudioBuffer(samples)
        mask = energy_sad(audio, cfg)

        # oracle: direct per-frame energy computation
        x = samples.astype(np.float64)
        frame_len, hop = 160, 80
        energies = []
        start = 0
        while start + frame_len <= len(x):
            energies.append(np.sum(x[start : start + frame_len] ** 2))
            start += hop
        energies = np.array(energies)
        expected = energies > energies.max() * 10.0 ** (-cfg.sad_threshold_db / 10.0)
        assert np.array_equal(mask, expected)

        # frames fully inside each half behave as the halves dictate
        n_frames = len(energies)
        frame_starts = np.arange(n_frames) * hop
        fully_silent = frame_starts + frame_len <= 4000
        fully_tone = frame_starts >= 4000
        assert not mask[fully_silent].any()
        assert mask[fully_tone].all()

    def test_mask_length_matches_mfcc_frames(self):
        audio = AudioBuffer(tone(5000))
        assert len(energy_sad(audio)) == compute_mfcc(audio).shape[0]


class TestAppendDeltas:
    def test_output_dim_triples(self):
        feats = np.random.default_rng(0).normal(size=(40, 19))
        assert append_deltas(feats).shape == (40, 57)

    def test_constant_features_have_zero_deltas(self):
        feats = np.tile(np.arange(5.0), (30, 1))
        out = append_deltas(feats)
        assert np.allclose(out[:, 5:], 0.0)
        assert np.allclose(out[:, :5], feats)

    def test_linear_ramp_delta_equals_slope(self):
        # oracle: regression over a ramp a*t + b has slope exactly a at
        # frames farther than the window from either edge
        slopes = np.array([0.5, -2.0, 3.25])
        t = np.arange(50.0)
        feats = t[:, None] * slopes[None, :] + np.array([1.0, 0.0, -4.0])
        out = append_deltas(feats, delta_window=2)
        interior = slice(2, -2)
        assert np.allclose(out[interior, 3:6], np.tile(slopes, (46, 1)))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            append_deltas(np.empty((0, 3)))


class TestCmvn:
    def test_zero_mean_unit_variance(self):
        rng = np.random.default_rng(1)
        out = cmvn(rng.normal(3.0, 5.0, size=(200, 7)))
        assert np.all(np.abs(out.mean(axis=0)) < 1e-6)
        assert np.all(np.abs(out.var(axis=0) - 1.0) < 1e-6)

    def test_already_standardized_unchanged(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(500, 4))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        assert np.allclose(cmvn(x), x, atol=1e-6)

    def test_constant_dimension_maps_to_zero(self):
        x = np.column_stack([np.full(50, 3.7), np.random.default_rng(3).normal(size=50)])
        out = cmvn(x)
        assert np.all(out[:, 0] == 0.0)
        assert np.all(np.isfinite(out))


class TestTruncateActive:
    def test_eval_skip500_slices_after_500(self):
        feats = np.arange(1200.0)[:, None] * np.ones((1, 3))
        out = truncate_active(feats, 200, mode="eval_skip500")
        assert out.shape == (200, 3)
        assert np.array_equal(out, feats[500:700])

    def test_insufficient_frames_error_names_shortfall(self):
        feats = np.zeros((100, 2))
        with pytest.raises(InsufficientFramesError, match="short by 1"):
            truncate_active(feats, 101, mode="random_start")
        with pytest.raises(InsufficientFramesError):
            truncate_active(feats, 50, mode="eval_skip500")

    def test_random_start_is_seeded(self):
        feats = np.random.default_rng(4).normal(size=(300, 5))
        a = truncate_active(feats, 64, mode="random_start", seed=123)
        b = truncate_active(feats, 64, mode="random_start", seed=123)
        assert np.array_equal(a, b)

    def test_random_start_output_is_contiguous_slice(self):
        feats = np.random.default_rng(5).normal(size=(120, 2))
        out = truncate_active(feats, 30, mode="random_start", seed=9)
        starts = [s for s in range(91) if np.array_equal(feats[s : s + 30], out)]
        assert len(starts) == 1

    def test_random_start_full_length_is_identity(self):
        feats = np.random.default_rng(6).normal(size=(80, 2))
        out = truncate_active(feats, 80, mode="random_start", seed=0)
        assert np.array_equal(out, feats)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            truncate_active(np.zeros((10, 2)), 5, mode="middle")


class TestPipeline:
    def test_extract_features_shape_and_normalization(self):
        audio = AudioBuffer(tone(16000))
        feats = extract_features(audio)
        assert feats.shape[1] == 57
        assert np.all(np.abs(feats.mean(axis=0)) < 1e-6)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FrontendConfig(window_ms=10, hop_ms=20)
        with pytest.raises(ValueError):
            FrontendConfig(sad_threshold_db=0.0)
        with pytest.raises(ValueError):
            FrontendConfig(n_cepstra=0)
