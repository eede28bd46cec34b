import math

import numpy as np
import pytest

from speechdep.audio_io import AudioClip
from speechdep.features import (
    LogSpectrogram,
    StftConfig,
    featurize,
    featurize_raw,
    hamming_window,
    log_magnitude,
    minmax_normalize,
    normalize_feature,
    read_feature_cache,
    stft,
    write_feature_cache,
)
from speechdep.sampling import SampleCrop, crop


def _naive_dft_frame(frame, n_fft, n_bins):
    """O(n^2) windowed DFT of one frame, written from the definition."""
    windowed = np.zeros(n_fft)
    w = hamming_window(frame.size)
    windowed[: frame.size] = frame * w
    out = np.zeros(n_bins, dtype=complex)
    for k in range(n_bins):
        acc = 0.0 + 0.0j
        for i in range(n_fft):
            acc += windowed[i] * np.exp(-2j * math.pi * k * i / n_fft)
        out[k] = acc
    return out


def test_hamming_window_closed_form():
    n = 9
    w = hamming_window(n)
    assert w[0] == pytest.approx(0.08)
    assert w[-1] == pytest.approx(0.08)
    assert w[(n - 1) // 2] == pytest.approx(1.0)
    np.testing.assert_allclose(w, w[::-1], atol=1e-15)
    direct = [0.54 - 0.46 * math.cos(2 * math.pi * i / (n - 1)) for i in range(n)]
    np.testing.assert_allclose(w, direct, atol=1e-15)
    with pytest.raises(ValueError):
        hamming_window(1)


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(0)
    cfg = StftConfig(window_s=0.008, hop_s=0.004, n_fft=128)  # win 64, hop 32 at 8 kHz
    rate = 8000
    samples = rng.normal(size=5 * 32 + 7)  # ragged tail exercises zero padding
    spec = stft(samples, rate, cfg)
    win, hop = cfg.window_samples(rate), cfg.hop_samples(rate)
    n_frames = samples.size // hop
    assert spec.shape == (cfg.n_fft // 2 + 1, n_frames)
    padded = np.zeros((n_frames - 1) * hop + win)
    padded[: samples.size] = samples
    for t in range(n_frames):
        frame = padded[t * hop : t * hop + win]
        expected = _naive_dft_frame(frame, cfg.n_fft, cfg.n_fft // 2 + 1)
        np.testing.assert_allclose(spec[:, t], expected, atol=1e-9)


def test_stft_single_frame_parseval():
    rng = np.random.default_rng(1)
    cfg = StftConfig(window_s=0.016, hop_s=0.016, n_fft=256)
    rate = 16000
    samples = rng.normal(size=256)
    spec = stft(samples, rate, cfg)[:, 0]
    windowed = samples * hamming_window(256)
    # fold the rfft half-spectrum back to the full-spectrum energy
    energy = abs(spec[0]) ** 2 + abs(spec[-1]) ** 2 + 2 * np.sum(np.abs(spec[1:-1]) ** 2)
    time_energy = 256 * np.sum(windowed**2)
    assert energy == pytest.approx(time_energy, rel=1e-6)


def test_stft_default_shape_for_4s_16khz():
    samples = np.random.default_rng(2).normal(size=4 * 16000)
    spec = stft(samples, 16000)
    assert spec.shape == (513, 125)


def test_stft_bin_center_sinusoid_peaks_at_its_row():
    cfg = StftConfig()
    rate = 16000
    k = 100
    freq = k * rate / cfg.n_fft  # exactly bin-centered
    t = np.arange(2 * rate) / rate
    spec = np.abs(stft(np.sin(2 * np.pi * freq * t), rate, cfg))
    win, hop = cfg.window_samples(rate), cfg.hop_samples(rate)
    full_frames = (2 * rate - win) // hop + 1
    for col in range(full_frames):
        assert int(np.argmax(spec[:, col])) == k


def test_stft_input_validation():
    with pytest.raises(ValueError):
        stft(np.zeros(100), 16000)  # shorter than one hop
    with pytest.raises(ValueError):
        stft(np.zeros((4, 4)), 16000)
    bad = StftConfig(window_s=0.1, hop_s=0.05, n_fft=1024)  # window 1600 > n_fft
    with pytest.raises(ValueError):
        stft(np.zeros(16000), 16000, bad)


def test_log_magnitude_known_values():
    spec = np.array([[3 + 4j, 0.0]])
    out = log_magnitude(spec)
    assert out[0, 0] == pytest.approx(math.log(5 + 1e-10))
    assert out[0, 1] == pytest.approx(math.log(1e-10))


def test_minmax_normalize_range_and_constant():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 7))
    z = minmax_normalize(m)
    assert z.min() == 0.0 and z.max() == 1.0
    flat = minmax_normalize(np.full((3, 3), 2.5))
    np.testing.assert_array_equal(flat, np.zeros((3, 3)))


def test_normalization_happens_per_spectrogram():
    rng = np.random.default_rng(4)
    clip = AudioClip(rng.uniform(-0.8, 0.8, 8 * 16000), 16000, "s", 0)
    feats = [featurize(c, clip.sample_rate) for c in crop(clip, 4.0)]
    for f in feats:
        assert f.normalized
        assert f.values.min() == 0.0 and f.values.max() == 1.0
    raws = [featurize_raw(c, clip.sample_rate) for c in crop(clip, 4.0)]
    for f, r in zip(feats, raws):
        np.testing.assert_array_equal(f.values, minmax_normalize(r.values))


def test_feature_cache_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(5)
    clip = AudioClip(rng.uniform(-0.8, 0.8, 12 * 16000), 16000, "spk7", 1)
    crops = crop(clip, 4.0)
    raw = [featurize_raw(c, clip.sample_rate) for c in crops]
    path = tmp_path / "f.lspg"
    write_feature_cache(path, raw)

    reloaded_raw = read_feature_cache(path, normalize=False)
    for a, b in zip(raw, reloaded_raw):
        np.testing.assert_array_equal(a.values, b.values)
        assert (a.speaker_id, a.crop_index, a.label) == (b.speaker_id, b.crop_index, b.label)

    reloaded = read_feature_cache(path)
    for a, b in zip((featurize(c, clip.sample_rate) for c in crops), reloaded):
        np.testing.assert_array_equal(a.values, b.values)
        assert b.normalized


def test_feature_cache_rejects_bad_inputs(tmp_path):
    path = tmp_path / "f.lspg"
    with pytest.raises(ValueError, match="empty"):
        write_feature_cache(path, [])
    good = LogSpectrogram(np.zeros((4, 4), dtype=np.float32), "s", 0, 0)
    normalized = normalize_feature(good)
    with pytest.raises(ValueError, match="pre-normalization"):
        write_feature_cache(path, [normalized])
    other = LogSpectrogram(np.zeros((4, 5), dtype=np.float32), "s", 1, 0)
    with pytest.raises(ValueError, match="shape"):
        write_feature_cache(path, [good, other])


def test_feature_cache_rejects_corruption(tmp_path):
    path = tmp_path / "f.lspg"
    write_feature_cache(path, [LogSpectrogram(np.zeros((4, 4), dtype=np.float32), "s", 0, 0)])
    blob = bytearray(path.read_bytes())
    (tmp_path / "magic.lspg").write_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(ValueError, match="not a feature cache"):
        read_feature_cache(tmp_path / "magic.lspg")
    (tmp_path / "trail.lspg").write_bytes(bytes(blob) + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        read_feature_cache(tmp_path / "trail.lspg")


def test_stft_config_derived_sizes():
    cfg = StftConfig()
    assert cfg.window_samples(16000) == 1024
    assert cfg.hop_samples(16000) == 512
    assert cfg.freq_bins == 513
