"""Waveform I/O, silence trimming and the synthetic labeled corpus.

Real audio enters through 16-bit PCM RIFF/WAVE files only. The synthetic
corpus generator stands in for restricted clinical data: it encodes class
identity in the fundamental-frequency band and the amplitude-modulation rate,
which keeps the two classes cleanly separable in the spectral domain.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PCM_FULL_SCALE = 32768

# class 1 (depressed stand-in): low fundamental, slow modulation;
# class 0: higher fundamental, faster modulation.
_FUNDAMENTAL_HZ = {1: (80.0, 120.0), 0: (180.0, 260.0)}
_MOD_RATE_HZ = {1: (0.5, 1.5), 0: (4.0, 8.0)}
_NOISE_DB = -30.0
_N_HARMONICS = 6


class WavError(ValueError):
    """Base class for WAV decoding failures."""


class MalformedHeaderError(WavError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedEncodingError(WavError):
    """File is valid RIFF/WAVE but not 16-bit mono/stereo PCM."""


class EmptyPayloadError(WavError):
    """File carries a zero-length data chunk."""


@dataclass
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1] and a speaker identity."""

    samples: np.ndarray
    sample_rate: int = 16000
    speaker_id: str = ""
    label: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.size and not np.isfinite(self.samples).all():
            raise ValueError("samples contain non-finite values")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class ManifestEntry:
    speaker_id: str
    path: str
    label: int
    split: str
    duration_s: float


@dataclass
class CorpusManifest:
    """One clip per speaker; speaker ids are unique across the corpus."""

    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.speaker_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate speaker_id in manifest")

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM RIFF/WAVE file, scaled to [-1, 1], stereo averaged.

    Raises MalformedHeaderError / UnsupportedEncodingError / EmptyPayloadError
    depending on the defect encountered.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
            if len(body) < chunk_size:
                raise MalformedHeaderError(f"{path}: truncated data chunk")
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or len(fmt) < 16:
        raise MalformedHeaderError(f"{path}: missing or short fmt chunk")
    format_code, n_channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if format_code != 1:
        raise UnsupportedEncodingError(f"{path}: format code {format_code}, expected 1 (PCM)")
    if bits != 16:
        raise UnsupportedEncodingError(f"{path}: {bits}-bit samples, expected 16")
    if n_channels not in (1, 2):
        raise UnsupportedEncodingError(f"{path}: {n_channels} channels, expected mono or stereo")
    if data is None:
        raise MalformedHeaderError(f"{path}: missing data chunk")
    if len(data) == 0:
        raise EmptyPayloadError(f"{path}: zero-length data chunk")

    frames = np.frombuffer(data[: len(data) - (len(data) % (2 * n_channels))], dtype="<i2")
    if frames.size == 0:
        raise EmptyPayloadError(f"{path}: data chunk shorter than one frame")
    samples = frames.astype(np.float64) / PCM_FULL_SCALE
    if n_channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=samples, sample_rate=sample_rate, speaker_id=path.stem)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit mono PCM. Quantization error is < 1/32768."""
    q = np.clip(np.rint(clip.samples * PCM_FULL_SCALE), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    Path(path).write_bytes(header + payload)


def trim_silence(clip: AudioClip, frame_s: float = 0.1, energy_floor_db: float = -60.0) -> AudioClip:
    """Drop frames whose RMS level (dB re full scale) is at or below the floor.

    Frames are consecutive non-overlapping windows of frame_s; a trailing
    partial frame is judged on its own samples. A clip shorter than one frame
    is returned unchanged. Idempotent.
    """
    if frame_s <= 0:
        raise ValueError(f"frame_s must be positive, got {frame_s}")
    frame_len = int(round(frame_s * clip.sample_rate))
    if clip.samples.size < frame_len:
        return clip
    kept = []
    for start in range(0, clip.samples.size, frame_len):
        frame = clip.samples[start : start + frame_len]
        rms = float(np.sqrt(np.mean(frame**2)))
        if rms > 0 and 20.0 * np.log10(rms) > energy_floor_db:
            kept.append(frame)
    samples = np.concatenate(kept) if kept else np.empty(0)
    return AudioClip(samples, clip.sample_rate, clip.speaker_id, clip.label)


def _synth_clip(rng: np.random.Generator, label: int, duration_s: float, sample_rate: int) -> np.ndarray:
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate

    f0 = rng.uniform(*_FUNDAMENTAL_HZ[label])
    mod_rate = rng.uniform(*_MOD_RATE_HZ[label])
    jitter_rate = rng.uniform(2.0, 6.0)
    jitter_phase = rng.uniform(0.0, 2.0 * np.pi)
    mod_phase = rng.uniform(0.0, 2.0 * np.pi)
    harmonic_phases = rng.uniform(0.0, 2.0 * np.pi, size=_N_HARMONICS)

    # 1% FM jitter around the fundamental, integrated to instantaneous phase
    inst_freq = f0 * (1.0 + 0.01 * np.sin(2.0 * np.pi * jitter_rate * t + jitter_phase))
    phase = 2.0 * np.pi * np.cumsum(inst_freq) / sample_rate

    tone = np.zeros(n)
    for h in range(1, _N_HARMONICS + 1):
        tone += np.sin(h * phase + harmonic_phases[h - 1]) / h

    envelope = 1.0 - 0.4 * (1.0 + np.sin(2.0 * np.pi * mod_rate * t + mod_phase))  # in [0.2, 1]
    signal = tone * envelope

    noise_rms = float(np.sqrt(np.mean(signal**2))) * 10.0 ** (_NOISE_DB / 20.0)
    signal = signal + rng.standard_normal(n) * noise_rms
    signal *= 0.9 / np.max(np.abs(signal))
    return np.clip(signal, -1.0, 1.0)


def synth_corpus(
    n_speakers_per_class: int,
    duration_s: float,
    sample_rate: int = 16000,
    seed: int = 0,
    split: str = "train",
) -> tuple[CorpusManifest, list[AudioClip]]:
    """Generate a deterministic labeled corpus of harmonic-tone speakers.

    Per-speaker durations are drawn uniformly in [duration_s/2, duration_s] so
    crop counts differ across speakers. Class 0 speakers occupy a higher
    fundamental band than class 1 and modulate faster.
    """
    if n_speakers_per_class < 1:
        raise ValueError("need at least one speaker per class")
    rng = np.random.default_rng(seed)
    entries = []
    clips = []
    idx = 0
    for label in (0, 1):
        for _ in range(n_speakers_per_class):
            speaker_id = f"{split}{idx:03d}"
            dur = rng.uniform(duration_s / 2.0, duration_s)
            samples = _synth_clip(rng, label, dur, sample_rate)
            clip = AudioClip(samples, sample_rate, speaker_id, label)
            entries.append(ManifestEntry(speaker_id, "", label, split, clip.duration_s))
            clips.append(clip)
            idx += 1
    return CorpusManifest(entries), clips


MANIFEST_HEADER = ["speaker_id", "path", "label", "split", "duration_s"]


def save_manifest(path, manifest: CorpusManifest) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            writer.writerow([e.speaker_id, e.path, e.label, e.split, repr(e.duration_s)])


def load_manifest(path) -> CorpusManifest:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: bad manifest header {header}")
        entries = [
            ManifestEntry(r[0], r[1], int(r[2]), r[3], float(r[4])) for r in reader if r
        ]
    return CorpusManifest(entries)
