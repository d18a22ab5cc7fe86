"""Audio buffers, WAV I/O, resampling, framing, and synthetic test signals.

All processing downstream of this module runs at a fixed internal rate of
16 kHz; :func:`load_audio` resamples on read unless told otherwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import lfilter, resample_poly

INTERNAL_RATE = 16000

SYNTH_KINDS = ("sine", "pulse_train", "resonated_pulses", "white_noise", "mixture")

# RIFF format tags we decode.
_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


class AudioError(ValueError):
    """Unreadable, unsupported, or degenerate audio input."""


@dataclass(frozen=True)
class AudioBuffer:
    """A mono signal: float64 samples (nominally in [-1, 1]) and a rate in Hz.

    Buffers are immutable after construction and safe to share across
    workers; the sample array is marked read-only.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError("AudioBuffer holds exactly one channel")
        if samples.size == 0:
            raise AudioError("zero-length audio")
        if not np.all(np.isfinite(samples)):
            raise AudioError("samples must be finite")
        if int(self.sample_rate) <= 0:
            raise AudioError("sample rate must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameSpec:
    """Analysis grid: hop and window length in seconds."""

    step: float = 0.010
    window: float = 0.040

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.window < self.step:
            raise ValueError("window must be at least one step")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic signal.

    kind selects the generator:
      sine               pure tone at f0
      pulse_train        unit impulse every 1/f0 s
      resonated_pulses   pulse train through cascaded 2-pole resonators
      white_noise        seeded uniform noise
      mixture            additive harmonic comb with optional half-integer
                         (subharmonic) comb, source tilt, noise, and the
                         resonator cascade when formants are given

    For the mixture kind the per-line amplitude of the subharmonic comb is
    exactly subharmonic_gain times the comb envelope at that frequency, so
    harmonic/subharmonic ratios are known analytically.
    """

    kind: str
    f0: float = 100.0
    duration: float = 1.0
    amplitude: float = 0.8
    formants: tuple[tuple[float, float], ...] = ()
    subharmonic_gain: float = 0.0
    noise_gain: float = 0.0
    tilt_db_per_octave: float = 0.0
    seed: int = 0
    sample_rate: int = INTERNAL_RATE

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise ValueError(f"unknown synth kind {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.kind != "white_noise" and self.f0 <= 0:
            raise ValueError("f0 must be positive")
        for freq, bandwidth in self.formants:
            if freq <= 0 or bandwidth <= 0:
                raise ValueError("formant frequencies and bandwidths must be positive")
        if self.subharmonic_gain < 0 or self.noise_gain < 0:
            raise ValueError("gains must be nonnegative")


def load_audio(path, target_rate: int | None = INTERNAL_RATE) -> AudioBuffer:
    """Read a RIFF/WAVE file as a mono buffer.

    Accepts linear PCM at 8/16/24/32 bits and IEEE float32, any channel
    count (channels are averaged). Integer samples are normalized by their
    full-scale magnitude (e.g. int16 by 32768). Resamples to target_rate
    unless target_rate is None.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    fmt, data = _parse_riff(raw, path)
    audio_format, n_channels, rate, bits = fmt
    samples = _decode_samples(data, audio_format, bits, path)
    if n_channels < 1:
        raise AudioError(f"{path}: invalid channel count {n_channels}")
    if n_channels > 1:
        usable = (samples.size // n_channels) * n_channels
        samples = samples[:usable].reshape(-1, n_channels).mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"{path}: zero-length audio")
    buf = AudioBuffer(samples, rate)
    if target_rate is not None and rate != target_rate:
        buf = resample(buf, target_rate)
    return buf


def _parse_riff(raw: bytes, path) -> tuple[tuple[int, int, int, int], bytes]:
    if len(raw) < 44 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioError(f"{path}: truncated fmt chunk")
            audio_format, n_channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
            if audio_format == _FMT_EXTENSIBLE:
                if len(body) < 26:
                    raise AudioError(f"{path}: truncated extensible fmt chunk")
                (audio_format,) = struct.unpack_from("<H", body, 24)
            fmt = (audio_format, n_channels, rate, bits)
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or data is None:
        raise AudioError(f"{path}: missing fmt or data chunk")
    return fmt, data


def _decode_samples(data: bytes, audio_format: int, bits: int, path) -> np.ndarray:
    if audio_format == _FMT_FLOAT:
        if bits != 32:
            raise AudioError(f"{path}: unsupported float width {bits}")
        return np.frombuffer(data, dtype="<f4").astype(np.float64)
    if audio_format != _FMT_PCM:
        raise AudioError(f"{path}: unsupported encoding (format tag {audio_format})")
    if bits == 8:
        return (np.frombuffer(data, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 24:
        usable = (len(data) // 3) * 3
        b = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        value = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        value -= (value & 0x800000) << 1  # sign extension
        return value.astype(np.float64) / 8388608.0
    if bits == 32:
        return np.frombuffer(data, dtype="<i4").astype(np.float64) / 2147483648.0
    raise AudioError(f"{path}: unsupported PCM width {bits}")


def write_wav(path, buf: AudioBuffer) -> None:
    """Write a buffer as 16-bit little-endian PCM, clipping to full scale."""
    pcm = np.clip(np.rint(buf.samples * 32767.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, _FMT_PCM, 1, buf.sample_rate, buf.sample_rate * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling; identity when rates match."""
    if target_rate <= 0:
        raise ValueError("target rate must be positive")
    if target_rate == buf.sample_rate:
        return buf
    ratio = Fraction(int(target_rate), buf.sample_rate)
    out = resample_poly(buf.samples, ratio.numerator, ratio.denominator)
    return AudioBuffer(out, target_rate)


def frame_slices(buf: AudioBuffer, spec: FrameSpec) -> list[tuple[float, np.ndarray]]:
    """Cut the buffer into (center_time, window) pairs on the analysis grid.

    Windows are centered: the first center sits at window/2 and the hop is
    spec.step. Slices that would run past the end are dropped.
    """
    win = int(round(spec.window * buf.sample_rate))
    hop = int(round(spec.step * buf.sample_rate))
    if win < 1 or hop < 1:
        raise ValueError("window and step must cover at least one sample")
    n = buf.samples.size
    if n < win:
        raise ValueError(
            f"buffer of {n} samples is shorter than one {win}-sample window"
        )
    out = []
    for start in range(0, n - win + 1, hop):
        center = (start + win / 2.0) / buf.sample_rate
        out.append((center, buf.samples[start : start + win]))
    return out


def slice_at(buf: AudioBuffer, center_time: float, window: float) -> np.ndarray | None:
    """Window of the given length centered at center_time, or None at the edges."""
    win = int(round(window * buf.sample_rate))
    start = int(round(center_time * buf.sample_rate - win / 2.0))
    if start < 0 or start + win > buf.samples.size:
        return None
    return buf.samples[start : start + win]


def synth(spec: SynthSpec) -> AudioBuffer:
    """Render a SynthSpec. Bitwise deterministic for equal specs."""
    sr = spec.sample_rate
    n = int(round(spec.duration * sr))
    if n < 1:
        raise ValueError("duration too short for one sample")
    t = np.arange(n) / sr
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "sine":
        x = spec.amplitude * np.sin(2.0 * np.pi * spec.f0 * t)
    elif spec.kind == "white_noise":
        x = spec.amplitude * rng.uniform(-1.0, 1.0, n)
    elif spec.kind == "pulse_train":
        x = _pulse_train(n, spec.f0, sr) * spec.amplitude
    elif spec.kind == "resonated_pulses":
        x = _resonate(_pulse_train(n, spec.f0, sr), spec.formants, sr)
        x = _peak_normalize(x, spec.amplitude)
    else:  # mixture
        x = _comb(t, spec, rng)
        if spec.noise_gain > 0:
            x = x + spec.noise_gain * rng.uniform(-1.0, 1.0, n)
        if spec.formants:
            x = _resonate(x, spec.formants, sr)
        x = _peak_normalize(x, spec.amplitude)
    return AudioBuffer(x, sr)


def _pulse_train(n: int, f0: float, sr: float) -> np.ndarray:
    """Band-limited pulse train: unit-height pulses exactly every 1/f0 s.

    Built as a flat harmonic comb (all multiples of f0 below 0.95 Nyquist)
    so the sampled signal is exactly periodic at f0; rounding discrete
    impulses onto the sample grid would alias the period for any f0 that
    does not divide the rate.
    """
    k_max = int(np.floor(0.475 * sr / f0))
    if k_max < 1:
        raise ValueError(f"f0 {f0} Hz leaves no harmonics below Nyquist at {sr} Hz")
    t = np.arange(n) / sr
    harmonics = np.arange(1, k_max + 1)
    x = np.cos(2.0 * np.pi * f0 * np.outer(harmonics, t)).sum(axis=0)
    return x / k_max  # pulse peaks hit exactly 1


def _resonate(x: np.ndarray, formants, sr: float) -> np.ndarray:
    for freq, bandwidth in formants:
        r = np.exp(-np.pi * bandwidth / sr)
        omega = 2.0 * np.pi * freq / sr
        x = lfilter([1.0], [1.0, -2.0 * r * np.cos(omega), r * r], x)
    return x


def _comb(t: np.ndarray, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Additive comb: harmonics of f0 plus an optional half-integer comb."""
    sr = spec.sample_rate
    top = 0.45 * sr  # keep components clear of Nyquist
    x = np.zeros_like(t)

    def envelope(freq):
        return 10.0 ** (spec.tilt_db_per_octave * np.log2(freq / spec.f0) / 20.0)

    k = 1
    while k * spec.f0 <= top:
        freq = k * spec.f0
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += envelope(freq) * np.cos(2.0 * np.pi * freq * t + phase)
        k += 1
    if spec.subharmonic_gain > 0:
        k = 1
        while (k - 0.5) * spec.f0 <= top:
            freq = (k - 0.5) * spec.f0
            phase = rng.uniform(0.0, 2.0 * np.pi)
            x += spec.subharmonic_gain * envelope(freq) * np.cos(
                2.0 * np.pi * freq * t + phase
            )
            k += 1
    return x


def _peak_normalize(x: np.ndarray, amplitude: float) -> np.ndarray:
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (amplitude / peak)
    return x
