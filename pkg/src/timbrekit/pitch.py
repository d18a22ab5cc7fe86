"""Fundamental frequency estimation and the voiced/unvoiced gate.

The estimator is a frame-local normalized autocorrelation: the ACF of the
mean-subtracted, Hann-tapered frame is divided (in the lag domain) by the
ACF of the taper itself, which undoes the taper's own decay and leaves an
estimate of the signal's true periodicity in [0, 1]. There is no
cross-frame path search; each frame picks its own best lag.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioBuffer, FrameSpec, frame_slices

# Peaks within this normalized-strength margin of the best one count as
# ties, and the shortest lag among them wins. Without this, a perfectly
# periodic signal (ACF ~1 at every multiple of the period) would pick the
# period or an octave below it at the mercy of interpolation noise; the
# margin also decides how much subharmonic (period-doubling) energy it
# takes before the tracker accepts the doubled period as the pitch.
_SHORT_LAG_MARGIN = 0.08


@dataclass(frozen=True)
class PitchConfig:
    floor: float = 75.0
    ceiling: float = 600.0
    voicing_threshold: float = 0.45
    silence_threshold: float = 0.03

    def __post_init__(self):
        if not 0 < self.floor < self.ceiling:
            raise ValueError("need 0 < floor < ceiling")
        if not 0 <= self.voicing_threshold <= 1:
            raise ValueError("voicing_threshold must be in [0, 1]")
        if self.silence_threshold < 0:
            raise ValueError("silence_threshold must be nonnegative")


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 (NaN where unvoiced) and periodicity strength in [0, 1]."""

    times: np.ndarray
    f0: np.ndarray
    strength: np.ndarray

    @property
    def voiced(self) -> np.ndarray:
        return np.isfinite(self.f0)

    @property
    def voiced_count(self) -> int:
        return int(self.voiced.sum())


# The ACF is evaluated on a lag grid this many times finer than the sample
# grid (by zero-padding the power spectrum before the inverse transform,
# i.e. band-limited interpolation). Peaks of strongly harmonic signals are
# only a couple of samples wide, and a 3-point parabola on the raw sample
# grid undervalues any period that falls between samples.
_LAG_OVERSAMPLE = 4


@lru_cache(maxsize=8)
def _window_and_acf(n: int, nfft: int) -> tuple[np.ndarray, np.ndarray]:
    w = np.hanning(n)
    power = np.abs(np.fft.rfft(w, nfft)) ** 2
    acf = np.fft.irfft(power, _LAG_OVERSAMPLE * nfft)
    w.setflags(write=False)
    acf.setflags(write=False)
    return w, acf


def _next_pow2(n: int) -> int:
    return 1 << (int(n - 1)).bit_length()


def frame_pitch(
    window_samples: np.ndarray,
    config: PitchConfig,
    sample_rate: float,
    global_peak: float,
) -> tuple[float | None, float]:
    """Estimate (f0, strength) for one frame; f0 is None when unvoiced.

    global_peak is the absolute peak of the whole utterance; frames whose
    own peak falls below silence_threshold times it are gated out before
    any correlation is computed.
    """
    x = np.asarray(window_samples, dtype=np.float64)
    n = x.size
    lag_min = max(2, int(np.ceil(sample_rate / config.ceiling)))
    lag_max = int(np.floor(sample_rate / config.floor))
    if n < 2 * lag_max:
        raise ValueError(
            f"window of {n} samples is under two periods of the {config.floor} Hz floor"
        )

    local_peak = float(np.max(np.abs(x)))
    if global_peak <= 0 or local_peak < config.silence_threshold * global_peak:
        return None, 0.0

    nfft = _next_pow2(n + lag_max + 2)
    w, w_acf = _window_and_acf(n, nfft)
    xw = (x - x.mean()) * w
    power = np.abs(np.fft.rfft(xw, nfft)) ** 2
    acf = np.fft.irfft(power, _LAG_OVERSAMPLE * nfft)
    if acf[0] <= 0:
        return None, 0.0
    upper = _LAG_OVERSAMPLE * (lag_max + 1) + 1
    r = (acf[: upper + 1] / acf[0]) / (w_acf[: upper + 1] / w_acf[0])

    lo = _LAG_OVERSAMPLE * lag_min
    inner = r[lo:upper]
    is_peak = (inner > r[lo - 1 : upper - 1]) & (inner >= r[lo + 1 : upper + 1])
    candidates = []  # (strength, f0)
    for i in np.nonzero(is_peak)[0] + lo:
        denom = r[i - 1] - 2.0 * r[i] + r[i + 1]
        if denom >= 0:  # flat top, no curvature to interpolate
            pos, value = float(i), float(r[i])
        else:
            delta = 0.5 * (r[i - 1] - r[i + 1]) / denom
            pos = i + delta
            value = float(r[i] - 0.25 * (r[i - 1] - r[i + 1]) * delta)
        f0 = sample_rate * _LAG_OVERSAMPLE / pos
        f0 = min(max(f0, config.floor), config.ceiling)
        candidates.append((value, f0))
    if not candidates:
        return None, 0.0

    best = max(v for v, _ in candidates)
    f0 = max(f for v, f in candidates if v >= best - _SHORT_LAG_MARGIN)
    strength = float(np.clip(best, 0.0, 1.0))
    if strength < config.voicing_threshold:
        return None, strength
    return float(f0), strength


def pitch_track(
    buf: AudioBuffer, config: PitchConfig = PitchConfig(), step: float = 0.010
) -> PitchTrack:
    """Track f0 every `step` seconds with a 3-period-of-floor analysis window."""
    window = 3.0 / config.floor
    if buf.duration < window:
        raise ValueError(
            f"buffer of {buf.duration:.3f} s is shorter than the {window:.3f} s pitch window"
        )
    global_peak = float(np.max(np.abs(buf.samples)))
    frames = frame_slices(buf, FrameSpec(step=step, window=window))
    times = np.array([t for t, _ in frames])
    f0 = np.full(len(frames), np.nan)
    strength = np.zeros(len(frames))
    for i, (_, x) in enumerate(frames):
        value, s = frame_pitch(x, config, buf.sample_rate, global_peak)
        strength[i] = s
        if value is not None:
            f0[i] = value
    return PitchTrack(times=times, f0=f0, strength=strength)
