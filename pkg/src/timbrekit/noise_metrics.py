"""Inharmonic source metrics: cepstral peak prominence and the
subharmonic-to-harmonic ratio.

Both operate on the same Hann-windowed slice spectrum the tilt measures
use, so an extraction pass computes that spectrum once per frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import Spectrum, magnitude_spectrum

# Spectral floor relative to the peak bin before taking logs. A relative
# (not absolute) floor keeps CPP exactly invariant to amplitude scaling.
_REL_SPECTRAL_FLOOR = 1e-6
_LOG_GUARD = 1e-30


@dataclass(frozen=True)
class CppConfig:
    quefrency_floor: float = 1.0 / 500.0
    quefrency_ceiling: float = 1.0 / 60.0
    trend_floor: float = 0.001  # trend fitted over [trend_floor, quefrency_ceiling]

    def __post_init__(self):
        if not 0 < self.quefrency_floor < self.quefrency_ceiling:
            raise ValueError("need 0 < quefrency_floor < quefrency_ceiling")


@dataclass(frozen=True)
class ShrConfig:
    harmonic_count_max: int = 10
    floor_db: float = -30.0

    def __post_init__(self):
        if self.harmonic_count_max < 2:
            raise ValueError("need at least two harmonics")


def _cepstrum_db(spec: Spectrum, upto: int) -> np.ndarray:
    """Magnitude (in dB) of the inverse transform of the dB power spectrum.

    Quefrency 0 soaks up the overall signal level, so everything past it
    is exactly invariant to amplitude scaling. Only the first `upto`
    quefrency bins are converted (all that peak search and trend need).
    """
    peak = float(np.max(spec.magnitudes))
    if peak <= 0:
        raise ValueError("zero spectrum")
    level_db = 20.0 * np.log10(np.maximum(spec.magnitudes, peak * _REL_SPECTRAL_FLOOR))
    cep = np.fft.irfft(level_db, spec.fft_size)[:upto]
    return 20.0 * np.log10(np.abs(cep) + _LOG_GUARD)


def _search_range(spec: Spectrum, config: CppConfig) -> tuple[int, int]:
    lo = int(np.ceil(config.quefrency_floor * spec.sample_rate))
    hi = min(
        int(np.floor(config.quefrency_ceiling * spec.sample_rate)), spec.fft_size // 2 - 2
    )
    if hi <= lo or lo < 2:
        raise ValueError("quefrency search range is empty at this sample rate")
    return lo, hi


def _refined_peak(values: np.ndarray, lo: int, hi: int) -> tuple[float, float]:
    """(position in bins, value) of the interpolated maximum over [lo, hi]."""
    i = lo + int(np.argmax(values[lo : hi + 1]))
    denom = values[i - 1] - 2.0 * values[i] + values[i + 1]
    if denom < 0:
        delta = 0.5 * (values[i - 1] - values[i + 1]) / denom
        return i + delta, float(values[i] - 0.25 * (values[i - 1] - values[i + 1]) * delta)
    return float(i), float(values[i])


def cpp(window_samples: np.ndarray, sample_rate: float, config: CppConfig = CppConfig()) -> float:
    """Cepstral peak prominence of one slice, in dB.

    The dB power spectrum is inverse-transformed; the cepstrum is scanned
    for its peak over [quefrency_floor, quefrency_ceiling], the peak is
    refined by 3-point parabolic interpolation, and a least-squares line
    fitted over [trend_floor, quefrency_ceiling] is subtracted at the peak
    quefrency.
    """
    x = np.asarray(window_samples, dtype=np.float64)
    need = int(np.ceil(2.0 * config.quefrency_ceiling * sample_rate))
    if x.size < need:
        raise ValueError(
            f"window of {x.size} samples is under twice the quefrency ceiling ({need})"
        )
    return cpp_from_spectrum(magnitude_spectrum(x, sample_rate), config)


def cpp_from_spectrum(spec: Spectrum, config: CppConfig = CppConfig()) -> float:
    """CPP from an already-computed slice spectrum (the extraction fast path)."""
    lo, hi = _search_range(spec, config)
    cep_db = _cepstrum_db(spec, hi + 2)
    pos, peak_db = _refined_peak(cep_db, lo, hi)
    peak_q = pos / spec.sample_rate

    t0 = max(2, int(np.ceil(config.trend_floor * spec.sample_rate)))
    quefrency = np.arange(t0, hi + 1) / spec.sample_rate
    values = cep_db[t0 : hi + 1]
    q_mean = quefrency.mean()
    v_mean = values.mean()
    slope = float(np.dot(quefrency - q_mean, values - v_mean) / np.dot(quefrency - q_mean, quefrency - q_mean))
    intercept = v_mean - slope * q_mean
    return float(peak_db - (slope * peak_q + intercept))


def peak_quefrency(
    window_samples: np.ndarray, sample_rate: float, config: CppConfig = CppConfig()
) -> float:
    """Quefrency (s) of the cepstral peak; its reciprocal estimates f0."""
    spec = magnitude_spectrum(np.asarray(window_samples, dtype=np.float64), sample_rate)
    lo, hi = _search_range(spec, config)
    cep_db = _cepstrum_db(spec, hi + 2)
    pos, _ = _refined_peak(cep_db, lo, hi)
    return float(pos / spec.sample_rate)


def shr(spec: Spectrum, f0: float, config: ShrConfig = ShrConfig()) -> float:
    """Subharmonic-to-harmonic ratio in dB, clamped at config.floor_db.

    Sums the peak magnitude within +-f0/8 of each harmonic k*f0 and of
    each half-integer multiple (k - 1/2)*f0, k = 1..K, with K capped both
    by harmonic_count_max and by Nyquist.
    """
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    count = min(config.harmonic_count_max, int(np.floor(spec.nyquist / f0)))
    if count < 2:
        raise ValueError("fewer than two harmonics below Nyquist")

    k = np.arange(1, count + 1)
    centers = np.concatenate([k * f0, (k - 0.5) * f0])
    starts = np.searchsorted(spec.frequencies, centers - f0 / 8.0, side="left")
    stops = np.maximum(
        np.searchsorted(spec.frequencies, centers + f0 / 8.0, side="right"), starts + 1
    )
    mags = spec.magnitudes
    peaks = [mags[i0:i1].max() for i0, i1 in zip(starts, stops)]
    harmonic_sum = float(np.sum(peaks[:count]))
    subharmonic_sum = float(np.sum(peaks[count:]))
    ratio_db = 20.0 * np.log10((subharmonic_sum + _LOG_GUARD) / (harmonic_sum + _LOG_GUARD))
    return float(max(ratio_db, config.floor_db))
