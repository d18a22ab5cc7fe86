"""Magnitude-spectrum measures on the 40 ms voiced slice.

Harmonic amplitudes are read off a Hann-windowed, zero-padded spectrum by
peak-picking near multiples of f0, corrected for the gain that vocal-tract
resonances add at those frequencies, and differenced into the four
spectral-shape measures. Amplitudes are dB re full scale; only differences
enter the feature vector, so the reference cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formants import Formant, FormantFrame

_DB_GUARD = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """One-sided linear magnitude spectrum of a single analysis slice."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    window_length: int
    sample_rate: float

    @property
    def fft_size(self) -> int:
        return 2 * (self.magnitudes.size - 1)

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0


@dataclass(frozen=True)
class TiltMeasures:
    """Corrected harmonic amplitude differences, dB; None where undefined."""

    h1_h2: float | None
    h2_h4: float | None
    h4_h2k: float | None
    h2k_h5k: float | None


def _next_pow2(n: int) -> int:
    return 1 << (int(n - 1)).bit_length()


def magnitude_spectrum(window_samples: np.ndarray, sample_rate: float) -> Spectrum:
    """Hann-windowed magnitude spectrum, zero-padded to a power of two >= 4x."""
    x = np.asarray(window_samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty window")
    nfft = _next_pow2(4 * x.size)
    mags = np.abs(np.fft.rfft(x * np.hanning(x.size), nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    return Spectrum(freqs, mags, x.size, float(sample_rate))


def _band_peak_db(spec: Spectrum, lo: float, hi: float) -> float | None:
    i0 = int(np.searchsorted(spec.frequencies, lo, side="left"))
    i1 = int(np.searchsorted(spec.frequencies, hi, side="right"))
    if i0 >= spec.magnitudes.size or i1 <= i0:
        return None
    return float(20.0 * np.log10(spec.magnitudes[i0:i1].max() + _DB_GUARD))


def harmonic_amplitude(spec: Spectrum, target: float, f0: float) -> float | None:
    """Peak level (dB) near the harmonic of f0 closest to `target`.

    The search band is +-f0/4 around the snapped harmonic, tolerant of
    small f0 error while excluding the neighbors. Returns None when the
    band lies beyond Nyquist.
    """
    if f0 <= 0:
        raise ValueError("f0 must be positive")
    if target <= 0 or target >= spec.nyquist:
        return None
    k = max(1, int(round(target / f0)))
    harmonic = k * f0
    return _band_peak_db(spec, harmonic - f0 / 4.0, harmonic + f0 / 4.0)


def correction_db(freq: float, formants, sample_rate: float) -> float:
    """Total resonance gain (dB) the given formants contribute at `freq`.

    Each formant is modeled as a two-pole resonator; its term is the gain
    at freq relative to the resonator's DC gain. Terms add across formants
    and vanish as the pole radius goes to zero.
    """
    omega = 2.0 * np.pi * freq / sample_rate
    total = 0.0
    for formant_freq, bandwidth in formants:
        r = np.exp(-np.pi * bandwidth / sample_rate)
        omega_i = 2.0 * np.pi * formant_freq / sample_rate
        num = (1.0 - 2.0 * r * np.cos(omega_i) + r * r) ** 2
        den = (1.0 - 2.0 * r * np.cos(omega + omega_i) + r * r) * (
            1.0 - 2.0 * r * np.cos(omega - omega_i) + r * r
        )
        total += 10.0 * np.log10(num / den)
    return total


def formant_correction(
    amp_db: float | None, freq: float, formants, sample_rate: float
) -> float | None:
    """Remove formant gain from a measured harmonic amplitude ("starred" value)."""
    if amp_db is None:
        return None
    usable = [f for f in formants if f is not None]
    if not usable:
        return None
    return amp_db - correction_db(freq, usable, sample_rate)


def tilt_measures(spec: Spectrum, f0: float, formants: FormantFrame) -> TiltMeasures:
    """The four spectral-shape differences for one voiced slice.

    H1, H2, H4 sit at harmonics 1, 2, 4; H2kHz and H5kHz at the harmonics
    nearest 2 and 5 kHz. All but H5kHz are corrected for formant gain
    (H1/H2/H4 with F1 and F2, H2kHz with every detected formant). Any
    missing constituent makes the affected difference None.
    """
    fs = spec.sample_rate

    def snapped(target):
        return max(1, int(round(target / f0))) * f0

    raw = {t: harmonic_amplitude(spec, t, f0) for t in (f0, 2 * f0, 4 * f0, 2000.0, 5000.0)}

    first_two = [
        Formant(fr, bw)
        for fr, bw in [
            (formants.frequency(1), formants.bandwidth(1)),
            (formants.frequency(2), formants.bandwidth(2)),
        ]
        if fr is not None
    ]
    if len(first_two) < 2:
        return TiltMeasures(None, None, None, None)

    h1 = formant_correction(raw[f0], snapped(f0), first_two, fs)
    h2 = formant_correction(raw[2 * f0], snapped(2 * f0), first_two, fs)
    h4 = formant_correction(raw[4 * f0], snapped(4 * f0), first_two, fs)
    h2k = formant_correction(raw[2000.0], snapped(2000.0), formants.formants, fs)
    h5k = raw[5000.0]  # uncorrected by convention

    def diff(a, b):
        return a - b if a is not None and b is not None else None

    return TiltMeasures(diff(h1, h2), diff(h2, h4), diff(h4, h2k), diff(h2k, h5k))


def rms_energy(window_samples: np.ndarray) -> float:
    """Root mean square of the raw slice, no taper."""
    x = np.asarray(window_samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty window")
    return float(np.sqrt(np.mean(x * x)))
