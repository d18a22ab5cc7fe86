"""Formant estimation: Burg LPC, root-to-resonance conversion, dispersion.

Each utterance is resampled once to twice the formant ceiling so that the
LPC search band spans exactly the analysis Nyquist range, then analyzed
frame by frame with a pre-emphasized, Gaussian-tapered 25 ms window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .audio import AudioBuffer, FrameSpec, frame_slices, resample


class Formant(NamedTuple):
    frequency: float
    bandwidth: float


@dataclass(frozen=True)
class FormantConfig:
    max_formants: int = 5
    ceiling: float = 5500.0
    pre_emphasis_from: float = 50.0
    max_bandwidth: float = 700.0
    window: float = 0.025

    def __post_init__(self):
        if self.max_formants < 1:
            raise ValueError("need at least one formant")
        if self.ceiling <= 0:
            raise ValueError("ceiling must be positive")

    @property
    def lpc_order(self) -> int:
        return 2 * self.max_formants

    @property
    def analysis_rate(self) -> int:
        return int(round(2.0 * self.ceiling))


@dataclass(frozen=True)
class FormantFrame:
    """Resonances of one frame, strictly ascending in frequency.

    Absent formants read as None through frequency()/bandwidth(); labels
    are positional (1-based) in ascending frequency order.
    """

    formants: tuple[Formant, ...] = ()

    def __post_init__(self):
        freqs = [f.frequency for f in self.formants]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("formants must be strictly ascending in frequency")

    def frequency(self, index: int) -> float | None:
        """Frequency of formant `index` (1-based), or None if missing."""
        if 1 <= index <= len(self.formants):
            return self.formants[index - 1].frequency
        return None

    def bandwidth(self, index: int) -> float | None:
        if 1 <= index <= len(self.formants):
            return self.formants[index - 1].bandwidth
        return None

    def __len__(self) -> int:
        return len(self.formants)


def burg(window_samples: np.ndarray, order: int, return_reflections: bool = False):
    """Burg's method: LPC coefficients a_1..a_p of the all-pole model.

    Minimizes the summed forward and backward prediction error. The
    reflection coefficients are bounded by 1 in magnitude (Cauchy-Schwarz),
    so the model polynomial 1 + sum a_k z^-k is minimum phase.

    Raises ValueError for windows with no signal energy.
    """
    x = np.asarray(window_samples, dtype=np.float64)
    n = x.size
    if n <= order:
        raise ValueError(f"window of {n} samples cannot support order {order}")
    if not np.all(np.isfinite(x)):
        raise ValueError("window contains non-finite samples")
    if not np.any(x):
        raise ValueError("all-zero window")

    a = np.zeros(order + 1)
    a[0] = 1.0
    reflections = np.zeros(order)
    # Stage-m errors are kept aligned so f[i] pairs with b[i].
    f = x[1:].copy()
    b = x[:-1].copy()
    for m in range(1, order + 1):
        den = f @ f + b @ b
        if den <= 0:
            break  # residual energy exhausted; remaining coefficients stay 0
        k = -2.0 * (f @ b) / den
        reflections[m - 1] = k
        prev = a[: m + 1].copy()
        a[1 : m + 1] = prev[1 : m + 1] + k * prev[m - 1 :: -1][:m]
        if m < order:
            f, b = f[1:] + k * b[1:], b[:-1] + k * f[:-1]
    if return_reflections:
        return a[1:], reflections
    return a[1:]


def roots_to_formants(
    lpc: np.ndarray, analysis_rate: float, config: FormantConfig = FormantConfig()
) -> FormantFrame:
    """Map LPC polynomial roots to (frequency, bandwidth) resonances.

    A root r*exp(i*theta) with theta in (0, pi) becomes frequency
    theta*rate/(2*pi) and bandwidth -ln(r)*rate/pi. Roots outside
    (50 Hz, ceiling - 50 Hz) or broader than max_bandwidth are dropped.
    """
    coeffs = np.concatenate(([1.0], np.asarray(lpc, dtype=np.float64)))
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("non-finite LPC coefficients")
    roots = np.roots(coeffs)
    found = []
    for root in roots:
        if root.imag <= 0:
            continue
        radius = abs(root)
        if radius <= 0 or radius >= 1:
            continue
        freq = np.angle(root) * analysis_rate / (2.0 * np.pi)
        bandwidth = -np.log(radius) * analysis_rate / np.pi
        if 50.0 < freq < config.ceiling - 50.0 and 0 < bandwidth < config.max_bandwidth:
            found.append(Formant(float(freq), float(bandwidth)))
    found.sort(key=lambda fm: fm.frequency)
    return FormantFrame(tuple(found[: config.max_formants]))


@lru_cache(maxsize=8)
def _gaussian_window(n: int) -> np.ndarray:
    # exp(-12 x^2) taper rescaled to hit zero at the edges.
    t = (np.arange(n) + 0.5) / n - 0.5
    w = (np.exp(-12.0 * t * t) - np.exp(-12.0)) / (1.0 - np.exp(-12.0))
    w.setflags(write=False)
    return w


def formant_track(
    buf: AudioBuffer,
    config: FormantConfig = FormantConfig(),
    step: float = 0.010,
    centers=None,
) -> list[FormantFrame]:
    """Per-frame formants on the 10 ms grid (or at the given center times).

    Frames whose window falls outside the buffer, or where the LPC fit
    degenerates, yield an empty FormantFrame rather than failing.
    """
    work = resample(buf, config.analysis_rate)
    rate = work.sample_rate
    alpha = np.exp(-2.0 * np.pi * config.pre_emphasis_from / rate)
    emphasized = np.empty_like(work.samples)
    emphasized[0] = work.samples[0]
    emphasized[1:] = work.samples[1:] - alpha * work.samples[:-1]

    win = int(round(config.window * rate))
    taper = _gaussian_window(win)
    if centers is None:
        centers = [t for t, _ in frame_slices(work, FrameSpec(step=step, window=config.window))]

    frames = []
    for center in centers:
        start = int(round(center * rate - win / 2.0))
        if start < 0 or start + win > emphasized.size:
            frames.append(FormantFrame())
            continue
        xw = emphasized[start : start + win] * taper
        try:
            lpc = burg(xw, config.lpc_order)
            frames.append(roots_to_formants(lpc, rate, config))
        except ValueError:
            frames.append(FormantFrame())
    return frames


def dispersion(f1: float | None, f4: float | None) -> float | None:
    """Average spacing (f4 - f1)/3; None when either input is missing."""
    if f1 is None or f4 is None:
        return None
    return (f4 - f1) / 3.0
