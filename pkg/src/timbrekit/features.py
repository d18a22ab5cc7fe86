"""Utterance-level feature extraction.

Runs the per-frame measures over a 10 ms grid, keeps only voiced frames,
and pools each of the 13 raw series into a global mean and a global
coefficient of variation, giving the 26-dimensional vector in the
canonical order below. Also provides the two cepstral baselines (MFCC and
its linear-frequency variant) and the on-disk feature-table formats.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .audio import AudioBuffer, FrameSpec, frame_slices, resample, slice_at
from .formants import FormantConfig, dispersion, formant_track
from .harmonics import magnitude_spectrum, rms_energy, tilt_measures
from .noise_metrics import CppConfig, ShrConfig, cpp_from_spectrum, shr
from .pitch import PitchConfig, pitch_track

# Canonical order of the 13 raw measures; the feature vector is their
# means followed by their CoVs in the same order. Stable across versions:
# feature files and checkpoints both carry these names.
MEASURE_NAMES = (
    "f0",
    "f1",
    "f2",
    "f3",
    "f4",
    "dispersion",
    "h1_h2",
    "h2_h4",
    "h4_h2k",
    "h2k_h5k",
    "cpp",
    "rms",
    "shr",
)
FEATURE_NAMES = tuple(f"mean_{n}" for n in MEASURE_NAMES) + tuple(
    f"cov_{n}" for n in MEASURE_NAMES
)
CEPSTRAL_NAMES = tuple(f"c{i:02d}" for i in range(13))

_COV_EPSILON = 1e-9
_LOG_FLOOR = 1e-10

# Cepstral-baseline constants (also consumed by the cost reporter). The
# mel bank's narrowest low-frequency triangle (~137 Hz wide) needs ~16 Hz
# bin spacing to be sampled adequately; the uniform bank's ~300 Hz
# triangles are fine at twice that, so the linear variant gets away with
# the shorter transform.
MEL_FFT = 1024
LINEAR_FFT = 512
CEPSTRAL_WINDOW = 0.025
CEPSTRAL_STEP = 0.010
N_FILTERS = 26
BAND_TOP = 8000.0


class SilentUtteranceError(ValueError):
    """Too few voiced frames to build a feature vector."""

    reason = "SILENT_UTTERANCE"


class EmptyFeatureError(ValueError):
    """A measure had no value on any voiced frame."""

    def __init__(self, feature: str):
        super().__init__(f"feature {feature} has no values on voiced frames")
        self.feature = feature
        self.reason = f"EMPTY_FEATURE:{feature}"


@dataclass(frozen=True)
class ExtractionConfig:
    sample_rate: int = 16000
    frame: FrameSpec = field(default_factory=FrameSpec)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    formant: FormantConfig = field(default_factory=FormantConfig)
    cpp: CppConfig = field(default_factory=CppConfig)
    shr: ShrConfig = field(default_factory=ShrConfig)
    min_voiced_frames: int = 10


@dataclass(frozen=True)
class FrameTrack:
    """Raw per-frame series: 13 measures keyed by MEASURE_NAMES, NaN = missing.

    Unvoiced frames are NaN across all 13 series.
    """

    times: np.ndarray
    voiced: np.ndarray
    values: dict[str, np.ndarray]


@dataclass(frozen=True)
class AcousticVector:
    """The 26-dimensional utterance embedding, ordered per FEATURE_NAMES."""

    values: np.ndarray
    voiced_frames: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values")
        if not np.all(np.isfinite(values)):
            raise ValueError("acoustic vector must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CepstralVector:
    """13 utterance-mean cepstral coefficients (MFCC or linear-frequency)."""

    values: np.ndarray
    frames: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(CEPSTRAL_NAMES),):
            raise ValueError(f"expected {len(CEPSTRAL_NAMES)} values")
        if not np.all(np.isfinite(values)):
            raise ValueError("cepstral vector must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def extract_track(buf: AudioBuffer, config: ExtractionConfig = ExtractionConfig()) -> FrameTrack:
    """All 13 raw measures on the 10 ms grid; unvoiced frames all-NaN."""
    buf = resample(buf, config.sample_rate)
    ptrack = pitch_track(buf, config.pitch, config.frame.step)
    n = ptrack.times.size
    values = {name: np.full(n, np.nan) for name in MEASURE_NAMES}
    voiced = ptrack.voiced.copy()

    voiced_idx = [i for i in range(n) if voiced[i]]
    centers = [float(ptrack.times[i]) for i in voiced_idx]
    formant_frames = formant_track(buf, config.formant, config.frame.step, centers=centers)

    for i, fframe in zip(voiced_idx, formant_frames):
        window = slice_at(buf, float(ptrack.times[i]), config.frame.window)
        if window is None:  # pitch window fit but the measure slice does not
            voiced[i] = False
            continue
        f0 = float(ptrack.f0[i])
        spectrum = magnitude_spectrum(window, buf.sample_rate)

        values["f0"][i] = f0
        for k in range(1, 5):
            freq = fframe.frequency(k)
            if freq is not None:
                values[f"f{k}"][i] = freq
        disp = dispersion(fframe.frequency(1), fframe.frequency(4))
        if disp is not None:
            values["dispersion"][i] = disp
        tilt = tilt_measures(spectrum, f0, fframe)
        for name, value in (
            ("h1_h2", tilt.h1_h2),
            ("h2_h4", tilt.h2_h4),
            ("h4_h2k", tilt.h4_h2k),
            ("h2k_h5k", tilt.h2k_h5k),
        ):
            if value is not None:
                values[name][i] = value
        values["cpp"][i] = cpp_from_spectrum(spectrum, config.cpp)
        values["rms"][i] = rms_energy(window)
        try:
            values["shr"][i] = shr(spectrum, f0, config.shr)
        except ValueError:
            pass  # f0 too high for two harmonics; stays missing

    for name in MEASURE_NAMES:
        values[name][~voiced] = np.nan
    return FrameTrack(times=ptrack.times, voiced=voiced, values=values)


def cov(series) -> float:
    """Population standard deviation over |mean| (plus epsilon), NaNs dropped."""
    x = np.asarray(series, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ValueError("empty series")
    return float(np.std(x) / (abs(float(np.mean(x))) + _COV_EPSILON))


def aggregate(track: FrameTrack, min_voiced_frames: int = 10) -> AcousticVector:
    """Pool a FrameTrack into the 26-dim vector (means then CoVs).

    Raises SilentUtteranceError below the voiced-frame minimum and
    EmptyFeatureError if any measure never took a value.
    """
    voiced_count = int(track.voiced.sum())
    if voiced_count < min_voiced_frames:
        raise SilentUtteranceError(
            f"{voiced_count} voiced frames (need {min_voiced_frames})"
        )
    means, covs = [], []
    for name in MEASURE_NAMES:
        x = track.values[name]
        x = x[np.isfinite(x)]
        if x.size == 0:
            raise EmptyFeatureError(name)
        means.append(float(np.mean(x)))
        covs.append(float(np.std(x) / (abs(float(np.mean(x))) + _COV_EPSILON)))
    return AcousticVector(np.array(means + covs), voiced_count)


def extract_vector(buf: AudioBuffer, config: ExtractionConfig = ExtractionConfig()) -> AcousticVector:
    """extract_track + aggregate in one call."""
    return aggregate(extract_track(buf, config), config.min_voiced_frames)


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def filterbank_matrix(nfft: int, sample_rate: float, scale: str) -> np.ndarray:
    """Triangular filterbank over the rfft bins, mel- or linearly spaced."""
    if scale == "mel":
        edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(BAND_TOP), N_FILTERS + 2))
    elif scale == "linear":
        edges = np.linspace(0.0, BAND_TOP, N_FILTERS + 2)
    else:
        raise ValueError(f"unknown filterbank scale {scale!r}")
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    bank = np.zeros((N_FILTERS, freqs.size))
    for i in range(N_FILTERS):
        left, center, right = edges[i], edges[i + 1], edges[i + 2]
        rising = (freqs > left) & (freqs <= center)
        falling = (freqs > center) & (freqs < right)
        bank[i, rising] = (freqs[rising] - left) / (center - left)
        bank[i, falling] = (right - freqs[falling]) / (right - center)
    return bank


def _cepstral(buf: AudioBuffer, scale: str, nfft: int) -> CepstralVector:
    buf = resample(buf, 16000)
    frames = frame_slices(buf, FrameSpec(step=CEPSTRAL_STEP, window=CEPSTRAL_WINDOW))
    bank = filterbank_matrix(nfft, buf.sample_rate, scale)
    window = np.hanning(int(round(CEPSTRAL_WINDOW * buf.sample_rate)))
    coeffs = np.zeros((len(frames), len(CEPSTRAL_NAMES)))
    for i, (_, x) in enumerate(frames):
        power = np.abs(np.fft.rfft(x * window, nfft)) ** 2
        log_energy = np.log(np.maximum(bank @ power, _LOG_FLOOR))
        coeffs[i] = dct(log_energy, type=2, norm="ortho")[: len(CEPSTRAL_NAMES)]
    return CepstralVector(coeffs.mean(axis=0), len(frames))


def mfcc(buf: AudioBuffer) -> CepstralVector:
    """13 mel-frequency cepstral coefficients, mean-pooled over all frames."""
    return _cepstral(buf, "mel", MEL_FFT)


def lfc(buf: AudioBuffer) -> CepstralVector:
    """The linear-frequency variant of mfcc (same pipeline, uniform centers)."""
    return _cepstral(buf, "linear", LINEAR_FFT)


# ---------------------------------------------------------------------------
# Feature tables on disk: CSV (default) or JSON lines, one row per utterance.

def feature_names_for(kind: str) -> tuple[str, ...]:
    if kind == "acoustic":
        return FEATURE_NAMES
    if kind in ("mfcc", "lfc"):
        return CEPSTRAL_NAMES
    raise ValueError(f"unknown feature kind {kind!r}")


def write_features(path, rows: list[tuple[str, np.ndarray, int]], kind: str) -> None:
    """Write (utt_id, vector, frame count) rows, sorted by id.

    The format follows the extension: .jsonl for JSON lines, CSV otherwise.
    Floats are written with repr, so a read round-trips bit-exactly.
    """
    names = feature_names_for(kind)
    rows = sorted(rows, key=lambda r: r[0])
    path = Path(path)
    if path.suffix == ".jsonl":
        with path.open("w") as fh:
            for utt_id, vector, count in rows:
                record = {"utt_id": utt_id}
                record.update({n: float(v) for n, v in zip(names, vector)})
                record["voiced_frames"] = int(count)
                fh.write(json.dumps(record) + "\n")
        return
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utt_id", *names, "voiced_frames"])
        for utt_id, vector, count in rows:
            writer.writerow([utt_id, *[repr(float(v)) for v in vector], int(count)])


def read_features(path) -> dict[str, np.ndarray]:
    """Load a feature table as {utt_id: vector}; accepts CSV or JSONL."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    if path.suffix == ".jsonl":
        with path.open() as fh:
            for line in fh:
                record = json.loads(line)
                utt_id = record.pop("utt_id")
                record.pop("voiced_frames", None)
                out[utt_id] = np.array([float(v) for v in record.values()])
        return out
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        value_cols = slice(1, len(header) - 1)  # utt_id ... voiced_frames
        for row in reader:
            out[row[0]] = np.array([float(v) for v in row[value_cols]])
    return out
