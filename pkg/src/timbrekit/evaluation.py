"""Accuracy, equal error rate, and the analytical FLOPs/parameter report.

EER convention: the second utterance being stronger is the positive class
and the score is its detection statistic. False-accept and false-reject
rates are swept over every distinct score; the EER is read off at their
crossing with linear interpolation between the two adjacent operating
points (the interpolation runs in rate space, so any strictly increasing
rescoring leaves the result untouched).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import (
    B_STRONGER,
    DiffNetModel,
    PairRecord,
    STANDARD_DESCRIPTORS,
    TrainConfig,
    init_model,
)
from .features import (
    CEPSTRAL_NAMES,
    CEPSTRAL_STEP,
    CEPSTRAL_WINDOW,
    ExtractionConfig,
    FEATURE_NAMES,
    LINEAR_FFT,
    MEL_FFT,
    filterbank_matrix,
)


@dataclass(frozen=True)
class ScoredPair:
    record: PairRecord
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0 or not np.isfinite(self.score):
            raise ValueError("score must be finite in [0, 1]")


def _scores_and_positives(scored) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([s.score for s in scored], dtype=np.float64)
    positive = np.array([s.record.label == B_STRONGER for s in scored], dtype=bool)
    return scores, positive


def accuracy(scored: list[ScoredPair], threshold: float = 0.5) -> float:
    """Percent of pairs whose thresholded score matches the label.

    Scores at or above the threshold predict the second utterance as
    stronger (ties go to B).
    """
    if not scored:
        raise ValueError("no scored pairs")
    scores, positive = _scores_and_positives(scored)
    return float(np.mean((scores >= threshold) == positive) * 100.0)


def far_frr_curve(scored: list[ScoredPair]) -> list[tuple[float, float, float]]:
    """(threshold, false-accept rate, false-reject rate) at each distinct score."""
    scores, positive = _scores_and_positives(scored)
    if not positive.any() or positive.all():
        raise ValueError("both label classes are required")
    pos = scores[positive]
    neg = scores[~positive]
    thresholds = np.unique(scores)
    out = []
    for t in thresholds:
        out.append((float(t), float(np.mean(neg >= t)), float(np.mean(pos < t))))
    out.append((float(thresholds[-1]) + 1.0, 0.0, 1.0))
    return out


def eer(scored: list[ScoredPair]) -> float:
    """Equal error rate in percent (see module docstring for the convention)."""
    curve = far_frr_curve(scored)
    far = np.array([c[1] for c in curve])
    frr = np.array([c[2] for c in curve])
    diff = far - frr  # starts at +, ends at -, monotone nonincreasing
    cross = int(np.argmax(diff <= 0.0))
    if cross == 0:
        return float(far[0] * 100.0)
    d0, d1 = diff[cross - 1], diff[cross]
    alpha = 0.0 if d0 == d1 else d0 / (d0 - d1)
    value = far[cross - 1] + alpha * (far[cross] - far[cross - 1])
    return float(value * 100.0)


# ---------------------------------------------------------------------------
# Analytical cost accounting.
#
# Conventions (also printed in every report): multiplies and adds counted
# separately; a complex FFT of size n costs 5*n*log2(n); real-input or
# real-output transforms cost half of that; a dense layer in->out costs
# 2*in*out + out; transcendental calls count as one op; root finding for a
# degree-p polynomial counts as 10*p^3. Frame rate is 1/step with every
# frame assumed voiced (the worst case), and per-frame harmonic band scans
# are tallied at a nominal 150 Hz f0.

_NOMINAL_F0 = 150.0

CONVENTIONS = (
    "multiplies and adds counted separately",
    "complex FFT(n) = 5*n*log2(n); real-input/output transforms = 2.5*n*log2(n)",
    "dense in->out = 2*in*out + out",
    "transcendental call = 1 op",
    "degree-p root finding = 10*p^3",
    "per-second extraction assumes every frame voiced; band scans at nominal 150 Hz f0",
)


@dataclass(frozen=True)
class CostReport:
    extraction_kind: str
    extraction_params: int
    extraction_flops_per_second: int
    dim_per_utterance: int
    extraction_breakdown: dict[str, int]
    classifier_params: int | None = None
    classifier_flops_per_pair: int | None = None
    classifier_breakdown: dict[str, int] | None = None

    def to_dict(self) -> dict:
        out = {
            "conventions": list(CONVENTIONS),
            "extraction": {
                "kind": self.extraction_kind,
                "params": self.extraction_params,
                "flops_per_second_of_audio": self.extraction_flops_per_second,
                "dim_per_utterance": self.dim_per_utterance,
                "breakdown": dict(self.extraction_breakdown),
            },
        }
        if self.classifier_params is not None:
            out["classifier"] = {
                "params": self.classifier_params,
                "flops_per_pair": self.classifier_flops_per_pair,
                "breakdown": dict(self.classifier_breakdown),
            }
        return out

    def format_text(self) -> str:
        lines = [
            f"extraction ({self.extraction_kind}): params={self.extraction_params}, "
            f"flops/s={self.extraction_flops_per_second:,}, dim/utt={self.dim_per_utterance}",
        ]
        for name, flops in self.extraction_breakdown.items():
            lines.append(f"  {name}: {flops:,}")
        if self.classifier_params is not None:
            lines.append(
                f"classifier: params={self.classifier_params:,}, "
                f"flops/pair={self.classifier_flops_per_pair:,}"
            )
            for name, flops in self.classifier_breakdown.items():
                lines.append(f"  {name}: {flops:,}")
        lines.append("conventions: " + "; ".join(CONVENTIONS))
        return "\n".join(lines)


def _fft_flops(n: int) -> int:
    return int(round(5.0 * n * np.log2(n)))


def _real_fft_flops(n: int) -> int:
    return int(round(2.5 * n * np.log2(n)))


def _dense_flops(n_in: int, n_out: int) -> int:
    return 2 * n_in * n_out + n_out


def _next_pow2(n: int) -> int:
    return 1 << (int(n - 1)).bit_length()


def _acoustic_breakdown(config: ExtractionConfig) -> dict[str, int]:
    sr = config.sample_rate
    frames = int(round(1.0 / config.frame.step))
    slice_n = int(round(config.frame.window * sr))
    slice_fft = _next_pow2(4 * slice_n)
    slice_bins = slice_fft // 2 + 1

    pitch_n = int(round(3.0 / config.pitch.floor * sr))
    lag_max = int(sr / config.pitch.floor)
    pitch_fft = _next_pow2(pitch_n + lag_max + 2)
    lag_oversample = 4  # the ACF inverse transform runs on a 4x finer lag grid
    pitch = (
        4 * pitch_n  # mean removal and taper
        + _real_fft_flops(pitch_fft)
        + _real_fft_flops(lag_oversample * pitch_fft)
        + 3 * (pitch_fft // 2 + 1)  # squared magnitude
        + 2 * lag_oversample * (lag_max + 2)  # lag-domain normalization
        + 3 * lag_oversample * lag_max  # peak scan
        + 24  # parabolic refinement and gating
    )

    fo_rate = config.formant.analysis_rate
    fo_n = int(round(config.formant.window * fo_rate))
    order = config.formant.lpc_order
    burg_stages = sum(6 * (fo_n - 1 - m) for m in range(order))
    formants = fo_n + burg_stages + 10 * order**3 + 6 * order

    bin_hz = sr / slice_fft
    harmonic_bands = int(5 * (_NOMINAL_F0 / 2.0 / bin_hz)) * 2
    correction = 4 * 4 * 14  # up to 4 harmonics x 4 formants x closed-form term
    shr_bands = int(2 * 10 * (_NOMINAL_F0 / 4.0 / bin_hz)) * 2

    cpp_bins = int(config.cpp.quefrency_ceiling * sr) + 2
    cpp = 2 * slice_bins + _real_fft_flops(slice_fft) + 4 * cpp_bins + 6 * cpp_bins

    resample_taps = 2 * 10 * 16 + 1  # polyphase kaiser design for 16 k -> 11 k
    per_frame = {
        "pitch_autocorrelation": pitch,
        "slice_spectrum": 2 * slice_n + _real_fft_flops(slice_fft),
        "cepstral_peak": cpp,
        "formant_lpc": formants,
        "harmonic_amplitudes": harmonic_bands + correction,
        "subharmonic_ratio": shr_bands,
        "rms": 3 * slice_n,
    }
    breakdown = {name: flops * frames for name, flops in per_frame.items()}
    breakdown["global_peak_scan"] = 2 * sr
    breakdown["formant_rate_resample"] = int(
        2 * np.ceil(resample_taps / 11) * fo_rate + 2 * fo_rate
    )
    breakdown["pooling"] = 4 * 26 * frames
    return breakdown


def _cepstral_breakdown(kind: str) -> dict[str, int]:
    sr = 16000
    frames = int(round(1.0 / CEPSTRAL_STEP))
    n = int(round(CEPSTRAL_WINDOW * sr))
    nfft = MEL_FFT if kind == "mfcc" else LINEAR_FFT
    bank = filterbank_matrix(nfft, sr, "mel" if kind == "mfcc" else "linear")
    bins = nfft // 2 + 1
    per_frame = {
        "windowed_spectrum": 2 * n + _real_fft_flops(nfft) + 3 * bins,
        "filterbank": 2 * int(np.count_nonzero(bank)),
        "log_energies": 2 * bank.shape[0],
        "dct": 2 * bank.shape[0] * 13 + 13,
    }
    breakdown = {name: flops * frames for name, flops in per_frame.items()}
    breakdown["pooling"] = 2 * 13 * frames
    return breakdown


def _classifier_breakdown(model: DiffNetModel) -> dict[str, int]:
    d2 = model.input_dim
    h = model.hidden_dim
    n = len(model.descriptors)
    return {
        "z_score_and_clip": 3 * d2,
        "feature_gains": d2,
        "fc1": _dense_flops(d2, h),
        "batch_norm": 4 * h,
        "relu": h,
        "fc2": _dense_flops(h, n),
        "sigmoid": 4 * n,
    }


def cost_report(
    feature_kind: str,
    model: DiffNetModel | None = None,
    config: ExtractionConfig = ExtractionConfig(),
    include_classifier: bool = True,
) -> CostReport:
    """Closed-form operation tallies for extraction and (optionally) the classifier.

    Pure function of the configuration: nothing is measured. When no model
    is given a default-shaped one (H=128, 18 descriptors) is costed.
    """
    if feature_kind == "acoustic":
        breakdown = _acoustic_breakdown(config)
        dim = len(FEATURE_NAMES)
    elif feature_kind in ("mfcc", "lfc"):
        breakdown = _cepstral_breakdown(feature_kind)
        dim = 13
    else:
        raise ValueError(f"unknown feature kind {feature_kind!r}")

    classifier_params = classifier_flops = classifier_breakdown = None
    if include_classifier:
        if model is None:
            names = FEATURE_NAMES if feature_kind == "acoustic" else CEPSTRAL_NAMES
            model = init_model(
                names, STANDARD_DESCRIPTORS, TrainConfig(), np.random.default_rng(0)
            )
        classifier_breakdown = _classifier_breakdown(model)
        classifier_params = model.parameter_count()
        classifier_flops = sum(classifier_breakdown.values())

    return CostReport(
        extraction_kind=feature_kind,
        extraction_params=0,
        extraction_flops_per_second=sum(breakdown.values()),
        dim_per_utterance=dim,
        extraction_breakdown=breakdown,
        classifier_params=classifier_params,
        classifier_flops_per_pair=classifier_flops,
        classifier_breakdown=classifier_breakdown,
    )
