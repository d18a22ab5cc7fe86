"""Cross-module verification harness.

Holds the independent oracles the test suite checks the fast paths
against (a direct single-frequency DFT projection, an exhaustive-threshold
EER sweep) and the seeded synthetic-voice corpus whose pair labels are
exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import SynthSpec
from .diffnet import A_STRONGER, B_STRONGER, PairRecord

_ORACLE_FLOOR_DB = -120.0

# Descriptor -> generator knob. Labels order by the knob's ground truth.
CORPUS_DESCRIPTORS = {
    "higher": "f0",
    "brighter": "tilt_db_per_octave",
    "rougher": "subharmonic_gain",
}

# Pairs whose knob values differ by less than this are not emitted; the
# labels stay exact either way, this just keeps the planted differences
# above the extraction noise floor.
_MIN_GAP = {
    "f0": 12.0,
    "tilt_db_per_octave": 1.5,
    "subharmonic_gain": 0.03,
}


def dft_amplitude_oracle(samples, freq: float, sample_rate: float) -> float:
    """Level (dB) of the Hann-windowed frame at exactly `freq`.

    A direct projection onto one complex exponential, sharing only the dB
    reference with harmonic_amplitude; clamped at -120 dB for silence.
    """
    x = np.asarray(samples, dtype=np.float64)
    if freq >= sample_rate / 2.0:
        raise ValueError("frequency must be below Nyquist")
    n = np.arange(x.size)
    projection = np.sum(x * np.hanning(x.size) * np.exp(-2j * np.pi * freq * n / sample_rate))
    magnitude = abs(projection)
    if magnitude <= 0.0:
        return _ORACLE_FLOOR_DB
    return float(max(20.0 * np.log10(magnitude), _ORACLE_FLOOR_DB))


def eer_oracle(scores, positive) -> float:
    """Exhaustive-threshold EER in percent, pure-Python loops throughout.

    Same convention as evaluation.eer (positive class = second utterance
    stronger, linear interpolation at the rate crossing) computed the slow
    way: every distinct score is tried as a threshold and the rates are
    counted one pair at a time.
    """
    scores = [float(s) for s in scores]
    positive = [bool(p) for p in positive]
    pos = [s for s, p in zip(scores, positive) if p]
    neg = [s for s, p in zip(scores, positive) if not p]
    if not pos or not neg:
        raise ValueError("both label classes are required")

    thresholds = sorted(set(scores))
    thresholds.append(thresholds[-1] + 1.0)
    points = []
    for t in thresholds:
        false_accepts = sum(1 for s in neg if s >= t)
        false_rejects = sum(1 for s in pos if s < t)
        points.append((false_accepts / len(neg), false_rejects / len(pos)))

    previous = None
    for far, frr in points:
        if far - frr <= 0.0:
            if previous is None:
                return far * 100.0
            far0, frr0 = previous
            d0, d1 = far0 - frr0, far - frr
            alpha = 0.0 if d0 == d1 else d0 / (d0 - d1)
            return (far0 + alpha * (far - far0)) * 100.0
        previous = (far, frr)
    raise AssertionError("rate curves never crossed")  # unreachable: sentinel guarantees it


@dataclass(frozen=True)
class SyntheticVoice:
    utt_id: str
    spec: SynthSpec
    truth: dict[str, float]


@dataclass(frozen=True)
class SyntheticCorpus:
    voices: list[SyntheticVoice]
    pairs: list[PairRecord]
    splits: dict[str, str]  # utt_id -> "train" | "test"

    def split_pairs(self, split: str) -> list[PairRecord]:
        return [p for p in self.pairs if self.splits[p.utt_a] == split]


def build_timbre_corpus(seed: int, size: int, pairs_per_descriptor: int = 600) -> SyntheticCorpus:
    """Seeded corpus of resonated synthetic voices with exact pair labels.

    Each voice draws an f0, a source tilt, a subharmonic gain, a touch of
    noise, and jittered vocal-tract resonances; the three descriptors map
    one-to-one onto the first three knobs and every pair is labeled by the
    true knob ordering. Speakers are split 70/30 into train/test with no
    overlap, and pairs never cross the split.
    """
    if size < 2:
        raise ValueError("corpus needs at least two voices")
    rng = np.random.default_rng(seed)

    voices = []
    for i in range(size):
        f0 = float(rng.uniform(95.0, 260.0))
        # Source rolloff window where all four resonances stay detectable:
        # steeper than about -10 dB/octave starves F4.
        tilt = float(rng.uniform(-9.0, -2.0))
        # Kept above the -30 dB SHR clamp (gain 0.032) and below the point
        # where the period-doubled component starts capturing the pitch.
        sub_gain = float(rng.uniform(0.04, 0.11))
        noise_gain = float(rng.uniform(0.002, 0.01))
        formants = tuple(
            (float(rng.normal(center, center * 0.06)), bandwidth)
            for center, bandwidth in ((500.0, 80.0), (1500.0, 100.0), (2500.0, 150.0), (3500.0, 200.0))
        )
        spec = SynthSpec(
            kind="mixture",
            f0=f0,
            duration=1.0,
            amplitude=0.4,
            formants=formants,
            subharmonic_gain=sub_gain,
            noise_gain=noise_gain,
            tilt_db_per_octave=tilt,
            seed=int(seed * 10007 + i),
        )
        truth = {"f0": f0, "tilt_db_per_octave": tilt, "subharmonic_gain": sub_gain}
        voices.append(SyntheticVoice(f"spk{i:03d}", spec, truth))

    n_train = max(1, int(round(size * 0.7)))
    splits = {v.utt_id: ("train" if i < n_train else "test") for i, v in enumerate(voices)}
    by_split = {
        "train": [v for v in voices if splits[v.utt_id] == "train"],
        "test": [v for v in voices if splits[v.utt_id] == "test"],
    }

    pairs = []
    for descriptor, knob in CORPUS_DESCRIPTORS.items():
        for split, members in by_split.items():
            want = pairs_per_descriptor if split == "train" else max(1, pairs_per_descriptor // 3)
            made = 0
            attempts = 0
            while made < want and attempts < want * 50:
                attempts += 1
                a, b = rng.choice(len(members), size=2, replace=False)
                va, vb = members[a], members[b]
                if abs(va.truth[knob] - vb.truth[knob]) < _MIN_GAP[knob]:
                    continue
                label = A_STRONGER if va.truth[knob] > vb.truth[knob] else B_STRONGER
                pairs.append(PairRecord(va.utt_id, vb.utt_id, descriptor, label))
                made += 1
    return SyntheticCorpus(voices=voices, pairs=pairs, splits=splits)
