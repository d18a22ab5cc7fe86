"""The JSON-lines pair manifest: one annotated comparison per line.

Record fields: utt_a, utt_b (audio paths or bare ids; a path's stem is the
id), descriptor, label ("A" or "B", where "A" means the first utterance is
the stronger one and maps to score 0), split ("train" or "test").
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .diffnet import PairRecord, STANDARD_DESCRIPTORS

SPLITS = ("train", "test")


@dataclass(frozen=True)
class ManifestRecord:
    record: PairRecord
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")


def utterance_id(value: str) -> str:
    """Bare id for a manifest utterance field (path stems for .wav paths)."""
    if value.lower().endswith(".wav"):
        return Path(value).stem
    return value


def read_manifest(path) -> list[ManifestRecord]:
    records = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                record = PairRecord(
                    utt_a=utterance_id(raw["utt_a"]),
                    utt_b=utterance_id(raw["utt_b"]),
                    descriptor=raw["descriptor"],
                    label=raw["label"],
                )
                records.append(ManifestRecord(record, raw["split"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    if not records:
        raise ValueError(f"{path}: empty manifest")
    return records


def write_manifest(path, records: list[ManifestRecord]) -> None:
    with Path(path).open("w") as fh:
        for entry in records:
            fh.write(
                json.dumps(
                    {
                        "utt_a": entry.record.utt_a,
                        "utt_b": entry.record.utt_b,
                        "descriptor": entry.record.descriptor,
                        "label": entry.record.label,
                        "split": entry.split,
                    }
                )
                + "\n"
            )


def check_manifest(records: list[ManifestRecord]) -> list[str]:
    """Non-fatal issues: unknown descriptors, speaker-prefix overlap across splits.

    Descriptors outside the standard vocabulary are legal (synthetic
    corpora use their own) but worth flagging; shared id prefixes across
    train and test suggest the speaker-disjointness contract is broken.
    """
    warnings = []
    unknown = sorted(
        {e.record.descriptor for e in records} - set(STANDARD_DESCRIPTORS)
    )
    if unknown:
        warnings.append(f"descriptors outside the standard vocabulary: {', '.join(unknown)}")

    def prefix(utt: str) -> str:
        return utt.rsplit("_", 1)[0]

    by_split: dict[str, set[str]] = {s: set() for s in SPLITS}
    for entry in records:
        by_split[entry.split].update(
            (prefix(entry.record.utt_a), prefix(entry.record.utt_b))
        )
    shared = sorted(by_split["train"] & by_split["test"])
    if shared:
        listed = ", ".join(shared[:5]) + ("..." if len(shared) > 5 else "")
        warnings.append(f"id prefixes appear in both train and test splits: {listed}")
    return warnings
