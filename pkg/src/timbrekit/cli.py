"""Command-line surface: synth, extract, train, eval, weights, flops.

Every command exits nonzero on failure after printing one line of the
form `error: <REASON>: <detail>` to stderr. All randomness flows from
--seed (default 0).
"""

from __future__ import annotations

import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import diffnet, evaluation, features, manifest
from .audio import AudioError, SYNTH_KINDS, SynthSpec, load_audio, synth, write_wav

FEATURE_KINDS = ("acoustic", "mfcc", "lfc")


def _fail(reason: str, detail: str):
    click.echo(f"error: {reason}: {detail}", err=True)
    sys.exit(1)


def _guard(fn):
    """Map domain errors onto the one-line error contract."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except features.SilentUtteranceError as exc:
            _fail(exc.reason, str(exc))
        except AudioError as exc:
            _fail("AUDIO", str(exc))
        except KeyError as exc:
            _fail("COVERAGE", str(exc).strip("'\""))
        except (ValueError, OSError) as exc:
            _fail("INVALID_INPUT", str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main():
    """Acoustic timbre features and the pairwise attribute classifier.

    Score convention: 0 means the first utterance of a pair is the more
    intense one, 1 means the second; manifest labels "A"/"B" follow suit.
    """


def _parse_formants(text: str):
    if not text:
        return ()
    out = []
    for part in text.split(","):
        freq, _, bandwidth = part.partition(":")
        out.append((float(freq), float(bandwidth)))
    return tuple(out)


@main.command("synth")
@click.option("--kind", type=click.Choice(SYNTH_KINDS), required=True)
@click.option("--f0", type=float, default=100.0, show_default=True)
@click.option("--dur", type=float, default=1.0, show_default=True, help="Duration in seconds.")
@click.option("--amplitude", type=float, default=0.8, show_default=True)
@click.option("--formants", default="", help="freq:bw pairs, e.g. 500:80,1500:100")
@click.option("--subharmonic-gain", type=float, default=0.0, show_default=True)
@click.option("--noise-gain", type=float, default=0.0, show_default=True)
@click.option("--tilt", type=float, default=0.0, show_default=True, help="Source tilt, dB/octave.")
@click.option("--rate", type=int, default=16000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def cmd_synth(kind, f0, dur, amplitude, formants, subharmonic_gain, noise_gain, tilt, rate, seed, out):
    """Write a deterministic synthetic signal as 16-bit PCM WAV."""
    spec = SynthSpec(
        kind=kind,
        f0=f0,
        duration=dur,
        amplitude=amplitude,
        formants=_parse_formants(formants),
        subharmonic_gain=subharmonic_gain,
        noise_gain=noise_gain,
        tilt_db_per_octave=tilt,
        seed=seed,
        sample_rate=rate,
    )
    write_wav(out, synth(spec))
    click.echo(f"wrote {out}")


def _extraction_config(config_arg: str | None) -> features.ExtractionConfig:
    config = features.ExtractionConfig()
    if not config_arg:
        return config
    text = config_arg
    if not text.lstrip().startswith("{"):
        text = Path(config_arg).read_text()
    overrides = json.loads(text)
    for section, fields in overrides.items():
        if not hasattr(config, section):
            raise ValueError(f"unknown config section {section!r}")
        current = getattr(config, section)
        try:
            if dataclasses.is_dataclass(current) and isinstance(fields, dict):
                replacement = dataclasses.replace(current, **fields)
            else:
                replacement = fields
            config = dataclasses.replace(config, **{section: replacement})
        except TypeError as exc:
            raise ValueError(f"bad config override for {section!r}: {exc}") from None
    return config


def _extract_one(args) -> tuple[str, np.ndarray | None, int, str | None]:
    """Worker: (utt_id, vector, frames, skip_reason). Top level for pickling."""
    path, kind, config = args
    utt_id = Path(path).stem
    try:
        buf = load_audio(path, target_rate=config.sample_rate)
        if kind == "acoustic":
            vector = features.extract_vector(buf, config)
            return utt_id, vector.values, vector.voiced_frames, None
        fn = features.mfcc if kind == "mfcc" else features.lfc
        vector = fn(buf)
        return utt_id, vector.values, vector.frames, None
    except (features.SilentUtteranceError, features.EmptyFeatureError) as exc:
        return utt_id, None, 0, exc.reason
    except (AudioError, ValueError) as exc:
        return utt_id, None, 0, f"UNREADABLE:{exc}"


@main.command("extract")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(FEATURE_KINDS), default="acoustic", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help=".csv or .jsonl")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--config", "config_arg", default=None, help="JSON override string or file.")
@_guard
def cmd_extract(inputs, kind, out, jobs, config_arg):
    """Extract per-utterance feature vectors from WAV files or directories.

    Skipped utterances (silent or unreadable) land next to the output in
    <out>.skipped.jsonl with a reason, not in the feature table.
    """
    config = _extraction_config(config_arg)
    paths = []
    for item in inputs:
        p = Path(item)
        paths.extend(sorted(p.glob("*.wav")) if p.is_dir() else [p])
    if not paths:
        _fail("INVALID_INPUT", "no input files")

    tasks = [(str(p), kind, config) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, tasks))
    else:
        results = [_extract_one(t) for t in tasks]

    rows = [(utt, vec, count) for utt, vec, count, reason in results if reason is None]
    skipped = [(utt, reason) for utt, _, _, reason in results if reason is not None]
    skip_path = Path(str(out) + ".skipped.jsonl")
    if skipped:
        with skip_path.open("w") as fh:
            for utt, reason in sorted(skipped):
                fh.write(json.dumps({"utt_id": utt, "reason": reason}) + "\n")
    elif skip_path.exists():
        skip_path.unlink()
    if not rows:
        _fail("ALL_SKIPPED", f"all {len(paths)} inputs were skipped")
    features.write_features(out, rows, kind)
    click.echo(f"wrote {len(rows)} rows to {out}" + (f", skipped {len(skipped)}" if skipped else ""))


@main.command("train")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--features", "features_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Checkpoint path.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None)
@click.option("--hidden", type=int, default=128, show_default=True)
@click.option("--dropout", type=float, default=0.3, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--batch-size", type=int, default=256, show_default=True)
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def cmd_train(manifest_path, features_path, out, log_path, hidden, dropout, lr, batch_size, epochs, seed):
    """Train on the manifest's train split; deterministic under --seed."""
    records = manifest.read_manifest(manifest_path)
    for warning in manifest.check_manifest(records):
        click.echo(f"warning: {warning}", err=True)
    train_pairs = [e.record for e in records if e.split == "train"]
    if not train_pairs:
        _fail("INVALID_INPUT", "manifest has no train split")
    table = features.read_features(features_path)
    width = len(next(iter(table.values())))
    if width == len(features.FEATURE_NAMES):
        names = features.FEATURE_NAMES
    elif width == len(features.CEPSTRAL_NAMES):
        names = features.CEPSTRAL_NAMES
    else:  # precomputed external embeddings of any width
        names = tuple(f"dim_{i:03d}" for i in range(width))

    config = diffnet.TrainConfig(
        hidden_dim=hidden, dropout=dropout, learning_rate=lr,
        batch_size=batch_size, epochs=epochs, seed=seed,
    )
    model, log = diffnet.train(train_pairs, table, config, feature_names=names)
    diffnet.save_checkpoint(model, out)
    if log_path:
        Path(log_path).write_text(json.dumps({"seed": seed, "epochs": log}, sort_keys=True))
    final = log[-1]
    click.echo(
        f"trained {config.epochs} epochs on {len(train_pairs)} pairs; "
        f"final loss {final['loss']:.4f}, train acc {final['train_accuracy'] * 100:.2f}%"
    )


@main.command("eval")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--features", "features_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON report path.")
@click.option("--split", type=click.Choice(manifest.SPLITS), default="test", show_default=True)
@_guard
def cmd_eval(manifest_path, features_path, model_path, out, split):
    """Score the manifest's test split and report accuracy and EER."""
    records = manifest.read_manifest(manifest_path)
    pairs = [e.record for e in records if e.split == split]
    if not pairs:
        _fail("INVALID_INPUT", f"manifest has no {split} split")
    table = features.read_features(features_path)
    model = diffnet.load_checkpoint(model_path)
    scores = diffnet.score_pairs(model, pairs, table)
    scored = [evaluation.ScoredPair(p, float(s)) for p, s in zip(pairs, scores)]

    overall_acc = evaluation.accuracy(scored)
    labels = {p.label for p in pairs}
    if len(labels) == 2:
        overall_eer = evaluation.eer(scored)
        curve = evaluation.far_frr_curve(scored)
    else:
        overall_eer = None
        curve = []
        click.echo("warning: single-class split, EER is N/A", err=True)

    per_descriptor = {}
    for descriptor in sorted({p.descriptor for p in pairs}):
        subset = [s for s in scored if s.record.descriptor == descriptor]
        entry = {"pairs": len(subset), "accuracy": evaluation.accuracy(subset)}
        if len({s.record.label for s in subset}) == 2:
            entry["eer"] = evaluation.eer(subset)
        else:
            entry["eer"] = None
        per_descriptor[descriptor] = entry

    report = {
        "split": split,
        "pairs": len(scored),
        "accuracy": overall_acc,
        "eer": overall_eer,
        "per_descriptor": per_descriptor,
        "far_frr": [list(point) for point in curve],
    }
    if out:
        Path(out).write_text(json.dumps(report, sort_keys=True))
    eer_text = f"{overall_eer:.2f}%" if overall_eer is not None else "N/A"
    click.echo(f"pairs {len(scored)}: accuracy {overall_acc:.2f}%, EER {eer_text}")
    for descriptor, entry in per_descriptor.items():
        desc_eer = f"{entry['eer']:.2f}%" if entry["eer"] is not None else "N/A"
        click.echo(
            f"  {descriptor}: n={entry['pairs']} acc={entry['accuracy']:.2f}% eer={desc_eer}"
        )


@main.command("weights")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Raw CSV path.")
@_guard
def cmd_weights(model_path, out):
    """Per-feature gains of a checkpoint, sorted by absolute value."""
    model = diffnet.load_checkpoint(model_path)
    importance = diffnet.feature_importance(model)
    if out:
        with Path(out).open("w") as fh:
            fh.write("feature,weight\n")
            for name, weight in importance:
                fh.write(f"{name},{weight!r}\n")
    for name, weight in sorted(importance, key=lambda item: -abs(item[1])):
        click.echo(f"{name}\t{weight:+.6f}")


@main.command("flops")
@click.option("--kind", type=click.Choice(FEATURE_KINDS), default="acoustic", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON report path.")
@_guard
def cmd_flops(kind, model_path, out):
    """Analytical extraction and classifier cost report."""
    model = diffnet.load_checkpoint(model_path) if model_path else None
    report = evaluation.cost_report(kind, model=model)
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), sort_keys=True))
    click.echo(report.format_text())


if __name__ == "__main__":
    main()
