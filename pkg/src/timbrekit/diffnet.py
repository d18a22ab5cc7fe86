"""The pairwise attribute classifier and its training loop.

Architecture: a per-feature diagonal gain layer (the same gains applied to
both halves of the concatenated pair, so one weight per feature stays
reportable), a fully-connected layer into batch normalization, ReLU and
dropout, and a second fully-connected layer with one sigmoid output per
descriptor. Loss is binary cross-entropy on the output indexed by the
annotated descriptor: target 0 when the first utterance is stronger,
1 when the second is.

Everything is plain numpy with explicit gradients; training is exactly
reproducible from the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

A_STRONGER = "A"
B_STRONGER = "B"

# The standard descriptor vocabulary; manifests may extend it (a checker
# warns), and a trained model carries whatever vocabulary it was fit on.
STANDARD_DESCRIPTORS = (
    "Bright", "Coarse", "Low", "Rich", "Muddy", "Round", "Shrill", "Muffled",
    "Transparent", "Thin", "Slim", "Pure", "Magnetic", "Hoarse", "Flat",
    "Shrivelled", "Soft", "Husky",
)

_SCORE_CLAMP = 1e-7
_LOGIT_CLAMP = 30.0
_ZSCORE_CLIP = 10.0
_STD_GUARD = 1e-12

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PairRecord:
    """One annotated comparison: which of two utterances is stronger in a descriptor."""

    utt_a: str
    utt_b: str
    descriptor: str
    label: str

    def __post_init__(self):
        if self.utt_a == self.utt_b:
            raise ValueError("a pair must reference two distinct utterances")
        if self.label not in (A_STRONGER, B_STRONGER):
            raise ValueError(f"label must be {A_STRONGER!r} or {B_STRONGER!r}")


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 128
    dropout: float = 0.3
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class DiffNetModel:
    """All learnable state plus the input-normalization statistics."""

    feature_names: tuple[str, ...]
    descriptors: tuple[str, ...]
    feature_weights: np.ndarray  # [D], shared across both halves
    w1: np.ndarray  # [2D, H]
    b1: np.ndarray  # [H]
    gamma: np.ndarray  # [H]
    beta: np.ndarray  # [H]
    running_mean: np.ndarray  # [H]
    running_var: np.ndarray  # [H]
    w2: np.ndarray  # [H, N]
    b2: np.ndarray  # [N]
    norm_mean: np.ndarray  # [D], z-score statistics of one embedding
    norm_std: np.ndarray  # [D]
    dropout: float = 0.3
    bn_momentum: float = 0.1
    bn_epsilon: float = 1e-5

    @property
    def input_dim(self) -> int:
        return 2 * len(self.feature_names)

    @property
    def hidden_dim(self) -> int:
        return self.b1.size

    def parameter_groups(self) -> dict[str, np.ndarray]:
        """The trainable tensors, in a fixed order."""
        return {
            "feature_weights": self.feature_weights,
            "w1": self.w1,
            "b1": self.b1,
            "gamma": self.gamma,
            "beta": self.beta,
            "w2": self.w2,
            "b2": self.b2,
        }

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameter_groups().values())


def init_model(
    feature_names,
    descriptors,
    config: TrainConfig,
    rng: np.random.Generator,
    norm_mean=None,
    norm_std=None,
) -> DiffNetModel:
    """Fresh model: unit feature gains, He-scaled fc1, small fc2."""
    d = len(feature_names)
    h = config.hidden_dim
    n = len(descriptors)
    if d < 1 or n < 1:
        raise ValueError("need at least one feature and one descriptor")
    return DiffNetModel(
        feature_names=tuple(feature_names),
        descriptors=tuple(descriptors),
        feature_weights=np.ones(d),
        w1=rng.normal(0.0, np.sqrt(2.0 / (2 * d)), size=(2 * d, h)),
        b1=np.zeros(h),
        gamma=np.ones(h),
        beta=np.zeros(h),
        running_mean=np.zeros(h),
        running_var=np.ones(h),
        w2=rng.normal(0.0, np.sqrt(1.0 / h), size=(h, n)),
        b2=np.zeros(n),
        norm_mean=np.zeros(d) if norm_mean is None else np.asarray(norm_mean, float),
        norm_std=np.ones(d) if norm_std is None else np.asarray(norm_std, float),
        dropout=config.dropout,
    )


def normalize_input(model: DiffNetModel, e_pair: np.ndarray) -> np.ndarray:
    """Z-score each half with the training statistics, clipped to +-10."""
    x = np.atleast_2d(np.asarray(e_pair, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(f"expected input dim {model.input_dim}, got {x.shape[1]}")
    mean = np.concatenate([model.norm_mean, model.norm_mean])
    std = np.concatenate([model.norm_std, model.norm_std])
    return np.clip((x - mean) / std, -_ZSCORE_CLIP, _ZSCORE_CLIP)


def forward(
    model: DiffNetModel,
    e_pair: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    return_cache: bool = False,
):
    """Scores in (0, 1) for each descriptor; [N] for one pair, [B, N] batched.

    Train mode uses batch statistics for BN and samples an inverted
    dropout mask from rng; infer mode uses running statistics and no
    dropout, and is fully deterministic. No state is mutated here;
    running-statistic updates happen in the training loop.
    """
    single = np.asarray(e_pair).ndim == 1
    z = normalize_input(model, e_pair)
    train = mode == "train"
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")

    gains = np.concatenate([model.feature_weights, model.feature_weights])
    x = z * gains
    u = x @ model.w1 + model.b1

    if train:
        mu = u.mean(axis=0)
        var = u.var(axis=0)
    else:
        mu = model.running_mean
        var = model.running_var
    inv_sigma = 1.0 / np.sqrt(var + model.bn_epsilon)
    u_hat = (u - mu) * inv_sigma
    bn_out = model.gamma * u_hat + model.beta
    h = np.maximum(bn_out, 0.0)

    if train and model.dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout needs an rng")
        mask = (rng.random(h.shape) >= model.dropout) / (1.0 - model.dropout)
    else:
        mask = np.ones_like(h)
    h_drop = h * mask

    logits = np.clip(h_drop @ model.w2 + model.b2, -_LOGIT_CLAMP, _LOGIT_CLAMP)
    scores = 1.0 / (1.0 + np.exp(-logits))

    if not return_cache:
        return scores[0] if single else scores
    cache = {
        "z": z, "x": x, "u": u, "mu": mu, "var": var, "inv_sigma": inv_sigma,
        "u_hat": u_hat, "bn_out": bn_out, "mask": mask, "h_drop": h_drop,
        "scores": scores, "train": train,
    }
    return (scores[0] if single else scores), cache


def loss(scores: np.ndarray, record: PairRecord, descriptors) -> float:
    """BCE on the single output indexed by the record's descriptor."""
    idx = list(descriptors).index(record.descriptor)
    target = 0.0 if record.label == A_STRONGER else 1.0
    s = float(np.clip(np.atleast_1d(scores)[idx], _SCORE_CLAMP, 1.0 - _SCORE_CLAMP))
    return -(target * np.log(s) + (1.0 - target) * np.log(1.0 - s))


def batch_loss(scores: np.ndarray, desc_idx: np.ndarray, targets: np.ndarray) -> float:
    """Mean masked BCE over a batch."""
    s = np.clip(scores[np.arange(scores.shape[0]), desc_idx], _SCORE_CLAMP, 1.0 - _SCORE_CLAMP)
    return float(np.mean(-(targets * np.log(s) + (1.0 - targets) * np.log(1.0 - s))))


def backward(
    model: DiffNetModel, cache: dict, desc_idx: np.ndarray, targets: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch loss for every parameter group.

    Only the descriptor-indexed output of each sample receives gradient;
    the dropout mask is the one recorded in the cache.
    """
    scores = cache["scores"]
    batch = scores.shape[0]
    d = len(model.feature_names)

    g_logits = np.zeros_like(scores)
    rows = np.arange(batch)
    g_logits[rows, desc_idx] = (scores[rows, desc_idx] - targets) / batch

    g_w2 = cache["h_drop"].T @ g_logits
    g_b2 = g_logits.sum(axis=0)
    g_h_drop = g_logits @ model.w2.T
    g_h = g_h_drop * cache["mask"]
    g_bn_out = g_h * (cache["bn_out"] > 0.0)

    g_gamma = (g_bn_out * cache["u_hat"]).sum(axis=0)
    g_beta = g_bn_out.sum(axis=0)
    g_u_hat = g_bn_out * model.gamma
    if cache["train"]:
        u_centered = cache["u"] - cache["mu"]
        inv_sigma = cache["inv_sigma"]
        g_var = (g_u_hat * u_centered * -0.5 * inv_sigma**3).sum(axis=0)
        g_mu = (g_u_hat * -inv_sigma).sum(axis=0) + g_var * (-2.0 * u_centered).mean(axis=0)
        g_u = g_u_hat * inv_sigma + g_var * 2.0 * u_centered / batch + g_mu / batch
    else:
        g_u = g_u_hat * cache["inv_sigma"]

    g_w1 = cache["x"].T @ g_u
    g_b1 = g_u.sum(axis=0)
    g_x = g_u @ model.w1.T
    gz = g_x * cache["z"]
    g_gains = gz[:, :d].sum(axis=0) + gz[:, d:].sum(axis=0)

    return {
        "feature_weights": g_gains,
        "w1": g_w1,
        "b1": g_b1,
        "gamma": g_gamma,
        "beta": g_beta,
        "w2": g_w2,
        "b2": g_b2,
    }


@dataclass
class _AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def _adam_step(model: DiffNetModel, grads, state: _AdamState, config: TrainConfig):
    state.t += 1
    params = model.parameter_groups()
    for name, grad in grads.items():
        state.m[name] = config.beta1 * state.m[name] + (1 - config.beta1) * grad
        state.v[name] = config.beta2 * state.v[name] + (1 - config.beta2) * grad * grad
        m_hat = state.m[name] / (1 - config.beta1**state.t)
        v_hat = state.v[name] / (1 - config.beta2**state.t)
        params[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)


def _assemble_pairs(pairs, features: Mapping[str, np.ndarray], descriptors):
    missing = sorted(
        {p.utt_a for p in pairs if p.utt_a not in features}
        | {p.utt_b for p in pairs if p.utt_b not in features}
    )
    if missing:
        raise KeyError(f"no feature vectors for: {', '.join(missing)}")
    unknown = sorted({p.descriptor for p in pairs} - set(descriptors))
    if unknown:
        raise KeyError(f"descriptors not in the model vocabulary: {', '.join(unknown)}")
    desc_index = {d: i for i, d in enumerate(descriptors)}
    x = np.stack([np.concatenate([features[p.utt_a], features[p.utt_b]]) for p in pairs])
    desc_idx = np.array([desc_index[p.descriptor] for p in pairs])
    targets = np.array([0.0 if p.label == A_STRONGER else 1.0 for p in pairs])
    return x, desc_idx, targets


def train(
    pairs: list[PairRecord],
    features: Mapping[str, np.ndarray],
    config: TrainConfig = TrainConfig(),
    feature_names=None,
    descriptors=None,
) -> tuple[DiffNetModel, list[dict]]:
    """Fit a model; returns it plus a per-epoch loss/accuracy log.

    Deterministic given the seed: initialization, shuffling, and dropout
    all draw from one generator, and reductions run in a fixed order.
    """
    if not pairs:
        raise ValueError("no training pairs")
    if descriptors is None:
        descriptors = tuple(sorted({p.descriptor for p in pairs}))
    unknown = sorted({p.descriptor for p in pairs} - set(descriptors))
    if unknown:
        raise ValueError(f"pairs reference descriptors outside the vocabulary: {unknown}")
    if feature_names is None:
        width = len(next(iter(features.values())))
        feature_names = tuple(f"dim_{i:02d}" for i in range(width))

    rng = np.random.default_rng(config.seed)

    # Z-score statistics over the distinct training utterances, in id order.
    train_ids = sorted({p.utt_a for p in pairs} | {p.utt_b for p in pairs})
    missing = [u for u in train_ids if u not in features]
    if missing:
        raise KeyError(f"no feature vectors for: {', '.join(missing)}")
    table = np.stack([features[u] for u in train_ids])
    if table.shape[1] != len(feature_names):
        raise ValueError(
            f"feature vectors have {table.shape[1]} dims, expected {len(feature_names)}"
        )
    norm_mean = table.mean(axis=0)
    norm_std = np.maximum(table.std(axis=0), _STD_GUARD)

    model = init_model(feature_names, descriptors, config, rng, norm_mean, norm_std)
    x_all, desc_idx, targets = _assemble_pairs(pairs, features, descriptors)
    state = _AdamState(
        m={k: np.zeros_like(p) for k, p in model.parameter_groups().items()},
        v={k: np.zeros_like(p) for k, p in model.parameter_groups().items()},
    )

    log = []
    n = len(pairs)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            scores, cache = forward(model, x_all[sel], mode="train", rng=rng, return_cache=True)
            epoch_loss += batch_loss(scores, desc_idx[sel], targets[sel]) * sel.size
            grads = backward(model, cache, desc_idx[sel], targets[sel])
            _adam_step(model, grads, state, config)
            # Running statistics move toward the batch moments.
            model.running_mean += model.bn_momentum * (cache["mu"] - model.running_mean)
            model.running_var += model.bn_momentum * (cache["var"] - model.running_var)
        train_scores = forward(model, x_all, mode="infer")
        picked = train_scores[np.arange(n), desc_idx]
        train_acc = float(np.mean((picked >= 0.5) == (targets == 1.0)))
        log.append(
            {"epoch": epoch, "loss": epoch_loss / n, "train_accuracy": train_acc}
        )
    return model, log


def score_pairs(
    model: DiffNetModel, pairs: list[PairRecord], features: Mapping[str, np.ndarray]
) -> np.ndarray:
    """Deterministic inference scores for each pair's own descriptor."""
    x, desc_idx, _ = _assemble_pairs(pairs, features, model.descriptors)
    scores = forward(model, x, mode="infer")
    return scores[np.arange(len(pairs)), desc_idx]


def feature_importance(model: DiffNetModel) -> list[tuple[str, float]]:
    """The learned per-feature gains, in canonical feature order."""
    return [(name, float(w)) for name, w in zip(model.feature_names, model.feature_weights)]


def save_checkpoint(model: DiffNetModel, path) -> None:
    """Versioned JSON checkpoint; floats round-trip bit-exactly via repr."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "feature_names": list(model.feature_names),
        "descriptors": list(model.descriptors),
        "dropout": model.dropout,
        "bn_momentum": model.bn_momentum,
        "bn_epsilon": model.bn_epsilon,
        "tensors": {
            "feature_weights": model.feature_weights.tolist(),
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "gamma": model.gamma.tolist(),
            "beta": model.beta.tolist(),
            "running_mean": model.running_mean.tolist(),
            "running_var": model.running_var.tolist(),
            "w2": model.w2.tolist(),
            "b2": model.b2.tolist(),
            "norm_mean": model.norm_mean.tolist(),
            "norm_std": model.norm_std.tolist(),
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_checkpoint(path) -> DiffNetModel:
    payload = json.loads(Path(path).read_text())
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    tensors = {k: np.array(v, dtype=np.float64) for k, v in payload["tensors"].items()}
    return DiffNetModel(
        feature_names=tuple(payload["feature_names"]),
        descriptors=tuple(payload["descriptors"]),
        dropout=payload["dropout"],
        bn_momentum=payload["bn_momentum"],
        bn_epsilon=payload["bn_epsilon"],
        **tensors,
    )
