"""Small MLP learner: feature extractor with an instance head and a cluster head.

Everything is plain numpy with hand-written backprop.  Gradients are dicts
keyed like ``ModelState.params`` so they can be summed term by term.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import AugmentationSpec, augment

EXTRACTOR = ("W1", "b1", "W2", "b2", "W3", "b3")
INS_HEAD = ("ins_W", "ins_b")
CLU_HEAD = ("clu_W", "clu_b")
PARAM_NAMES = EXTRACTOR + INS_HEAD + CLU_HEAD

CHECKPOINT_FORMAT = "asd-mlp-v1"


class CheckpointError(ValueError):
    pass


@dataclass
class ModelState:
    params: dict
    velocity: dict
    step: int = 0

    @property
    def d(self) -> int:
        return self.params["W1"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def embed(self) -> int:
        return self.params["W3"].shape[1]

    @property
    def n_instance(self) -> int:
        return self.params["ins_W"].shape[1]

    @property
    def k(self) -> int:
        return self.params["clu_W"].shape[1]


@dataclass
class LossReport:
    l_ins: float = 0.0
    l_sup: float = 0.0
    l_unsup: float = 0.0
    unsup_mask_rate: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.l_ins + self.l_sup + self.l_unsup

    def as_dict(self) -> dict:
        return {
            "l_ins": self.l_ins,
            "l_sup": self.l_sup,
            "l_unsup": self.l_unsup,
            "total": self.total,
            "unsup_mask_rate": self.unsup_mask_rate,
        }


def init_model(d: int, n_instance: int, k: int, hidden: int = 64, embed: int = 32, seed=0) -> ModelState:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def dense(fan_in, fan_out):
        return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)

    params = {
        "W1": dense(d, hidden),
        "b1": np.zeros(hidden),
        "W2": dense(hidden, hidden),
        "b2": np.zeros(hidden),
        "W3": dense(hidden, embed),
        "b3": np.zeros(embed),
        "ins_W": dense(embed, n_instance),
        "ins_b": np.zeros(n_instance),
        "clu_W": dense(embed, k),
        "clu_b": np.zeros(k),
    }
    return ModelState(params, {name: np.zeros_like(p) for name, p in params.items()})


def zero_grads(model: ModelState) -> dict:
    return {name: np.zeros_like(p) for name, p in model.params.items()}


def add_grads(*grads: dict) -> dict:
    out = {name: g.copy() for name, g in grads[0].items()}
    for g in grads[1:]:
        for name, v in g.items():
            out[name] += v
    return out


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _check_width(model: ModelState, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.d:
        raise ValueError(f"input width {x.shape[1]} does not match model width {model.d}")
    return x


def _extract(p: dict, x: np.ndarray):
    a1 = np.tanh(x @ p["W1"] + p["b1"])
    a2 = np.tanh(a1 @ p["W2"] + p["b2"])
    emb = a2 @ p["W3"] + p["b3"]
    return emb, (x, a1, a2)


def _extract_backward(p: dict, cache, d_emb: np.ndarray, grads: dict) -> None:
    x, a1, a2 = cache
    grads["W3"] += a2.T @ d_emb
    grads["b3"] += d_emb.sum(axis=0)
    dz2 = (d_emb @ p["W3"].T) * (1.0 - a2 * a2)
    grads["W2"] += a1.T @ dz2
    grads["b2"] += dz2.sum(axis=0)
    dz1 = (dz2 @ p["W2"].T) * (1.0 - a1 * a1)
    grads["W1"] += x.T @ dz1
    grads["b1"] += dz1.sum(axis=0)


def features(model: ModelState, x: np.ndarray) -> np.ndarray:
    return _extract(model.params, _check_width(model, x))[0]


def instance_logits(model: ModelState, x: np.ndarray) -> np.ndarray:
    p = model.params
    return features(model, x) @ p["ins_W"] + p["ins_b"]


def cluster_logits(model: ModelState, x: np.ndarray) -> np.ndarray:
    p = model.params
    return features(model, x) @ p["clu_W"] + p["clu_b"]


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def _head_ce(model: ModelState, x: np.ndarray, target: np.ndarray, head: tuple) -> tuple[float, dict]:
    """Mean soft cross-entropy of one head against row-stochastic targets."""
    p = model.params
    W, b = head
    emb, cache = _extract(p, x)
    z = emb @ p[W] + p[b]
    logp = log_softmax(z)
    loss = float(-(target * logp).sum(axis=1).mean())
    dz = (np.exp(logp) - target) / x.shape[0]
    grads = zero_grads(model)
    grads[W] += emb.T @ dz
    grads[b] += dz.sum(axis=0)
    _extract_backward(p, cache, dz @ p[W].T, grads)
    return loss, grads


def _check_stochastic(y: np.ndarray) -> None:
    if np.any(y < 0) or not np.allclose(y.sum(axis=1), 1.0, atol=1e-9, rtol=0):
        raise ValueError("target rows must be nonnegative and sum to 1")


def loss_instance(model: ModelState, x_l: np.ndarray, y_soft: np.ndarray) -> tuple[float, dict]:
    x_l = _check_width(model, x_l)
    y_soft = np.asarray(y_soft, dtype=np.float64)
    if y_soft.shape != (x_l.shape[0], model.n_instance):
        raise ValueError(f"soft labels must be {x_l.shape[0]} x {model.n_instance}")
    _check_stochastic(y_soft)
    return _head_ce(model, x_l, y_soft, INS_HEAD)


def loss_supervised(model: ModelState, x_l: np.ndarray, cluster_labels: np.ndarray) -> tuple[float, dict]:
    x_l = _check_width(model, x_l)
    labels = np.asarray(cluster_labels, dtype=np.int64)
    if labels.shape != (x_l.shape[0],):
        raise ValueError("one cluster label per row required")
    if labels.size and (labels.min() < 0 or labels.max() >= model.k):
        raise ValueError(f"cluster labels must lie in 0..{model.k - 1}")
    onehot = np.eye(model.k)[labels]
    return _head_ce(model, x_l, onehot, CLU_HEAD)


def loss_unsupervised(
    model: ModelState,
    x_u: np.ndarray,
    aug: AugmentationSpec,
    tau: float = 0.95,
    seed=0,
    views: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[float, dict, float]:
    """Confidence-thresholded consistency on the cluster head.

    The weak view supplies hard pseudo-labels wherever its top probability
    reaches ``tau``; the strong view is trained toward them.  No gradient
    flows through the weak view.  ``views`` overrides the sampled
    (weak, strong) pair, mainly for tests.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    x_u = _check_width(model, x_u)
    if views is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        weak = augment(x_u, aug, "weak", rng)
        strong = augment(x_u, aug, "strong", rng)
    else:
        weak, strong = (_check_width(model, v) for v in views)
    probs = softmax(cluster_logits(model, weak))
    conf = probs.max(axis=1)
    mask = conf >= tau
    mask_rate = float(mask.mean()) if mask.size else 0.0
    if not mask.any():
        return 0.0, zero_grads(model), mask_rate
    pseudo = np.argmax(probs[mask], axis=1)
    loss, grads = _head_ce(model, strong[mask], np.eye(model.k)[pseudo], CLU_HEAD)
    return loss, grads, mask_rate


def step(model: ModelState, grads: dict, lr: float, momentum: float = 0.9) -> ModelState:
    """SGD with heavy-ball momentum, in place."""
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in parameter block {name!r}")
    for name, g in grads.items():
        v = model.velocity[name]
        v *= momentum
        v += g
        model.params[name] -= lr * v
    model.step += 1
    return model


def predict_clusters(model: ModelState, x: np.ndarray) -> np.ndarray:
    return np.argmax(cluster_logits(model, x), axis=1)


def predict_instances(model: ModelState, x: np.ndarray) -> np.ndarray:
    return np.argmax(instance_logits(model, x), axis=1)


# ---------------------------------------------------------------------------
# checkpoints: a flat .npz of named arrays plus a JSON metadata entry
# ---------------------------------------------------------------------------


def save_checkpoint(model: ModelState, path: str | Path) -> None:
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays.update({f"velocity/{k}": v for k, v in model.velocity.items()})
    meta = {"format": CHECKPOINT_FORMAT, "step": model.step}
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> ModelState:
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            params = {k: z[f"param/{k}"].astype(np.float64) for k in PARAM_NAMES}
            velocity = {k: z[f"velocity/{k}"].astype(np.float64) for k in PARAM_NAMES}
    except CheckpointError:
        raise
    except Exception as exc:  # zipfile, KeyError, ValueError, json ...
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unknown checkpoint format {meta.get('format')!r}")
    model = ModelState(params, velocity, int(meta.get("step", 0)))
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise CheckpointError(f"{path}: non-finite parameters")
    return model
