"""Trainable components: feature transform, output head, loss, and training.

The model is deliberately small: a single linear layer with ReLU and
(inverted) dropout turns raw edge attributes into features, the propagation
operator spreads them along the graph, and a second linear layer with a
per-class sigmoid produces multi-label probabilities.  Only the two weight
matrices train; the propagation factors are fixed by the graph and are
computed once before the loop.

Gradients are fully analytic.  Propagation is linear and its operator is
symmetric, so its backward pass is the same operator applied to the
upstream gradient.  Training is full batch with Adam, and the returned
parameters are the snapshot with the best validation AUC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .errors import ValidationError
from .graph import BipartiteEdgeGraph, Incidence, build_incidence
from .metrics import DataSplit, evaluate_scores
from .propagation import (
    COMBINATORS,
    ExactPropagator,
    FactorPropagator,
    IdentityPropagator,
    build_factor,
    view_svd,
)
from .sparse import SvdFactors

__all__ = [
    "TrainConfig",
    "ModelParams",
    "TrainResult",
    "MODES",
    "feature_transform",
    "predict_probabilities",
    "bce_loss",
    "adam_step",
    "init_params",
    "build_propagators",
    "training_loss",
    "loss_and_grads",
    "train",
    "SvdCache",
]

MODES = ("single", "dual", "none")

_PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``k=None`` requests exact propagation through the iterative solver
    instead of a k-truncated factorization (the CLI spells it ``inf``).
    ``mode`` selects combined-view propagation (``single``), per-side
    propagation with a combinator (``dual``), or no propagation at all
    (``none``, the structure-free control).
    """

    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    k: int | None = 256
    hidden_dim: int = 256
    dropout: float = 0.5
    learning_rate: float = 0.001
    max_epochs: int = 300
    seed: int = 0
    mode: str = "single"
    combinator: str = "sum"
    svd_oversample: int = 10
    svd_power_iters: int = 7
    exact_tol: float = 1e-10
    exact_max_iters: int = 10_000

    def __post_init__(self) -> None:
        for name in ("alpha", "dropout", "learning_rate"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValidationError(f"{name}={value} must lie in [0, 1)")
        for name in ("beta", "gamma"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}={value} must lie in [0, 1]")
        if self.k is not None and self.k < 1:
            raise ValidationError("k must be positive or None")
        if self.hidden_dim < 1 or self.max_epochs < 0:
            raise ValidationError("hidden_dim must be positive, max_epochs >= 0")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.combinator not in COMBINATORS:
            raise ValidationError(f"combinator must be one of {COMBINATORS}")

    @property
    def head_width(self) -> int:
        if self.mode == "dual" and self.combinator == "concat":
            return 2 * self.hidden_dim
        return self.hidden_dim


@dataclass
class ModelParams:
    """Trainable weights plus Adam moment buffers and the step counter."""

    weights: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def from_weights(cls, weights: dict[str, np.ndarray]) -> "ModelParams":
        return cls(
            weights={k: np.array(v, dtype=np.float64) for k, v in weights.items()},
            adam_m={k: np.zeros_like(v, dtype=np.float64) for k, v in weights.items()},
            adam_v={k: np.zeros_like(v, dtype=np.float64) for k, v in weights.items()},
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            weights={k: v.copy() for k, v in self.weights.items()},
            adam_m={k: v.copy() for k, v in self.adam_m.items()},
            adam_v={k: v.copy() for k, v in self.adam_v.items()},
            step=self.step,
        )


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    history: dict


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


def feature_transform(
    x: np.ndarray,
    theta: np.ndarray,
    dropout_mask: np.ndarray | None = None,
    dropout_rate: float = 0.0,
) -> np.ndarray:
    """Per-edge feature transform ``dropout(relu(x @ theta))``.

    Inverted dropout: during training kept units are scaled by the inverse
    keep probability so inference (no mask) needs no rescaling.
    """
    h = _relu(x @ theta)
    if dropout_mask is not None:
        h = h * dropout_mask / (1.0 - dropout_rate)
    return h


def predict_probabilities(
    z: np.ndarray,
    omega: np.ndarray,
    dropout_mask: np.ndarray | None = None,
    dropout_rate: float = 0.0,
) -> np.ndarray:
    """Per-class probabilities ``sigmoid(dropout(relu(z)) @ omega)``."""
    head = _relu(z)
    if dropout_mask is not None:
        head = head * dropout_mask / (1.0 - dropout_rate)
    return _sigmoid(head @ omega)


def bce_loss(y_pred: np.ndarray, y_true: np.ndarray, mask: np.ndarray) -> float:
    """Mean binary cross entropy over the masked edges, summed over classes.

    Probabilities are clamped away from 0 and 1 before the logarithms.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValidationError("loss mask must be non-empty")
    p = np.clip(y_pred[mask], _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    y = y_true[mask]
    per_edge = y * np.log(p) + (1.0 - y) * np.log(1.0 - p)
    return float(-per_edge.sum() / len(mask))


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ModelParams:
    """One in-place Adam update with bias-corrected moments."""
    params.step += 1
    t = params.step
    for key, g in grads.items():
        m = params.adam_m[key]
        v = params.adam_v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        params.weights[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


def init_params(
    num_attrs: int, num_classes: int, config: TrainConfig, rng: np.random.Generator
) -> ModelParams:
    """Fan-in scaled uniform initialization of all trainable weights."""

    def uniform(fan_in: int, fan_out: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    weights: dict[str, np.ndarray] = {}
    if config.mode == "dual":
        weights["theta_u"] = uniform(num_attrs, config.hidden_dim)
        weights["theta_v"] = uniform(num_attrs, config.hidden_dim)
    else:
        weights["theta"] = uniform(num_attrs, config.hidden_dim)
    weights["omega"] = uniform(config.head_width, num_classes)
    return ModelParams.from_weights(weights)


class SvdCache:
    """Memo for view SVDs so hyperparameter sweeps reuse factorizations.

    Changing ``alpha``, ``gamma``, or the combinator never invalidates an
    entry; per-side views are also independent of ``beta``.  Entries hold a
    reference to the graph they belong to, so identity-based keys stay valid
    for the cache's lifetime.
    """

    def __init__(self) -> None:
        self._factors: dict[tuple, tuple[Incidence, SvdFactors]] = {}
        self._incidences: dict[int, tuple[BipartiteEdgeGraph, Incidence]] = {}
        self.misses = 0

    def incidence_for(self, g: BipartiteEdgeGraph) -> Incidence:
        entry = self._incidences.get(id(g))
        if entry is None:
            entry = (g, build_incidence(g))
            self._incidences[id(g)] = entry
        return entry[1]

    def get(
        self,
        inc: Incidence,
        view: str,
        k: int,
        seed: int,
        beta: float | None,
        oversample: int,
        power_iters: int,
    ) -> SvdFactors:
        beta_key = None if view in ("u", "v") else round(float(beta), 12)
        key = (id(inc), view, k, seed, beta_key, oversample, power_iters)
        if key not in self._factors:
            self.misses += 1
            factors = view_svd(inc, view, k, seed=seed, beta=beta,
                               oversample=oversample, power_iters=power_iters)
            self._factors[key] = (inc, factors)
        return self._factors[key][1]


def build_propagators(
    g_or_inc: BipartiteEdgeGraph | Incidence,
    config: TrainConfig,
    cache: SvdCache | None = None,
) -> dict:
    """Construct the propagation operators a config needs, keyed by stream.

    ``single`` mode yields ``{"main": ...}`` over the combined view;
    ``dual`` yields ``{"u": ..., "v": ...}``; ``none`` a single identity.
    """
    if isinstance(g_or_inc, Incidence):
        inc = g_or_inc
    elif cache is not None:
        inc = cache.incidence_for(g_or_inc)
    else:
        inc = build_incidence(g_or_inc)
    if config.mode == "none":
        return {"main": IdentityPropagator()}

    def make(view: str, beta: float | None):
        if config.k is None:
            return ExactPropagator(inc, config.alpha, view=view, beta=beta,
                                   tol=config.exact_tol,
                                   max_iters=config.exact_max_iters)
        factors = None
        if cache is not None:
            factors = cache.get(inc, view, config.k, config.seed, beta,
                                config.svd_oversample, config.svd_power_iters)
        factor = build_factor(
            inc, config.alpha, view=view, k=config.k, seed=config.seed,
            beta=beta, factors=factors,
            oversample=config.svd_oversample, power_iters=config.svd_power_iters,
        )
        return FactorPropagator(factor)

    if config.mode == "single":
        return {"main": make("combined", config.beta)}
    return {"u": make("u", None), "v": make("v", None)}


def _forward(
    x: np.ndarray,
    params: ModelParams,
    config: TrainConfig,
    propagators: dict,
    masks: dict[str, np.ndarray] | None,
) -> dict:
    """Run the full model forward, caching everything backward needs."""
    keep = 1.0 - config.dropout
    cache: dict = {"masks": masks}

    def dropped(name: str, a: np.ndarray) -> np.ndarray:
        if masks is None:
            return a
        return a * masks[name] / keep

    if config.mode == "dual":
        for side in ("u", "v"):
            pre = x @ params.weights[f"theta_{side}"]
            act = _relu(pre)
            cache[f"pre_{side}"] = pre
            cache[f"h_{side}"] = dropped(f"theta_{side}", act)
            cache[f"z_{side}"] = propagators[side].apply(cache[f"h_{side}"])
        a = config.gamma * cache["z_u"]
        b = (1.0 - config.gamma) * cache["z_v"]
        if config.combinator == "sum":
            z = a + b
        elif config.combinator == "max":
            cache["max_pick_u"] = a >= b
            z = np.where(cache["max_pick_u"], a, b)
        else:
            z = np.hstack([a, b])
    else:
        pre = x @ params.weights["theta"]
        act = _relu(pre)
        cache["pre"] = pre
        cache["h"] = dropped("theta", act)
        z = propagators["main"].apply(cache["h"])
    cache["z"] = z
    head = _relu(z)
    cache["head"] = dropped("head", head)
    cache["logits"] = cache["head"] @ params.weights["omega"]
    cache["probs"] = _sigmoid(cache["logits"])
    return cache


def _backward(
    x: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
    config: TrainConfig,
    propagators: dict,
    cache: dict,
) -> dict[str, np.ndarray]:
    """Analytic gradients of the masked BCE loss for every trainable weight."""
    keep = 1.0 - config.dropout
    masks = cache["masks"]

    def drop_back(name: str, grad: np.ndarray) -> np.ndarray:
        if masks is None:
            return grad
        return grad * masks[name] / keep

    d_logits = np.zeros_like(cache["probs"])
    d_logits[mask] = (cache["probs"][mask] - labels[mask]) / len(mask)
    grads = {"omega": cache["head"].T @ d_logits}
    d_head = d_logits @ params.weights["omega"].T
    d_z = drop_back("head", d_head) * (cache["z"] > 0)

    def through_theta(key: str, d_hidden: np.ndarray, pre: np.ndarray, mask_name: str):
        d_act = drop_back(mask_name, d_hidden)
        grads[key] = x.T @ (d_act * (pre > 0))

    if config.mode == "dual":
        if config.combinator == "sum":
            d_zu = config.gamma * d_z
            d_zv = (1.0 - config.gamma) * d_z
        elif config.combinator == "max":
            pick = cache["max_pick_u"]
            d_zu = config.gamma * d_z * pick
            d_zv = (1.0 - config.gamma) * d_z * ~pick
        else:
            width = config.hidden_dim
            d_zu = config.gamma * d_z[:, :width]
            d_zv = (1.0 - config.gamma) * d_z[:, width:]
        # The propagation operator is symmetric: backward reuses it.
        through_theta("theta_u", propagators["u"].apply(d_zu),
                      cache["pre_u"], "theta_u")
        through_theta("theta_v", propagators["v"].apply(d_zv),
                      cache["pre_v"], "theta_v")
    else:
        through_theta("theta", propagators["main"].apply(d_z),
                      cache["pre"], "theta")
    return grads


def _make_masks(
    shape_rows: int, config: TrainConfig, rng: np.random.Generator
) -> dict[str, np.ndarray] | None:
    if config.dropout == 0.0:
        return None
    keep = 1.0 - config.dropout
    names = (["theta_u", "theta_v"] if config.mode == "dual" else ["theta"])
    masks = {
        name: rng.random((shape_rows, config.hidden_dim)) < keep for name in names
    }
    masks["head"] = rng.random((shape_rows, config.head_width)) < keep
    return masks


def training_loss(
    x: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
    config: TrainConfig,
    propagators: dict,
) -> float:
    """Dropout-free loss at the given weights (finite-difference target)."""
    cache = _forward(x, params, config, propagators, masks=None)
    return bce_loss(cache["probs"], labels, mask)


def loss_and_grads(
    x: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    params: ModelParams,
    config: TrainConfig,
    propagators: dict,
    masks: dict[str, np.ndarray] | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    cache = _forward(x, params, config, propagators, masks)
    loss = bce_loss(cache["probs"], labels, mask)
    grads = _backward(x, labels, mask, params, config, propagators, cache)
    return loss, grads


class _AuditedLabels:
    """Label accessor that counts reads per split partition.

    Training legitimately reads train labels (loss) and validation labels
    (model selection) but must never touch test labels; the recorded counts
    let tests enforce that.
    """

    def __init__(self, labels: np.ndarray, split: DataSplit):
        self._labels = labels
        self._partitions = {
            "train": split.train_idx,
            "val": split.val_idx,
            "test": split.test_idx,
        }
        self.counts = {"train": 0, "val": 0, "test": 0}

    def take(self, partition: str) -> np.ndarray:
        self.counts[partition] += 1
        return self._labels[self._partitions[partition]]


def train(
    g: BipartiteEdgeGraph,
    split: DataSplit,
    config: TrainConfig,
    cache: SvdCache | None = None,
    incidence: Incidence | None = None,
) -> TrainResult:
    """Full-batch training with validation-AUC model selection.

    Propagation operators are built once up front (they do not depend on
    the trainable weights).  After every epoch the model is evaluated
    without dropout on the validation edges, and the weight snapshot with
    the best validation AUC is returned.  Deterministic for a fixed seed.
    """
    if g.labels is None:
        raise ValidationError("training requires a labeled graph")
    for part, idx in (("train", split.train_idx), ("val", split.val_idx),
                      ("test", split.test_idx)):
        if len(idx) == 0:
            raise ValidationError(f"{part} split must be non-empty")
    if config.k is not None and config.k > g.num_edges:
        raise ValidationError(
            f"k={config.k} exceeds the number of edges {g.num_edges}"
        )
    if incidence is not None:
        inc = incidence
    elif cache is not None:
        inc = cache.incidence_for(g)
    else:
        inc = build_incidence(g)
    propagators = build_propagators(inc, config, cache=cache)
    rng = np.random.default_rng(config.seed)
    params = init_params(g.num_attrs, g.num_classes, config, rng)
    audited = _AuditedLabels(g.labels, split)

    best = params.copy()
    best_auc = -math.inf
    best_epoch = -1
    history: dict = {"train_loss": [], "val_auc": []}
    x = g.attrs
    labels_full = np.zeros_like(g.labels)
    labels_full[split.train_idx] = audited.take("train")
    val_labels = None

    for epoch in range(config.max_epochs):
        masks = _make_masks(g.num_edges, config, rng)
        loss, grads = loss_and_grads(
            x, labels_full, split.train_idx, params, config, propagators, masks
        )
        adam_step(params, grads, config.learning_rate)
        history["train_loss"].append(loss)

        eval_cache = _forward(x, params, config, propagators, masks=None)
        if val_labels is None:
            val_labels = audited.take("val")
        try:
            report = evaluate_scores(eval_cache["probs"][split.val_idx], val_labels)
            val_auc = report.auc
        except ValidationError:
            val_auc = math.nan
        history["val_auc"].append(val_auc)
        if not math.isnan(val_auc) and val_auc > best_auc:
            best_auc = val_auc
            best_epoch = epoch
            best = params.copy()

    history["best_epoch"] = best_epoch
    history["best_val_auc"] = None if math.isinf(best_auc) else best_auc
    history["label_access"] = dict(audited.counts)
    history["config"] = config
    return TrainResult(params=best, history=history)


def predict_graph(
    g: BipartiteEdgeGraph,
    params: ModelParams,
    config: TrainConfig,
    propagators: dict | None = None,
    incidence: Incidence | None = None,
) -> np.ndarray:
    """Inference-mode class probabilities for every edge of the graph."""
    if propagators is None:
        inc = incidence if incidence is not None else build_incidence(g)
        propagators = build_propagators(inc, config)
    cache = _forward(g.attrs, params, config, propagators, masks=None)
    return cache["probs"]
