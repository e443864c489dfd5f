"""Label-smoothed cross-entropy training, per-fold optimization, K-fold
orchestration, and F1-weighted logit ensembling."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .experts import EXPERT_NAMES
from .metrics import MetricsReport, metrics_from_labels
from .model import ENCODER_MODES, HEAD_KINDS, ModelParams, model_backward, model_forward
from .text import N_CLASSES, TokenizedExample, Vocab, stratified_kfold

logger = logging.getLogger(__name__)


class NonFiniteGradientError(RuntimeError):
    """An optimizer step saw a NaN/Inf gradient; the step was aborted."""


@dataclass
class TrainConfig:
    """Hyperparameters and model options; defaults are the standard recipe."""

    max_len: int = 128
    batch_size: int = 16
    epochs: int = 10
    learning_rate: float = 5e-5
    k: int = 10
    label_smoothing: float = 0.25
    seed: int = 42
    hidden_dim: int = 64
    cnn_filters: int = 8
    contrast_scale: float = 3.0
    epsilon: float = 1e-8
    encoder: str = "toy"  # "toy" or "precomputed"
    freeze_encoder: bool = False
    embeddings_path: str | None = None  # SMEB1 store for precomputed mode
    active_experts: tuple[str, ...] = EXPERT_NAMES
    head: str = "moe"  # "moe", "stacked" or "fusion"
    weight_decay: float = 0.0
    grad_clip: float | None = None
    warmup_steps: int = 0
    cue_lexicon: str | None = None  # lexicon file paths; None = packaged defaults
    contrast_lexicon: str | None = None

    def __post_init__(self):
        self.active_experts = tuple(self.active_experts)
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_len < 2:
            raise ValueError(f"max_len must be at least 2, got {self.max_len}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.hidden_dim < 1 or self.cnn_filters < 1:
            raise ValueError("hidden_dim and cnn_filters must be positive")
        if self.contrast_scale <= 0 or self.epsilon <= 0:
            raise ValueError("contrast_scale and epsilon must be positive")
        if self.head not in HEAD_KINDS:
            raise ValueError(f"head must be one of {HEAD_KINDS}, got {self.head!r}")
        if self.encoder not in ENCODER_MODES:
            raise ValueError(f"encoder must be one of {ENCODER_MODES}, got {self.encoder!r}")
        unknown = set(self.active_experts) - set(EXPERT_NAMES)
        if unknown:
            raise ValueError(f"unknown expert name(s): {sorted(unknown)}")
        if not self.active_experts:
            raise ValueError("active_experts must name at least one expert")
        if self.head != "moe" and set(self.active_experts) != set(EXPERT_NAMES):
            raise ValueError(f"the {self.head} head requires all six experts")
        if self.warmup_steps < 0 or self.weight_decay < 0:
            raise ValueError("warmup_steps and weight_decay must be non-negative")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["active_experts"] = list(self.active_experts)
        return d

    def build_model(self, vocab_size: int, rng: np.random.Generator) -> ModelParams:
        return ModelParams.init(
            vocab_size=vocab_size,
            d=self.hidden_dim,
            max_len=self.max_len,
            rng=rng,
            n_filters=self.cnn_filters,
            contrast_scale=self.contrast_scale,
            eps=self.epsilon,
            head=self.head,
            active_experts=self.active_experts,
            encoder_mode=self.encoder,
            freeze_encoder=self.freeze_encoder,
        )


# --- label-smoothed cross entropy ----------------------------------------

def smoothed_targets(gold: int, alpha: float, n_classes: int = N_CLASSES) -> np.ndarray:
    """(1 - alpha) * onehot(gold) + alpha / n_classes."""
    y = np.full(n_classes, alpha / n_classes)
    y[gold] += 1.0 - alpha
    return y


def label_smoothed_ce(logits: np.ndarray, gold: int, alpha: float) -> float:
    """Cross entropy against the smoothed target, computed in logit space
    via log-sum-exp so exact zeros in the softmax never reach a log."""
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    log_probs = z - (m + np.log(np.exp(z - m).sum()))
    return float(-(smoothed_targets(gold, alpha, z.size) @ log_probs))


def label_smoothed_ce_grad(logits: np.ndarray, gold: int, alpha: float
                           ) -> tuple[float, np.ndarray]:
    """Loss and its gradient w.r.t. the logits (softmax(z) - smoothed target)."""
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    e = np.exp(z - m)
    probs = e / e.sum()
    y = smoothed_targets(gold, alpha, z.size)
    log_probs = z - (m + np.log(e.sum()))
    return float(-(y @ log_probs)), probs - y


# --- optimizer -------------------------------------------------------------

class Adam:
    """Bias-corrected Adam over (name, value, grad) triples.

    Gradients are zeroed after each step.  A non-zero ``weight_decay`` is
    applied decoupled from the moment estimates.
    """

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = [(name, value, grad) for name, value, grad in params]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(v) for _, v, _ in self.params]
        self.v = [np.zeros_like(v) for _, v, _ in self.params]

    def step(self, lr_scale: float = 1.0) -> None:
        for name, _, grad in self.params:
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError(f"non-finite gradient in {name}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        lr = self.lr * lr_scale
        for i, (name, value, grad) in enumerate(self.params):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad**2
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            value -= lr * (m_hat / (np.sqrt(v_hat) + self.eps))
            if self.weight_decay:
                value -= lr * self.weight_decay * value
            grad[:] = 0.0


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    params = list(params)
    for _, _, grad in params:
        total += float(np.sum(grad**2))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for _, _, grad in params:
            grad *= scale
    return norm


# --- per-fold training ------------------------------------------------------

@dataclass
class FoldArtifact:
    """One trained fold: parameters plus its validation scores."""

    fold_index: int
    params: ModelParams
    val_metrics: MetricsReport
    val_macro_f1: float
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class EnsembleModel:
    """All fold artifacts with their normalized logit-averaging weights."""

    folds: list[FoldArtifact]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.folds):
            raise ValueError("one weight per fold required")


def _example_H(example: TokenizedExample, store) -> np.ndarray | None:
    if store is None:
        return None
    if example.id not in store:
        raise KeyError(f"id {example.id!r} not found in the embedding store")
    return store[example.id]


def predict_logits(params: ModelParams, examples, store=None) -> np.ndarray:
    """Forward a dataset; returns an (n, 3) logit matrix in input order."""
    out = np.empty((len(examples), N_CLASSES))
    for i, ex in enumerate(examples):
        out[i] = model_forward(params, ex, _example_H(ex, store)).logits
    return out


def evaluate_model(params: ModelParams, examples, store=None) -> MetricsReport:
    """Metrics of a single model's argmax predictions on labeled examples."""
    logits = predict_logits(params, examples, store)
    preds = logits.argmax(axis=1)
    golds = [ex.label for ex in examples]
    return metrics_from_labels(golds, preds)


def train_fold(config: TrainConfig, train_examples, val_examples, vocab_size: int,
               seed: int, store=None, fold_index: int = 0) -> FoldArtifact:
    """Train one model on the train split and score it on the validation split.

    Mini-batches are drawn from a seeded shuffle each epoch; the last
    partial batch is trained, not dropped.  Fully deterministic for a
    fixed seed.
    """
    if not train_examples or not val_examples:
        raise ValueError("train and validation splits must be non-empty")
    rng = np.random.default_rng(seed)
    params = config.build_model(vocab_size, rng)
    adam = Adam(params.trainable_params(), lr=config.learning_rate,
                weight_decay=config.weight_decay)
    step = 0
    epoch_losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_examples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            params.zero_grads()
            inv = 1.0 / len(batch)
            for i in batch:
                ex = train_examples[i]
                out = model_forward(params, ex, _example_H(ex, store))
                loss, dlogits = label_smoothed_ce_grad(
                    out.logits, ex.label, config.label_smoothing
                )
                model_backward(params, ex, out, dlogits * inv)
                epoch_loss += loss / len(train_examples)
            if config.grad_clip is not None:
                clip_gradients(params.trainable_params(), config.grad_clip)
            step += 1
            scale = min(1.0, step / config.warmup_steps) if config.warmup_steps else 1.0
            adam.step(lr_scale=scale)
        epoch_losses.append(epoch_loss)
        logger.debug("fold %d epoch %d: mean loss %.4f", fold_index, epoch, epoch_loss)

    val_labels = {ex.label for ex in val_examples}
    if len(val_labels) < N_CLASSES:
        logger.warning("fold %d: validation split is missing %d class(es); "
                       "their F1 is 0 by convention",
                       fold_index, N_CLASSES - len(val_labels))
    val_metrics = evaluate_model(params, val_examples, store)
    return FoldArtifact(fold_index=fold_index, params=params,
                        val_metrics=val_metrics, val_macro_f1=val_metrics.macro_f1,
                        epoch_losses=epoch_losses)


def fold_weights(f1s) -> np.ndarray:
    """Normalize validation macro-F1 scores into ensemble weights.

    All-zero scores fall back to uniform weights.
    """
    f1s = np.asarray(f1s, dtype=np.float64)
    total = f1s.sum()
    if total == 0.0:
        return np.full(len(f1s), 1.0 / len(f1s))
    return f1s / total


def _fold_job(args):
    config_dict, train_ex, val_ex, vocab_size, seed, store, j = args
    cfg = TrainConfig.from_dict(config_dict)
    return train_fold(cfg, train_ex, val_ex, vocab_size, seed, store, fold_index=j)


def run_kfold(config: TrainConfig, examples, vocab: Vocab, store=None,
              jobs: int = 1) -> EnsembleModel:
    """Stratified K-fold training; fold j is seeded with ``seed + j``."""
    splits = stratified_kfold(examples, config.k, config.seed)
    specs = []
    for j, (train_idx, val_idx) in enumerate(splits):
        specs.append((
            config.to_dict(),
            [examples[i] for i in train_idx],
            [examples[i] for i in val_idx],
            len(vocab),
            config.seed + j,
            store,
            j,
        ))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            artifacts = list(pool.map(_fold_job, specs))
    else:
        artifacts = [_fold_job(spec) for spec in specs]
    weights = fold_weights([a.val_macro_f1 for a in artifacts])
    return EnsembleModel(folds=artifacts, weights=weights)


# --- ensemble inference -----------------------------------------------------

def ensemble_forward(ensemble: EnsembleModel, example: TokenizedExample, store=None
                     ) -> tuple[np.ndarray, np.ndarray, int, np.ndarray]:
    """Weighted-logit ensemble prediction for one example.

    Returns (logits, probs, predicted class, weight-averaged gate vector).
    Argmax ties resolve to the lowest class index.
    """
    if not ensemble.folds:
        raise ValueError("empty ensemble")
    H = _example_H(example, store)
    logits = np.zeros(N_CLASSES)
    gate = None
    for w, art in zip(ensemble.weights, ensemble.folds):
        out = model_forward(art.params, example, H)
        logits += w * out.logits
        gate = w * out.gate_weights if gate is None else gate + w * out.gate_weights
    m = logits.max()
    e = np.exp(logits - m)
    probs = e / e.sum()
    return logits, probs, int(logits.argmax()), gate


def ensemble_predict(ensemble: EnsembleModel, example: TokenizedExample, store=None
                     ) -> tuple[np.ndarray, np.ndarray, int]:
    """(logits, probs, class) of the F1-weighted logit average."""
    logits, probs, cls, _ = ensemble_forward(ensemble, example, store)
    return logits, probs, cls


def evaluate_ensemble(ensemble: EnsembleModel, examples, store=None
                      ) -> tuple[MetricsReport, np.ndarray]:
    """Ensemble metrics over labeled examples; also returns the (n, 3) logits."""
    logits = np.empty((len(examples), N_CLASSES))
    for i, ex in enumerate(examples):
        logits[i] = ensemble_forward(ensemble, ex, store)[0]
    preds = logits.argmax(axis=1)
    golds = [ex.label for ex in examples]
    return metrics_from_labels(golds, preds), logits


def training_report(ensemble: EnsembleModel, config: TrainConfig, examples,
                    store=None) -> dict:
    """Per-fold validation scores plus ensemble metrics on the training data
    (in-sample; a held-out set sees the ensemble through ``eval``)."""
    folds = [
        {
            "fold": art.fold_index,
            "val_accuracy": art.val_metrics.accuracy,
            "val_macro_f1": art.val_macro_f1,
            "weight": float(w),
        }
        for art, w in zip(ensemble.folds, ensemble.weights)
    ]
    report, _ = evaluate_ensemble(ensemble, examples, store)
    return {
        "config": config.to_dict(),
        "n_examples": len(examples),
        "folds": folds,
        "ensemble": {"split": "train", **report.to_dict()},
    }


# --- gradient verification hook ---------------------------------------------

def head_loss_fn(params: ModelParams, example: TokenizedExample, alpha: float,
                 H_override: np.ndarray | None = None):
    """Closure for :func:`stancemoe.ops.grad_check` over the full model loss.

    Returns (f, tensors): each call of ``f`` zeroes the gradient buffers,
    runs forward + backward, and returns the scalar loss.
    """
    tensors = list(params.trainable_params())

    def f() -> float:
        params.zero_grads()
        out = model_forward(params, example, H_override)
        loss, dlogits = label_smoothed_ce_grad(out.logits, example.label, alpha)
        model_backward(params, example, out, dlogits)
        return loss

    return f, tensors
