"""SMCK1 model checkpoints: one binary file holding the config echo, the
vocabulary, both lexicons, fold weights, and every parameter tensor of
every fold, keyed by parameter path.

Layout, little-endian:
    magic "SMCK1\\0" | u32 metadata length | metadata JSON (UTF-8)
    u32 tensor count | records
Each record: u16 key length | key (UTF-8, "fold<j>/<param path>") |
u8 ndim | ndim * u32 dims | float64 values, row-major.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .metrics import MetricsReport
from .text import CueLexicon, Vocab
from .train import EnsembleModel, FoldArtifact, TrainConfig

CHECKPOINT_MAGIC = b"SMCK1\0"


class CheckpointFormatError(ValueError):
    """The checkpoint file is corrupt or has the wrong magic."""


@dataclass
class LoadedCheckpoint:
    ensemble: EnsembleModel
    config: TrainConfig
    vocab: Vocab
    lexicon: CueLexicon


def save_checkpoint(path, ensemble: EnsembleModel, config: TrainConfig,
                    vocab: Vocab, lexicon: CueLexicon) -> None:
    meta = {
        "format": 1,
        "config": config.to_dict(),
        "vocab": vocab.tail,
        "cue_tokens": sorted(lexicon.cue_tokens),
        "contrast_tokens": sorted(lexicon.contrast_tokens),
        "weights": [float(w) for w in ensemble.weights],
        "fold_val_metrics": [a.val_metrics.to_dict() for a in ensemble.folds],
    }
    records = []
    for j, art in enumerate(ensemble.folds):
        for name, value, _ in art.params.named_params():
            records.append((f"fold{j}/{name}", value))
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(records)))
        for key, value in records:
            raw = key.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", value.ndim))
            fh.write(struct.pack(f"<{value.ndim}I", *value.shape))
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointFormatError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path) -> LoadedCheckpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(f"bad magic {magic!r}; not an SMCK1 checkpoint")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "header"))
        meta = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        (n_records,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(n_records):
            (key_len,) = struct.unpack("<H", _read_exact(fh, 2, "tensor key length"))
            key = _read_exact(fh, key_len, "tensor key").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "tensor rank"))
            dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "tensor shape"))
            size = int(np.prod(dims)) if ndim else 1
            raw = _read_exact(fh, 8 * size, f"tensor {key!r} payload")
            tensors[key] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()

    config = TrainConfig.from_dict(meta["config"])
    vocab = Vocab(meta["vocab"])
    lexicon = CueLexicon(
        cue_tokens=frozenset(meta["cue_tokens"]),
        contrast_tokens=frozenset(meta["contrast_tokens"]),
    )
    weights = np.asarray(meta["weights"], dtype=np.float64)
    folds = []
    for j, metrics_dict in enumerate(meta["fold_val_metrics"]):
        params = config.build_model(len(vocab), np.random.default_rng(0))
        for name, value, _ in params.named_params():
            key = f"fold{j}/{name}"
            if key not in tensors:
                raise CheckpointFormatError(f"checkpoint is missing tensor {key!r}")
            stored = tensors[key]
            if stored.shape != value.shape:
                raise CheckpointFormatError(
                    f"tensor {key!r} has shape {stored.shape}, expected {value.shape}"
                )
            value[:] = stored
        report = MetricsReport.from_dict(metrics_dict)
        folds.append(FoldArtifact(fold_index=j, params=params, val_metrics=report,
                                  val_macro_f1=report.macro_f1))
    if len(folds) != len(weights):
        raise CheckpointFormatError("fold count and weight count disagree")
    ensemble = EnsembleModel(folds=folds, weights=weights)
    return LoadedCheckpoint(ensemble=ensemble, config=config, vocab=vocab,
                            lexicon=lexicon)
