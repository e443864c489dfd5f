"""Contextual token encoder and the SMEB1 precomputed-embedding store.

The trainable toy encoder maps token ids to (embedding + fixed sinusoidal
position) vectors and mixes them with a single scaled dot-product
self-attention layer, producing a (T, d) matrix H whose row 0 is the
sequence-level CLS representation.  The SMEB1 store lets externally
produced embeddings drive the classification head instead.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .ops import (
    LinearParams,
    affine_rows,
    affine_rows_backward,
    as_f64,
    softmax_rows,
    softmax_rows_backward,
)
from .text import UNK_ID


@dataclass
class EncoderOutput:
    H: np.ndarray  # (T, d) contextualized token representations
    h_cls: np.ndarray  # (d,) row 0 of H


def sinusoidal_positions(max_len: int, d: int) -> np.ndarray:
    """Fixed sin/cos position table of shape (max_len, d).

    Scaled by 1/sqrt(d) so position rows have the same magnitude as the
    uniform(-1/sqrt(d), 1/sqrt(d)) token embeddings they are added to.
    """
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(d, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / d)
    table = np.empty((max_len, d))
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table / np.sqrt(d)


class ToyEncoderParams:
    """Embedding table, fixed position table, and one attention layer."""

    def __init__(self, embedding, positions, query, key, value):
        self.embedding = as_f64(embedding)  # (|V|, d)
        self.positions = as_f64(positions)  # (max_len, d), not trainable
        self.query = query
        self.key = key
        self.value = value
        self.grad_embedding = np.zeros_like(self.embedding)

    @classmethod
    def init(cls, vocab_size: int, d: int, max_len: int, rng: np.random.Generator):
        # rows drawn uniform(-sqrt(3/d), sqrt(3/d)) have unit expected
        # squared norm, keeping token identity visible next to positions
        limit = np.sqrt(3.0 / d)
        return cls(
            embedding=rng.uniform(-limit, limit, size=(vocab_size, d)),
            positions=sinusoidal_positions(max_len, d),
            query=LinearParams.init(d, d, rng),
            key=LinearParams.init(d, d, rng),
            value=LinearParams.init(d, d, rng),
        )

    @property
    def d(self) -> int:
        return self.embedding.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    def named_params(self, prefix: str = "encoder"):
        yield f"{prefix}/embedding", self.embedding, self.grad_embedding
        for name, lin in (("query", self.query), ("key", self.key), ("value", self.value)):
            yield f"{prefix}/{name}/weight", lin.weight, lin.grad_weight
            yield f"{prefix}/{name}/bias", lin.bias, lin.grad_bias

    def zero_grads(self) -> None:
        self.grad_embedding[:] = 0.0
        for lin in (self.query, self.key, self.value):
            lin.zero_grads()


def _clip_ids(params: ToyEncoderParams, token_ids) -> np.ndarray:
    ids = np.asarray(token_ids, dtype=np.intp)
    return np.where((ids >= 0) & (ids < params.vocab_size), ids, UNK_ID)


def embed_sequence(params: ToyEncoderParams, token_ids) -> np.ndarray:
    """Pre-attention input rows: embedding lookup plus position row."""
    ids = _clip_ids(params, token_ids)
    T = len(ids)
    if T > params.positions.shape[0]:
        raise ValueError(
            f"sequence length {T} exceeds position table size {params.positions.shape[0]}"
        )
    return params.embedding[ids] + params.positions[:T]


def _attend(params: ToyEncoderParams, X: np.ndarray):
    Q = affine_rows(params.query, X)
    K = affine_rows(params.key, X)
    V = affine_rows(params.value, X)
    S = (Q @ K.T) / np.sqrt(params.d)
    A = softmax_rows(S)
    return Q, K, V, A


def encode(params: ToyEncoderParams, token_ids) -> EncoderOutput:
    """Contextualize a token-id sequence; out-of-vocabulary ids become UNK."""
    if len(token_ids) == 0:
        raise ValueError("cannot encode an empty sequence")
    X = embed_sequence(params, token_ids)
    _, _, V, A = _attend(params, X)
    H = A @ V
    return EncoderOutput(H=H, h_cls=H[0])


def encode_backward(params: ToyEncoderParams, token_ids, dH: np.ndarray) -> None:
    """Accumulate encoder gradients for dL/dH (CLS gradient folded into row 0)."""
    ids = _clip_ids(params, token_ids)
    X = embed_sequence(params, token_ids)
    Q, K, V, A = _attend(params, X)
    scale = 1.0 / np.sqrt(params.d)

    dV = A.T @ dH
    dA = dH @ V.T
    dS = softmax_rows_backward(A, dA)
    dQ = (dS @ K) * scale
    dK = (dS.T @ Q) * scale

    dX = affine_rows_backward(params.query, X, dQ)
    dX += affine_rows_backward(params.key, X, dK)
    dX += affine_rows_backward(params.value, X, dV)
    np.add.at(params.grad_embedding, ids, dX)


# --- SMEB1 precomputed-embedding store ---------------------------------
#
# Binary layout, little-endian:
#   magic "SMEB1\0" | u32 d | u32 record count
#   per record: u16 id length | id (UTF-8) | u32 T | T*d float32, row-major
# Row 0 of each record is the CLS representation.  Values are float32 on
# disk and widened to float64 on load.

STORE_MAGIC = b"SMEB1\0"


class StoreFormatError(ValueError):
    """The embedding store file is corrupt or has the wrong magic."""


def write_embedding_store(path, records) -> int:
    """Write (id, H) pairs; returns the number of records written.

    ``H`` arrays must share one feature dimension d; they are stored as
    float32.
    """
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty embedding store")
    d = int(np.asarray(records[0][1]).shape[1])
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<II", d, len(records)))
        for example_id, H in records:
            H = np.asarray(H, dtype=np.float32)
            if H.ndim != 2 or H.shape[1] != d:
                raise ValueError(
                    f"record {example_id!r} has shape {H.shape}, expected (T, {d})"
                )
            raw = example_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"record id too long: {example_id!r}")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", H.shape[0]))
            fh.write(np.ascontiguousarray(H).tobytes())
    return len(records)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise StoreFormatError(f"truncated embedding store while reading {what}")
    return buf


def read_embedding_store(path) -> tuple[dict[str, np.ndarray], int]:
    """Load a whole SMEB1 file; returns ({id: (T, d) float64 H}, d)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(STORE_MAGIC))
        if magic != STORE_MAGIC:
            raise StoreFormatError(f"bad magic {magic!r}; not an SMEB1 embedding store")
        d, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, "record id length"))
            example_id = _read_exact(fh, id_len, "record id").decode("utf-8")
            (T,) = struct.unpack("<I", _read_exact(fh, 4, "record length"))
            raw = _read_exact(fh, 4 * T * d, f"record {example_id!r} payload")
            H32 = np.frombuffer(raw, dtype="<f4").reshape(T, d)
            if example_id in out:
                raise StoreFormatError(f"duplicate record id {example_id!r}")
            out[example_id] = H32.astype(np.float64)
    return out, d


def load_precomputed(path, example_id: str) -> EncoderOutput:
    """Fetch one stored record as an EncoderOutput (CLS = row 0)."""
    store, _ = read_embedding_store(path)
    if example_id not in store:
        raise KeyError(f"id {example_id!r} not found in embedding store {path}")
    H = store[example_id]
    return EncoderOutput(H=H, h_cls=H[0])
