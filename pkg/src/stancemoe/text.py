"""Tokenization, vocabulary, cue/contrast position marking, JSONL dataset
ingestion, and stratified K-fold splitting."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from importlib import resources

import numpy as np

PAD_ID, CLS_ID, UNK_ID = 0, 1, 2
PAD_TOKEN, CLS_TOKEN, UNK_TOKEN = "[PAD]", "[CLS]", "[UNK]"
RESERVED_TOKENS = (PAD_TOKEN, CLS_TOKEN, UNK_TOKEN)

# on-disk label strings, in class-index order
LABEL_NAMES = ("pro_palestine", "pro_israel", "neutral")
CLASS_DISPLAY = ("Pro-Palestine", "Pro-Israel", "Neutral")
N_CLASSES = 3
_LABEL_TO_INDEX = {name: i for i, name in enumerate(LABEL_NAMES)}

_PUNCT = frozenset(string.punctuation)


class DatasetFormatError(ValueError):
    """A dataset or lexicon file violates the expected format."""


def tokenize(text: str, max_len: int = 128) -> list[str]:
    """Lowercase, whitespace-split, peel leading/trailing punctuation.

    Each leading or trailing punctuation character of a whitespace chunk
    becomes its own token; interior punctuation is left alone.  The result
    is truncated to max_len - 1 tokens and prefixed with the CLS marker, so
    the returned sequence never exceeds max_len.
    """
    if max_len < 2:
        raise ValueError(f"max_len must be at least 2, got {max_len}")
    out: list[str] = []
    for chunk in text.lower().split():
        lead: list[str] = []
        trail: list[str] = []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return [CLS_TOKEN] + out[: max_len - 1]


def detokenize(tokens: list[str]) -> str:
    """Join non-CLS tokens back into a whitespace-separated string."""
    return " ".join(t for t in tokens if t != CLS_TOKEN)


class Vocab:
    """Token-to-id map with reserved ids 0=PAD, 1=CLS, 2=UNK."""

    def __init__(self, tokens=()):
        self._ids: dict[str, int] = {t: i for i, t in enumerate(RESERVED_TOKENS)}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        """Assign the next dense id to an unseen token; return its id."""
        existing = self._ids.get(token)
        if existing is not None:
            return existing
        idx = len(self._ids)
        self._ids[token] = idx
        return idx

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK_ID)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self._ids.get(t, UNK_ID) for t in tokens]

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        """All tokens ordered by id, reserved entries first."""
        return sorted(self._ids, key=self._ids.get)

    @property
    def tail(self) -> list[str]:
        """Non-reserved tokens ordered by id (serialization payload)."""
        return self.tokens[len(RESERVED_TOKENS) :]


@dataclass(frozen=True)
class CueLexicon:
    """Lowercase token sets driving the cue and contrast position masks."""

    cue_tokens: frozenset[str]
    contrast_tokens: frozenset[str]

    def __post_init__(self):
        for name, toks in (("cue", self.cue_tokens), ("contrast", self.contrast_tokens)):
            if not toks:
                raise ValueError(f"{name} lexicon is empty")
            for t in toks:
                if t != t.lower() or any(c.isspace() for c in t) or not t:
                    raise ValueError(f"bad {name} lexicon entry: {t!r}")


def read_lexicon_file(path) -> frozenset[str]:
    """One lowercase token per line; blank lines and '#' comments ignored."""
    tokens = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if any(c.isspace() for c in line):
                raise DatasetFormatError(f"{path}:{lineno}: lexicon entry contains whitespace: {line!r}")
            tokens.add(line.lower())
    if not tokens:
        raise DatasetFormatError(f"{path}: lexicon file has no entries")
    return frozenset(tokens)


def default_lexicon() -> CueLexicon:
    """The lexicons shipped with the package (editable text files)."""
    data = resources.files("stancemoe") / "data"
    return CueLexicon(
        cue_tokens=read_lexicon_file(data / "cue_lexicon.txt"),
        contrast_tokens=read_lexicon_file(data / "contrast_lexicon.txt"),
    )


@dataclass(frozen=True)
class TokenizedExample:
    """One classified text: tokens, ids, cue/contrast masks, gold label."""

    id: str
    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    cue_positions: frozenset[int]
    contrast_positions: frozenset[int]
    label: int | None  # class index, or None for unlabeled inputs


def mark_positions(tokens, lexicon_tokens) -> frozenset[int]:
    """Positions whose token is in the lexicon; the CLS slot is excluded."""
    if not tokens:
        raise ValueError("mark_positions expects a non-empty token sequence")
    return frozenset(i for i in range(1, len(tokens)) if tokens[i] in lexicon_tokens)


def make_example(
    example_id: str,
    text: str,
    label: int | None,
    lexicon: CueLexicon,
    max_len: int,
    vocab: Vocab,
    grow_vocab: bool,
) -> TokenizedExample:
    """Tokenize one text and mark its cue/contrast positions."""
    tokens = tokenize(text, max_len)
    if grow_vocab:
        for t in tokens[1:]:
            vocab.add(t)
    return TokenizedExample(
        id=example_id,
        tokens=tuple(tokens),
        token_ids=tuple([CLS_ID] + vocab.encode(tokens[1:])),
        cue_positions=mark_positions(tokens, lexicon.cue_tokens),
        contrast_positions=mark_positions(tokens, lexicon.contrast_tokens),
        label=label,
    )


def load_dataset(
    path,
    lexicon: CueLexicon,
    max_len: int = 128,
    vocab: Vocab | None = None,
    require_labels: bool = True,
) -> tuple[list[TokenizedExample], Vocab]:
    """Read a JSONL dataset of {"id", "text", "label"} objects.

    When ``vocab`` is None a fresh vocabulary is built from the corpus in
    file order; otherwise the given vocabulary is used read-only and unseen
    tokens map to UNK.  Input order is preserved.  Malformed lines raise
    :class:`DatasetFormatError` naming the line number.
    """
    grow = vocab is None
    if vocab is None:
        vocab = Vocab()
    examples: list[TokenizedExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(row, dict):
                raise DatasetFormatError(f"{path}:{lineno}: expected a JSON object")
            for key in ("id", "text"):
                if key not in row or not isinstance(row[key], str):
                    raise DatasetFormatError(f"{path}:{lineno}: missing or non-string {key!r}")
            label: int | None = None
            if "label" in row and row["label"] is not None:
                raw = row["label"]
                if raw not in _LABEL_TO_INDEX:
                    raise DatasetFormatError(
                        f"{path}:{lineno}: unknown label {raw!r} "
                        f"(expected one of {', '.join(LABEL_NAMES)})"
                    )
                label = _LABEL_TO_INDEX[raw]
            elif require_labels:
                raise DatasetFormatError(f"{path}:{lineno}: missing required 'label'")
            examples.append(
                make_example(row["id"], row["text"], label, lexicon, max_len, vocab, grow)
            )
    return examples, vocab


def stratified_kfold(
    examples: list[TokenizedExample], k: int, seed: int
) -> list[tuple[list[int], list[int]]]:
    """Split indices into k stratified (train, validation) partitions.

    Per class, indices are shuffled with a seeded PRNG and dealt round-robin
    into k validation folds, so per-class counts across folds differ by at
    most one and the validation folds partition the dataset.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    by_class: dict[int, list[int]] = {}
    for i, ex in enumerate(examples):
        if ex.label is None:
            raise ValueError(f"example {ex.id!r} has no label; k-fold needs labeled data")
        by_class.setdefault(ex.label, []).append(i)
    for label, idxs in sorted(by_class.items()):
        if len(idxs) < k:
            raise ValueError(
                f"class {LABEL_NAMES[label]!r} has only {len(idxs)} examples, "
                f"fewer than k={k}"
            )
    rng = np.random.default_rng(seed)
    val_folds: list[list[int]] = [[] for _ in range(k)]
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        idxs = idxs[rng.permutation(len(idxs))]
        for pos, idx in enumerate(idxs):
            val_folds[pos % k].append(int(idx))
    all_indices = set(range(len(examples)))
    splits = []
    for fold in val_folds:
        val = sorted(fold)
        train = sorted(all_indices.difference(fold))
        splits.append((train, val))
    return splits
