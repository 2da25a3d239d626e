"""Review ingestion, text normalization, vocabulary, splits and corpus statistics."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

ASPECTS = ("Quality", "Service", "Price", "Decoration")
SENTIMENTS = ("Positive", "Negative", "Neutral")
ERROR_TAGS = ("CNP", "SE", "IS", "SV", "CDP")
ASPECT_INDEX = {a: i for i, a in enumerate(ASPECTS)}
SENTIMENT_INDEX = {s: i for i, s in enumerate(SENTIMENTS)}

_ASPECT_ALIASES = {"pricing": "Price"}

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1

STATS_SCHEMA_VERSION = 1


class DatasetError(ValueError):
    """Unreadable dataset or no valid rows."""


class RowError(ValueError):
    """A single row violates the Review contract."""


def parse_aspect(literal: str) -> str:
    key = str(literal).strip().lower()
    for a in ASPECTS:
        if a.lower() == key:
            return a
    if key in _ASPECT_ALIASES:
        return _ASPECT_ALIASES[key]
    raise RowError("unknown aspect literal")


def parse_sentiment(literal: str) -> str:
    key = str(literal).strip().lower()
    for s in SENTIMENTS:
        if s.lower() == key:
            return s
    raise RowError("unknown sentiment literal")


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    annotations: tuple[tuple[str, str], ...]
    platform: str | None = None
    domain: str = "source"
    error_tag: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise RowError("empty text after normalization")
        if not self.annotations:
            raise RowError("no annotations")
        seen = [a for a, _ in self.annotations]
        if len(set(seen)) != len(seen):
            raise RowError("more than one sentiment for an aspect")
        for a, s in self.annotations:
            if a not in ASPECT_INDEX:
                raise RowError("unknown aspect literal")
            if s not in SENTIMENT_INDEX:
                raise RowError("unknown sentiment literal")
        if self.error_tag is not None and self.error_tag not in ERROR_TAGS:
            raise RowError("unknown error tag")
        ordered = tuple(sorted(self.annotations, key=lambda p: ASPECT_INDEX[p[0]]))
        object.__setattr__(self, "annotations", ordered)

    def sentiment_for(self, aspect: str) -> str | None:
        for a, s in self.annotations:
            if a == aspect:
                return s
        return None

    def label_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(labels, mask) over the 4 aspects; unannotated aspects get mask 0."""
        labels = np.zeros(len(ASPECTS), dtype=np.int64)
        mask = np.zeros(len(ASPECTS), dtype=np.float64)
        for a, s in self.annotations:
            labels[ASPECT_INDEX[a]] = SENTIMENT_INDEX[s]
            mask[ASPECT_INDEX[a]] = 1.0
        return labels, mask

    def to_dict(self) -> dict:
        row = {
            "id": self.id,
            "text": self.text,
            "annotations": [{"aspect": a, "sentiment": s} for a, s in self.annotations],
            "domain": self.domain,
        }
        if self.platform is not None:
            row["platform"] = self.platform
        if self.error_tag is not None:
            row["error_tag"] = self.error_tag
        return row


# -- normalization ---------------------------------------------------------------

_BANGLA = (0x0980, 0x09FF)
_JOINERS = {"‌", "‍"}


@dataclass(frozen=True)
class NormalizationPolicy:
    strip_emoji: bool = True
    strip_latin: bool = True
    strip_punctuation: bool = True
    bangla_only: bool = False


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return (
        unicodedata.category(ch) == "So"
        or 0x1F000 <= cp <= 0x1FAFF
        or 0x2600 <= cp <= 0x27BF
        or 0xFE00 <= cp <= 0xFE0F
        or cp == 0x20E3
    )


def _is_latin_letter(ch: str) -> bool:
    return ch.isalpha() and unicodedata.name(ch, "").startswith("LATIN")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _is_bangla(ch: str) -> bool:
    return _BANGLA[0] <= ord(ch) <= _BANGLA[1] or ch in _JOINERS


def normalize(raw: str, policy: NormalizationPolicy | None = None) -> str:
    """Canonical composed form, removed character classes, single spaces.

    Removed characters become spaces before whitespace collapsing so that
    removal never glues neighbouring characters together; this keeps the
    function idempotent.
    """
    policy = policy or NormalizationPolicy()
    text = unicodedata.normalize("NFC", raw)
    out = []
    for ch in text:
        if ch.isspace():
            out.append(" ")
        elif policy.bangla_only and not _is_bangla(ch):
            out.append(" ")
        elif policy.strip_emoji and _is_emoji(ch):
            out.append(" ")
        elif policy.strip_latin and _is_latin_letter(ch):
            out.append(" ")
        elif policy.strip_punctuation and _is_punct(ch):
            out.append(" ")
        else:
            out.append(ch)
    return " ".join("".join(out).split())


# -- tokenization and vocabulary ------------------------------------------------------


class Tokenizer(Protocol):
    def __call__(self, text: str) -> list[str]: ...


def _is_split_symbol(ch: str) -> bool:
    cat = unicodedata.category(ch)
    return cat.startswith("P") or cat.startswith("S")


def tokenize(text: str) -> list[str]:
    """Whitespace split, with punctuation and symbols pulled out as their own tokens."""
    tokens: list[str] = []
    for chunk in text.split():
        buf = []
        for ch in chunk:
            if _is_split_symbol(ch):
                if buf:
                    tokens.append("".join(buf))
                    buf = []
                tokens.append(ch)
            else:
                buf.append(ch)
        if buf:
            tokens.append("".join(buf))
    return tokens


@dataclass
class Vocabulary:
    itos: list[str]
    min_frequency: int = 1
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        if self.itos[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with PAD, UNK")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def extend(self, tokens: Iterable[str]) -> "Vocabulary":
        """New vocabulary with unseen ``tokens`` appended (existing indices untouched)."""
        itos = list(self.itos)
        known = set(itos)
        for t in tokens:
            if t not in known:
                itos.append(t)
                known.add(t)
        return Vocabulary(itos, self.min_frequency)

    def to_dict(self) -> dict:
        return {"min_frequency": self.min_frequency, "itos": self.itos}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(list(d["itos"]), int(d.get("min_frequency", 1)))


def build_vocab(corpus: Iterable[Sequence[str]], min_frequency: int = 1) -> Vocabulary:
    """Tokens at or above ``min_frequency``, most frequent first, ties broken by codepoint order."""
    counts = Counter(tok for tokens in corpus for tok in tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_frequency and t not in (PAD, UNK)),
                  key=lambda t: (-counts[t], t))
    return Vocabulary([PAD, UNK, *kept], min_frequency)


def encode(tokens: Sequence[str], vocab: Vocabulary, max_length: int) -> list[int]:
    if max_length < 1:
        raise ValueError("max_length must be >= 1")
    ids = [vocab.index(t) for t in tokens[:max_length]]
    return ids + [PAD_ID] * (max_length - len(ids))


def decode(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.itos[i] for i in ids if i != PAD_ID]


def encode_batch(texts: Sequence[str], vocab: Vocabulary, max_length: int,
                 tokenizer: Tokenizer = tokenize) -> np.ndarray:
    return np.array([encode(tokenizer(t), vocab, max_length) for t in texts], dtype=np.int64).reshape(
        len(texts), max_length)


# -- ingestion -------------------------------------------------------------------------


@dataclass
class LoadReport:
    rejected: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rejected": self.rejected, "warnings": self.warnings}


def _row_to_review(row: dict, policy: NormalizationPolicy | None, default_domain: str) -> Review:
    if "text" not in row or row["text"] is None:
        raise RowError("missing text")
    raw_ann = row.get("annotations")
    if not raw_ann:
        raise RowError("no annotations")
    pairs = []
    for item in raw_ann:
        if isinstance(item, dict):
            a, s = item.get("aspect"), item.get("sentiment")
        else:
            a, s = item
        pairs.append((parse_aspect(a), parse_sentiment(s)))
    text = normalize(str(row["text"]), policy) if policy is not None else str(row["text"])
    error_tag = row.get("error_tag") or None
    return Review(
        id=str(row.get("id", "")),
        text=text,
        annotations=tuple(pairs),
        platform=row.get("platform") or None,
        domain=row.get("domain") or default_domain,
        error_tag=error_tag,
    )


def parse_annotation_cell(cell: str) -> list[tuple[str, str]]:
    """``"Quality:Positive|Price:Negative"`` -> list of pairs."""
    pairs = []
    for part in (cell or "").split("|"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise RowError("malformed annotation cell")
        a, s = part.split(":", 1)
        pairs.append((a, s))
    return pairs


def load_dataset(path, format: str | None = None, policy: NormalizationPolicy | None = None,
                 default_domain: str = "source") -> tuple[list[Review], LoadReport]:
    """Read JSONL or CSV reviews; malformed rows land in the report, never silently dropped.

    ``policy=None`` keeps texts as stored; pass a policy to normalize on the way in.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt not in ("JSONL", "CSV"):
        raise DatasetError(f"unsupported format {fmt!r}")
    try:
        content = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    report = LoadReport()
    rows: list[tuple[int, dict | None, str | None]] = []
    if fmt == "JSONL":
        # split on "\n" only: splitlines() would also break inside texts at U+0085, U+2028, ...
        for lineno, line in enumerate(content.split("\n"), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError
                rows.append((lineno, obj, None))
            except ValueError:
                rows.append((lineno, None, "invalid JSON object"))
    else:
        reader = csv.DictReader(io.StringIO(content, newline=""))
        for lineno, rec in enumerate(reader, 2):
            try:
                rec = dict(rec)
                rec["annotations"] = parse_annotation_cell(rec.get("annotations", ""))
                rows.append((lineno, rec, None))
            except RowError as exc:
                rows.append((lineno, None, str(exc)))

    reviews: list[Review] = []
    for lineno, obj, err in rows:
        if err is None:
            try:
                reviews.append(_row_to_review(obj, policy, default_domain))
                continue
            except RowError as exc:
                err = str(exc)
        report.rejected.append({"line": lineno, "id": None if obj is None else obj.get("id"), "reason": err})

    dupes = [i for i, c in Counter(r.id for r in reviews).items() if c > 1]
    for d in sorted(dupes):
        msg = f"duplicate id {d!r} (kept all occurrences)"
        log.warning(msg)
        report.warnings.append(msg)
    if not reviews:
        raise DatasetError(f"no valid rows in {path}")
    return reviews, report


def write_jsonl(reviews: Iterable[Review], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in reviews:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def write_csv(reviews: Iterable[Review], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "text", "annotations", "platform", "domain", "error_tag"])
        for r in reviews:
            cell = "|".join(f"{a}:{s}" for a, s in r.annotations)
            w.writerow([r.id, r.text, cell, r.platform or "", r.domain, r.error_tag or ""])


# -- splits ----------------------------------------------------------------------------


@dataclass
class DatasetSplit:
    train: list[Review]
    validation: list[Review]
    test: list[Review]
    seed: int
    ratios: tuple[float, float, float]

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train": [r.id for r in self.train],
            "validation": [r.id for r in self.validation],
            "test": [r.id for r in self.test],
        }


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    # the epsilon guards products like 90 * 0.7 = 62.99999999999999
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_val = math.floor(n * ratios[1] + 1e-9)
    return n_train, n_val, n - n_train - n_val


def split(reviews: Sequence[Review], ratios: Sequence[float] = (0.70, 0.15, 0.15), seed: int = 0,
          stratify: bool = False) -> DatasetSplit:
    """Seeded shuffle, then floor-sized train and validation; test gets the remainder.

    With ``stratify`` each stratum (the review's first annotation) is cut
    separately before concatenation, so class proportions are kept per part.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three nonnegative fractions summing to 1, got {ratios}")
    n = len(reviews)
    if n < 3:
        raise ValueError(f"need at least 3 reviews to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    if not stratify:
        a, b, _ = split_sizes(n, ratios)
        tr, va, te = order[:a], order[a:a + b], order[a + b:]
    else:
        strata: dict[tuple, list[int]] = {}
        for i in order:
            strata.setdefault(reviews[i].annotations[0], []).append(int(i))
        tr, va, te = [], [], []
        for key in sorted(strata):
            idx = strata[key]
            a, b, _ = split_sizes(len(idx), ratios)
            tr += idx[:a]
            va += idx[a:a + b]
            te += idx[a + b:]
    pick = lambda ix: [reviews[int(i)] for i in ix]  # noqa: E731
    return DatasetSplit(pick(tr), pick(va), pick(te), seed, tuple(float(r) for r in ratios))


# -- statistics ------------------------------------------------------------------------


def class_distribution(reviews: Iterable[Review], aspect: str) -> dict[str, int]:
    counts = {s: 0 for s in SENTIMENTS}
    for r in reviews:
        s = r.sentiment_for(aspect)
        if s is not None:
            counts[s] += 1
    return counts


def jaccard_similarity(a: Iterable[str], b: Iterable[str]) -> float:
    """|A & B| / |A | B|; two empty sets count as identical (1.0)."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def aspect_vocabularies(reviews: Iterable[Review], tokenizer: Tokenizer = tokenize) -> dict[str, set[str]]:
    vocab = {a: set() for a in ASPECTS}
    for r in reviews:
        toks = tokenizer(r.text)
        for a, _ in r.annotations:
            vocab[a].update(toks)
    return vocab


def corpus_stats(reviews: Sequence[Review], tokenizer: Tokenizer = tokenize) -> dict:
    """Platform counts, per-aspect sentiment counts, aspect Jaccard matrix and length histogram.

    Matrix cells involving an aspect no review mentions are ``None``; the
    diagonal is always 1.0.
    """
    platforms = Counter(r.platform or "Other" for r in reviews)
    occupied = {a for r in reviews for a, _ in r.annotations}
    vocab = aspect_vocabularies(reviews, tokenizer)
    matrix = []
    for a in ASPECTS:
        row = []
        for b in ASPECTS:
            if a == b:
                row.append(1.0)
            elif a in occupied and b in occupied:
                row.append(jaccard_similarity(vocab[a], vocab[b]))
            else:
                row.append(None)
        matrix.append(row)
    lengths = Counter(len(tokenizer(r.text)) for r in reviews)
    from .ensemble.features import length_bucket  # local import: ensemble depends on data

    buckets = Counter(length_bucket(n) for n in (len(tokenizer(r.text)) for r in reviews))
    return {
        "schema_version": STATS_SCHEMA_VERSION,
        "n_reviews": len(reviews),
        "n_annotations": sum(len(r.annotations) for r in reviews),
        "platforms": dict(sorted(platforms.items())),
        "domains": dict(sorted(Counter(r.domain for r in reviews).items())),
        "aspects": {a: class_distribution(reviews, a) for a in ASPECTS},
        "occupied_aspects": [a for a in ASPECTS if a in occupied],
        "jaccard": {"aspects": list(ASPECTS), "matrix": matrix},
        "length_histogram": {str(k): lengths[k] for k in sorted(lengths)},
        "length_buckets": {b: buckets.get(b, 0) for b in ("short", "medium", "long")},
    }


# -- model-ready arrays -------------------------------------------------------------------


@dataclass
class EncodedSet:
    """Fixed-length token ids plus aspect labels for a list of reviews.

    ``labels``/``mask`` are (N, 4): sentiment index and 1 where the aspect is annotated.
    ``token_counts`` and ``oov_counts`` are measured before truncation.
    """

    ids: np.ndarray
    labels: np.ndarray
    mask: np.ndarray
    token_counts: np.ndarray
    oov_counts: np.ndarray
    tokens: list[list[str]]

    def __len__(self) -> int:
        return self.ids.shape[0]

    def subset(self, index) -> "EncodedSet":
        index = np.asarray(index, dtype=np.int64)
        return EncodedSet(self.ids[index], self.labels[index], self.mask[index],
                          self.token_counts[index], self.oov_counts[index],
                          [self.tokens[i] for i in index])


def encode_reviews(reviews: Sequence[Review], vocab: Vocabulary, max_length: int,
                   tokenizer: Tokenizer = tokenize) -> EncodedSet:
    toks = [tokenizer(r.text) for r in reviews]
    ids = np.array([encode(t, vocab, max_length) for t in toks], dtype=np.int64).reshape(len(reviews), max_length)
    labels = np.zeros((len(reviews), len(ASPECTS)), dtype=np.int64)
    mask = np.zeros((len(reviews), len(ASPECTS)), dtype=np.float64)
    for i, r in enumerate(reviews):
        labels[i], mask[i] = r.label_matrix()
    counts = np.array([len(t) for t in toks], dtype=np.int64)
    oov = np.array([sum(1 for x in t if x not in vocab) for t in toks], dtype=np.int64)
    return EncodedSet(ids, labels, mask, counts, oov, toks)
