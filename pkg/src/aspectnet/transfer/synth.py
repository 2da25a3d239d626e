"""Seeded synthetic multi-aspect corpora in Bangla script.

Each annotated aspect contributes a segment: one aspect word followed by one
or two sentiment carriers drawn from that (aspect, sentiment) cell, plus
filler. Carriers are aspect-specific, so a bag-of-words classifier can
separate every cell; order-aware encoders see the same signal.

Aspect frequencies and per-aspect sentiment ratios follow the published
corpus distribution (Quality 4000 : Service 1000 : Price 2500 : Decoration 1255;
sentiment shares per aspect from the same table).
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

import numpy as np

from ..data import ASPECTS, SENTIMENTS, Review
from ..rng import derive_rng

ASPECT_WEIGHTS = np.array([4000, 1000, 2500, 1255], dtype=np.float64)
SENTIMENT_SHARES = {
    "Quality": (2400, 1200, 400),
    "Service": (600, 300, 100),
    "Price": (1500, 900, 100),
    "Decoration": (750, 400, 105),
}
PLATFORMS = ("Daraz", "Facebook", "Rokomari", "Shajgoj", "Other")
PLATFORM_WEIGHTS = np.array([6521, 1145, 494, 155, 440], dtype=np.float64)

_CONSONANTS = [chr(c) for c in range(0x0995, 0x09B9 + 1) if c not in (0x09A9, 0x09B1, 0x09B3, 0x09B4, 0x09B5)]
_VOWEL_SIGNS = ["", "া", "ি", "ী", "ু", "ূ", "ে", "ো"]


def _pseudo_words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    words: list[str] = []
    while len(words) < n:
        syllables = int(rng.integers(2, 4))
        w = "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWEL_SIGNS[rng.integers(len(_VOWEL_SIGNS))]
                    for _ in range(syllables))
        w = unicodedata.normalize("NFC", w)
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


@dataclass
class Lexicon:
    aspect_words: dict[str, list[str]]
    carriers: dict[tuple[str, str], list[str]]
    fillers: list[str]
    reserve: list[str] = field(repr=False, default_factory=list)

    def all_carriers(self) -> list[tuple[tuple[str, str], str]]:
        return [(cell, w) for cell in sorted(self.carriers, key=_cell_key) for w in self.carriers[cell]]

    def sentiment_lexicon(self) -> dict[str, float]:
        """Signed carrier lexicon: +1 positive, -1 negative, 0 neutral."""
        sign = {"Positive": 1.0, "Negative": -1.0, "Neutral": 0.0}
        return {w: sign[s] for (a, s), ws in self.carriers.items() for w in ws}


def _cell_key(cell: tuple[str, str]) -> tuple[int, int]:
    return ASPECTS.index(cell[0]), SENTIMENTS.index(cell[1])


@dataclass
class SyntheticCorpus:
    """Source-domain generator. The lexicon is fixed by ``seed``."""

    seed: int = 0
    aspect_words_per_aspect: int = 3
    carriers_per_cell: int = 6
    n_fillers: int = 60
    length_range: tuple[int, int] = (4, 30)
    lexicon: Lexicon = field(init=False)

    def __post_init__(self):
        rng = derive_rng(self.seed, "synthetic-lexicon")
        taken: set[str] = set()
        aspect_words = {a: _pseudo_words(rng, self.aspect_words_per_aspect, taken) for a in ASPECTS}
        carriers = {(a, s): _pseudo_words(rng, self.carriers_per_cell, taken) for a in ASPECTS for s in SENTIMENTS}
        fillers = _pseudo_words(rng, self.n_fillers, taken)
        reserve = _pseudo_words(rng, 400, taken)
        self.lexicon = Lexicon(aspect_words, carriers, fillers, reserve)

    def generate(self, n: int, seed: int, domain: str = "source", id_prefix: str = "r",
                 substitutions: dict[str, str] | None = None, style_tokens: list[str] | None = None,
                 style_rate: float = 0.0, label_noise: float = 0.0) -> list[Review]:
        rng = derive_rng(seed, "synthetic-reviews", domain)
        lex = self.lexicon
        subs = substitutions or {}
        aspect_set = {w for ws in lex.aspect_words.values() for w in ws}
        a_p = ASPECT_WEIGHTS / ASPECT_WEIGHTS.sum()
        reviews = []
        for i in range(n):
            k = int(rng.choice([1, 2, 3], p=[0.5, 0.35, 0.15]))
            aspects = sorted(rng.choice(len(ASPECTS), size=k, replace=False, p=a_p).tolist())
            target_len = int(rng.integers(self.length_range[0], self.length_range[1] + 1))
            segments, annotations = [], []
            for ai in aspects:
                aspect = ASPECTS[ai]
                shares = np.array(SENTIMENT_SHARES[aspect], dtype=np.float64)
                sentiment = SENTIMENTS[int(rng.choice(3, p=shares / shares.sum()))]
                seg = [lex.aspect_words[aspect][rng.integers(len(lex.aspect_words[aspect]))]]
                cell = lex.carriers[(aspect, sentiment)]
                for _ in range(int(rng.integers(1, 3))):
                    w = cell[rng.integers(len(cell))]
                    seg.append(subs.get(w, w))
                segments.append(seg)
                label = sentiment
                if label_noise > 0 and rng.random() < label_noise:
                    label = SENTIMENTS[int(rng.choice([j for j in range(3) if SENTIMENTS[j] != sentiment]))]
                annotations.append((aspect, label))
            rng.shuffle(segments)
            tokens = [t for seg in segments for t in seg]
            while len(tokens) < target_len:
                pos = int(rng.integers(len(tokens) + 1))
                if style_tokens and rng.random() < style_rate:
                    filler = style_tokens[rng.integers(len(style_tokens))]
                else:
                    filler = lex.fillers[rng.integers(len(lex.fillers))]
                # keep each aspect word adjacent to its carriers
                while 0 < pos < len(tokens) and tokens[pos - 1] in aspect_set:
                    pos += 1
                tokens.insert(pos, filler)
            platform = PLATFORMS[int(rng.choice(len(PLATFORMS), p=PLATFORM_WEIGHTS / PLATFORM_WEIGHTS.sum()))]
            reviews.append(Review(id=f"{id_prefix}{i:05d}", text=" ".join(tokens),
                                  annotations=tuple(annotations), platform=platform, domain=domain))
        return reviews


@dataclass(frozen=True)
class ShiftSpec:
    vocab_shift: float = 0.0
    label_noise: float = 0.0
    style_tokens: int = 0
    style_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_shift", "label_noise", "style_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def carrier_substitutions(source: SyntheticCorpus, vocab_shift: float, seed: int) -> dict[str, str]:
    """Map a ``vocab_shift`` fraction of carrier words to unseen synonyms.

    The replaced carriers are a prefix of one seeded permutation, so for a
    fixed seed a larger shift replaces a superset of a smaller one.
    """
    carriers = [w for _, w in source.lexicon.all_carriers()]
    order = derive_rng(seed, "carrier-shift").permutation(len(carriers))
    n_swap = int(round(vocab_shift * len(carriers)))
    synonyms = source.lexicon.reserve
    return {carriers[j]: synonyms[j] for j in order[:n_swap]}
