"""ARPABET pronunciation lexicon and tense/lax vowel classification.

The dictionary file format follows the usual machine-lexicon conventions:
one entry per line as ``WORD  PH1 PH2 ...`` with two or more spaces (or a
tab) between the word and its phonemes, ``;;;`` comment lines, and a
``WORD(k)`` suffix marking alternative pronunciations. Vowels carry a
stress digit (0 none, 1 primary, 2 secondary); consonants never do.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Iterator

ARPABET_VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)
ARPABET_CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split()
)

TENSE_VOWELS = frozenset({"IY", "UW", "AA"})
LAX_VOWELS = frozenset({"IH", "UH", "AH"})
DIPHTHONGS = frozenset({"AY", "AW", "OY", "EY", "OW"})


class LexiconError(ValueError):
    """Malformed dictionary input."""


class VowelClass(Enum):
    TENSE = "tense"
    LAX = "lax"
    DIPHTHONG = "diphthong"
    OTHER_VOWEL = "other_vowel"
    NOT_VOWEL = "not_vowel"


@dataclass(frozen=True)
class Phoneme:
    """One ARPABET token; stress is present exactly for vowels."""

    symbol: str
    stress: int | None = None

    def __post_init__(self) -> None:
        if self.symbol in ARPABET_VOWELS:
            if self.stress not in (0, 1, 2):
                raise LexiconError(
                    f"vowel {self.symbol} requires a stress digit in 0-2"
                )
        elif self.symbol in ARPABET_CONSONANTS:
            if self.stress is not None:
                raise LexiconError(
                    f"consonant {self.symbol} cannot carry stress"
                )
        else:
            raise LexiconError(f"unknown phoneme {self.symbol}")

    @property
    def is_vowel(self) -> bool:
        return self.symbol in ARPABET_VOWELS

    def __str__(self) -> str:
        if self.stress is None:
            return self.symbol
        return f"{self.symbol}{self.stress}"


PhonemeSeq = tuple[Phoneme, ...]


@dataclass(frozen=True)
class VowelProfile:
    has_tense: bool
    has_lax: bool
    tense_has_primary_stress: bool
    ends_in_iy: bool
    has_diphthong: bool


@dataclass(frozen=True)
class LexiconEntry:
    """A word with one or more pronunciations; the first is primary."""

    word: str
    pronunciations: tuple[PhonemeSeq, ...]

    def __post_init__(self) -> None:
        if not self.word or re.search(r"\s", self.word):
            raise LexiconError(f"bad word {self.word!r}")
        if not self.pronunciations or any(
            len(p) == 0 for p in self.pronunciations
        ):
            raise LexiconError(f"{self.word}: empty pronunciation")

    @property
    def primary(self) -> PhonemeSeq:
        return self.pronunciations[0]


def parse_phoneme(token: str) -> Phoneme:
    m = re.fullmatch(r"([A-Z]{1,2})([0-2])?", token.upper())
    if m is None:
        raise LexiconError(f"unknown phoneme {token}")
    symbol, digit = m.group(1), m.group(2)
    stress = int(digit) if digit is not None else None
    return Phoneme(symbol, stress)


def classify_vowel(p: Phoneme) -> VowelClass:
    """Total classification; consonants map to NOT_VOWEL."""
    if not p.is_vowel:
        return VowelClass.NOT_VOWEL
    if p.symbol in TENSE_VOWELS:
        return VowelClass.TENSE
    if p.symbol in LAX_VOWELS:
        return VowelClass.LAX
    if p.symbol in DIPHTHONGS:
        return VowelClass.DIPHTHONG
    return VowelClass.OTHER_VOWEL


def word_vowel_profile(entry: LexiconEntry) -> VowelProfile:
    """Vowel-content booleans over the primary pronunciation only.

    Variant pronunciations are ignored so downstream decisions stay
    deterministic; callers who care can inspect the entry directly.
    """
    phonemes = entry.primary
    classes = [classify_vowel(p) for p in phonemes]
    tense_primary = any(
        c is VowelClass.TENSE and p.stress == 1
        for p, c in zip(phonemes, classes)
    )
    return VowelProfile(
        has_tense=VowelClass.TENSE in classes,
        has_lax=VowelClass.LAX in classes,
        tense_has_primary_stress=tense_primary,
        ends_in_iy=phonemes[-1].symbol == "IY",
        has_diphthong=VowelClass.DIPHTHONG in classes,
    )


_VARIANT_RE = re.compile(r"^(?P<word>\S+?)\((?P<idx>\d+)\)$")


class Lexicon:
    """Immutable word -> LexiconEntry map with case-insensitive lookup."""

    def __init__(self, entries: Iterable[LexiconEntry]):
        self._entries: dict[str, LexiconEntry] = {}
        for e in entries:
            if e.word in self._entries:
                raise LexiconError(f"duplicate entry {e.word}")
            self._entries[e.word] = e

    def lookup(self, word: str) -> LexiconEntry | None:
        return self._entries.get(word.lower().strip())

    def __contains__(self, word: str) -> bool:
        return self.lookup(word) is not None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(self._entries.values())

    def serialize(self) -> str:
        """Canonical dictionary text: base line, then (1), (2), ... variants."""
        lines = []
        for e in sorted(self._entries.values(), key=lambda e: e.word):
            for i, pron in enumerate(e.pronunciations):
                name = e.word.upper() if i == 0 else f"{e.word.upper()}({i})"
                lines.append(f"{name}  {' '.join(str(p) for p in pron)}")
        return "\n".join(lines) + "\n"


def parse_lexicon(source: str | Iterable[str]) -> Lexicon:
    """Parse dictionary text (or an iterable of lines) into a Lexicon.

    Variant lines (``WORD(1)``) append to the base entry in file order.
    Raises LexiconError with a line number on any malformed input.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)

    prons: dict[str, list[PhonemeSeq]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith(";;;"):
            continue
        parts = re.split(r"\t+| {2,}", line.strip(), maxsplit=1)
        if len(parts) != 2:
            raise LexiconError(
                f"line {lineno}: expected 'WORD  PH1 PH2 ...', got {line!r}"
            )
        head, tail = parts[0].strip(), parts[1].strip()
        m = _VARIANT_RE.match(head)
        word = (m.group("word") if m else head).lower()
        try:
            seq = tuple(parse_phoneme(tok) for tok in tail.split())
        except LexiconError as err:
            raise LexiconError(f"line {lineno}: {err}") from err
        if not seq:
            raise LexiconError(f"line {lineno}: no phonemes for {word}")
        prons.setdefault(word, []).append(seq)

    return Lexicon(
        LexiconEntry(word, tuple(seqs)) for word, seqs in prons.items()
    )


def load_lexicon(path: str | None = None) -> Lexicon:
    """Load a dictionary file, or the packaged default lexicon."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            return parse_lexicon(fh.read())
    text = (
        resources.files("prosodykit.data")
        .joinpath("lexicon.dict")
        .read_text(encoding="utf-8")
    )
    return parse_lexicon(text)
