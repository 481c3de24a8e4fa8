"""Clarity-mode duration planning.

Turns (optionally emoji- and ``!word!``-marked) text into per-phoneme
duration multiplier plans, and applies plans to predicted log-durations:

    w = exp(log_w) * x_mask
    y_lengths = ceil(w) * speechrate * c_array
    y_max_length = max(1, sum(y_lengths))

Multipliers are relative to the base speech rate: 1.0 everywhere means
"speak at base_rate". Stretched words carry ``stretch_factor`` on every
phoneme with a linear ramp on both sides; held words are pinned to 1.0.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .lexicon import Lexicon, LexiconEntry, word_vowel_profile

log = logging.getLogger(__name__)


class ClarityError(ValueError):
    """Bad markup or an unplannable utterance."""


# ---------------------------------------------------------------- markup

_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x1F1E6, 0x1F1FF),
)
_EMOJI_JOINERS = {0x200D, 0xFE0F}


def _is_emoji_char(ch: str) -> bool:
    cp = ord(ch)
    if cp in _EMOJI_JOINERS:
        return True
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


@dataclass(frozen=True)
class Token:
    surface: str
    clarity_flagged: bool = False

    @property
    def normalized(self) -> str:
        """Lookup key: lowercase, outer punctuation stripped."""
        return self.surface.strip(".,;:?!\"'()").lower()


@dataclass(frozen=True)
class MarkedText:
    tokens: tuple[Token, ...]
    emoji_tag: str | None
    raw: str


def parse_marked_text(raw: str) -> MarkedText:
    """Parse ``!word!`` clarity spans and a trailing emoji tag.

    A flagged span must open and close within one whitespace token;
    any other use of ``!`` is an unbalanced delimiter. Only a trailing
    emoji run (possibly multi-codepoint) becomes the tag.
    """
    body = raw.rstrip()
    tag_chars: list[str] = []
    while body and _is_emoji_char(body[-1]):
        tag_chars.append(body[-1])
        body = body[:-1]
    emoji_tag = "".join(reversed(tag_chars)) or None
    body = body.rstrip()

    tokens: list[Token] = []
    for m in re.finditer(r"\S+", body):
        text = m.group(0)
        if "!" not in text:
            tokens.append(Token(text))
            continue
        span = re.fullmatch(r"!([^!]+)!([.,;:?\"')]*)", text)
        if span is None:
            offset = m.start() + text.index("!")
            raise ClarityError(
                f"unbalanced clarity delimiter at offset {offset}"
            )
        tokens.append(
            Token(span.group(1) + span.group(2), clarity_flagged=True)
        )
    return MarkedText(tuple(tokens), emoji_tag, raw)


# ----------------------------------------------------------- decisions

class Decision(Enum):
    STRETCH = "stretch"
    HOLD = "hold"
    IGNORE = "ignore"


class ClarityMode(Enum):
    MARKUP = "markup"
    AUTO = "auto"


def load_function_words(path: str | None = None) -> frozenset[str]:
    """Load the ignore list for auto mode (packaged default if no path)."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = (
            resources.files("prosodykit.data")
            .joinpath("function_words.txt")
            .read_text(encoding="utf-8")
        )
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


@dataclass(frozen=True)
class ClarityConfig:
    stretch_factor: float = 1.6
    base_rate: float = 0.75
    ramp_len: int = 6
    mode: ClarityMode = ClarityMode.MARKUP
    function_word_ignore_list: frozenset[str] = field(
        default_factory=load_function_words
    )

    def __post_init__(self) -> None:
        if not self.stretch_factor > 1:
            raise ClarityError("stretch_factor must be > 1")
        if self.ramp_len < 0:
            raise ClarityError("ramp_len must be >= 0")
        if not self.base_rate > 0:
            raise ClarityError("base_rate must be > 0")


def decide_clarity(
    entry: LexiconEntry | None, config: ClarityConfig
) -> Decision:
    """Stretch / Hold / Ignore for one word.

    Stretch when the word has tense vowels and either no lax vowels or a
    primary-stressed tense vowel; Hold when lax vowels remain untreated;
    Ignore otherwise. Auto mode also ignores function-list words,
    diphthong-bearing words, and words ending in IY. Out-of-lexicon
    words are ignored with a warning (untreated baseline behavior).
    """
    if entry is None:
        return Decision.IGNORE
    if config.mode is ClarityMode.AUTO:
        if entry.word in config.function_word_ignore_list:
            return Decision.IGNORE
        prof = word_vowel_profile(entry)
        if prof.has_diphthong or prof.ends_in_iy:
            return Decision.IGNORE
    else:
        prof = word_vowel_profile(entry)
    if prof.has_tense and (not prof.has_lax or prof.tense_has_primary_stress):
        return Decision.STRETCH
    if prof.has_lax:
        return Decision.HOLD
    return Decision.IGNORE


# ------------------------------------------------------------- planning

class SpanKind(Enum):
    TENSE_STRETCH = "tense_stretch"
    LAX_HOLD = "lax_hold"


@dataclass(frozen=True)
class TargetSpan:
    start: int
    end: int  # exclusive
    kind: SpanKind


@dataclass(frozen=True)
class DurationPlan:
    """Per-phoneme multipliers plus the target-word spans behind them."""

    multipliers: tuple[float, ...]
    target_spans: tuple[TargetSpan, ...]
    base_rate: float
    phonemes: tuple[str, ...]
    words: tuple[str, ...]  # source word per phoneme, aligned

    def rows(self) -> list[tuple[str, float, str]]:
        """(phoneme, multiplier, span_kind) rows for the columnar format."""
        kinds = [""] * len(self.multipliers)
        for span in self.target_spans:
            for i in range(span.start, span.end):
                kinds[i] = span.kind.value
        return [
            (ph, mult, kind)
            for ph, mult, kind in zip(self.phonemes, self.multipliers, kinds)
        ]


def _phonemize(
    marked: MarkedText, lexicon: Lexicon
) -> list[tuple[Token, LexiconEntry | None]]:
    out = []
    for tok in marked.tokens:
        entry = lexicon.lookup(tok.normalized)
        if entry is None:
            log.warning("word %r not in lexicon; left unmodified", tok.surface)
        out.append((tok, entry))
    return out


def _ramp_values(span_len: int, total_len: int, stretch: float) -> list[float]:
    """Linear ramp over ``span_len`` items of a nominal ``total_len`` ramp.

    Index 0 is adjacent to the stretched word. Endpoints are exclusive:
    the ramp approaches both the stretch factor and 1.0 without touching
    them, staying monotone for any truncation.
    """
    return [
        1.0 + (stretch - 1.0) * (total_len - j) / (total_len + 1.0)
        for j in range(span_len)
    ]


def build_duration_plan(
    marked: MarkedText, lexicon: Lexicon, config: ClarityConfig
) -> DurationPlan:
    """Lay out multipliers for one utterance.

    Markup mode decides only flagged words; auto mode decides every
    word. Stretched words get ``stretch_factor`` across the whole word
    and a linear ramp over ``min(ramp_len, available)`` phonemes on
    each side, where availability stops at the utterance edge or at any
    other target word. Two stretched words closer than ``2*ramp_len``
    split the gap at its midpoint (the earlier word takes the odd
    item). Held words are pinned to exactly 1.0 last.
    """
    phonemized = _phonemize(marked, lexicon)
    for tok, entry in phonemized:
        if tok.clarity_flagged and entry is None:
            raise ClarityError(f"flagged word {tok.surface!r} not in lexicon")

    decisions: list[Decision] = []
    for tok, entry in phonemized:
        if config.mode is ClarityMode.MARKUP and not tok.clarity_flagged:
            decisions.append(Decision.IGNORE)
        else:
            decisions.append(decide_clarity(entry, config))
    return _plan_from_decisions(phonemized, decisions, config)


def _plan_from_decisions(
    phonemized: list[tuple[Token, LexiconEntry | None]],
    decisions: list[Decision],
    config: ClarityConfig,
) -> DurationPlan:
    phon_syms: list[str] = []
    phon_words: list[str] = []
    word_spans: list[tuple[int, int, Decision]] = []
    for (tok, entry), decision in zip(phonemized, decisions):
        if entry is None:
            continue
        start = len(phon_syms)
        phon_syms.extend(str(p) for p in entry.primary)
        phon_words.extend([entry.word] * len(entry.primary))
        word_spans.append((start, len(phon_syms), decision))

    n = len(phon_syms)
    mult = [1.0] * n
    spans: list[TargetSpan] = []
    targets = [
        (s, e, d) for s, e, d in word_spans if d is not Decision.IGNORE
    ]
    for s, e, d in targets:
        kind = (
            SpanKind.TENSE_STRETCH
            if d is Decision.STRETCH
            else SpanKind.LAX_HOLD
        )
        spans.append(TargetSpan(s, e, kind))
        if d is Decision.STRETCH:
            for i in range(s, e):
                mult[i] = config.stretch_factor

    # ramps around stretched words, bounded by edges and other targets
    r = config.ramp_len
    for idx, (s, e, d) in enumerate(targets):
        if d is not Decision.STRETCH:
            continue
        prev_end = 0
        prev_stretch = False
        for ps, pe, pd in targets:
            if pe <= s and pe > prev_end:
                prev_end, prev_stretch = pe, pd is Decision.STRETCH
        next_start = n
        next_stretch = False
        for ns, ne, nd in targets:
            if ns >= e and ns < next_start:
                next_start, next_stretch = ns, nd is Decision.STRETCH
        gap_before = s - prev_end
        gap_after = next_start - e

        avail_before = gap_before
        if prev_stretch and gap_before < 2 * r:
            avail_before = gap_before // 2  # later word takes the floor half
        avail_after = gap_after
        if next_stretch and gap_after < 2 * r:
            avail_after = gap_after - gap_after // 2

        up = min(r, avail_before)
        for j, v in enumerate(_ramp_values(up, up, config.stretch_factor)):
            mult[s - 1 - j] = v
        down = min(r, avail_after)
        for j, v in enumerate(_ramp_values(down, down, config.stretch_factor)):
            mult[e + j] = v

    # held words win over any neighbor's ramp
    for span in spans:
        if span.kind is SpanKind.LAX_HOLD:
            for i in range(span.start, span.end):
                mult[i] = 1.0

    return DurationPlan(
        multipliers=tuple(mult),
        target_spans=tuple(spans),
        base_rate=config.base_rate,
        phonemes=tuple(phon_syms),
        words=tuple(phon_words),
    )


# ------------------------------------------------- duration application

@dataclass(frozen=True)
class DurationApplication:
    """Inputs to the duration equation; arrays share one length."""

    log_w: np.ndarray
    x_mask: np.ndarray
    speechrate: np.ndarray
    c_array: np.ndarray

    @classmethod
    def from_arrays(cls, log_w, x_mask, speechrate, c_array):
        log_w = np.asarray(log_w, dtype=float)
        n = log_w.shape[0] if log_w.ndim else 1

        def as_vec(x, name):
            arr = np.asarray(x, dtype=float)
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            return arr

        return cls(
            log_w=log_w,
            x_mask=as_vec(x_mask, "x_mask"),
            speechrate=as_vec(speechrate, "speechrate"),
            c_array=as_vec(c_array, "c_array"),
        )


def apply_durations(app: DurationApplication) -> tuple[np.ndarray, float]:
    """Predicted durations through the mask, rate, and clarity arrays."""
    arrays = (app.log_w, app.x_mask, app.speechrate, app.c_array)
    lengths = {a.shape for a in arrays}
    if len(lengths) != 1:
        raise ClarityError(
            f"length mismatch: {[a.shape for a in arrays]}"
        )
    if any(not np.all(np.isfinite(a)) for a in arrays):
        raise ClarityError("non-finite input")
    if not np.all(np.isin(app.x_mask, (0.0, 1.0))):
        raise ClarityError("x_mask must be 0/1")

    w = np.exp(app.log_w) * app.x_mask
    y_lengths = np.ceil(w) * app.speechrate * app.c_array
    y_max_length = max(1.0, float(np.sum(y_lengths)))
    return y_lengths, y_max_length


def plan_application(
    plan: DurationPlan, log_w: Sequence[float]
) -> DurationApplication:
    """Bind a plan to predicted log-durations (mask all-ones)."""
    n = len(plan.multipliers)
    if len(log_w) != n:
        raise ClarityError(
            f"log_w length {len(log_w)} != plan length {n}"
        )
    return DurationApplication.from_arrays(
        np.asarray(log_w, dtype=float),
        np.ones(n),
        np.full(n, plan.base_rate),
        np.asarray(plan.multipliers, dtype=float),
    )


# ----------------------------------------------------- validation grid

class GridCondition(Enum):
    CONTEXT_AND_WORD = "context_and_word"
    WORD_ONLY = "word_only"
    CONTEXT_ONLY = "context_only"


@dataclass(frozen=True)
class GridStep:
    condition: GridCondition
    word_mult: float
    context_mult: float


#: word steps 2.0 down to 0.5: the slow side rises by 0.2, the fast side
#: mirrors it as exact reciprocals; context steps mirror 1.1..1.5 the
#: same way. Paired oppositely: the slowest word gets the fastest context.
_WORD_UP = [2.0, 1.8, 1.6, 1.4, 1.2]
_CONTEXT_UP = [1.1, 1.2, 1.3, 1.4, 1.5]

WORD_STEPS = tuple(_WORD_UP + [1.0] + [1.0 / w for w in reversed(_WORD_UP)])
CONTEXT_STEPS = tuple(
    [1.0 / c for c in reversed(_CONTEXT_UP)] + [1.0] + _CONTEXT_UP
)


def build_validation_grid() -> list[GridStep]:
    """All three validation conditions, 11 steps each.

    ContextAndWord pairs the word and context steps oppositely (word
    2.0x with context 0.67x through word 0.5x with context 1.5x);
    WordOnly pins context at 1.0; ContextOnly pins the word at 1.0.
    """
    steps = [
        GridStep(GridCondition.CONTEXT_AND_WORD, w, c)
        for w, c in zip(WORD_STEPS, CONTEXT_STEPS)
    ]
    steps += [
        GridStep(GridCondition.WORD_ONLY, w, 1.0) for w in WORD_STEPS
    ]
    steps += [
        GridStep(GridCondition.CONTEXT_ONLY, 1.0, c) for c in CONTEXT_STEPS
    ]
    return steps


# --------------------------------------------------------- style plans

class Style(Enum):
    BASE = "base"
    STRETCH = "stretch"
    EMPHASIS = "emphasis"
    CLARITY = "clarity"


def build_style_plans(
    phrase: str | MarkedText,
    targets: Iterable[str],
    style: Style,
    lexicon: Lexicon,
    config: ClarityConfig | None = None,
) -> DurationPlan:
    """Duration plan for one comparison style.

    Base leaves everything at 1.0; Stretch multiplies the whole phrase
    by the stretch factor; Emphasis stretches every target word;
    Clarity applies the tense/lax decision per target word.
    """
    config = config or ClarityConfig()
    marked = (
        parse_marked_text(phrase) if isinstance(phrase, str) else phrase
    )
    target_set = {t.lower() for t in targets}
    flagged = MarkedText(
        tokens=tuple(
            Token(t.surface, clarity_flagged=t.normalized in target_set)
            for t in marked.tokens
        ),
        emoji_tag=marked.emoji_tag,
        raw=marked.raw,
    )

    if style is Style.CLARITY:
        return build_duration_plan(flagged, lexicon, config)

    plain = build_duration_plan(
        MarkedText(
            tuple(Token(t.surface) for t in marked.tokens),
            marked.emoji_tag,
            marked.raw,
        ),
        lexicon,
        config,
    )
    if style is Style.BASE:
        return plain
    if style is Style.STRETCH:
        return DurationPlan(
            multipliers=tuple(config.stretch_factor for _ in plain.multipliers),
            target_spans=(),
            base_rate=config.base_rate,
            phonemes=plain.phonemes,
            words=plain.words,
        )
    if style is Style.EMPHASIS:
        # every target stretched regardless of vowel class
        phonemized = _phonemize(flagged, lexicon)
        decisions = [
            Decision.STRETCH
            if tok.clarity_flagged and entry is not None
            else Decision.IGNORE
            for tok, entry in phonemized
        ]
        return _plan_from_decisions(phonemized, decisions, config)
    raise ClarityError(f"unknown style {style}")
