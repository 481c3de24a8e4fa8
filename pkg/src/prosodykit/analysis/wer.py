"""Word-error aggregation for the transcription comparison.

Responses carry a presentation style, the target word, the word the
listener typed, and the target's vowel class. A response is correct
when the chosen word matches the target or one of its homophones.
Error rates are reported per style (overall and split by vowel class),
and the pooled errors are broken down into minimal-pair substitutions:
a "tense for lax" error chose the tense member in place of a lax
target, and vice versa.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

from .stats import AnalysisError

DEFAULT_STYLES = ("base", "stretch", "emphasis", "clarity")

_VOWEL_CLASSES = ("tense", "lax")


@dataclass(frozen=True)
class StyleWer:
    wer: float
    tense_wer: float
    lax_wer: float
    n_responses: int
    n_errors: int

    def __post_init__(self) -> None:
        for rate in (self.wer, self.tense_wer, self.lax_wer):
            if not 0.0 <= rate <= 1.0:
                raise AnalysisError(f"rate {rate} outside [0, 1]")


@dataclass(frozen=True)
class SubstitutionBreakdown:
    """Shares of pooled errors; the two directed shares partition sub_pct."""

    sub_pct: float
    tense_for_lax_pct: float
    lax_for_tense_pct: float

    def __post_init__(self) -> None:
        for rate in (
            self.sub_pct,
            self.tense_for_lax_pct,
            self.lax_for_tense_pct,
        ):
            if not 0.0 <= rate <= 1.0:
                raise AnalysisError(f"rate {rate} outside [0, 1]")
        if self.tense_for_lax_pct > self.sub_pct + 1e-12:
            raise AnalysisError("tense_for_lax exceeds sub_pct")
        if self.lax_for_tense_pct > self.sub_pct + 1e-12:
            raise AnalysisError("lax_for_tense exceeds sub_pct")


@dataclass(frozen=True)
class WerReport:
    per_style: dict[str, StyleWer]
    substitution: SubstitutionBreakdown


def wer_report(
    responses: Iterable[Mapping[str, str]],
    minimal_pair_map: Mapping[str, str],
    homophone_map: Mapping[str, str],
    styles: tuple[str, ...] = DEFAULT_STYLES,
) -> WerReport:
    """Aggregate response records into per-style rates.

    Every record needs style, target_word, chosen_word, vowel_class;
    every target must have a minimal-pair entry. Homophone matches are
    correct. Substitution percentages are shares of all errors pooled
    across styles.
    """
    homophones = _symmetrized(homophone_map)
    totals: dict[str, dict[str, int]] = {
        s: {"tense": 0, "lax": 0} for s in styles
    }
    errors: dict[str, dict[str, int]] = {
        s: {"tense": 0, "lax": 0} for s in styles
    }
    n_errors_pooled = 0
    n_subs = 0
    n_tense_for_lax = 0
    n_lax_for_tense = 0

    for i, rec in enumerate(responses):
        style = str(rec["style"]).lower()
        target = str(rec["target_word"]).lower()
        chosen = str(rec["chosen_word"]).lower()
        vclass = str(rec["vowel_class"]).lower()
        if style not in styles:
            raise AnalysisError(
                f"record {i}: unknown style {style!r}"
            )
        if vclass not in _VOWEL_CLASSES:
            raise AnalysisError(
                f"record {i}: unknown vowel_class {vclass!r}"
            )
        counterpart = minimal_pair_map.get(target)
        if counterpart is None:
            raise AnalysisError(
                f"record {i}: no minimal-pair entry for {target!r}"
            )

        totals[style][vclass] += 1
        correct = chosen == target or homophones.get(target) == chosen
        if correct:
            continue
        errors[style][vclass] += 1
        n_errors_pooled += 1
        if chosen == counterpart:
            n_subs += 1
            if vclass == "lax":
                n_tense_for_lax += 1
            else:
                n_lax_for_tense += 1

    per_style = {}
    for style in styles:
        t_total, l_total = totals[style]["tense"], totals[style]["lax"]
        t_err, l_err = errors[style]["tense"], errors[style]["lax"]
        n_total = t_total + l_total
        n_err = t_err + l_err
        per_style[style] = StyleWer(
            wer=n_err / n_total if n_total else 0.0,
            tense_wer=t_err / t_total if t_total else 0.0,
            lax_wer=l_err / l_total if l_total else 0.0,
            n_responses=n_total,
            n_errors=n_err,
        )

    if n_errors_pooled:
        breakdown = SubstitutionBreakdown(
            sub_pct=n_subs / n_errors_pooled,
            tense_for_lax_pct=n_tense_for_lax / n_errors_pooled,
            lax_for_tense_pct=n_lax_for_tense / n_errors_pooled,
        )
    else:
        breakdown = SubstitutionBreakdown(0.0, 0.0, 0.0)
    return WerReport(per_style=per_style, substitution=breakdown)


def _symmetrized(mapping: Mapping[str, str]) -> dict[str, str]:
    out = {}
    for k, v in mapping.items():
        out[k.lower()] = v.lower()
        out.setdefault(v.lower(), k.lower())
    return out


# ------------------------------------------------------------- data files

def _read_packaged_csv(name: str) -> list[dict[str, str]]:
    text = (
        resources.files("prosodykit.data").joinpath(name).read_text(
            encoding="utf-8"
        )
    )
    return list(csv.DictReader(text.splitlines()))


def load_minimal_pairs(path=None) -> dict[str, str]:
    """Both-direction word -> counterpart map from the packaged pairs."""
    if path is not None:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = _read_packaged_csv("minimal_pairs.csv")
    mapping = {}
    for row in rows:
        tense = row["tense_word"].lower()
        lax = row["lax_word"].lower()
        mapping[tense] = lax
        mapping[lax] = tense
    return mapping


def load_homophones(path=None) -> dict[str, str]:
    if path is not None:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = _read_packaged_csv("homophones.csv")
    return {
        row["word"].lower(): row["homophone"].lower() for row in rows
    }


def read_responses_csv(path) -> list[dict[str, str]]:
    """Rows of style, target_word, chosen_word, vowel_class."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"style", "target_word", "chosen_word", "vowel_class"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise AnalysisError(
                f"{path}: missing columns {sorted(missing)}"
            )
        return list(reader)


def load_wer_fixture() -> list[dict[str, str]]:
    """The packaged synthetic transcription set used for validation."""
    return _read_packaged_csv("wer_fixture.csv")
