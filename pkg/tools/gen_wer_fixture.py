#!/usr/bin/env python3
"""Regenerate src/prosodykit/data/wer_fixture.csv.

The fixture is a synthetic transcription set constructed so that the
per-style error rates land on the reference values the analysis is
validated against (base 24.30%, stretch 19.82%, emphasis 24.44%,
clarity 15.15%). Within each style/vowel-class cell the planted error
count splits 4:1 between minimal-pair substitutions and unrelated
words, and each style includes six homophone-spelled correct rows to
exercise the homophone rule. Deterministic: same output every run.
"""

import csv
import pathlib

HERE = pathlib.Path(__file__).resolve().parent
DATA = HERE.parent / "src" / "prosodykit" / "data"

# (style, class) -> (errors, total)
PLANTED = {
    ("base", "tense"): (102, 340),
    ("base", "lax"): (64, 343),
    ("stretch", "tense"): (59, 328),
    ("stretch", "lax"): (71, 328),
    ("emphasis", "tense"): (125, 623),
    ("emphasis", "lax"): (179, 621),
    ("clarity", "tense"): (42, 292),
    ("clarity", "lax"): (46, 289),
}

UNRELATED = "paper"
HOMOPHONE_ROWS = {
    "tense": [("peel", "peal"), ("knot", "not"), ("scene", "seen")],
    "lax": [("wood", "would")] * 3,
}


def main() -> None:
    pairs = list(
        csv.DictReader((DATA / "minimal_pairs.csv").open(newline=""))
    )
    words = {
        "tense": [p["tense_word"] for p in pairs],
        "lax": [p["lax_word"] for p in pairs],
    }
    counterpart = {}
    for p in pairs:
        counterpart[p["tense_word"]] = p["lax_word"]
        counterpart[p["lax_word"]] = p["tense_word"]

    rows = []
    for style in ("base", "stretch", "emphasis", "clarity"):
        for vclass in ("tense", "lax"):
            n_err, n_total = PLANTED[(style, vclass)]
            n_sub = (4 * n_err) // 5
            pool = words[vclass]
            for i in range(n_err):
                target = pool[i % len(pool)]
                chosen = counterpart[target] if i < n_sub else UNRELATED
                rows.append((style, target, chosen, vclass))
            n_correct = n_total - n_err
            homo = HOMOPHONE_ROWS[vclass]
            for i in range(n_correct):
                if i < len(homo):
                    target, chosen = homo[i]
                else:
                    target = pool[i % len(pool)]
                    chosen = target
                rows.append((style, target, chosen, vclass))

    out = DATA / "wer_fixture.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["style", "target_word", "chosen_word", "vowel_class"])
        writer.writerows(rows)
    print(f"wrote {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
