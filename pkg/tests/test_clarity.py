"""Duration-planning tests.

Ramp and plan values asserted here were worked out by hand from the
ramp rule (linear between the stretch factor and 1.0, both endpoints
exclusive, re-scaled over the actual span) before the implementation
was written.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prosodykit.clarity import (
    ClarityConfig,
    ClarityError,
    ClarityMode,
    Decision,
    DurationApplication,
    GridCondition,
    MarkedText,
    SpanKind,
    Style,
    Token,
    apply_durations,
    build_duration_plan,
    build_style_plans,
    build_validation_grid,
    decide_clarity,
    load_function_words,
    parse_marked_text,
    plan_application,
)
from prosodykit.lexicon import load_lexicon

LEX = load_lexicon()
CFG = ClarityConfig()  # stretch 1.6, base rate 0.75, ramp 6, markup


# ---------------------------------------------------------------- markup

class TestParseMarkedText:
    def test_plain(self):
        mt = parse_marked_text("write this down now")
        assert [t.surface for t in mt.tokens] == [
            "write", "this", "down", "now",
        ]
        assert not any(t.clarity_flagged for t in mt.tokens)
        assert mt.emoji_tag is None

    def test_flagged_word(self):
        mt = parse_marked_text("say !peel! now")
        assert [(t.surface, t.clarity_flagged) for t in mt.tokens] == [
            ("say", False), ("peel", True), ("now", False),
        ]

    def test_emoji_tag(self):
        mt = parse_marked_text("write this down 📝")
        assert mt.emoji_tag == "📝"
        assert [t.surface for t in mt.tokens] == ["write", "this", "down"]
        assert mt.raw == "write this down 📝"

    def test_no_tag_mid_string(self):
        # only a trailing emoji becomes the tag
        mt = parse_marked_text("say peel now")
        assert mt.emoji_tag is None

    def test_unbalanced_open(self):
        with pytest.raises(ClarityError, match=r"offset 4"):
            parse_marked_text("say !peel now")

    def test_unbalanced_inner(self):
        with pytest.raises(ClarityError, match=r"offset 2"):
            parse_marked_text("pe!el again")

    def test_empty_span(self):
        with pytest.raises(ClarityError, match="unbalanced"):
            parse_marked_text("say !! now")

    def test_flag_with_trailing_punctuation(self):
        mt = parse_marked_text("say !peel!, then stop")
        assert mt.tokens[1].clarity_flagged
        assert mt.tokens[1].normalized == "peel"

    def test_normalized_strips_case_and_punct(self):
        assert Token("Peel,").normalized == "peel"


# ------------------------------------------------------------- decisions

class TestDecideClarity:
    def look(self, w):
        entry = LEX.lookup(w)
        assert entry is not None, w
        return entry

    def test_tense_only_stretches(self):
        assert decide_clarity(self.look("peel"), CFG) is Decision.STRETCH

    def test_lax_only_holds(self):
        assert decide_clarity(self.look("pill"), CFG) is Decision.HOLD

    def test_mixed_with_stressed_tense_stretches(self):
        # believe: B IH0 L IY1 V — the tense vowel carries primary stress
        assert decide_clarity(self.look("believe"), CFG) is Decision.STRETCH

    def test_mixed_with_unstressed_tense_holds(self):
        # issue: IH1 SH UW0 — tense vowel unstressed, lax vowel primary
        assert decide_clarity(self.look("issue"), CFG) is Decision.HOLD

    def test_no_tense_no_lax_ignored(self):
        assert decide_clarity(self.look("day"), CFG) is Decision.IGNORE

    def test_missing_entry_ignored(self):
        assert decide_clarity(None, CFG) is Decision.IGNORE

    def test_auto_ignores_function_words(self):
        auto = ClarityConfig(mode=ClarityMode.AUTO)
        assert decide_clarity(self.look("the"), auto) is Decision.IGNORE
        # same word is fair game when explicitly flagged in markup mode
        assert decide_clarity(self.look("the"), CFG) is Decision.HOLD

    def test_auto_ignores_final_iy(self):
        auto = ClarityConfig(mode=ClarityMode.AUTO)
        assert decide_clarity(self.look("happy"), auto) is Decision.IGNORE
        assert decide_clarity(self.look("happy"), CFG) is Decision.STRETCH

    def test_auto_ignores_diphthongs(self):
        auto = ClarityConfig(mode=ClarityMode.AUTO)
        assert decide_clarity(self.look("down"), auto) is Decision.IGNORE

    def test_config_validation(self):
        with pytest.raises(ClarityError):
            ClarityConfig(stretch_factor=1.0)
        with pytest.raises(ClarityError):
            ClarityConfig(ramp_len=-1)

    def test_function_word_list_packaged(self):
        words = load_function_words()
        assert {"the", "a", "to", "be"} <= words


# -------------------------------------------------------------- planning

class TestDurationPlan:
    def test_stretch_then_hold(self):
        # peel P IY1 L | and AH0 N D | pill P IH1 L
        # peel stretched, 3-item down-ramp re-scaled over the gap,
        # pill held at exactly 1.0:
        #   ramp j=1..3 of 3: 1 + 0.6*(3+1-j)/4 -> 1.45, 1.30, 1.15
        plan = build_duration_plan(
            parse_marked_text("!peel! and !pill!"), LEX, CFG
        )
        assert plan.phonemes == (
            "P", "IY1", "L", "AH0", "N", "D", "P", "IH1", "L",
        )
        assert plan.multipliers == pytest.approx(
            (1.6, 1.6, 1.6, 1.45, 1.30, 1.15, 1.0, 1.0, 1.0)
        )
        kinds = {s.kind for s in plan.target_spans}
        assert kinds == {SpanKind.TENSE_STRETCH, SpanKind.LAX_HOLD}

    def test_two_stretches_split_gap(self):
        # peel and green are both stretched; the 3-phoneme gap splits
        # at the midpoint with the earlier word taking the odd item:
        #   peel side (2 items): 1 + 0.6*2/3 = 1.4, 1 + 0.6*1/3 = 1.2
        #   green side (1 item): 1 + 0.6*1/2 = 1.3
        plan = build_duration_plan(
            parse_marked_text("!peel! and !green!"), LEX, CFG
        )
        assert plan.phonemes == (
            "P", "IY1", "L", "AH0", "N", "D", "G", "R", "IY1", "N",
        )
        assert plan.multipliers == pytest.approx(
            (1.6, 1.6, 1.6, 1.4, 1.2, 1.3, 1.6, 1.6, 1.6, 1.6)
        )

    def test_ramp_truncated_at_edges(self):
        # lone stretched word: no room before, ramp after over the rest
        plan = build_duration_plan(parse_marked_text("!peel! now"), LEX, CFG)
        # now = N AW1 -> 2 items after, ramp over 2: 1.4, 1.2
        assert plan.multipliers == pytest.approx((1.6, 1.6, 1.6, 1.4, 1.2))

    def test_unflagged_words_untouched_in_markup_mode(self):
        plan = build_duration_plan(
            parse_marked_text("peel and pill"), LEX, CFG
        )
        assert set(plan.multipliers) == {1.0}
        assert plan.target_spans == ()

    def test_flagged_unknown_word_errors(self):
        with pytest.raises(ClarityError, match="zzqq"):
            build_duration_plan(
                parse_marked_text("say !zzqq! now"), LEX, CFG
            )

    def test_unflagged_unknown_word_skipped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            plan = build_duration_plan(
                parse_marked_text("say zzqq now"), LEX, CFG
            )
        assert "zzqq" in caplog.text
        # say S EY1 + now N AW1
        assert len(plan.multipliers) == 4

    def test_full_ramp_length(self):
        # six plain words after the stretch leave room for the full ramp
        plan = build_duration_plan(
            parse_marked_text("!green! a a a a a a"), LEX, CFG
        )
        ramp = plan.multipliers[4:10]
        expected = [1 + 0.6 * (7 - j) / 7 for j in range(1, 7)]
        assert ramp == pytest.approx(tuple(expected))
        # endpoints exclusive: strictly inside (1, stretch)
        assert all(1.0 < v < 1.6 for v in ramp)

    def test_rows_columnar_shape(self):
        plan = build_duration_plan(
            parse_marked_text("!peel! and !pill!"), LEX, CFG
        )
        rows = plan.rows()
        assert rows[0] == ("P", 1.6, "tense_stretch")
        assert rows[3] == ("AH0", pytest.approx(1.45), "")
        assert rows[-1] == ("L", 1.0, "lax_hold")

    def test_auto_mode_treats_every_word(self):
        auto = ClarityConfig(mode=ClarityMode.AUTO)
        plan = build_duration_plan(
            parse_marked_text("the machine is happy"), LEX, auto
        )
        # the -> function word; machine -> stretch; is -> lax hold;
        # happy -> ends in IY, ignored
        by_word = {}
        for span in plan.target_spans:
            by_word[plan.words[span.start]] = span.kind
        assert by_word == {
            "machine": SpanKind.TENSE_STRETCH,
            "is": SpanKind.LAX_HOLD,
        }


# ----------------------------------------------------------- application

class TestApplyDurations:
    def test_worked_example(self):
        app = DurationApplication.from_arrays(
            log_w=np.log([0.5, 1.2, 1.7]),
            x_mask=[1, 1, 1],
            speechrate=0.75,
            c_array=[1.0, 1.6, 1.5],
        )
        y, y_max = apply_durations(app)
        assert y == pytest.approx([0.75, 2.4, 2.25])
        assert y_max == pytest.approx(5.4)

    def test_all_masked_floors_at_one(self):
        app = DurationApplication.from_arrays(
            log_w=[0.1, 0.2, 0.3],
            x_mask=[0, 0, 0],
            speechrate=0.75,
            c_array=[1.0, 1.0, 1.0],
        )
        y, y_max = apply_durations(app)
        assert np.all(y == 0)
        assert y_max == 1.0

    def test_length_mismatch_rejected(self):
        app = DurationApplication(
            log_w=np.zeros(3),
            x_mask=np.ones(2),
            speechrate=np.ones(3),
            c_array=np.ones(3),
        )
        with pytest.raises(ClarityError, match="length"):
            apply_durations(app)

    def test_non_finite_rejected(self):
        app = DurationApplication.from_arrays(
            [0.0, np.inf], [1, 1], 0.75, [1.0, 1.0]
        )
        with pytest.raises(ClarityError, match="finite"):
            apply_durations(app)

    def test_bad_mask_rejected(self):
        app = DurationApplication.from_arrays(
            [0.0, 0.0], [1, 0.5], 0.75, [1.0, 1.0]
        )
        with pytest.raises(ClarityError, match="mask"):
            apply_durations(app)

    def test_plan_application_binds_plan(self):
        plan = build_duration_plan(
            parse_marked_text("!peel! and !pill!"), LEX, CFG
        )
        app = plan_application(plan, [0.0] * len(plan.multipliers))
        y, _ = apply_durations(app)
        # ceil(exp(0)) == 1, so y is base_rate * multiplier per phoneme
        assert y == pytest.approx(
            [0.75 * m for m in plan.multipliers]
        )
        with pytest.raises(ClarityError, match="length"):
            plan_application(plan, [0.0])


# ------------------------------------------------------ validation grid

class TestValidationGrid:
    def test_shape(self):
        grid = build_validation_grid()
        assert len(grid) == 33
        by_cond = {}
        for step in grid:
            by_cond.setdefault(step.condition, []).append(step)
        assert all(len(v) == 11 for v in by_cond.values())

    def test_paired_condition_endpoints(self):
        both = [
            s for s in build_validation_grid()
            if s.condition is GridCondition.CONTEXT_AND_WORD
        ]
        assert both[0].word_mult == pytest.approx(2.0)
        assert both[0].context_mult == pytest.approx(1 / 1.5)
        assert both[5].word_mult == 1.0 and both[5].context_mult == 1.0
        assert both[-1].word_mult == pytest.approx(0.5)
        assert both[-1].context_mult == pytest.approx(1.5)

    def test_steps_are_reciprocal_pairs(self):
        both = [
            s for s in build_validation_grid()
            if s.condition is GridCondition.CONTEXT_AND_WORD
        ]
        for i in range(11):
            assert both[i].word_mult * both[10 - i].word_mult == (
                pytest.approx(1.0)
            )
            assert both[i].context_mult * both[10 - i].context_mult == (
                pytest.approx(1.0)
            )

    def test_single_axis_conditions_pin_the_other(self):
        grid = build_validation_grid()
        for s in grid:
            if s.condition is GridCondition.WORD_ONLY:
                assert s.context_mult == 1.0
            if s.condition is GridCondition.CONTEXT_ONLY:
                assert s.word_mult == 1.0


# ----------------------------------------------------------- style plans

class TestStylePlans:
    PHRASE = "i heard them say peel and pill right now"
    TARGETS = ["peel", "pill"]

    def plan(self, style):
        return build_style_plans(self.PHRASE, self.TARGETS, style, LEX, CFG)

    def test_base_all_ones(self):
        plan = self.plan(Style.BASE)
        assert set(plan.multipliers) == {1.0}
        assert plan.target_spans == ()

    def test_stretch_all_stretched(self):
        plan = self.plan(Style.STRETCH)
        assert set(plan.multipliers) == {1.6}
        assert plan.target_spans == ()

    def test_emphasis_stretches_every_target(self):
        plan = self.plan(Style.EMPHASIS)
        assert len(plan.target_spans) == 2
        for span in plan.target_spans:
            assert span.kind is SpanKind.TENSE_STRETCH
            assert all(
                m == 1.6
                for m in plan.multipliers[span.start:span.end]
            )

    def test_clarity_decides_per_target(self):
        plan = self.plan(Style.CLARITY)
        by_word = {
            plan.words[s.start]: s for s in plan.target_spans
        }
        peel, pill = by_word["peel"], by_word["pill"]
        assert peel.kind is SpanKind.TENSE_STRETCH
        assert pill.kind is SpanKind.LAX_HOLD
        assert all(
            m == 1.6 for m in plan.multipliers[peel.start:peel.end]
        )
        assert all(
            m == 1.0 for m in plan.multipliers[pill.start:pill.end]
        )

    def test_styles_share_phoneme_layout(self):
        layouts = {self.plan(s).phonemes for s in Style}
        assert len(layouts) == 1


# ------------------------------------------------------------ properties

WORD_POOL = [
    "peel", "pill", "green", "grin", "sheep", "ship", "the", "a",
    "machine", "issue", "day", "happy", "and", "now", "say",
]


@st.composite
def _marked_utterances(draw):
    words = draw(
        st.lists(st.sampled_from(WORD_POOL), min_size=1, max_size=8)
    )
    flags = draw(
        st.lists(st.booleans(), min_size=len(words), max_size=len(words))
    )
    tokens = tuple(
        Token(w, clarity_flagged=f) for w, f in zip(words, flags)
    )
    return MarkedText(tokens, None, " ".join(words))


@given(
    marked=_marked_utterances(),
    stretch=st.floats(min_value=1.05, max_value=3.0),
    ramp_len=st.integers(min_value=0, max_value=8),
)
@settings(max_examples=60, deadline=None)
def test_plan_invariants(marked, stretch, ramp_len):
    cfg = ClarityConfig(stretch_factor=stretch, ramp_len=ramp_len)
    plan = build_duration_plan(marked, LEX, cfg)
    mult = plan.multipliers
    assert len(mult) == len(plan.phonemes) == len(plan.words)
    assert all(1.0 <= m <= stretch + 1e-12 for m in mult)
    for span in plan.target_spans:
        values = mult[span.start:span.end]
        if span.kind is SpanKind.TENSE_STRETCH:
            assert all(v == stretch for v in values)
        else:
            assert all(v == 1.0 for v in values)
    # ramps strictly between the extremes
    span_idx = set()
    for span in plan.target_spans:
        span_idx.update(range(span.start, span.end))
    for i, v in enumerate(mult):
        if i not in span_idx and v != 1.0:
            assert 1.0 < v < stretch


@given(
    log_w=st.lists(
        st.floats(min_value=-3, max_value=3), min_size=1, max_size=20
    ),
    rate=st.floats(min_value=0.1, max_value=3.0),
)
@settings(max_examples=60, deadline=None)
def test_apply_durations_invariants(log_w, rate):
    n = len(log_w)
    app = DurationApplication.from_arrays(
        log_w, np.ones(n), rate, np.ones(n)
    )
    y, y_max = apply_durations(app)
    assert y_max >= 1.0
    assert np.all(y >= 0)
    # ceil(exp(x)) >= 1 so the total is at least n * rate when unmasked
    assert y_max >= min(1.0, n * rate) - 1e-9
