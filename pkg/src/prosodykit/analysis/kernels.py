"""Reverse-correlation kernel estimation.

A listener's kernel is the mean prosody profile of trials answered
with option A minus the mean of trials answered with option B,
normalized to unit Euclidean length. Pitch kernels live in cents;
stretch kernels are computed in the log2-ratio domain (the sampler's
own domain), so both are symmetric around zero and a label swap
negates the kernel exactly.

Group-level inference runs per window: a paired t-test across
participants between the two option-conditioned mean profiles, with a
kernel-against-zero variant behind ``against_zero=True``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..stimgen import TrialSpec
from .stats import AnalysisError, paired_t


class KernelError(AnalysisError):
    """Unusable response data for kernel estimation."""


class KernelKind(Enum):
    PITCH = "Pitch"
    STRETCH = "Stretch"


@dataclass(frozen=True)
class WindowTest:
    t_stat: float
    p_value: float
    ci95_lo: float
    ci95_hi: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    values: tuple[float, ...]
    n_participants: int = 1
    window_tests: tuple[WindowTest, ...] | None = None

    def __post_init__(self) -> None:
        norm = float(np.sqrt(np.sum(np.square(self.values))))
        if norm != 0.0 and abs(norm - 1.0) > 1e-9:
            raise KernelError(
                f"kernel norm {norm} is neither 0 nor 1"
            )
        if self.window_tests is not None and len(self.window_tests) != len(
            self.values
        ):
            raise KernelError("one test per window required")

    @property
    def is_degenerate(self) -> bool:
        return all(v == 0.0 for v in self.values)


@dataclass(frozen=True)
class KernelTrial:
    """One answered trial: per-window profile values plus the choice.

    ``stretch`` holds log2 ratios, not raw ratios.
    """

    pitch: np.ndarray
    stretch: np.ndarray
    response: str


def _normalize(raw: np.ndarray) -> tuple[float, ...]:
    norm = float(np.sqrt(np.sum(raw**2)))
    if norm == 0.0:
        return tuple(0.0 for _ in raw)
    return tuple((raw / norm).tolist())


def participant_kernel(
    trials: Sequence[KernelTrial], options: tuple[str, str]
) -> tuple[Kernel, Kernel]:
    """(pitch, stretch) kernels for one listener.

    ``options`` fixes the sign: the kernel is mean(profiles given the
    first option) minus mean(profiles given the second).
    """
    means = participant_option_means(trials, options)
    (pa, pb), (sa, sb) = means
    return (
        Kernel(KernelKind.PITCH, _normalize(pa - pb)),
        Kernel(KernelKind.STRETCH, _normalize(sa - sb)),
    )


def participant_option_means(
    trials: Sequence[KernelTrial], options: tuple[str, str]
) -> tuple[
    tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]
]:
    """Option-conditioned mean profiles ((pitch_a, pitch_b), (stretch_a,
    stretch_b)) — the inputs to the group-level paired tests."""
    opt_a, opt_b = options
    if not trials:
        raise KernelError("no trials")
    for t in trials:
        if t.response not in (opt_a, opt_b):
            raise KernelError(
                f"response {t.response!r} not in options {options}"
            )
    a_trials = [t for t in trials if t.response == opt_a]
    b_trials = [t for t in trials if t.response == opt_b]
    if not a_trials or not b_trials:
        raise KernelError(
            "degenerate responder: every response is "
            f"{(a_trials or b_trials)[0].response!r}"
        )
    pitch_a = np.mean([t.pitch for t in a_trials], axis=0)
    pitch_b = np.mean([t.pitch for t in b_trials], axis=0)
    stretch_a = np.mean([t.stretch for t in a_trials], axis=0)
    stretch_b = np.mean([t.stretch for t in b_trials], axis=0)
    return (pitch_a, pitch_b), (stretch_a, stretch_b)


def group_kernel_tests(
    per_participant: Sequence, against_zero: bool = False
) -> tuple[WindowTest, ...]:
    """Per-window paired t-tests across participants.

    Default input: one (mean_profile_a, mean_profile_b) pair per
    participant; each window tests a against b. With ``against_zero``
    the input is one kernel-value vector per participant, tested
    against zero.
    """
    if len(per_participant) < 2:
        raise KernelError("need at least 2 participants")
    if against_zero:
        rows = [np.asarray(p, dtype=float) for p in per_participant]
        pairs = [(r, np.zeros_like(r)) for r in rows]
    else:
        pairs = [
            (np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float))
            for p in per_participant
        ]
    widths = {a.shape for a, _ in pairs} | {b.shape for _, b in pairs}
    if len(widths) != 1 or len(widths.pop()) != 1:
        raise KernelError("participants disagree on window count")
    a_rows = np.stack([a for a, _ in pairs])
    b_rows = np.stack([b for _, b in pairs])

    tests = []
    for w in range(a_rows.shape[1]):
        r = paired_t(a_rows[:, w], b_rows[:, w])
        tests.append(
            WindowTest(r.t_stat, r.p_value, r.ci95_lo, r.ci95_hi)
        )
    return tuple(tests)


def group_kernel(
    kernels: Sequence[Kernel],
    window_tests: tuple[WindowTest, ...] | None = None,
) -> Kernel:
    """Average of participant kernels, re-normalized."""
    if not kernels:
        raise KernelError("no kernels")
    kinds = {k.kind for k in kernels}
    if len(kinds) != 1:
        raise KernelError("mixed kernel kinds")
    lengths = {len(k.values) for k in kernels}
    if len(lengths) != 1:
        raise KernelError("kernels disagree on window count")
    mean = np.mean([k.values for k in kernels], axis=0)
    return Kernel(
        kind=kinds.pop(),
        values=_normalize(mean),
        n_participants=len(kernels),
        window_tests=window_tests,
    )


def trials_from_manifest(
    specs: Iterable[TrialSpec], responses: Mapping[str, str]
) -> tuple[list[KernelTrial], tuple[str, str]]:
    """Join rendered trials with chosen words.

    Returns the trials that have a response, plus the canonical option
    pair (lexicographic order fixes the kernel's sign). All specs must
    share one option pair — group by stimulus before calling.
    """
    pairs = set()
    trials = []
    for spec in specs:
        pairs.add(frozenset(spec.option_order))
        chosen = responses.get(spec.trial_id)
        if chosen is None:
            continue
        trials.append(
            KernelTrial(
                pitch=spec.pitch_profile.values,
                stretch=np.log2(spec.stretch_profile.values),
                response=chosen,
            )
        )
    if len(pairs) != 1:
        raise KernelError(
            "mixed option pairs; group trials by stimulus first"
        )
    options = tuple(sorted(pairs.pop()))
    if len(options) != 2:
        raise KernelError(f"need exactly 2 options, got {options}")
    return trials, options  # type: ignore[return-value]
