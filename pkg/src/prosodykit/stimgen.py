"""Random prosody profiles for reverse-correlation trials.

Each trial perturbs a base recording with two independent breakpoint
profiles — pitch offsets in cents and duration stretch ratios — drawn
window by window and linearly interpolated between window boundaries.
Pitch is Gaussian in cents; stretch is sampled in the log2 domain
(factor 2^g with g ~ N(0, sigma)) so that +/-1 sigma lands exactly on
doubling and halving and no draw can produce a non-positive ratio. A
linear-domain variant is available behind ``stretch_domain="linear"``
for sensitivity checks.

Everything is reproducible: one master seed, split per trial, fixes the
profiles, the option orders, and the batch shuffle bit-for-bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

#: floor for the linear-domain stretch variant, which would otherwise
#: allow ratios <= 0 when clip_sigmas * sigma >= 1
_LINEAR_RATIO_FLOOR = 1e-3


class StimgenError(ValueError):
    """Invalid randomizer configuration or malformed profile data."""


class ProfileKind(Enum):
    PITCH_CENTS = "PitchCents"
    STRETCH_RATIO = "StretchRatio"


@dataclass(frozen=True)
class RandomizerConfig:
    n_windows: int = 13
    window_s: float = 0.1
    pitch_sigma_cents: float = 100.0
    stretch_sigma_log2: float = 1.0
    clip_sigmas: float = 2.0
    seed: int = 0
    stretch_domain: str = "log2"  # or "linear"

    def __post_init__(self) -> None:
        if self.n_windows < 1:
            raise StimgenError("n_windows must be >= 1")
        if not self.window_s > 0:
            raise StimgenError("window_s must be > 0")
        if not (self.pitch_sigma_cents > 0 and self.stretch_sigma_log2 > 0):
            raise StimgenError("sigmas must be > 0")
        if not self.clip_sigmas > 0:
            raise StimgenError("clip_sigmas must be > 0")
        if self.stretch_domain not in ("log2", "linear"):
            raise StimgenError(
                f"unknown stretch_domain {self.stretch_domain!r}"
            )


@dataclass(frozen=True)
class BreakpointProfile:
    kind: ProfileKind
    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.breakpoints:
            raise StimgenError("profile needs at least one breakpoint")
        times = [t for t, _ in self.breakpoints]
        if times[0] != 0.0:
            raise StimgenError("first breakpoint must be at t=0")
        if any(b >= a for b, a in zip(times, times[1:])):
            raise StimgenError("breakpoint times must strictly increase")
        values = [v for _, v in self.breakpoints]
        if not all(np.isfinite(values)):
            raise StimgenError("non-finite profile value")
        if self.kind is ProfileKind.STRETCH_RATIO and min(values) <= 0:
            raise StimgenError("stretch ratios must be positive")

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.breakpoints])


@dataclass(frozen=True)
class BaseStimulus:
    stimulus_id: str
    option_a: str
    option_b: str
    audio_path: str | None = None


@dataclass(frozen=True)
class TrialSpec:
    trial_id: str
    base_stimulus_id: str
    pitch_profile: BreakpointProfile
    stretch_profile: BreakpointProfile
    option_order: tuple[str, str]
    rendered_audio_path: str | None = None


# ------------------------------------------------------------- sampling

def stretch_from_gaussian(g, config: RandomizerConfig) -> np.ndarray:
    """Map clipped Gaussian draws to stretch ratios.

    Log2 domain: ratio = 2^g, so negating g gives the exact reciprocal.
    Linear domain: ratio = 1 + g with a positivity floor.
    """
    g = np.clip(
        np.asarray(g, dtype=float),
        -config.clip_sigmas * config.stretch_sigma_log2,
        config.clip_sigmas * config.stretch_sigma_log2,
    )
    if config.stretch_domain == "log2":
        return np.exp2(g)
    return np.maximum(_LINEAR_RATIO_FLOOR, 1.0 + g)


def sample_profiles(
    config: RandomizerConfig, rng: np.random.Generator | None = None
) -> tuple[BreakpointProfile, BreakpointProfile]:
    """One pitch profile and one independent stretch profile.

    Breakpoints sit on the window grid (one per window start); values
    hold constant past the last breakpoint, so n windows of w seconds
    cover n*w seconds of audio. Deterministic given ``config.seed``
    unless an explicit generator is passed.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    times = np.arange(config.n_windows) * config.window_s

    pitch_clip = config.clip_sigmas * config.pitch_sigma_cents
    pitch_vals = np.clip(
        rng.normal(0.0, config.pitch_sigma_cents, config.n_windows),
        -pitch_clip,
        pitch_clip,
    )
    g = rng.normal(0.0, config.stretch_sigma_log2, config.n_windows)
    stretch_vals = stretch_from_gaussian(g, config)

    pitch = BreakpointProfile(
        ProfileKind.PITCH_CENTS,
        tuple(zip(times.tolist(), pitch_vals.tolist())),
    )
    stretch = BreakpointProfile(
        ProfileKind.STRETCH_RATIO,
        tuple(zip(times.tolist(), stretch_vals.tolist())),
    )
    return pitch, stretch


def interpolate_profile(profile: BreakpointProfile, t: float) -> float:
    """Piecewise-linear value at time t, constant beyond the ends."""
    return float(np.interp(t, profile.times, profile.values))


def make_trial_batch(
    base_stimuli: Sequence[BaseStimulus],
    n_trials: int,
    config: RandomizerConfig,
) -> list[TrialSpec]:
    """Fresh profiles and a coin-flipped option order for every trial.

    The master seed is split per trial index, so trial i's randomness
    is independent of batch size and could be regenerated in parallel;
    a final child seed shuffles the presentation order.
    """
    if n_trials < 1:
        raise StimgenError("n_trials must be >= 1")
    if not base_stimuli:
        raise StimgenError("no base stimuli")

    children = np.random.SeedSequence(config.seed).spawn(n_trials + 1)
    trials: list[TrialSpec] = []
    for i in range(n_trials):
        rng = np.random.default_rng(children[i])
        pitch, stretch = sample_profiles(config, rng)
        base = base_stimuli[i % len(base_stimuli)]
        order = (base.option_a, base.option_b)
        if rng.random() < 0.5:
            order = (base.option_b, base.option_a)
        trials.append(
            TrialSpec(
                trial_id=f"trial-{i:05d}",
                base_stimulus_id=base.stimulus_id,
                pitch_profile=pitch,
                stretch_profile=stretch,
                option_order=order,
            )
        )
    shuffle_rng = np.random.default_rng(children[n_trials])
    shuffle_rng.shuffle(trials)
    return trials


# -------------------------------------------------------- serialization

def write_profiles_csv(
    path, profiles: Iterable[BreakpointProfile]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "time_s", "value"])
        for profile in profiles:
            for t, v in profile.breakpoints:
                writer.writerow([profile.kind.value, repr(t), repr(v)])


def read_profiles_csv(path) -> list[BreakpointProfile]:
    groups: dict[str, list[tuple[float, float]]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["kind", "time_s", "value"]:
            raise StimgenError(
                f"bad profile CSV header: {reader.fieldnames}"
            )
        for row in reader:
            if row["kind"] not in order:
                order.append(row["kind"])
            groups.setdefault(row["kind"], []).append(
                (float(row["time_s"]), float(row["value"]))
            )
    return [
        BreakpointProfile(ProfileKind(kind), tuple(groups[kind]))
        for kind in order
    ]


def _profile_to_obj(profile: BreakpointProfile) -> dict:
    return {
        "kind": profile.kind.value,
        "breakpoints": [[t, v] for t, v in profile.breakpoints],
    }


def _profile_from_obj(obj: dict) -> BreakpointProfile:
    return BreakpointProfile(
        ProfileKind(obj["kind"]),
        tuple((float(t), float(v)) for t, v in obj["breakpoints"]),
    )


def trial_to_obj(trial: TrialSpec) -> dict:
    return {
        "trial_id": trial.trial_id,
        "base_stimulus_id": trial.base_stimulus_id,
        "pitch_profile": _profile_to_obj(trial.pitch_profile),
        "stretch_profile": _profile_to_obj(trial.stretch_profile),
        "option_order": list(trial.option_order),
        "rendered_audio_path": trial.rendered_audio_path,
    }


def trial_from_obj(obj: dict) -> TrialSpec:
    order = obj["option_order"]
    if len(order) != 2:
        raise StimgenError(f"bad option_order {order!r}")
    return TrialSpec(
        trial_id=str(obj["trial_id"]),
        base_stimulus_id=str(obj["base_stimulus_id"]),
        pitch_profile=_profile_from_obj(obj["pitch_profile"]),
        stretch_profile=_profile_from_obj(obj["stretch_profile"]),
        option_order=(str(order[0]), str(order[1])),
        rendered_audio_path=obj.get("rendered_audio_path"),
    )


def write_manifest(path, trials: Iterable[TrialSpec]) -> None:
    """JSON-lines manifest, one trial per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for trial in trials:
            fh.write(json.dumps(trial_to_obj(trial)) + "\n")


def read_manifest(path) -> list[TrialSpec]:
    trials = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                trials.append(trial_from_obj(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise StimgenError(
                    f"{path}:{lineno}: bad manifest line: {exc}"
                ) from exc
    return trials


def with_rendered_path(trial: TrialSpec, path: str) -> TrialSpec:
    return replace(trial, rendered_audio_path=path)
