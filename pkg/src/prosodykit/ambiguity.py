"""Formant-grid search for maximally ambiguous vowel stimuli.

Given two vowel endpoints in (F1, F2) space, lay a 10 Hz lattice over
the axis-aligned box between them, re-synthesize a recording at every
lattice point through a pluggable formant shifter, ask a pluggable
word-probability oracle how much each point sounds like either word,
and keep the point with the smallest |log p_a - log p_b|. The search
runs from both endpoint recordings ("from A" and "from B") in one
exhaustive pass and records every evaluation for audit.

Formant re-synthesis itself is an adapter boundary: the in-tree
shifter is a pass-through stub that records requests, and the in-tree
oracle adapter talks to an external scorer process over a stdio line
protocol (``SCORE <wav> <word_a> <word_b>`` -> ``OK <lpa> <lpb>``).
"""

from __future__ import annotations

import math
import os
import queue
import shlex
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

import numpy as np

from .dsp import AudioBuffer, write_wav

DEFAULT_STEP_HZ = 10.0


class AmbiguityError(ValueError):
    """Invalid search inputs or a fully failed grid."""


class OracleError(AmbiguityError):
    """The word-probability oracle failed or broke protocol."""


@dataclass(frozen=True)
class FormantPoint:
    f1_hz: float
    f2_hz: float

    def __post_init__(self) -> None:
        if not (0.0 < self.f1_hz < self.f2_hz):
            raise AmbiguityError(
                f"need 0 < F1 < F2, got ({self.f1_hz}, {self.f2_hz})"
            )


class Direction(Enum):
    FROM_A = "FromA"
    FROM_B = "FromB"


class FormantShifter(Protocol):
    def shift(
        self, audio: AudioBuffer | None, from_point: FormantPoint,
        to_point: FormantPoint,
    ) -> AudioBuffer | None: ...


class WordProbOracle(Protocol):
    def score(
        self, audio: AudioBuffer | None, word_a: str, word_b: str
    ) -> tuple[float, float]: ...


@dataclass(frozen=True)
class TraceEntry:
    point: FormantPoint
    logp_a: float
    logp_b: float
    direction: Direction

    @property
    def delta(self) -> float:
        return self.logp_a - self.logp_b


@dataclass(frozen=True)
class SkippedPoint:
    point: FormantPoint
    direction: Direction
    reason: str


@dataclass(frozen=True)
class AmbiguitySearchResult:
    best: FormantPoint
    delta_logprob: float  # signed log p_a - log p_b at the best point
    trace: tuple[TraceEntry, ...]
    direction: Direction  # direction of the winning evaluation
    skipped: tuple[SkippedPoint, ...] = ()


def _axis_values(a: float, b: float, step: float) -> list[float]:
    d = b - a
    if d == 0.0:
        return [a]
    n = math.ceil(abs(d) / step - 1e-9) + 1
    sign = 1.0 if d > 0 else -1.0
    vals = [a + i * step * sign for i in range(n)]
    vals[-1] = b  # keep the far endpoint exact, never overshoot
    return vals


def grid_points(
    origin: FormantPoint,
    target: FormantPoint,
    step_hz: float = DEFAULT_STEP_HZ,
) -> list[FormantPoint]:
    """Lattice over the axis-aligned box between the endpoints.

    Both endpoints are included; interior columns step by ``step_hz``
    from the origin with the final value clamped onto the target. Order
    is row-major from the origin: F1 varies slowest, F2 fastest. Every
    lattice point must satisfy F1 < F2, so boxes whose corners cross
    the diagonal are rejected by the point constructor.
    """
    if step_hz <= 0:
        raise AmbiguityError(f"step_hz must be > 0, got {step_hz}")
    f1s = _axis_values(origin.f1_hz, target.f1_hz, step_hz)
    f2s = _axis_values(origin.f2_hz, target.f2_hz, step_hz)
    return [FormantPoint(f1, f2) for f1 in f1s for f2 in f2s]


def search_ambiguous(
    origin: FormantPoint,
    target: FormantPoint,
    synth: FormantShifter,
    oracle: WordProbOracle,
    words: tuple[str, str],
    *,
    step_hz: float = DEFAULT_STEP_HZ,
    audio_a: AudioBuffer | None = None,
    audio_b: AudioBuffer | None = None,
    max_workers: int = 1,
) -> AmbiguitySearchResult:
    """Exhaustive two-direction grid search for the ambiguity point.

    ``audio_a`` is the recording at the origin formants, ``audio_b``
    at the target's; analytic oracles may ignore them. Failures at
    individual points (OracleError and kin, or non-finite scores) are
    skipped and recorded; only a grid with no survivors raises. Ties
    on |delta| keep the earliest evaluation: the from-A pass in grid
    order, then the from-B pass.
    """
    word_a, word_b = words
    if not word_a or not word_b or word_a == word_b:
        raise AmbiguityError(f"need two distinct words, got {words!r}")
    if max_workers < 1:
        raise AmbiguityError("max_workers must be >= 1")

    grid = grid_points(origin, target, step_hz)
    jobs = [(p, Direction.FROM_A, audio_a, origin) for p in grid]
    jobs += [(p, Direction.FROM_B, audio_b, target) for p in grid]

    def evaluate(job):
        point, direction, source, anchor = job
        try:
            shifted = synth.shift(source, anchor, point)
            lpa, lpb = oracle.score(shifted, word_a, word_b)
            lpa, lpb = float(lpa), float(lpb)
        except AmbiguityError as exc:
            return SkippedPoint(point, direction, str(exc))
        if not (math.isfinite(lpa) and math.isfinite(lpb)):
            return SkippedPoint(
                point, direction, f"non-finite scores ({lpa}, {lpb})"
            )
        return TraceEntry(point, lpa, lpb, direction)

    if max_workers == 1:
        outcomes = [evaluate(j) for j in jobs]
    else:
        # executor.map preserves submission order, so the reduction
        # below is identical to the sequential one
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(evaluate, jobs))

    trace = tuple(o for o in outcomes if isinstance(o, TraceEntry))
    skipped = tuple(o for o in outcomes if isinstance(o, SkippedPoint))
    if not trace:
        raise AmbiguityError(
            f"oracle failed at every grid point ({len(skipped)} failures)"
        )

    best = min(trace, key=lambda e: abs(e.delta))
    return AmbiguitySearchResult(
        best=best.point,
        delta_logprob=best.delta,
        trace=trace,
        direction=best.direction,
        skipped=skipped,
    )


# ------------------------------------------------------------- adapters


@dataclass
class StubFormantShifter:
    """Pass-through shifter that records every requested move.

    Stands in where re-synthesis is out of scope: returns the source
    audio untouched (identity for from == to included) and appends
    (from, to) to ``requests`` so tests can audit the search pattern.
    """

    requests: list[tuple[FormantPoint, FormantPoint]] = field(
        default_factory=list
    )

    def shift(self, audio, from_point, to_point):
        self.requests.append((from_point, to_point))
        return audio


class AnalyticMock:
    """Paired shifter+oracle double driven by delta_fn(point).

    ``shift`` hands back a placeholder buffer remembered against the
    requested point; ``score`` looks the point up and splits the
    analytic delta symmetrically around ``base_logp`` so that
    logp_a - logp_b == delta_fn(point). Points in ``fail_at`` raise
    OracleError instead. Pass one instance as both ``synth`` and
    ``oracle``.
    """

    def __init__(
        self,
        delta_fn: Callable[[FormantPoint], float],
        base_logp: float = -10.0,
        fail_at: Sequence[FormantPoint] = (),
    ) -> None:
        self._delta_fn = delta_fn
        self._base = base_logp
        self._fail_at = set(fail_at)
        self._points: dict[int, FormantPoint] = {}

    def shift(self, audio, from_point, to_point):
        placeholder = AudioBuffer(samples=np.zeros(2), sample_rate=16_000)
        self._points[id(placeholder)] = to_point
        return placeholder

    def score(self, audio, word_a, word_b):
        point = self._points.pop(id(audio))
        if point in self._fail_at:
            raise OracleError(f"mock failure at {point}")
        delta = float(self._delta_fn(point))
        return (self._base + delta / 2.0, self._base - delta / 2.0)


class SubprocessOracle:
    """Word-probability oracle over a child process's stdio.

    Protocol, one line per call: ``SCORE <wav-path> <word_a> <word_b>``
    on stdin; ``OK <logp_a> <logp_b>`` or ``ERR <message>`` on stdout.
    Each score call writes the audio to a temporary WAV so the child
    only ever sees a path. Violations, ERR replies, timeouts, and child
    exit all raise OracleError. Use as a context manager or call
    ``close()``.
    """

    def __init__(self, command: str | Sequence[str], timeout_s: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise OracleError("empty oracle command")
        self._timeout = timeout_s
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleError(f"cannot start oracle {argv[0]!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def score(self, audio, word_a, word_b):
        if audio is None:
            raise OracleError("subprocess oracle needs rendered audio")
        for word in (word_a, word_b):
            if not word or any(c.isspace() for c in word):
                raise OracleError(f"word {word!r} not protocol-safe")
        if self._proc.poll() is not None:
            raise OracleError("oracle process has exited")

        fd, wav_path = tempfile.mkstemp(suffix=".wav")
        os.close(fd)
        try:
            write_wav(audio, wav_path)
            try:
                self._proc.stdin.write(f"SCORE {wav_path} {word_a} {word_b}\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise OracleError(f"oracle pipe closed: {exc}") from exc
            try:
                line = self._lines.get(timeout=self._timeout)
            except queue.Empty:
                raise OracleError(
                    f"oracle timed out after {self._timeout}s"
                ) from None
        finally:
            os.unlink(wav_path)

        if line is None:
            raise OracleError("oracle closed its output stream")
        parts = line.split()
        if len(parts) >= 1 and parts[0] == "ERR":
            raise OracleError(f"oracle error: {line[4:].strip()}")
        if len(parts) != 3 or parts[0] != "OK":
            raise OracleError(f"malformed oracle reply: {line.strip()!r}")
        try:
            return (float(parts[1]), float(parts[2]))
        except ValueError:
            raise OracleError(
                f"non-numeric oracle reply: {line.strip()!r}"
            ) from None

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False
