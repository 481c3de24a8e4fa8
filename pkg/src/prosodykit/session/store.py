"""Experiment sessions: definitions, trial serving, append-only logging.

One store manages one experiment: its trial list, questionnaire, and
two JSON-lines files under the output directory. ``events.jsonl``
records session creations and audio playbacks (so limits survive a
restart); ``responses.jsonl`` holds exactly one response per line in a
stable field order and doubles as the export stream. Both files are
append-only; the in-memory index is rebuilt by replaying them.

Each session gets its own uniform shuffle of the configured trials,
seeded from the store's seed sequence, and its own mutation lock, so
concurrent sessions never contend beyond the shared file appends.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..stimgen import TrialSpec, read_manifest, trial_from_obj

PAYLOAD_VERSION = 1


class SessionError(Exception):
    """Domain failure with an HTTP-ish status for the service layer."""

    def __init__(self, message: str, status: int = 422, **extra: Any):
        super().__init__(message)
        self.status = status
        self.extra = extra


@dataclass(frozen=True)
class QuestionnaireItem:
    item_id: str
    prompt: str
    scale_points: int = 10
    required: bool = True
    locale: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.item_id:
            raise SessionError("questionnaire item needs an item_id")
        if self.scale_points < 2:
            raise SessionError(
                f"item {self.item_id!r}: scale_points must be >= 2"
            )


@dataclass(frozen=True)
class DemographicField:
    name: str
    required: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    trial_specs: tuple[TrialSpec, ...]
    questionnaire: tuple[QuestionnaireItem, ...] = ()
    attention_checks: tuple[int, ...] = ()
    playback_limit: int = 1
    demographics_schema: tuple[DemographicField, ...] = ()
    audio_dir: Path | None = None

    def __post_init__(self) -> None:
        if not self.experiment_id:
            raise SessionError("experiment_id must be non-empty")
        if not self.trial_specs:
            raise SessionError("experiment has no trials")
        if self.playback_limit < 1:
            raise SessionError("playback_limit must be >= 1")
        n = len(self.trial_specs)
        for idx in self.attention_checks:
            if not 0 <= idx < n:
                raise SessionError(
                    f"attention check index {idx} outside [0, {n})"
                )
        ids = [t.trial_id for t in self.trial_specs]
        if len(set(ids)) != len(ids):
            raise SessionError("duplicate trial ids in experiment")
        item_ids = [q.item_id for q in self.questionnaire]
        if len(set(item_ids)) != len(item_ids):
            raise SessionError("duplicate questionnaire item ids")

    @property
    def n_trials(self) -> int:
        return len(self.trial_specs)


def config_from_json_file(path) -> ExperimentConfig:
    """Load an experiment definition, resolving relative paths.

    The JSON object carries ``v``, ``experiment_id``, either an inline
    ``trial_specs`` array or a ``trials_manifest`` path, and optional
    ``questionnaire``, ``attention_checks``, ``playback_limit``,
    ``demographics_schema`` ([{name, required}]), ``audio_dir``.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SessionError(f"cannot read experiment config: {exc}") from exc
    if obj.get("v") != PAYLOAD_VERSION:
        raise SessionError(
            f"unsupported config version {obj.get('v')!r}"
        )
    base = path.parent

    if ("trial_specs" in obj) == ("trials_manifest" in obj):
        raise SessionError(
            "config needs exactly one of trial_specs / trials_manifest"
        )
    if "trials_manifest" in obj:
        manifest = Path(obj["trials_manifest"])
        if not manifest.is_absolute():
            manifest = base / manifest
        trials = tuple(read_manifest(manifest))
    else:
        trials = tuple(trial_from_obj(o) for o in obj["trial_specs"])

    audio_dir = obj.get("audio_dir")
    if audio_dir is not None:
        audio_dir = Path(audio_dir)
        if not audio_dir.is_absolute():
            audio_dir = base / audio_dir

    return ExperimentConfig(
        experiment_id=obj["experiment_id"],
        trial_specs=trials,
        questionnaire=tuple(
            QuestionnaireItem(
                item_id=q["item_id"],
                prompt=q.get("prompt", ""),
                scale_points=int(q.get("scale_points", 10)),
                required=bool(q.get("required", True)),
                locale=q.get("locale", {}),
            )
            for q in obj.get("questionnaire", ())
        ),
        attention_checks=tuple(obj.get("attention_checks", ())),
        playback_limit=int(obj.get("playback_limit", 1)),
        demographics_schema=tuple(
            DemographicField(d["name"], bool(d.get("required", True)))
            for d in obj.get("demographics_schema", ())
        ),
        audio_dir=audio_dir,
    )


@dataclass
class SessionState:
    session_id: str
    participant_id: str
    n_trials: int
    cursor: int = 0
    demographics: dict[str, Any] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.cursor >= self.n_trials


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


class SessionStore:
    """All mutable state for one experiment, fronted by the service."""

    def __init__(self, config: ExperimentConfig, out_dir, seed=None):
        self.config = config
        self._out_dir = Path(out_dir)
        self._out_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = self._out_dir / f"{config.experiment_id}.events.jsonl"
        self._responses_path = (
            self._out_dir / f"{config.experiment_id}.responses.jsonl"
        )
        self._seed_seq = np.random.SeedSequence(seed)
        self._by_trial_id = {t.trial_id: t for t in config.trial_specs}
        self._trial_index = {
            t.trial_id: i for i, t in enumerate(config.trial_specs)
        }

        self._registry_lock = threading.Lock()
        self._append_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, SessionState] = {}
        self._orders: dict[str, list[int]] = {}
        self._playbacks: dict[tuple[str, str], int] = {}
        self._last_ack: dict[str, tuple[str, dict]] = {}
        self._replay_log()

    # ------------------------------------------------------- persistence

    def _append(self, path: Path, record: dict) -> None:
        line = json.dumps(record) + "\n"
        with self._append_lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()

    def _replay_log(self) -> None:
        if self._events_path.exists():
            with open(self._events_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    if rec["kind"] == "session":
                        state = SessionState(
                            session_id=rec["session_id"],
                            participant_id=rec["participant_id"],
                            n_trials=self.config.n_trials,
                            demographics=rec["demographics"],
                        )
                        self._sessions[state.session_id] = state
                        self._orders[state.session_id] = list(rec["order"])
                        self._session_locks[state.session_id] = threading.Lock()
                    elif rec["kind"] == "playback":
                        key = (rec["session_id"], rec["trial_id"])
                        self._playbacks[key] = self._playbacks.get(key, 0) + 1
        if self._responses_path.exists():
            with open(self._responses_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    state = self._sessions.get(rec["session_id"])
                    if state is None:
                        continue
                    state.cursor += 1
                    self._last_ack[state.session_id] = (
                        rec["trial_id"],
                        {
                            "v": PAYLOAD_VERSION,
                            "accepted": False,
                            "duplicate": True,
                            "cursor": state.cursor,
                            "done": state.completed,
                        },
                    )

    # ---------------------------------------------------------- sessions

    def create_session(
        self,
        demographics: Mapping[str, Any],
        participant_id: str | None = None,
    ) -> SessionState:
        missing = [
            f.name
            for f in self.config.demographics_schema
            if f.required
            and (demographics.get(f.name) in (None, ""))
        ]
        if missing:
            raise SessionError(
                f"missing demographics fields: {', '.join(missing)}",
                status=422,
                missing=missing,
            )
        with self._registry_lock:
            session_id = uuid.uuid4().hex
            rng = np.random.default_rng(self._seed_seq.spawn(1)[0])
            order = [int(i) for i in rng.permutation(self.config.n_trials)]
            state = SessionState(
                session_id=session_id,
                participant_id=participant_id or f"anon-{session_id[:8]}",
                n_trials=self.config.n_trials,
                demographics=dict(demographics),
            )
            self._sessions[session_id] = state
            self._orders[session_id] = order
            self._session_locks[session_id] = threading.Lock()
        self._append(
            self._events_path,
            {
                "v": PAYLOAD_VERSION,
                "kind": "session",
                "session_id": state.session_id,
                "participant_id": state.participant_id,
                "demographics": dict(demographics),
                "order": order,
                "created_at": _now_iso(),
            },
        )
        return state

    def _state(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise SessionError(f"unknown session {session_id!r}", status=404)
        return state

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._session_locks[session_id]

    def next_trial(
        self, session_id: str
    ) -> tuple[TrialSpec, int] | None:
        """(spec, position) at the cursor, or None once completed.

        Idempotent: the cursor only moves on an accepted response.
        """
        state = self._state(session_id)
        with self._lock_for(session_id):
            if state.completed:
                return None
            order = self._orders[session_id]
            spec = self.config.trial_specs[order[state.cursor]]
            return spec, state.cursor

    def submit_response(
        self,
        session_id: str,
        trial_id: str,
        choice: str,
        mos: Mapping[str, int] | None = None,
        elapsed_ms: int | None = None,
    ) -> dict:
        """Validate against the pending trial, log, advance the cursor.

        Replaying the most recently accepted trial_id is answered with
        the stored ack (``duplicate: true``) and not re-logged; any
        other non-pending trial_id is stale.
        """
        state = self._state(session_id)
        mos = dict(mos or {})
        with self._lock_for(session_id):
            last = self._last_ack.get(session_id)
            if last is not None and last[0] == trial_id:
                return dict(last[1])
            if state.completed:
                raise SessionError("session already completed", status=409)
            order = self._orders[session_id]
            pending = self.config.trial_specs[order[state.cursor]]
            if trial_id != pending.trial_id:
                raise SessionError(
                    f"trial {trial_id!r} is not the pending trial "
                    f"({pending.trial_id!r})",
                    status=409,
                )
            if choice not in pending.option_order:
                raise SessionError(
                    f"choice {choice!r} not in options "
                    f"{list(pending.option_order)}",
                    status=422,
                )
            self._validate_mos(mos)
            if elapsed_ms is not None and (
                not isinstance(elapsed_ms, int) or elapsed_ms < 0
            ):
                raise SessionError("elapsed_ms must be a non-negative integer")

            config_index = self._trial_index[trial_id]
            record = {
                "v": PAYLOAD_VERSION,
                "experiment_id": self.config.experiment_id,
                "session_id": session_id,
                "participant_id": state.participant_id,
                "trial_id": trial_id,
                "position": state.cursor,
                "choice": choice,
                "mos": mos,
                "elapsed_ms": elapsed_ms,
                "attention_check": config_index in self.config.attention_checks,
                "received_at": _now_iso(),
            }
            self._append(self._responses_path, record)
            state.cursor += 1
            ack = {
                "v": PAYLOAD_VERSION,
                "accepted": True,
                "duplicate": False,
                "cursor": state.cursor,
                "done": state.completed,
            }
            self._last_ack[session_id] = (
                trial_id,
                {**ack, "accepted": False, "duplicate": True},
            )
            return ack

    def _validate_mos(self, mos: Mapping[str, Any]) -> None:
        items = {q.item_id: q for q in self.config.questionnaire}
        unknown = sorted(set(mos) - set(items))
        if unknown:
            raise SessionError(
                f"unknown questionnaire items: {', '.join(unknown)}"
            )
        missing = [
            q.item_id
            for q in self.config.questionnaire
            if q.required and q.item_id not in mos
        ]
        if missing:
            raise SessionError(
                f"missing questionnaire answers: {', '.join(missing)}",
                missing=missing,
            )
        for item_id, value in mos.items():
            scale = items[item_id].scale_points
            if isinstance(value, bool) or not isinstance(value, int):
                raise SessionError(
                    f"answer for {item_id!r} must be an integer"
                )
            if not 1 <= value <= scale:
                raise SessionError(
                    f"answer for {item_id!r} outside [1, {scale}]"
                )

    # ------------------------------------------------------------- audio

    def audio_path(self, session_id: str, trial_id: str) -> Path:
        """Resolve a trial's rendered WAV, counting this fetch.

        Raises 429 once the per-(session, trial) fetch count would pass
        the experiment's playback limit.
        """
        state = self._state(session_id)
        spec = self._by_trial_id.get(trial_id)
        if spec is None:
            raise SessionError(f"unknown stimulus {trial_id!r}", status=404)
        if spec.rendered_audio_path is None:
            raise SessionError(
                f"no audio rendered for {trial_id!r}", status=404
            )
        path = Path(spec.rendered_audio_path)
        if not path.is_absolute() and self.config.audio_dir is not None:
            path = self.config.audio_dir / path
        if not path.exists():
            raise SessionError(f"audio file missing for {trial_id!r}", 404)

        key = (session_id, trial_id)
        with self._lock_for(session_id):
            used = self._playbacks.get(key, 0)
            if used >= self.config.playback_limit:
                raise SessionError(
                    f"playback limit ({self.config.playback_limit}) reached "
                    f"for {trial_id!r}",
                    status=429,
                )
            self._playbacks[key] = used + 1
        self._append(
            self._events_path,
            {
                "v": PAYLOAD_VERSION,
                "kind": "playback",
                "session_id": session_id,
                "trial_id": trial_id,
                "at": _now_iso(),
            },
        )
        return path

    def playbacks_used(self, session_id: str, trial_id: str) -> int:
        return self._playbacks.get((session_id, trial_id), 0)

    # ------------------------------------------------------------ export

    def export_lines(self) -> list[str]:
        """Raw response log lines; a later export extends an earlier one."""
        if not self._responses_path.exists():
            return []
        with open(self._responses_path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]
