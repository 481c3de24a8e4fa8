"""HTTP surface for experiment sessions.

Versioned JSON in and out (``v: 1`` on every payload), one route per
store operation:

    POST /experiments/{experiment_id}/sessions   demographics -> session
    GET  /sessions/{session_id}/next             pending trial or done
    POST /sessions/{session_id}/responses        2AFC choice + MOS answers
    GET  /audio/{stimulus_id}?session=...        WAV bytes, playback-counted
    GET  /experiments/{experiment_id}/export     responses as JSON lines

Domain failures carry their HTTP status from the store (404 unknown
ids, 409 stale/duplicate-mismatch, 422 validation, 429 playback cap).
"""

from __future__ import annotations

import json
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from .store import PAYLOAD_VERSION, SessionError, SessionStore


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"v": PAYLOAD_VERSION, "error": message, **extra},
    )


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except json.JSONDecodeError as exc:
        raise SessionError(f"invalid JSON body: {exc}", status=422) from exc
    if not isinstance(body, dict):
        raise SessionError("body must be a JSON object", status=422)
    if body.get("v") != PAYLOAD_VERSION:
        raise SessionError(
            f"unsupported payload version {body.get('v')!r}", status=422
        )
    return body


def _questionnaire_payload(store: SessionStore) -> list[dict]:
    return [
        {
            "item_id": q.item_id,
            "prompt": q.prompt,
            "scale_points": q.scale_points,
            "required": q.required,
            "locale": dict(q.locale),
        }
        for q in store.config.questionnaire
    ]


def build_app(stores: Mapping[str, SessionStore]) -> FastAPI:
    """One service over any number of experiment stores."""
    stores = dict(stores)
    session_owner: dict[str, SessionStore] = {}
    for store in stores.values():
        for session_id in store._sessions:  # recovered from the log
            session_owner[session_id] = store

    app = FastAPI(title="prosodykit session service", docs_url=None)

    @app.exception_handler(SessionError)
    async def _on_session_error(request: Request, exc: SessionError):
        return _error(exc.status, str(exc), **exc.extra)

    def _store_for_experiment(experiment_id: str) -> SessionStore:
        store = stores.get(experiment_id)
        if store is None:
            raise SessionError(
                f"unknown experiment {experiment_id!r}", status=404
            )
        return store

    def _store_for_session(session_id: str) -> SessionStore:
        store = session_owner.get(session_id)
        if store is None:
            raise SessionError(f"unknown session {session_id!r}", status=404)
        return store

    @app.post("/experiments/{experiment_id}/sessions", status_code=201)
    async def create_session(experiment_id: str, request: Request):
        store = _store_for_experiment(experiment_id)
        body = await _json_body(request)
        demographics = body.get("demographics")
        if not isinstance(demographics, dict):
            raise SessionError("demographics object required", status=422)
        participant = body.get("participant_id")
        state = store.create_session(demographics, participant)
        session_owner[state.session_id] = store
        return {
            "v": PAYLOAD_VERSION,
            "session_id": state.session_id,
            "participant_id": state.participant_id,
            "experiment_id": experiment_id,
            "n_trials": state.n_trials,
            "playback_limit": store.config.playback_limit,
            "questionnaire": _questionnaire_payload(store),
        }

    @app.get("/sessions/{session_id}/next")
    async def next_trial(session_id: str):
        store = _store_for_session(session_id)
        pending = store.next_trial(session_id)
        if pending is None:
            return {"v": PAYLOAD_VERSION, "done": True}
        spec, position = pending
        return {
            "v": PAYLOAD_VERSION,
            "done": False,
            "trial": {
                "trial_id": spec.trial_id,
                "index": position,
                "n_trials": store.config.n_trials,
                "options": list(spec.option_order),
                "audio_url": f"/audio/{spec.trial_id}?session={session_id}",
                "questionnaire": _questionnaire_payload(store),
            },
        }

    @app.post("/sessions/{session_id}/responses")
    async def submit_response(session_id: str, request: Request):
        store = _store_for_session(session_id)
        body = await _json_body(request)
        for key in ("trial_id", "choice"):
            if not isinstance(body.get(key), str) or not body[key]:
                raise SessionError(f"{key} required", status=422)
        mos = body.get("mos", {})
        if not isinstance(mos, dict):
            raise SessionError("mos must be an object", status=422)
        return store.submit_response(
            session_id,
            trial_id=body["trial_id"],
            choice=body["choice"],
            mos=mos,
            elapsed_ms=body.get("elapsed_ms"),
        )

    @app.get("/audio/{stimulus_id}")
    async def audio(stimulus_id: str, session: str = ""):
        if not session:
            raise SessionError(
                "session query parameter required", status=422
            )
        store = _store_for_session(session)
        path = store.audio_path(session, stimulus_id)
        return FileResponse(path, media_type="audio/wav")

    @app.get("/experiments/{experiment_id}/export")
    async def export(experiment_id: str):
        store = _store_for_experiment(experiment_id)
        lines = store.export_lines()
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(body, media_type="application/x-ndjson")

    return app
