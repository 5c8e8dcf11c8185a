"""Session service: online elicitation behind an HTTP/JSON API.

Banks are uploaded as CSV and content-addressed; sessions persist as
append-only newline-delimited JSON event logs, one file per session, so a
crashed or restarted service replays them to the exact same state (query
selection is deterministic). Answer submissions carry an idempotency key:
replaying the same key returns the recorded response, a mismatched key for
an already-answered query is a conflict.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .model import (
    ItemBank,
    NoiseConfig,
    ParseError,
    PreferencePolyhedron,
    Query,
    ValidationError,
    load_item_bank,
)
from .offline_mmu import CcgOptions
from .online import (
    Session,
    choose_query,
    current_recommendation,
    record_response,
    session_model,
)
from .simulate import Benchmarks, benchmarks

ANSWER_TO_RESPONSE = {"first": 1, "second": -1, "indifferent": 1}
U0_BUILDERS = {
    "simplex": PreferencePolyhedron.simplex,
    "box": PreferencePolyhedron.box,
}


class ServiceError(Exception):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


@dataclass
class SessionState:
    """Replayed view of one session's event log."""

    session_id: str
    bank_id: str
    u0: str
    session: Session
    pending: Optional[Query] = None
    answers: dict[int, dict] = field(default_factory=dict)  # k -> answer event
    escalations: int = 0
    created_at: str = ""


class SessionService:
    """Framework-free core; the HTTP layer is a thin adapter over this."""

    def __init__(self, data_dir: str | Path,
                 solver_time_limit: Optional[float] = None):
        self.data_dir = Path(data_dir)
        (self.data_dir / "banks").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.solver_time_limit = solver_time_limit
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._bank_cache: dict[str, tuple[ItemBank, list[str]]] = {}
        self._benchmark_cache: dict[tuple[str, str, str], Benchmarks] = {}

    # -- banks ---------------------------------------------------------------

    def ingest_bank(self, csv_text: str) -> dict:
        try:
            bank = load_item_bank(csv_text)
        except (ParseError, ValidationError) as exc:
            raise ServiceError(422, "invalid_bank", str(exc))
        bank_id = hashlib.sha256(csv_text.encode()).hexdigest()[:12]
        path = self.data_dir / "banks" / f"{bank_id}.csv"
        if not path.exists():
            path.write_text(csv_text)
        return {
            "bank_id": bank_id,
            "items": bank.size,
            "attributes": bank.num_attributes,
            "ids": list(bank.ids),
        }

    def _bank(self, bank_id: str) -> tuple[ItemBank, list[str]]:
        if bank_id in self._bank_cache:
            return self._bank_cache[bank_id]
        path = self.data_dir / "banks" / f"{bank_id}.csv"
        if not path.exists():
            raise ServiceError(404, "bank_not_found", f"no bank {bank_id!r}")
        text = path.read_text()
        bank = load_item_bank(text)
        header = next(csv.reader(io.StringIO(text)))
        names = [h.strip() for h in header[1:]
                 if h.strip() not in ("in_query_set", "in_rec_set")]
        self._bank_cache[bank_id] = (bank, names)
        return bank, names

    def _marks(self, bank_id: str, criterion: str, u0: str) -> Benchmarks:
        key = (bank_id, criterion, u0)
        if key not in self._benchmark_cache:
            bank, _ = self._bank(bank_id)
            base = U0_BUILDERS[u0](bank.num_attributes)
            self._benchmark_cache[key] = benchmarks(bank, base, criterion)
        return self._benchmark_cache[key]

    # -- event log -----------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.ndjson"

    def _append(self, session_id: str, event: dict) -> None:
        event = {"ts": _now(), **event}
        with self._log_path(session_id).open("a") as fh:
            fh.write(json.dumps(event) + "\n")

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _load(self, session_id: str) -> SessionState:
        path = self._log_path(session_id)
        if not path.exists():
            raise ServiceError(404, "session_not_found",
                               f"no session {session_id!r}")
        state: Optional[SessionState] = None
        issued: dict[int, Query] = {}
        for line in path.read_text().splitlines():
            event = json.loads(line)
            kind = event["type"]
            if kind == "created":
                bank, _ = self._bank(event["bank_id"])
                base = U0_BUILDERS[event["u0"]](bank.num_attributes)
                session = Session(
                    bank, base, event["criterion"],
                    NoiseConfig(event["sigma"], event["confidence"]),
                    event["k_max"],
                )
                state = SessionState(session_id, event["bank_id"],
                                     event["u0"], session,
                                     created_at=event["ts"])
            elif kind == "query_issued":
                issued[event["k"]] = Query(event["first"], event["second"])
            elif kind == "budget_escalation":
                state.escalations += 1
            elif kind == "answer":
                query = Query(event["first"], event["second"])
                state.session = record_response(state.session, event["s"],
                                                query=query)
                state.answers[event["k"]] = event
        if state is None:
            raise ServiceError(500, "corrupt_log",
                               f"session {session_id!r} has no creation event")
        if state.session.status == "active":
            state.pending = issued.get(state.session.k)
        return state

    # -- session operations ----------------------------------------------------

    def _opts(self) -> CcgOptions:
        return CcgOptions(delta=1e-6, time_limit=self.solver_time_limit)

    def _compute_choice(self, state: SessionState):
        try:
            return choose_query(state.session, self._opts())
        except RuntimeError as exc:
            if "time limit" in str(exc):
                raise ServiceError(202, "computing",
                                   "query computation exceeded the time "
                                   "budget; retry shortly")
            raise

    def _log_choice(self, state: SessionState, choice) -> None:
        for esc in choice.escalations:
            self._append(state.session_id, {
                "type": "budget_escalation",
                "scheduled_gamma": esc.scheduled_gamma,
                "escalated_gamma": esc.escalated_gamma,
                "doublings": esc.doublings,
            })
            state.escalations += 1
        self._append(state.session_id, {
            "type": "query_issued",
            "k": state.session.k,
            "first": choice.query.first,
            "second": choice.query.second,
            "gamma": choice.gamma,
            "value": choice.value,
        })
        state.pending = choice.query

    def _issue_query(self, state: SessionState) -> Optional[Query]:
        """Compute and log the pending query; None when the session is done."""
        if state.session.status != "active":
            return None
        if state.pending is not None:
            return state.pending
        choice = self._compute_choice(state)
        self._log_choice(state, choice)
        return choice.query

    def _recommendation_payload(self, state: SessionState) -> dict:
        rec = current_recommendation(state.session)
        marks = self._marks(state.bank_id, state.session.criterion, state.u0)
        return {
            "item_index": rec.item,
            "item_id": rec.item_id,
            "criterion": rec.criterion,
            "guarantee": rec.guarantee,
            "normalized": marks.normalized(rec.guarantee, rec.criterion),
        }

    def _item_payload(self, bank_id: str, index: int) -> dict:
        bank, names = self._bank(bank_id)
        vec = bank.vector(index)
        return {
            "index": index,
            "id": bank.ids[index - 1],
            "attributes": {name: float(v) for name, v in zip(names, vec)},
        }

    def _query_payload(self, state: SessionState,
                       query: Optional[Query]) -> Optional[dict]:
        if query is None:
            return None
        return {
            "k": state.session.k,
            "first": self._item_payload(state.bank_id, query.first),
            "second": self._item_payload(state.bank_id, query.second),
        }

    def create_session(self, bank_id: str, criterion: str, sigma: float,
                       confidence: float = 0.9, k_max: int = 10,
                       u0: str = "simplex") -> dict:
        bank, _ = self._bank(bank_id)
        if criterion not in ("mmu", "mmr"):
            raise ServiceError(422, "invalid_params",
                               f"criterion must be mmu or mmr, got {criterion!r}")
        if u0 not in U0_BUILDERS:
            raise ServiceError(422, "invalid_params",
                               f"u0 must be one of {sorted(U0_BUILDERS)}")
        try:
            noise = NoiseConfig(sigma, confidence)
            base = U0_BUILDERS[u0](bank.num_attributes)
            session = Session(bank, base, criterion, noise, k_max)
        except ValidationError as exc:
            raise ServiceError(422, "invalid_params", str(exc))
        session_id = uuid.uuid4().hex[:16]
        self._append(session_id, {
            "type": "created", "bank_id": bank_id, "criterion": criterion,
            "sigma": sigma, "confidence": confidence, "k_max": k_max,
            "u0": u0,
        })
        state = SessionState(session_id, bank_id, u0, session,
                             created_at=_now())
        with self._lock(session_id):
            query = self._issue_query(state)
            payload = {
                "session_id": session_id,
                "status": state.session.status,
                "k": state.session.k,
                "k_max": k_max,
                "query": self._query_payload(state, query),
            }
            if query is None:
                payload["recommendation"] = self._recommendation_payload(state)
                self._append(session_id, {
                    "type": "recommendation",
                    **payload["recommendation"],
                })
            return payload

    def submit_answer(self, session_id: str, answer: str,
                      idempotency_key: str, k: Optional[int] = None) -> dict:
        if answer not in ANSWER_TO_RESPONSE:
            raise ServiceError(422, "invalid_answer",
                               f"answer must be one of {sorted(ANSWER_TO_RESPONSE)}")
        with self._lock(session_id):
            state = self._load(session_id)
            # replay a duplicate submission byte-for-byte
            for event in state.answers.values():
                if event.get("idempotency_key") == idempotency_key:
                    return event["response"]
            if state.session.status != "active":
                raise ServiceError(410, "session_completed",
                                   "session already has all its answers")
            current_k = state.session.k
            if k is not None and k != current_k:
                raise ServiceError(409, "conflict",
                                   f"query {k} is not awaiting an answer "
                                   f"(current index {current_k})")
            query = self._issue_query(state)
            s = ANSWER_TO_RESPONSE[answer]
            state.session = record_response(state.session, s, query=query)
            state.pending = None
            next_choice = None
            recommendation = None
            if state.session.status == "active":
                next_choice = self._compute_choice(state)
                next_query_payload = {
                    "k": state.session.k,
                    "first": self._item_payload(state.bank_id,
                                                next_choice.query.first),
                    "second": self._item_payload(state.bank_id,
                                                 next_choice.query.second),
                }
            else:
                next_query_payload = None
                recommendation = self._recommendation_payload(state)
            response = {
                "session_id": session_id,
                "k": state.session.k,
                "status": state.session.status,
                "query": next_query_payload,
                "recommendation": recommendation,
            }
            self._append(session_id, {
                "type": "answer", "k": current_k, "raw": answer, "s": s,
                "first": query.first, "second": query.second,
                "idempotency_key": idempotency_key, "response": response,
            })
            if next_choice is not None:
                self._log_choice(state, next_choice)
            if recommendation is not None:
                self._append(session_id, {
                    "type": "recommendation", **recommendation,
                })
            return response

    def get_session(self, session_id: str) -> dict:
        with self._lock(session_id):
            state = self._load(session_id)
            pending = self._issue_query(state)
            history = []
            for idx, (query, s) in enumerate(state.session.history):
                event = state.answers.get(idx, {})
                history.append({
                    "k": idx,
                    "first": self._item_payload(state.bank_id, query.first),
                    "second": self._item_payload(state.bank_id, query.second),
                    "raw_answer": event.get("raw"),
                    "s": s,
                })
            model, _ = session_model(state.session, state.session.k)
            return {
                "session_id": session_id,
                "bank_id": state.bank_id,
                "criterion": state.session.criterion,
                "u0": state.u0,
                "status": state.session.status,
                "k": state.session.k,
                "k_max": state.session.k_max,
                "gamma": model.gamma,
                "escalations": state.escalations,
                "history": history,
                "pending_query": self._query_payload(state, pending),
                "recommendation": self._recommendation_payload(state),
                "created_at": state.created_at,
            }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def create_app(data_dir: str | Path,
               solver_time_limit: Optional[float] = None,
               ui_dir: Optional[str | Path] = None,
               cors_origins: str = "*"):
    service = SessionService(data_dir, solver_time_limit)
    app = FastAPI(title="prefelicit session service")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origins] if cors_origins != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        body = {"code": exc.code, "message": exc.message}
        headers = {"Retry-After": "1"} if exc.status_code == 202 else None
        return JSONResponse(body, status_code=exc.status_code, headers=headers)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/banks")
    async def post_bank(request: Request):
        raw = await request.body()
        text = raw.decode("utf-8")
        if request.headers.get("content-type", "").startswith("application/json"):
            payload = json.loads(text)
            text = payload.get("csv", "")
        return service.ingest_bank(text)

    @app.post("/sessions")
    async def post_session(request: Request):
        payload = await request.json()
        try:
            return service.create_session(
                bank_id=payload["bank_id"],
                criterion=payload.get("criterion", "mmu"),
                sigma=float(payload.get("sigma", 0.0)),
                confidence=float(payload.get("confidence", 0.9)),
                k_max=int(payload.get("k_max", 10)),
                u0=payload.get("u0", "simplex"),
            )
        except KeyError as exc:
            raise ServiceError(422, "invalid_params",
                               f"missing field {exc.args[0]!r}")

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id)

    @app.post("/sessions/{session_id}/answers")
    async def post_answer(session_id: str, request: Request):
        payload = await request.json()
        try:
            return service.submit_answer(
                session_id,
                answer=payload["answer"],
                idempotency_key=payload["idempotency_key"],
                k=payload.get("k"),
            )
        except KeyError as exc:
            raise ServiceError(422, "invalid_params",
                               f"missing field {exc.args[0]!r}")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
