"""Interactive preference-elicitation service with file-backed persistence.

A session wraps the Thompson pair-selection loop around a human (or any HTTP
client) acting as the preference oracle: the service proposes a pair, the
judge names a winner, the posterior refits, and the next pair is drawn.  Pair
draws are keyed by (session seed, round), so a fixed feedback script replays
the exact same pair sequence, including across restarts.

Persistence is write-ahead: session state is durable on disk before any
response acknowledges a mutation.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .inference import PreferenceHistory, fit
from .kernels import BaseKernel, DuelingKernel
from .numeric import rng_from_seed
from .policies import CandidateSet, pfts_select

SCHEMA_VERSION = 1

STATUS_READY = "ready"
STATUS_AWAITING = "awaiting_feedback"
STATUS_CLOSED = "closed"


class SessionError(Exception):
    """Protocol error with an HTTP-ish code and machine-readable name."""

    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


def not_found(session_id: str) -> SessionError:
    return SessionError(404, "not_found", f"no session {session_id!r}")


def conflict(message: str) -> SessionError:
    return SessionError(409, "conflict", message)


def bad_request(message: str) -> SessionError:
    return SessionError(400, "bad_request", message)


class CorruptStore(Exception):
    """A persisted session failed to load; carries the failing record id."""


@dataclass
class SessionConfig:
    """Inference settings for one session; engineering defaults, not claims."""

    seed: int = 0
    lengthscale: float = 1.0
    kernel_family: str = "matern"
    nu: float = 2.5
    signal_variance: float = 1.0
    lam: float = 0.05
    norm_bound: float = 2.0
    v_schedule: str = "appendix"
    delta: float = 0.05


@dataclass
class SessionState:
    session_id: str
    labels: list
    features: np.ndarray  # (n, d); one-hot over indices when not supplied
    explicit_features: bool
    config: SessionConfig
    history: list = field(default_factory=list)  # [(first, second, y), ...]
    pending: dict | None = None  # {"first", "second", "token"}
    status: str = STATUS_READY
    created: float = 0.0
    updated: float = 0.0

    @property
    def round(self) -> int:
        return len(self.history)

    def to_payload(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "labels": list(self.labels),
            "features": self.features.tolist(),
            "explicit_features": self.explicit_features,
            "config": vars(self.config),
            "history": [list(record) for record in self.history],
            "pending": self.pending,
            "status": self.status,
            "created": self.created,
            "updated": self.updated,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SessionState":
        version = payload.get("version")
        if version != SCHEMA_VERSION:
            raise CorruptStore(
                f"session {payload.get('session_id')!r}: unknown schema version {version!r}"
            )
        return cls(
            session_id=payload["session_id"],
            labels=list(payload["labels"]),
            features=np.asarray(payload["features"], dtype=float),
            explicit_features=bool(payload["explicit_features"]),
            config=SessionConfig(**payload["config"]),
            history=[tuple(record) for record in payload["history"]],
            pending=payload["pending"],
            status=payload["status"],
            created=payload["created"],
            updated=payload["updated"],
        )


class SessionStore:
    """One JSON snapshot per session under a directory; atomic writes."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def save(self, state: SessionState) -> None:
        path = self._path(state.session_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(state.to_payload(), sort_keys=True), encoding="utf-8")
        tmp.replace(path)

    def load(self, session_id: str) -> SessionState | None:
        path = self._path(session_id)
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptStore(f"session {session_id!r}: invalid JSON: {exc}") from exc
        return SessionState.from_payload(payload)

    def delete(self, session_id: str) -> None:
        self._path(session_id).unlink(missing_ok=True)

    def list_ids(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.json"))


class SessionService:
    """Session lifecycle and the Thompson loop; single writer per session."""

    def __init__(self, store: SessionStore):
        self.store = store
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _load_or_404(self, session_id: str) -> SessionState:
        state = self.store.load(session_id)
        if state is None:
            raise not_found(session_id)
        return state

    def create_session(self, candidates: list, config: dict | None = None) -> SessionState:
        """Create a session over labeled candidates.

        Each candidate is {"label": str, "features": [floats]?}; features are
        all-or-none and equal length.  Without features every candidate gets a
        one-hot vector over indices, which disables generalization across
        items but keeps the elicitation loop fully functional.
        """
        if not isinstance(candidates, list) or len(candidates) < 2:
            raise bad_request("at least 2 candidates are required")
        labels = []
        feature_rows = []
        for position, entry in enumerate(candidates):
            if not isinstance(entry, dict) or "label" not in entry:
                raise bad_request(f"candidate {position} must carry a label")
            labels.append(str(entry["label"]))
            feature_rows.append(entry.get("features"))
        supplied = [row is not None for row in feature_rows]
        if any(supplied) and not all(supplied):
            raise bad_request("features must be supplied for all candidates or none")
        if all(supplied):
            lengths = {len(row) for row in feature_rows}
            if len(lengths) != 1:
                raise bad_request("feature vectors must share one dimension")
            try:
                features = np.asarray(feature_rows, dtype=float)
            except (TypeError, ValueError):
                raise bad_request("features must be numeric") from None
            explicit = True
        else:
            features = np.eye(len(candidates))
            explicit = False
        now = time.time()
        state = SessionState(
            session_id=uuid.uuid4().hex,
            labels=labels,
            features=features,
            explicit_features=explicit,
            config=SessionConfig(**(config or {})),
            created=now,
            updated=now,
        )
        self.store.save(state)
        return state

    def get(self, session_id: str) -> SessionState:
        return self._load_or_404(session_id)

    def _posterior(self, state: SessionState):
        config = state.config
        kernel = BaseKernel(
            family=config.kernel_family,
            lengthscale=config.lengthscale,
            nu=config.nu,
            signal_variance=config.signal_variance,
        )
        history = PreferenceHistory(state.features.shape[1])
        for first, second, y in state.history:
            history.append(state.features[first], state.features[second], y)
        return fit(history, DuelingKernel(kernel), config.lam, config.norm_bound)

    def _candidate_set(self, state: SessionState) -> CandidateSet:
        return CandidateSet.from_points(state.features)

    def next_pair(self, session_id: str) -> dict:
        """Propose the next pair; idempotent while feedback is outstanding."""
        with self._lock(session_id):
            state = self._load_or_404(session_id)
            if state.status == STATUS_CLOSED:
                raise conflict("session is closed")
            if state.status == STATUS_AWAITING and state.pending:
                return self._pair_payload(state)
            t = state.round
            posterior = self._posterior(state)
            v = float((t + 1.0 + np.log(2.0 / 0.05)) ** 0.25)
            decision = pfts_select(
                posterior,
                self._candidate_set(state),
                v,
                rng_from_seed(state.config.seed, t),
            )
            state.pending = {
                "first": decision.first,
                "second": decision.second,
                "token": secrets.token_hex(8),
            }
            state.status = STATUS_AWAITING
            state.updated = time.time()
            self.store.save(state)
            return self._pair_payload(state)

    def _pair_payload(self, state: SessionState) -> dict:
        pending = state.pending
        return {
            "session_id": state.session_id,
            "round": state.round,
            "first": pending["first"],
            "second": pending["second"],
            "first_label": state.labels[pending["first"]],
            "second_label": state.labels[pending["second"]],
            "token": pending["token"],
        }

    def submit_feedback(self, session_id: str, winner: int) -> SessionState:
        """Record the winner of the pending pair; persists before returning."""
        with self._lock(session_id):
            state = self._load_or_404(session_id)
            if state.status == STATUS_CLOSED:
                raise conflict("session is closed")
            if state.status != STATUS_AWAITING or not state.pending:
                raise conflict("no pair is awaiting feedback")
            pending = state.pending
            if winner not in (pending["first"], pending["second"]):
                raise bad_request(
                    f"winner {winner} is not part of the pending pair "
                    f"({pending['first']}, {pending['second']})"
                )
            y = 1 if winner == pending["first"] else 0
            state.history.append((pending["first"], pending["second"], y))
            state.pending = None
            state.status = STATUS_READY
            state.updated = time.time()
            self.store.save(state)
            return state

    def report(self, session_id: str) -> dict:
        """Anchored posterior summary per candidate; diagnostics, not guarantees."""
        state = self._load_or_404(session_id)
        posterior = self._posterior(state)
        anchor = state.features[0]
        means = posterior.mean_anchored(state.features, anchor)
        kt = posterior.cov_anchored(state.features, anchor)
        sigmas = np.sqrt(np.clip(np.diag(kt), 0.0, None))
        best = int(np.argmax(means))
        return {
            "session_id": state.session_id,
            "round": state.round,
            "status": state.status,
            "best_index": best,
            "best_label": state.labels[best],
            "candidates": [
                {
                    "index": i,
                    "label": state.labels[i],
                    "mean": float(means[i]),
                    "sigma": float(sigmas[i]),
                }
                for i in range(len(state.labels))
            ],
            "history": [
                {"first": first, "second": second, "winner_first": bool(y)}
                for first, second, y in state.history
            ],
        }

    def close(self, session_id: str) -> SessionState:
        with self._lock(session_id):
            state = self._load_or_404(session_id)
            state.status = STATUS_CLOSED
            state.pending = None
            state.updated = time.time()
            self.store.save(state)
            return state


def state_payload(state: SessionState) -> dict:
    return {
        "session_id": state.session_id,
        "labels": list(state.labels),
        "round": state.round,
        "status": state.status,
        "pending": (
            {"first": state.pending["first"], "second": state.pending["second"]}
            if state.pending
            else None
        ),
        "history": [
            {"first": first, "second": second, "winner_first": bool(y)}
            for first, second, y in state.history
        ],
    }


def create_app(store_path):
    """FastAPI app exposing the session protocol as JSON over HTTP."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    service = SessionService(SessionStore(store_path))
    app = FastAPI(title="prefbo sessions")

    @app.exception_handler(SessionError)
    async def _session_error(_request: Request, exc: SessionError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": exc.code, "message": exc.message},
        )

    @app.exception_handler(CorruptStore)
    async def _corrupt_store(_request: Request, exc: CorruptStore):
        return JSONResponse(
            status_code=500, content={"code": "corrupt_store", "message": str(exc)}
        )

    @app.post("/sessions", status_code=201)
    async def create(body: dict):
        state = service.create_session(
            body.get("candidates"), body.get("config") or {}
        )
        return state_payload(state)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        return state_payload(service.get(session_id))

    @app.get("/sessions/{session_id}/pair")
    async def get_pair(session_id: str):
        return service.next_pair(session_id)

    @app.post("/sessions/{session_id}/feedback")
    async def feedback(session_id: str, body: dict):
        if "winner" not in body:
            raise bad_request("body must carry a winner index")
        try:
            winner = int(body["winner"])
        except (TypeError, ValueError):
            raise bad_request("winner must be an integer index") from None
        return state_payload(service.submit_feedback(session_id, winner))

    @app.get("/sessions/{session_id}/report")
    async def report(session_id: str):
        return service.report(session_id)

    @app.delete("/sessions/{session_id}")
    async def close(session_id: str):
        return state_payload(service.close(session_id))

    return app
