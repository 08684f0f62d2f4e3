"""HTTP annotation service for collecting caption ratings.

Serves each tagger the corpus in a seeded per-(tagger, phase) order,
accepts scores on the five-point scale, persists them to an append-only
event log (fsync before acknowledgment, so an acknowledged score
survives a crash), and exposes progress, live agreement, and export in
the corpus interchange format.
"""

import io
import json
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from random import Random
from typing import Iterable, Sequence

from .corpus import OWN_SCALE, CaptionSample, RawScore, write_corpus
from .harness import agreement_tables

PHASES = (1, 2)


class RequestError(Exception):
    """A client error carrying the HTTP status it maps to."""

    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


@dataclass(frozen=True)
class ScoreEvent:
    sample_id: str
    tagger: str
    phase: int
    score: float
    timestamp: float


class EventStore:
    """Append-only score log on disk.

    Every accepted event is flushed and fsynced before ``append``
    returns, so acknowledgments imply durability. A torn final line
    left by a crash mid-write is dropped on load (it was never
    acknowledged) and the file is truncated back to the last complete
    record before new appends.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._events: list[ScoreEvent] = []
        self._seen: set[tuple[str, str, int]] = set()
        self._load()
        self._handle = open(self.path, "a", encoding="utf-8")

    def _load(self) -> None:
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()
            return
        raw = self.path.read_bytes()
        good_end = 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                break
            try:
                record = json.loads(line)
                event = ScoreEvent(
                    sample_id=record["sample_id"],
                    tagger=record["tagger"],
                    phase=int(record["phase"]),
                    score=float(record["score"]),
                    timestamp=float(record["timestamp"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                break
            key = (event.sample_id, event.tagger, event.phase)
            if key not in self._seen:
                self._events.append(event)
                self._seen.add(key)
            good_end += len(line)
        if good_end != len(raw):
            with open(self.path, "r+b") as handle:
                handle.truncate(good_end)

    def append(self, event: ScoreEvent) -> bool:
        """Persist the event; False if its (sample, tagger, phase) exists."""
        key = (event.sample_id, event.tagger, event.phase)
        with self._lock:
            if key in self._seen:
                return False
            self._handle.write(json.dumps(asdict(event), sort_keys=True) + "\n")
            self._handle.flush()
            os.fsync(self._handle.fileno())
            self._events.append(event)
            self._seen.add(key)
            return True

    @property
    def events(self) -> list[ScoreEvent]:
        with self._lock:
            return list(self._events)

    def __contains__(self, key: tuple[str, str, int]) -> bool:
        with self._lock:
            return key in self._seen

    def compact(self) -> None:
        """Rewrite the log as one canonical record per event, atomically."""
        with self._lock:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            with open(tmp, "w", encoding="utf-8") as handle:
                for event in self._events:
                    handle.write(json.dumps(asdict(event), sort_keys=True) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._handle.close()
            os.replace(tmp, self.path)
            self._handle = open(self.path, "a", encoding="utf-8")

    def close(self) -> None:
        with self._lock:
            self._handle.close()


class AnnotationService:
    """Session logic behind the HTTP endpoints.

    Assignment order is a deterministic shuffle seeded from
    (seed, tagger, phase); the cursor is derived from the stored events,
    so restarts resume exactly where the tagger left off. Phase 1 is
    open from the start; phase 2 waits for an operator to open it.
    """

    def __init__(
        self,
        samples: Sequence[CaptionSample],
        store: EventStore,
        seed: int = 0,
        taggers: Iterable[str] | None = None,
        open_phases: Iterable[int] = (1,),
        image_root: str = "images",
    ):
        self.samples = list(samples)
        self.by_id = {s.sample_id: s for s in self.samples}
        if len(self.by_id) != len(self.samples):
            raise ValueError("corpus contains duplicate sample ids")
        self.store = store
        self.seed = seed
        self.taggers = set(taggers) if taggers is not None else None
        self.open_phases = set(open_phases)
        self.image_root = image_root.rstrip("/")
        self._lock = threading.Lock()

    # -- session mechanics

    def _check_session(self, tagger: str, phase: int) -> None:
        if not tagger:
            raise RequestError(400, "tagger must be a non-empty string")
        if self.taggers is not None and tagger not in self.taggers:
            raise RequestError(400, f"unknown tagger {tagger!r}")
        if phase not in PHASES:
            raise RequestError(400, f"phase must be one of {PHASES}")
        if phase not in self.open_phases:
            raise RequestError(400, f"phase {phase} is not open yet")

    def permutation(self, tagger: str, phase: int) -> list[str]:
        ids = [s.sample_id for s in self.samples]
        Random(f"{self.seed}:{tagger}:{phase}").shuffle(ids)
        return ids

    def next_item(self, tagger: str, phase: int) -> dict:
        self._check_session(tagger, phase)
        order = self.permutation(tagger, phase)
        first_unscored = None
        scored = 0
        for sample_id in order:
            if (sample_id, tagger, phase) in self.store:
                scored += 1
            elif first_unscored is None:
                first_unscored = sample_id
        if first_unscored is None:
            return {"done": True, "total": len(order)}
        sample = self.by_id[first_unscored]
        return {
            "sample_id": first_unscored,
            "image": f"{self.image_root}/{sample.image_id}",
            "candidate": sample.candidate,
            "position": scored + 1,
            "total": len(order),
        }

    def post_score(self, sample_id: str, tagger: str, phase: int, score) -> dict:
        if sample_id not in self.by_id:
            raise RequestError(404, f"unknown sample {sample_id!r}")
        self._check_session(tagger, phase)
        try:
            numeric = float(score)
        except (TypeError, ValueError):
            raise RequestError(400, f"score {score!r} is not a number") from None
        if numeric not in OWN_SCALE:
            raise RequestError(
                400, f"score {numeric} is not on the scale {list(OWN_SCALE)}"
            )
        event = ScoreEvent(
            sample_id=sample_id,
            tagger=tagger,
            phase=phase,
            score=numeric,
            timestamp=time.time(),
        )
        if not self.store.append(event):
            raise RequestError(
                409, f"sample {sample_id!r} already scored by {tagger!r} in phase {phase}"
            )
        return {"accepted": True, "sample_id": sample_id}

    def open_phase(self, phase: int) -> dict:
        if phase not in PHASES:
            raise RequestError(400, f"phase must be one of {PHASES}")
        with self._lock:
            self.open_phases.add(phase)
        return {"open_phases": sorted(self.open_phases)}

    # -- reporting

    def _session_keys(self) -> list[tuple[str, int]]:
        taggers = set(self.taggers or ())
        taggers.update(e.tagger for e in self.store.events)
        return [(t, p) for t in sorted(taggers) for p in PHASES]

    def progress(self) -> dict:
        counts: dict[tuple[str, int], int] = {}
        for event in self.store.events:
            counts[(event.tagger, event.phase)] = counts.get((event.tagger, event.phase), 0) + 1
        total = len(self.samples)
        sessions = [
            {
                "tagger": tagger,
                "phase": phase,
                "scored": counts.get((tagger, phase), 0),
                "total": total,
                "done": counts.get((tagger, phase), 0) >= total,
            }
            for tagger, phase in self._session_keys()
        ]
        return {
            "total_samples": total,
            "accepted_events": len(self.store.events),
            "open_phases": sorted(self.open_phases),
            "sessions": sessions,
        }

    def agreement(self, level: str = "interval", variant: str = "a") -> dict:
        """Phase-1-vs-phase-2 agreement per tagger plus an overall alpha.

        Cells without enough usable data come back as insufficient
        markers rather than errors, so the endpoint is always callable.
        """
        records = [
            (e.sample_id, e.tagger, e.phase, e.score) for e in self.store.events
        ]
        return agreement_tables(records, level=level, variant=variant)

    def export(self) -> list[CaptionSample]:
        """The corpus with raw_scores rebuilt from the event log."""
        ratings: dict[str, list[RawScore]] = {s.sample_id: [] for s in self.samples}
        for event in self.store.events:
            ratings[event.sample_id].append(
                RawScore(tagger=event.tagger, phase=event.phase, score=event.score)
            )
        exported = []
        for sample in self.samples:
            scores = sorted(ratings[sample.sample_id], key=lambda r: (r.tagger, r.phase))
            exported.append(
                CaptionSample(
                    sample_id=sample.sample_id,
                    image_id=sample.image_id,
                    model_id=sample.model_id,
                    candidate=sample.candidate,
                    references=list(sample.references),
                    source=sample.source,
                    raw_scores=scores,
                )
            )
        return exported

    def export_text(self) -> str:
        buffer = io.StringIO()
        write_corpus(self.export(), buffer)
        return buffer.getvalue()


def create_app(service: AnnotationService):
    """The FastAPI app wrapping an AnnotationService."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="caption annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestError)
    async def request_error_handler(request: Request, exc: RequestError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    @app.get("/api/next")
    def next_item(tagger: str = "", phase: int = 1):
        return service.next_item(tagger, phase)

    @app.post("/api/score")
    async def post_score(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise RequestError(400, "body must be a JSON object") from None
        if not isinstance(body, dict):
            raise RequestError(400, "body must be a JSON object")
        missing = [k for k in ("sample_id", "tagger", "phase", "score") if k not in body]
        if missing:
            raise RequestError(400, f"missing fields: {', '.join(missing)}")
        try:
            phase = int(body["phase"])
        except (TypeError, ValueError):
            raise RequestError(400, "phase must be an integer") from None
        return service.post_score(
            str(body["sample_id"]), str(body["tagger"]), phase, body["score"]
        )

    @app.get("/api/progress")
    def progress():
        return service.progress()

    @app.get("/api/agreement")
    def agreement(level: str = "interval", variant: str = "a"):
        try:
            return service.agreement(level=level, variant=variant)
        except ValueError as exc:
            raise RequestError(400, str(exc)) from None

    @app.get("/api/export")
    def export():
        return PlainTextResponse(
            service.export_text(), media_type="application/x-ndjson"
        )

    @app.post("/api/phase/open")
    async def open_phase(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise RequestError(400, "body must be a JSON object") from None
        if not isinstance(body, dict) or "phase" not in body:
            raise RequestError(400, "body must carry a phase number")
        try:
            phase = int(body["phase"])
        except (TypeError, ValueError):
            raise RequestError(400, "phase must be an integer") from None
        return service.open_phase(phase)

    return app
