"""HTTP/JSON service exposing scene sessions and the judging workflow.

One writer per session (a lock serializes commands); documents persist to
disk after every applied command so a restart restores the latest revision.
Change events are long-polled via GET /sessions/{id}/events?since=rev.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query, Response

from . import editing
from .errors import (
    MajutsuError,
    NothingToRedo,
    NothingToUndo,
    ParseError,
    SchemaViolation,
    UnknownInstance,
    UnknownMaterial,
    UnknownVersion,
)
from .gltf import export_gltf
from .ranking import (
    ComparisonRecord,
    DIMENSIONS,
    rank_methods,
    records_from_jsonl,
    schedule_comparisons,
)
from .scene import SceneDocument, load_document, save_document

LONG_POLL_CAP_S = 30.0


class Session:
    def __init__(self, session_id: str, doc: SceneDocument, store: Path | None):
        self.id = session_id
        self.doc = doc
        self.lock = threading.Lock()
        self.changed = threading.Condition()
        self.store = store

    def snapshot(self) -> SceneDocument:
        return self.doc

    def commit(self, doc: SceneDocument):
        self.doc = doc
        if self.store is not None:
            self.store.write_bytes(save_document(doc))
        with self.changed:
            self.changed.notify_all()


class EvalState:
    """Judging schedule, verdict records, and leaderboard state."""

    def __init__(self, manifest: dict | None, seed: int, records_path: Path | None):
        self.images: dict[str, list[str]] = (manifest or {}).get("methods", {})
        self.seed = seed
        self.records_path = records_path
        self.lock = threading.Lock()
        self.schedules: dict[str, list[dict]] = {}
        self.verdicts: dict[tuple[str, int], ComparisonRecord] = {}
        self.records: list[ComparisonRecord] = []
        self._counter = 0
        if records_path is not None and records_path.is_file():
            self.records = records_from_jsonl(records_path.read_text())
            self._counter = len(self.records)

    def image_known(self, image_id: str) -> bool:
        return any(image_id in imgs for imgs in self.images.values())

    def schedule(self, dimension: str) -> list[dict]:
        with self.lock:
            if dimension not in self.schedules:
                self.schedules[dimension] = schedule_comparisons(
                    self.images, dimension, seed=self.seed
                )
            return self.schedules[dimension]

    def submit(self, dimension: str, index: int, winner: str, judge: str) -> ComparisonRecord:
        with self.lock:
            key = (dimension, index)
            if key in self.verdicts:
                raise KeyError("duplicate verdict")
            schedule = self.schedules.get(dimension)
            if schedule is None or not 0 <= index < len(schedule):
                raise IndexError("unknown schedule slot")
            pair = schedule[index]
            self._counter += 1
            record = ComparisonRecord(
                dimension=dimension,
                image_a=pair["image_a"],
                image_b=pair["image_b"],
                method_a=pair["method_a"],
                method_b=pair["method_b"],
                winner=winner,
                judge=judge,
                timestamp=float(self._counter),
            )
            self.verdicts[key] = record
            self.records.append(record)
            if self.records_path is not None:
                with self.records_path.open("a") as fh:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            return record


def _error_payload(exc: Exception) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ParseError):
        payload["position"] = exc.position
        payload["expected"] = exc.expected
    return payload


def create_app(
    state_dir: Path | str | None = None,
    eval_manifest: dict | None = None,
    seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="majutsu", version="0.1.0")
    state_dir = Path(state_dir) if state_dir is not None else None
    if state_dir is not None:
        state_dir.mkdir(parents=True, exist_ok=True)
    sessions: dict[str, Session] = {}
    eval_state = EvalState(
        eval_manifest,
        seed,
        (state_dir / "verdicts.jsonl") if state_dir is not None else None,
    )
    app.state.sessions = sessions
    app.state.eval = eval_state

    if state_dir is not None:
        for path in sorted(state_dir.glob("session_*.majutsu.json")):
            sid = path.stem.replace("session_", "").replace(".majutsu", "")
            try:
                sessions[sid] = Session(sid, load_document(path.read_bytes()), path)
            except MajutsuError:
                continue

    def session_or_404(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")
        return session

    def _run_pipeline_session(options: dict) -> SceneDocument:
        import tempfile

        from .pipeline import PipelineConfig, run_pipeline
        from .providers import ProviderConfig

        out_dir = Path(tempfile.mkdtemp(prefix="session_", dir=state_dir))
        try:
            cfg = PipelineConfig(
                out_dir=out_dir,
                prompt=options.get("prompt", "generated session scene"),
                provider=ProviderConfig(map_size=int(options.get("map_size", 512))),
                seed=int(options.get("seed", 0)),
            )
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        run_pipeline(cfg)
        return load_document((out_dir / "scene.majutsu.json").read_bytes())

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(...)):
        if "document" in body:
            try:
                doc = load_document(json.dumps(body["document"]).encode())
            except (SchemaViolation, UnknownVersion) as exc:
                raise HTTPException(400, detail=_error_payload(exc))
        elif "path" in body:
            path = Path(body["path"])
            if not path.is_file():
                raise HTTPException(404, detail=f"no scene file at {path}")
            doc = load_document(path.read_bytes())
        elif "pipeline" in body:
            doc = _run_pipeline_session(body["pipeline"])
        else:
            raise HTTPException(400, detail="body needs 'document', 'path', or 'pipeline'")
        sid = body.get("session_id") or uuid.uuid4().hex[:12]
        store = (state_dir / f"session_{sid}.majutsu.json") if state_dir is not None else None
        session = Session(sid, doc, store)
        session.commit(doc)
        sessions[sid] = session
        return {"session_id": sid, "revision": doc.revision}

    @app.get("/sessions/{session_id}/scene")
    def get_scene(session_id: str, format: str = Query("json")):
        session = session_or_404(session_id)
        doc = session.snapshot()
        if format == "glb":
            return Response(content=export_gltf(doc), media_type="model/gltf-binary")
        return Response(content=save_document(doc), media_type="application/json")

    @app.post("/sessions/{session_id}/commands")
    def post_command(session_id: str, body: dict = Body(...)):
        session = session_or_404(session_id)
        with session.lock:
            doc = session.snapshot()
            base = body.get("base_revision")
            if base is not None and int(base) != doc.revision:
                raise HTTPException(
                    409,
                    detail={"error": "RevisionConflict", "current_revision": doc.revision},
                )
            try:
                if "text" in body:
                    cmd = editing.parse_command(body["text"])
                elif "command" in body:
                    cmd = editing.EditCommand.from_dict(body["command"])
                else:
                    raise HTTPException(400, detail="body needs 'text' or 'command'")
                new_doc = editing.apply_command(doc, cmd)
            except (UnknownInstance,) as exc:
                raise HTTPException(404, detail=_error_payload(exc))
            except (ParseError, UnknownMaterial, MajutsuError, ValueError) as exc:
                raise HTTPException(400, detail=_error_payload(exc))
            session.commit(new_doc)
        return {"diff": editing.doc_diff(doc, new_doc), "revision": new_doc.revision}

    def _history(session_id: str, fn, conflict_error):
        session = session_or_404(session_id)
        with session.lock:
            doc = session.snapshot()
            try:
                new_doc = fn(doc)
            except conflict_error as exc:
                raise HTTPException(409, detail=_error_payload(exc))
            session.commit(new_doc)
        return {"diff": editing.doc_diff(doc, new_doc), "revision": new_doc.revision}

    @app.post("/sessions/{session_id}/undo")
    def post_undo(session_id: str):
        return _history(session_id, editing.undo, NothingToUndo)

    @app.post("/sessions/{session_id}/redo")
    def post_redo(session_id: str):
        return _history(session_id, editing.redo, NothingToRedo)

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = Query(0), timeout_s: float = Query(25.0)):
        session = session_or_404(session_id)
        deadline = time.monotonic() + min(timeout_s, LONG_POLL_CAP_S)
        while session.snapshot().revision <= since:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            with session.changed:
                session.changed.wait(timeout=min(remaining, 0.5))
        doc = session.snapshot()
        return {
            "revision": doc.revision,
            "changed": doc.revision > since,
            "can_undo": editing.can_undo(doc),
            "can_redo": editing.can_redo(doc),
        }

    @app.get("/eval/schedule")
    def get_schedule(dimension: str = Query("SVC")):
        if dimension not in DIMENSIONS:
            raise HTTPException(400, detail=f"dimension must be one of {DIMENSIONS}")
        if not eval_state.images:
            raise HTTPException(404, detail="no evaluation manifest configured")
        schedule = eval_state.schedule(dimension)
        judged = [
            index for (dim, index) in eval_state.verdicts if dim == dimension
        ]
        return {"dimension": dimension, "pairs": schedule, "judged": sorted(judged)}

    @app.post("/eval/verdicts", status_code=201)
    def post_verdict(body: dict = Body(...)):
        for key in ("dimension", "index", "winner"):
            if key not in body:
                raise HTTPException(400, detail=f"verdict needs {key!r}")
        if body["winner"] not in ("A", "B"):
            raise HTTPException(400, detail="winner must be 'A' or 'B'")
        dimension = body["dimension"]
        if dimension not in DIMENSIONS:
            raise HTTPException(400, detail=f"dimension must be one of {DIMENSIONS}")
        for image_key in ("image_a", "image_b"):
            if image_key in body and not eval_state.image_known(body[image_key]):
                raise HTTPException(404, detail=f"unknown image id {body[image_key]!r}")
        try:
            record = eval_state.submit(
                dimension, int(body["index"]), body["winner"], body.get("judge", "")
            )
        except KeyError:
            raise HTTPException(409, detail="verdict already submitted for this slot")
        except IndexError:
            raise HTTPException(404, detail="unknown schedule slot")
        return {"recorded": record.to_dict(), "total_records": len(eval_state.records)}

    @app.get("/eval/leaderboard")
    def get_leaderboard():
        methods = sorted(eval_state.images)
        boards = rank_methods(eval_state.records, methods=methods or None)
        return {
            "record_count": len(eval_state.records),
            "dimensions": {
                dim: [row.to_dict() for row in rows] for dim, rows in boards.items()
            },
        }

    return app


def serve(
    host: str = "127.0.0.1",
    port: int = 8420,
    state_dir: Path | str | None = None,
    eval_manifest_path: Path | str | None = None,
    seed: int = 0,
):
    import uvicorn

    manifest = None
    if eval_manifest_path is not None:
        manifest = json.loads(Path(eval_manifest_path).read_text())
    app = create_app(state_dir=state_dir, eval_manifest=manifest, seed=seed)
    uvicorn.run(app, host=host, port=port, log_level="warning")
