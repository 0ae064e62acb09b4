"""HTTP service orchestrating the manual-intervention workflow.

Tasks wrap one fused image each. Edits append to an event log guarded by
optimistic versioning: a mutation carries the version it was based on
and is rejected (with the current version) if the task moved on. The
finalized raster is always reproducible by replaying the log against the
fused result.
"""

from __future__ import annotations

import datetime
import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from . import fusion, instances, manifest, raster
from .errors import (
    ConflictError,
    GoneError,
    NotFoundError,
    PreconditionError,
    SegfuseError,
    UnresolvedPixelsError,
    ValidationError,
)
from .workspace import Workspace

ANNOTATOR_HEADER = "x-annotator-id"

_STATUS_FOR_CODE = {
    "not_found": 404,
    "conflict": 409,
    "gone": 410,
    "precondition_failed": 412,
    "validation": 422,
    "format": 422,
    "error": 500,
}


class TaskState:
    OPEN = "open"
    IN_PROGRESS = "in_progress"
    FINALIZED = "finalized"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


@dataclass(frozen=True)
class Session:
    annotator_id: str
    started_at: str
    ended_at: str


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    image_id: str
    version: int = 0
    state: str = TaskState.OPEN
    edits: tuple[fusion.EditOp, ...] = ()
    instance_edits: tuple[instances.InstanceEdit, ...] = ()
    sessions: tuple[Session, ...] = ()
    refs: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "image_id": self.image_id,
            "version": self.version,
            "state": self.state,
            "edits": [e.to_json() for e in self.edits],
            "instance_edits": [instances.instance_edit_to_json(e) for e in self.instance_edits],
            "sessions": [
                {"annotator_id": s.annotator_id, "started_at": s.started_at, "ended_at": s.ended_at}
                for s in self.sessions
            ],
            "refs": self.refs,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TaskRecord":
        return cls(
            task_id=d["task_id"],
            image_id=d["image_id"],
            version=d["version"],
            state=d["state"],
            edits=tuple(fusion.EditOp.from_json(e) for e in d["edits"]),
            instance_edits=tuple(
                instances.instance_edit_from_json(e) for e in d["instance_edits"]
            ),
            sessions=tuple(Session(**s) for s in d["sessions"]),
            refs=d.get("refs", {}),
        )


class TaskStore:
    """Disk-backed task registry. A single lock serializes mutations; the
    observable contract is the per-task version check."""

    def __init__(self, ws: Workspace):
        self.ws = ws
        self._lock = threading.RLock()
        self._tasks: dict[str, TaskRecord] = {}
        self._fused: dict[str, fusion.FusedResult] = {}
        for name in sorted(os.listdir(ws.tasks_dir())):
            if name.endswith(".json"):
                with open(os.path.join(ws.tasks_dir(), name)) as f:
                    rec = TaskRecord.from_json(json.load(f))
                self._tasks[rec.task_id] = rec

    def _persist(self, rec: TaskRecord) -> None:
        path = os.path.join(self.ws.tasks_dir(), rec.task_id + ".json")
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(rec.to_json(), f, indent=2)
        os.replace(tmp, path)

    def fused(self, image_id: str) -> fusion.FusedResult:
        if image_id not in self._fused:
            self._fused[image_id] = self.ws.load_fused(image_id)
        return self._fused[image_id]

    def list_tasks(self, state: str | None = None) -> list[TaskRecord]:
        with self._lock:
            tasks = sorted(self._tasks.values(), key=lambda t: t.task_id)
        if state:
            tasks = [t for t in tasks if t.state == state]
        return tasks

    def get(self, task_id: str) -> TaskRecord:
        with self._lock:
            if task_id not in self._tasks:
                raise NotFoundError(f"no task {task_id!r}")
            return self._tasks[task_id]

    def create(self, image_id: str) -> TaskRecord:
        with self._lock:
            entry = self.ws.find_entry(image_id)
            if entry.status is not manifest.Status.FUSED:
                raise PreconditionError(
                    f"image {image_id!r} has status {entry.status.value!r}, expected 'fused'"
                )
            for t in self._tasks.values():
                if t.image_id == image_id and t.state != TaskState.FINALIZED:
                    raise ConflictError(f"task {t.task_id!r} is already open for {image_id!r}")
            fused = self.fused(image_id)
            overlay = fusion.uncertainty_map(fused)
            refs = {
                "image": None,
                "labels": self.ws.put_asset(
                    raster.encode_label_map(fused.labels, self.ws.catalog)
                ),
                "uncertainty": self.ws.put_asset(
                    raster.encode_label_map(overlay, self.ws.catalog)
                ),
                "confidence": self.ws.put_asset(
                    raster.encode_id_map(fusion.quantize_confidence(fused.confidence.scores))
                ),
                "reliable": self.ws.put_asset(raster.encode_mask(fused.reliable)),
            }
            with open(self.ws.image_path(entry), "rb") as f:
                refs["image"] = self.ws.put_asset(f.read())
            rec = TaskRecord(task_id="task-" + uuid.uuid4().hex[:12], image_id=image_id, refs=refs)
            self._tasks[rec.task_id] = rec
            self._persist(rec)
            return rec

    def _check_version(self, rec: TaskRecord, base_version: int) -> None:
        if rec.state == TaskState.FINALIZED:
            raise GoneError(f"task {rec.task_id!r} is finalized")
        if base_version != rec.version:
            raise ConflictError(
                f"base_version {base_version} is stale; task is at version {rec.version}",
                current_version=rec.version,
            )

    def _with_session(self, rec: TaskRecord, annotator_id: str) -> TaskRecord:
        now = _now()
        if rec.sessions and rec.sessions[-1].annotator_id == annotator_id:
            sessions = rec.sessions[:-1] + (replace(rec.sessions[-1], ended_at=now),)
        else:
            sessions = rec.sessions + (Session(annotator_id, now, now),)
        return replace(rec, sessions=sessions)

    def submit_edits(
        self, task_id: str, base_version: int, edits: list[fusion.EditOp], annotator_id: str
    ) -> TaskRecord:
        with self._lock:
            rec = self.get(task_id)
            self._check_version(rec, base_version)
            fused = self.fused(rec.image_id)
            h, w = fused.labels.shape
            for e in edits:
                if e.row >= h or e.col_end > w:
                    raise ValidationError(
                        f"span (row={e.row}, cols [{e.col_start}, {e.col_end}))"
                        f" exceeds {h}x{w} bounds"
                    )
                if e.label >= len(self.ws.catalog):
                    raise ValidationError(f"label {e.label} not in catalog")
            rec = self._with_session(rec, annotator_id)
            rec = replace(
                rec,
                edits=rec.edits + tuple(edits),
                version=rec.version + 1,
                state=TaskState.IN_PROGRESS,
            )
            self._tasks[task_id] = rec
            self._persist(rec)
            return rec

    def submit_instance_edits(
        self,
        task_id: str,
        base_version: int,
        edits: list[instances.InstanceEdit],
        annotator_id: str,
    ) -> TaskRecord:
        with self._lock:
            rec = self.get(task_id)
            self._check_version(rec, base_version)
            rec = self._with_session(rec, annotator_id)
            rec = replace(
                rec,
                instance_edits=rec.instance_edits + tuple(edits),
                version=rec.version + 1,
                state=TaskState.IN_PROGRESS,
            )
            self._tasks[task_id] = rec
            self._persist(rec)
            return rec

    def finalize(self, task_id: str, base_version: int, annotator_id: str) -> TaskRecord:
        with self._lock:
            rec = self.get(task_id)
            self._check_version(rec, base_version)
            fused = self.fused(rec.image_id)
            final = fusion.merge_manual(fused, list(rec.edits))  # UnresolvedPixelsError if gaps
            inst = instances.split_instances(final)
            if rec.instance_edits:
                inst = instances.apply_instance_edits(inst, list(rec.instance_edits))

            out_dir = self.ws.finalized_dir(rec.image_id)
            raster.write_label_map(os.path.join(out_dir, "labels.png"), final, self.ws.catalog)
            instances.save_instance_map(
                inst,
                os.path.join(out_dir, "instances.png"),
                os.path.join(out_dir, "instances.json"),
            )
            refs = dict(rec.refs)
            refs["finalized_labels"] = self.ws.put_asset(
                raster.encode_label_map(final, self.ws.catalog)
            )
            refs["finalized_instances"] = self.ws.put_asset(raster.encode_id_map(inst.ids))

            entry = self.ws.find_entry(rec.image_id)
            rel = os.path.join("finalized", rec.image_id)
            self.ws.update_entry(
                manifest.entry_replace(
                    entry,
                    status=manifest.Status.FINALIZED,
                    semantic_ref=os.path.join(rel, "labels.png"),
                    instance_ref=os.path.join(rel, "instances.png"),
                )
            )
            rec = self._with_session(rec, annotator_id)
            rec = replace(
                rec, version=rec.version + 1, state=TaskState.FINALIZED, refs=refs
            )
            self._tasks[task_id] = rec
            self._persist(rec)
            return rec

    def remaining_uncertain(self, rec: TaskRecord) -> int:
        fused = self.fused(rec.image_id)
        count, _ = fusion.remaining_uncertain(fused, list(rec.edits))
        return count

    def task_payload(self, rec: TaskRecord) -> dict:
        fused = self.fused(rec.image_id)
        return {
            "task_id": rec.task_id,
            "image_id": rec.image_id,
            "version": rec.version,
            "state": rec.state,
            "refs": rec.refs,
            "catalog": self.ws.catalog.to_json(),
            "edits": [e.to_json() for e in rec.edits],
            "edits_applied": len(rec.edits),
            "instance_edits_applied": len(rec.instance_edits),
            "sessions": [
                {"annotator_id": s.annotator_id, "started_at": s.started_at, "ended_at": s.ended_at}
                for s in rec.sessions
            ],
            "stats": {
                "reliable_fraction": fused.stats.reliable_fraction,
                "per_class_reliable_fraction": {
                    str(k): v for k, v in fused.stats.per_class_reliable_fraction.items()
                },
                "remaining_uncertain": self.remaining_uncertain(rec),
            },
        }


def _error_response(err: SegfuseError) -> JSONResponse:
    body = {"code": err.code, "message": str(err)}
    if isinstance(err, ConflictError) and err.current_version is not None:
        body["current_version"] = err.current_version
    if isinstance(err, UnresolvedPixelsError):
        body["remaining"] = err.count
        body["first"] = list(err.first)
    return JSONResponse(status_code=_STATUS_FOR_CODE[err.code], content=body)


def create_app(ws: Workspace) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="segfuse annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = TaskStore(ws)
    app.state.store = store

    @app.exception_handler(SegfuseError)
    async def on_domain_error(request: Request, err: SegfuseError):
        return _error_response(err)

    def annotator(request: Request) -> str:
        return request.headers.get(ANNOTATOR_HEADER, "anonymous")

    @app.get("/tasks")
    def list_tasks(state: str | None = None):
        return {"tasks": [store.task_payload(t) for t in store.list_tasks(state)]}

    @app.post("/tasks", status_code=201)
    async def create_task(request: Request):
        body = await request.json()
        if "image_id" not in body:
            raise ValidationError("body must contain image_id")
        rec = store.create(body["image_id"])
        return store.task_payload(rec)

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        return store.task_payload(store.get(task_id))

    @app.post("/tasks/{task_id}/edits")
    async def submit_edits(task_id: str, request: Request):
        body = await request.json()
        if "base_version" not in body or "edits" not in body:
            raise ValidationError("body must contain base_version and edits")
        edits = [fusion.EditOp.from_json(e) for e in body["edits"]]
        rec = store.submit_edits(task_id, int(body["base_version"]), edits, annotator(request))
        return store.task_payload(rec)

    @app.post("/tasks/{task_id}/instance-edits")
    async def submit_instance_edits(task_id: str, request: Request):
        body = await request.json()
        if "base_version" not in body or "edits" not in body:
            raise ValidationError("body must contain base_version and edits")
        edits = [instances.instance_edit_from_json(e) for e in body["edits"]]
        rec = store.submit_instance_edits(
            task_id, int(body["base_version"]), edits, annotator(request)
        )
        return store.task_payload(rec)

    @app.post("/tasks/{task_id}/finalize")
    async def finalize(task_id: str, request: Request):
        body = await request.json()
        if "base_version" not in body:
            raise ValidationError("body must contain base_version")
        rec = store.finalize(task_id, int(body["base_version"]), annotator(request))
        return store.task_payload(rec)

    @app.get("/tasks/{task_id}/export")
    def export(task_id: str):
        rec = store.get(task_id)
        if rec.state != TaskState.FINALIZED:
            raise PreconditionError(f"task {task_id!r} is not finalized")
        return {
            "image_id": rec.image_id,
            "labels": rec.refs["finalized_labels"],
            "instances": rec.refs["finalized_instances"],
        }

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        entry = ws.find_entry(image_id)
        path = ws.image_path(entry)
        if not os.path.exists(path):
            raise NotFoundError(f"image file for {image_id!r} missing")
        return FileResponse(path, media_type="image/png")

    @app.get("/rasters/{ref}")
    def get_raster(ref: str):
        return FileResponse(ws.asset_path(ref), media_type="image/png")

    return app


def serve(workdir: str, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(Workspace(workdir)), host=host, port=port, log_level="warning")
