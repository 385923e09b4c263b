"""HTTP JSON API for the planning UI.

Sessions live in memory; mutations go through a single command endpoint
with optimistic concurrency (the envelope carries the revision the client
last saw; a mismatch is a 409). Reads are side-effect free. Slice images
are window/leveled server-side and returned as PNG so the client never
parses volume files.
"""
from __future__ import annotations

import io
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .applicator import TemplateConfig, hole_grid, needle_geometry, obturator_mesh, template_mesh
from .errors import ConflictError, InputError, StageError
from .geometry import RigidTransform
from .session import Session

SLICE_AXES = {"axial": 2, "sagittal": 0, "coronal": 1}


class SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, tuple[Session, threading.Lock]] = {}

    def create(self, config: TemplateConfig | None = None) -> Session:
        session = Session(config)
        with self._lock:
            self._sessions[session.id] = (session, threading.Lock())
        return session

    def get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._lock:
            entry = self._sessions.get(session_id)
        if entry is None:
            raise KeyError(session_id)
        return entry


def slice_png(session: Session, axis: str, index: int, window: float, level: float) -> bytes:
    from PIL import Image

    if session.volume is None:
        raise StageError("slice", "no volume loaded")
    if axis not in SLICE_AXES:
        raise InputError(f"axis must be one of {sorted(SLICE_AXES)}, got {axis!r}")
    vol = session.volume
    k = SLICE_AXES[axis]
    if not (0 <= index < vol.dims[k]):
        raise InputError(f"slice index {index} outside dims {vol.dims}")
    if window <= 0:
        raise InputError(f"window must be > 0, got {window}")
    if axis == "axial":
        plane = vol.voxels[:, :, index].T  # rows y, cols x
    elif axis == "sagittal":
        plane = vol.voxels[index, :, :].T  # rows z, cols y
    else:
        plane = vol.voxels[:, index, :].T  # rows z, cols x
    scaled = (np.asarray(plane, dtype=np.float64) - (level - window / 2.0)) / window
    u8 = np.clip(scaled * 255.0, 0, 255).astype(np.uint8)
    img = Image.fromarray(u8, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _mesh_json(mesh) -> dict:
    return {
        "vertices": [[float(x) for x in v] for v in mesh.vertices],
        "triangles": [[int(i) for i in t] for t in mesh.triangles],
    }


def session_mesh(session: Session, name: str) -> dict:
    """World-space meshes for the 3D view."""
    if name == "tumor":
        if session.tumor_mesh is None:
            raise StageError("meshes", "no tumor model set")
        return _mesh_json(session.tumor_mesh)
    if name in ("template", "obturator"):
        pose = session.current_pose()
        mesh = template_mesh(session.config) if name == "template" else obturator_mesh(session.config)
        return _mesh_json(mesh.transformed(pose))
    if name == "needles":
        pose = session.current_pose()
        out = {}
        holes = {h.id: h for h in hole_grid(session.config)}
        for state in session.needle_states.values():
            if state.selected and state.depth_mm > 0.0:
                _, mesh = needle_geometry(
                    holes[state.hole_id], state.depth_mm, state.radius_mm, session.config.bore_sides
                )
                out[state.hole_id] = _mesh_json(mesh.transformed(pose))
        return {"needles": out}
    raise InputError(f"unknown mesh {name!r} (template|obturator|tumor|needles)")


def create_app(store: SessionStore | None = None, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="brachyplan", version=__version__)
    store = store or SessionStore()
    app.state.store = store

    @app.exception_handler(InputError)
    async def _input_error(request: Request, exc: InputError):
        return JSONResponse(status_code=400, content={"error": "input", "detail": str(exc)})

    @app.exception_handler(StageError)
    async def _stage_error(request: Request, exc: StageError):
        return JSONResponse(
            status_code=409, content={"error": "stage", "stage": exc.stage, "detail": str(exc)}
        )

    @app.exception_handler(ConflictError)
    async def _conflict_error(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"error": "conflict", "detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        config = None
        body = await request.body()
        if body:
            import json

            doc = json.loads(body)
            if doc and doc.get("config"):
                config = TemplateConfig.from_jsonable(doc["config"])
        session = store.create(config)
        return {"id": session.id, "revision": session.revision}

    def _session(session_id: str) -> tuple[Session, threading.Lock]:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session, _ = _session(session_id)
        return session.state()

    @app.post("/sessions/{session_id}/commands")
    async def post_command(session_id: str, request: Request):
        import json

        session, lock = _session(session_id)
        try:
            envelope = json.loads(await request.body())
        except json.JSONDecodeError as e:
            raise InputError(f"command envelope is not valid JSON: {e}")
        if not isinstance(envelope, dict) or "type" not in envelope:
            raise InputError("command envelope must be {revision, type, payload}")
        with lock:  # one mutation at a time per session
            delta = session.apply(
                envelope["type"],
                envelope.get("payload") or {},
                expected_revision=envelope.get("revision"),
            )
        return delta

    @app.get("/sessions/{session_id}/slice")
    def get_slice(session_id: str, axis: str = "axial", index: int = 0,
                  window: float = 1000.0, level: float = 500.0):
        session, _ = _session(session_id)
        png = slice_png(session, axis, index, window, level)
        return Response(content=png, media_type="image/png")

    @app.get("/sessions/{session_id}/meshes/{name}")
    def get_mesh(session_id: str, name: str):
        session, _ = _session(session_id)
        return session_mesh(session, name)

    @app.get("/sessions/{session_id}/contours")
    def get_contours(session_id: str, axis: str = "axial", index: int = 0):
        session, _ = _session(session_id)
        return session.contours(axis, index)

    @app.get("/sessions/{session_id}/plan")
    def get_plan(session_id: str):
        session, _ = _session(session_id)
        return Response(content=session.export_plan_bytes(), media_type="application/json")

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(bind: str = "127.0.0.1:8077", ui_dir: str | None = None) -> None:
    """Run the HTTP service until interrupted (uvicorn handles signals)."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    app = create_app(ui_dir=ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
