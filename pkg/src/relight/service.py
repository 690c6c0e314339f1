"""Session-oriented HTTP API for interactive relighting.

Upload a portrait bundle once (POST /v1/sessions), then relight
repeatedly from scribble payloads (POST /v1/sessions/{id}/relight).
Sessions are immutable after creation apart from cached results, live
in memory with a 30 minute TTL, and concurrent solves are capped by a
bounded worker pool. Relight responses are PNG bodies with solver
diagnostics in X-Relight-* headers; identical payloads yield identical
bytes (the ETag is the body hash, If-None-Match is honored).

JSON schemas for the wire formats live in the repo under api/.
"""

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .codecs import decode_png, decode_pfm, encode_png
from .completion import CompletionParams
from .errors import ContractError, DecodeError, SolverError
from .image import ImageF, Mask, linear_to_srgb, srgb_to_linear
from .pipeline import (PortraitBundle, encode_relit_png, make_completion_cache,
                       relight_portrait, scribble_from_runs)
from .shading import NormalMap, normals_from_png16
from .skinfill import parse_hex_color

SCHEMA_VERSION = 1
MAX_SIDE = 2048
SESSION_TTL_S = 30 * 60
MAX_WORKERS = 4


class RunModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    y: int
    x0: int
    n: int
    lab: Optional[tuple[float, float, float]] = None
    erase: bool = False


class ScribbleModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    width: int
    height: int
    runs: list[RunModel]


class ParamsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    data_weight: Optional[float] = None
    normal_sharpness: Optional[float] = None
    connectivity: Optional[int] = None
    solve_h: Optional[int] = None
    tol: Optional[float] = None
    max_iter: Optional[int] = None


class RelightRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    schema_version: int = SCHEMA_VERSION
    scribble: ScribbleModel
    skin_tone: Optional[str] = Field(default=None, pattern=r"^#[0-9a-fA-F]{6}$")
    params: Optional[ParamsModel] = None


@dataclass
class Session:
    id: str
    bundle: PortraitBundle
    cache: object
    created_at: float
    last_shading_png: Optional[bytes] = None
    lock: threading.Lock = dc_field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, ttl_s=SESSION_TTL_S):
        self._items = {}
        self._lock = threading.Lock()
        self.ttl_s = ttl_s

    def put(self, session):
        with self._lock:
            self._prune()
            self._items[session.id] = session

    def get(self, sid):
        with self._lock:
            self._prune()
            return self._items.get(sid)

    def delete(self, sid):
        with self._lock:
            return self._items.pop(sid, None) is not None

    def _prune(self):
        cutoff = time.time() - self.ttl_s
        for sid in [s for s, v in self._items.items() if v.created_at < cutoff]:
            del self._items[sid]


def _error(status, message, **extra):
    return JSONResponse(status_code=status,
                        content={"schema_version": SCHEMA_VERSION,
                                 "error": message, **extra})


async def _read_upload(upload: UploadFile):
    return await upload.read()


def _decode_normals(blob, subject):
    if blob[:2] in (b"PF", b"Pf"):
        return NormalMap(decode_pfm(blob), subject)
    return normals_from_png16(decode_png(blob), subject)


def _decode_mask(blob) -> Mask:
    img = decode_png(blob)
    data = img.data.mean(axis=-1) if img.channels > 1 else img.data[..., 0]
    return Mask(data)


def create_app(ui_dir=None, max_workers=MAX_WORKERS, session_ttl_s=SESSION_TTL_S):
    app = FastAPI(title="relight service", version=__version__)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = SessionStore(ttl_s=session_ttl_s)
    solve_gate = threading.Semaphore(max_workers)
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        # a bundle missing parts is a malformed upload (400); malformed or
        # unknown JSON payload fields are contract violations (422)
        status = 400 if request.url.path.endswith("/sessions") else 422
        return _error(status, "request validation failed",
                      detail=json.loads(json.dumps(exc.errors(), default=str)))

    @app.get("/healthz")
    def healthz():
        return {"schema_version": SCHEMA_VERSION, "status": "ok",
                "version": __version__}

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request,
                             image: UploadFile,
                             normals: UploadFile,
                             subject_mask: UploadFile,
                             skin_mask: Optional[UploadFile] = None,
                             albedo: Optional[UploadFile] = None):
        try:
            image_img = decode_png(await _read_upload(image))
        except DecodeError as e:
            return _error(400, f"image: {e}", field="image")
        if image_img.height > MAX_SIDE or image_img.width > MAX_SIDE:
            return _error(413, f"image exceeds {MAX_SIDE}x{MAX_SIDE}", field="image")
        if image_img.channels == 4:
            image_img = ImageF(image_img.data[..., :3], "srgb")
        if image_img.channels == 1:
            image_img = ImageF(np.repeat(image_img.data, 3, axis=-1), "srgb")
        linear = srgb_to_linear(image_img)
        try:
            subject = _decode_mask(await _read_upload(subject_mask))
        except DecodeError as e:
            return _error(400, f"subject_mask: {e}", field="subject_mask")
        try:
            subject.require_match(linear)
        except ContractError as e:
            return _error(422, str(e), field="subject_mask")
        try:
            normal_map = _decode_normals(await _read_upload(normals), subject)
        except DecodeError as e:
            return _error(400, f"normals: {e}", field="normals")
        except ContractError as e:
            return _error(422, str(e), field="normals")
        skin = None
        if skin_mask is not None:
            try:
                skin = _decode_mask(await _read_upload(skin_mask))
                skin.require_match(linear)
            except DecodeError as e:
                return _error(400, f"skin_mask: {e}", field="skin_mask")
            except ContractError as e:
                return _error(422, str(e), field="skin_mask")
        albedo_img = None
        if albedo is not None:
            try:
                albedo_img = decode_pfm(await _read_upload(albedo))
            except DecodeError as e:
                return _error(400, f"albedo: {e}", field="albedo")
        try:
            bundle = PortraitBundle(image=linear, normals=normal_map,
                                    subject=subject, skin=skin, albedo=albedo_img)
            cache = make_completion_cache(bundle)
        except ContractError as e:
            return _error(422, str(e))
        session = Session(id=secrets.token_hex(16), bundle=bundle, cache=cache,
                          created_at=time.time())
        store.put(session)
        return {"schema_version": SCHEMA_VERSION, "session_id": session.id,
                "width": linear.width, "height": linear.height}

    @app.post("/v1/sessions/{sid}/relight")
    def relight(sid: str, body: RelightRequest, request: Request):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown or expired session")
        if body.schema_version != SCHEMA_VERSION:
            return _error(422, f"unsupported schema_version {body.schema_version}")
        payload = body.scribble.model_dump()
        try:
            scribble = scribble_from_runs(
                payload, (session.bundle.image.height, session.bundle.image.width))
        except ContractError as e:
            return _error(422, str(e), field="scribble")
        inside = scribble.valid.data * (session.bundle.subject.data > 0.5)
        if inside.sum() <= 0:
            return _error(409, "scribble has no valid pixel inside the subject")
        overrides = {k: v for k, v in (body.params.model_dump().items()
                                       if body.params else []) if v is not None}
        try:
            params = CompletionParams(**overrides)
        except ContractError as e:
            return _error(422, str(e), field="params")
        use_cache = session.cache if not overrides else None
        tone = parse_hex_color(body.skin_tone) if body.skin_tone else None
        with solve_gate:
            try:
                relit, shading, diag = relight_portrait(
                    session.bundle, scribble, params, skin_tone=tone,
                    cache=use_cache)
            except ContractError as e:
                return _error(422, str(e))
            except SolverError as e:
                return _error(500, str(e), residual=e.residual)
        png = encode_relit_png(relit)
        with session.lock:
            session.last_shading_png = encode_png(linear_to_srgb(shading), bits=8)
        etag = '"' + hashlib.sha256(png).hexdigest() + '"'
        headers = {
            "ETag": etag,
            "X-Schema-Version": str(SCHEMA_VERSION),
            "X-Relight-Iterations": str(diag["iterations"]),
            "X-Relight-Residual": f"{diag['residual']:.6e}",
            "X-Relight-Elapsed-Ms": f"{diag['elapsed_ms']:.1f}",
        }
        if request.headers.get("if-none-match") == etag:
            return Response(status_code=304, headers=headers)
        return Response(content=png, media_type="image/png", headers=headers)

    @app.get("/v1/sessions/{sid}/shading")
    def shading_preview(sid: str):
        session = store.get(sid)
        if session is None:
            return _error(404, "unknown or expired session")
        with session.lock:
            png = session.last_shading_png
        if png is None:
            return _error(404, "no completed shading yet for this session")
        return Response(content=png, media_type="image/png",
                        headers={"X-Schema-Version": str(SCHEMA_VERSION)})

    @app.delete("/v1/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        if not store.delete(sid):
            return _error(404, "unknown or expired session")
        return Response(status_code=204)

    if ui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
