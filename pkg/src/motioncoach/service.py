"""HTTP service exposing the CLI's records.

Every request carries its motions inline as motion-file text, so requests
share nothing but the read-only config and model loaded at startup.
"""
from __future__ import annotations

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response

from . import __version__, motion_io
from .alignment import align
from .config import PipelineConfig
from .errors import (
    ConfigurationError,
    InvalidConfigError,
    InvalidInputError,
    MotionCoachError,
    ParseError,
    ServiceError,
    StageError,
)
from .forest import ForestModel
from .pipeline import dumps_record, make_service, normalized, posematch_record, run_sequences, score_record

JSON = "application/json"


def _reply(record, status: int = 200, headers: dict | None = None) -> Response:
    return Response(dumps_record(record), status_code=status, media_type=JSON, headers=headers)


def _status_for(exc: Exception) -> int:
    if isinstance(exc, ServiceError):
        return 502
    if isinstance(exc, ParseError):
        return 400
    if isinstance(exc, (InvalidInputError, InvalidConfigError)):
        return 422
    return 500


def _error(stage: str, exc: Exception, partial: dict | None = None) -> Response:
    rec = {"error": str(exc), "stage": stage, "type": type(exc).__name__}
    if partial:
        rec["partial"] = partial
    return _reply(rec, _status_for(exc))


def _require(body: dict, *keys: str) -> dict:
    missing = [k for k in keys if k not in body]
    if missing:
        raise ParseError(f"request body is missing {', '.join(missing)}")
    return body


def _motions(body: dict):
    user = motion_io.loads(str(body["user"]), path="<user>", name="user")
    ref = motion_io.loads(str(body["ref"]), path="<ref>", name="ref")
    return user, ref


def create_app(config: PipelineConfig | None = None, model: ForestModel | None = None, service=None) -> FastAPI:
    config = config or PipelineConfig()
    app = FastAPI(title="motioncoach", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def bad_body(request: Request, exc: RequestValidationError):
        return _error("ingest", ParseError("request body must be a JSON object"))

    @app.get("/health")
    def health():
        return _reply({"status": "ok", "version": __version__})

    @app.post("/align")
    def post_align(body: dict = Body(...)):
        try:
            _require(body, "user", "ref")
            user, ref = _motions(body)
        except MotionCoachError as exc:
            return _error("ingest", exc)
        try:
            radius = body.get("fast_radius", config.fast_radius)
            result = align(normalized(user), normalized(ref), radius)
        except MotionCoachError as exc:
            return _error("alignment", exc)
        return _reply(result.to_record())

    @app.post("/score")
    def post_score(body: dict = Body(...)):
        try:
            _require(body, "user", "ref")
            user, ref = _motions(body)
            cfg = config.replace(segments=int(body.get("segments", config.segments)))
        except (MotionCoachError, ValueError) as exc:
            return _error("ingest", exc)
        try:
            u, r = normalized(user), normalized(ref)
            result = align(u, r, cfg.fast_radius)
        except MotionCoachError as exc:
            return _error("alignment", exc)
        try:
            return _reply(score_record(result, u, r, cfg))
        except MotionCoachError as exc:
            return _error("scoring", exc)

    @app.post("/posematch")
    def post_posematch(body: dict = Body(...)):
        try:
            _require(body, "user", "ref", "segment")
            user, ref = _motions(body)
            cfg = config.replace(segments=int(body.get("segments", config.segments)))
        except (MotionCoachError, ValueError) as exc:
            return _error("ingest", exc)
        try:
            frame = body.get("user_frame")
            rec = posematch_record(user, ref, int(body["segment"]), cfg, None if frame is None else int(frame))
        except MotionCoachError as exc:
            return _error("posematch", exc)
        return _reply(rec)

    @app.post("/feedback")
    def post_feedback(body: dict = Body(...)):
        try:
            _require(body, "user", "ref")
            user, ref = _motions(body)
        except MotionCoachError as exc:
            return _error("ingest", exc)
        method = body.get("method", "forest" if model is not None else "naive")
        try:
            svc = service or make_service(config, body.get("live"))
        except ConfigurationError as exc:
            return _error("completion", exc)
        try:
            result = run_sequences(user, ref, config, method, model, svc)
        except StageError as exc:
            return _error(exc.stage, exc.cause, exc.partial)
        except MotionCoachError as exc:
            return _error("pipeline", exc)
        timing = ",".join(f"{k}={v:.3f}" for k, v in result.timing.to_record().items())
        return _reply(result.record, headers={"X-Stage-Timing": timing})

    return app


def serve(config: PipelineConfig | None = None, host: str = "127.0.0.1", port: int = 8000, model=None) -> None:
    import uvicorn

    uvicorn.run(create_app(config, model), host=host, port=port)
