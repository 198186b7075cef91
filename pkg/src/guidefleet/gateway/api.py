"""REST + SSE surface over a FleetService.

Every non-2xx response is an ApiError body {code, message, correlation_id};
the correlation id also appears in the structured request log, so any
response can be traced back through the audit trail.
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import itertools
import json
import queue
import secrets
import time

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from guidefleet.blobvault import CorruptCiphertext, Expired, InvalidSignature, TooLarge, UnknownBlob
from guidefleet.core.errors import FleetError
from guidefleet.gateway.events import MonitorEvent
from guidefleet.gateway.service import FleetService, UnknownReceptionRobot
from guidefleet.jobflow.engine import NoActiveJob, QueueFull, UnknownDestination, UnknownJob
from guidefleet.jobflow.model import JobState
from guidefleet.shadow import UnknownRobot

_correlation_counter = itertools.count(1)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class GuideRequestBody(BaseModel):
    destination_id: str
    reception_robot: str
    facial_blob_b64: str | None = None
    idempotency_key: str | None = None


class RobotCommandBody(BaseModel):
    kind: str


def _sse_format(event: MonitorEvent) -> str:
    return f"id: {event.event_id}\nevent: {event.kind}\ndata: {json.dumps(event.to_dict(), sort_keys=True)}\n\n"


def create_app(service: FleetService, heartbeat_s: float = 10.0) -> FastAPI:
    app = FastAPI(title="guidefleet", version="0.1.0")
    app.state.service = service
    # the operator dashboard is served from a separate static origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.middleware("http")
    async def correlation(request: Request, call_next):
        correlation_id = f"c{next(_correlation_counter):06d}-{secrets.token_hex(4)}"
        request.state.correlation_id = correlation_id
        response = await call_next(request)
        response.headers["x-correlation-id"] = correlation_id
        service.audit.record(
            "api_request",
            method=request.method,
            path=request.url.path,
            status=response.status_code,
            correlation_id=correlation_id,
        )
        return response

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={
                "code": exc.code,
                "message": exc.message,
                "correlation_id": getattr(request.state, "correlation_id", "unknown"),
            },
        )

    @app.exception_handler(FleetError)
    async def fleet_error_handler(request: Request, exc: FleetError):
        return JSONResponse(
            status_code=500,
            content={
                "code": "internal",
                "message": str(exc),
                "correlation_id": getattr(request.state, "correlation_id", "unknown"),
            },
        )

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/v1/guide-requests", status_code=201)
    async def create_guide_request(body: GuideRequestBody, request: Request, response: Response):
        if body.facial_blob_b64 is not None:
            try:
                blob = base64.b64decode(body.facial_blob_b64, validate=True)
            except (binascii.Error, ValueError):
                raise ApiError(400, "invalid-blob", "facial_blob_b64 is not valid base64")
        else:
            blob = b""
        service.audit.record(
            "api_command",
            command="guide-request",
            destination_id=body.destination_id,
            reception_robot=body.reception_robot,
            correlation_id=request.state.correlation_id,
        )
        try:
            job, existed = service.create_guide_request(
                body.destination_id, body.reception_robot, blob, body.idempotency_key
            )
        except UnknownDestination as exc:
            raise ApiError(400, "invalid-destination", str(exc))
        except UnknownReceptionRobot as exc:
            raise ApiError(404, "unknown-reception-robot", str(exc))
        except TooLarge as exc:
            raise ApiError(413, "blob-too-large", str(exc))
        except QueueFull as exc:
            raise ApiError(409, "queue-full", f"allocation queue full; job {exc.job_id} failed")
        if existed:
            response.status_code = 200
        elif job.state is JobState.ALLOCATING:
            response.status_code = 202  # queued, awaiting a free robot
        return {"job_id": job.job_id, "state": job.state.value}

    @app.get("/v1/robots")
    async def list_robots():
        return [v.to_dict() for v in service.shadows.list_shadows()]

    @app.get("/v1/robots/{robot_id}")
    async def get_robot(robot_id: str):
        try:
            return service.shadows.get_shadow(robot_id).to_dict()
        except UnknownRobot as exc:
            raise ApiError(404, "unknown-robot", str(exc))

    @app.post("/v1/robots/{robot_id}/commands", status_code=202)
    async def robot_command(robot_id: str, body: RobotCommandBody, request: Request):
        service.audit.record(
            "api_command",
            command=body.kind,
            robot_id=robot_id,
            correlation_id=request.state.correlation_id,
        )
        if body.kind != "abort":
            raise ApiError(400, "unsupported-command", f"operator command {body.kind!r} not supported")
        if not service.shadows.registered(robot_id):
            raise ApiError(404, "unknown-robot", f"unknown robot {robot_id!r}")
        try:
            job = service.engine.abort_robot(robot_id)
        except NoActiveJob as exc:
            raise ApiError(409, "no-active-job", str(exc))
        return {"job_id": job.job_id, "state": job.state.value}

    @app.get("/v1/jobs")
    async def list_jobs(state: str | None = None):
        job_state = None
        if state is not None:
            try:
                job_state = JobState(state)
            except ValueError:
                raise ApiError(400, "invalid-state", f"unknown job state {state!r}")
        return [j.to_dict() for j in service.engine.list_jobs(job_state)]

    @app.get("/v1/jobs/{job_id}")
    async def get_job(job_id: str):
        try:
            return service.engine.get(job_id).to_dict()
        except UnknownJob as exc:
            raise ApiError(404, "unknown-job", str(exc))

    @app.get("/v1/blobs/{blob_id}")
    async def fetch_blob(blob_id: str, exp: int, sig: str):
        try:
            data = service.fetch_blob(blob_id, exp, sig)
        except (Expired, InvalidSignature) as exc:
            raise ApiError(403, "forbidden", str(exc))
        except UnknownBlob as exc:
            raise ApiError(404, "unknown-blob", str(exc))
        except CorruptCiphertext as exc:
            raise ApiError(500, "corrupt-ciphertext", str(exc))
        return Response(content=data, media_type="application/octet-stream")

    @app.get("/v1/stream")
    async def stream(request: Request, last_event_id: int | None = None):
        header_id = request.headers.get("last-event-id")
        if header_id is not None and last_event_id is None:
            try:
                last_event_id = int(header_id)
            except ValueError:
                last_event_id = None
        client, replay = service.hub.subscribe(last_event_id)

        async def gen():
            try:
                for event in replay:
                    yield _sse_format(event)
                last_beat = time.monotonic()
                while not service.hub.closed:
                    try:
                        event = client.queue.get_nowait()
                    except queue.Empty:
                        if time.monotonic() - last_beat >= heartbeat_s:
                            last_beat = time.monotonic()
                            yield ": heartbeat\n\n"
                        if await request.is_disconnected():
                            break
                        await asyncio.sleep(0.02)
                        continue
                    if client.lagged:
                        client.lagged = False
                        yield "event: gap\ndata: {}\n\n"
                    yield _sse_format(event)
                    last_beat = time.monotonic()
            finally:
                service.hub.unsubscribe(client)

        return StreamingResponse(
            gen(),
            media_type="text/event-stream",
            headers={"cache-control": "no-cache", "x-accel-buffering": "no"},
        )

    return app
