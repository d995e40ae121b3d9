"""HTTP layer over the skill service; see protocol.md for the surface."""

from __future__ import annotations

import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .backend import SkillService
from .errors import BadEnvelope, ProtocolViolation, SessionBusy, UnknownMode
from .protocol import RequestEnvelope

logger = logging.getLogger(__name__)


def create_app(service: SkillService) -> FastAPI:
    app = FastAPI(title="coassembly skill backend", version="1")
    app.state.service = service

    @app.exception_handler(BadEnvelope)
    async def _bad_envelope(request: Request, exc: BadEnvelope):
        return JSONResponse(status_code=400, content={"error": "bad_envelope", "detail": str(exc)})

    @app.exception_handler(ProtocolViolation)
    async def _protocol(request: Request, exc: ProtocolViolation):
        return JSONResponse(status_code=400, content={"error": "protocol_violation", "detail": str(exc)})

    @app.exception_handler(UnknownMode)
    async def _unknown_mode(request: Request, exc: UnknownMode):
        return JSONResponse(status_code=400, content={"error": "unknown_mode", "detail": str(exc)})

    @app.exception_handler(SessionBusy)
    async def _busy(request: Request, exc: SessionBusy):
        return JSONResponse(status_code=409, content={"error": "session_busy", "detail": str(exc)})

    @app.post("/skill")
    async def skill(request: Request):
        try:
            raw = await request.json()
        except Exception as exc:
            raise BadEnvelope(f"request is not valid JSON: {exc}") from exc
        envelope = RequestEnvelope.from_dict(raw)
        response = service.handle_request(envelope)
        return JSONResponse(content=response.to_dict())

    @app.post("/events")
    async def events(request: Request):
        try:
            raw = await request.json()
        except Exception as exc:
            raise BadEnvelope(f"event body is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict) or "kind" not in raw:
            raise BadEnvelope("event body needs a 'kind' field")
        invocations = service.publish_event(raw["kind"], raw.get("payload", {}))
        return JSONResponse(
            content={
                "invoked": [
                    {"dialogue": inv.dialogue, "payload": inv.payload}
                    for inv in invocations
                ]
            }
        )

    @app.get("/state")
    async def state():
        return JSONResponse(content=service.state())

    @app.get("/metrics")
    async def metrics():
        return JSONResponse(content=service.metrics().to_dict())

    @app.get("/stream")
    async def stream(since: int = 0, follow: bool = False):
        return StreamingResponse(
            service.stream(since=since, follow=follow),
            media_type="application/x-ndjson",
        )

    return app


def serve(service: SkillService, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run the backend under uvicorn with a wall-clock ticker."""
    import uvicorn

    app = create_app(service)
    stop = threading.Event()

    def ticker():
        while not stop.is_set():
            service.tick()
            stop.wait(0.1)

    thread = threading.Thread(target=ticker, daemon=True)
    thread.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        stop.set()
        thread.join(timeout=1.0)
