"""HTTP/WebSocket surface: entity CRUD, batch simulation, status, live streaming.

Updates are deliberately DELETE + POST; there is no PUT anywhere, which
sidesteps concurrent-modification merge questions entirely. Streamed
episodes are persisted exactly like batch ones, so a WebSocket client
and a later GET /episodes/{pk} see the same transcript in the same order.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
from typing import Any

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .domain import Relationship, new_pk
from .engine import (
    EpisodeRunner,
    ResolutionError,
    SimulationConfig,
    TranscriptEntry,
    set_queued,
)
from .evaluation import Judge
from .llm import ChatClient, EndpointNotConfigured
from .persistence import (
    DuplicateKey,
    MemoryStore,
    Store,
    StoreUnavailable,
    UnknownFilterField,
    ValidationFailure,
)

logger = logging.getLogger(__name__)

DEFAULT_PORT = 8800

# URL segment -> entity kind
COLLECTIONS = {
    "scenarios": "scenario",
    "characters": "character",
    "relationships": "relationship",
    "episodes": "episode",
}

WS_START_SIM = "START_SIM"
WS_SERVER_ACTION = "SERVER_ACTION"
WS_SERVER_EVAL = "SERVER_EVAL"
WS_ERROR = "ERROR"
WS_FINISH_SIM = "FINISH_SIM"


def _error(status: int, reason: str, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": reason, **extra})


def create_app(
    store: Store | None = None,
    *,
    llm_client: ChatClient | None = None,
    judge: Judge | None = None,
    parallelism: int = 4,
    cors_origin: str | None = None,
) -> FastAPI:
    store = store if store is not None else MemoryStore()

    async def lifespan(app: FastAPI):
        app.state.jobs = asyncio.Queue()
        workers = [asyncio.create_task(_worker(app)) for _ in range(parallelism)]
        yield
        for worker in workers:
            worker.cancel()
        for worker in workers:
            with contextlib.suppress(asyncio.CancelledError):
                await worker

    app = FastAPI(
        title="parley",
        version="0.1.0",
        openapi_url="/openapi",
        lifespan=lifespan,
    )
    app.state.store = store
    app.state.runner = EpisodeRunner(store, llm_client=llm_client, judge=judge)
    app.state.llm_client = llm_client
    app.state.judge = judge

    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"] if cors_origin == "*" else [cors_origin],
            allow_methods=["GET", "POST", "DELETE"],
            allow_headers=["*"],
        )

    @app.exception_handler(StoreUnavailable)
    async def store_down(request: Request, exc: StoreUnavailable):
        return _error(503, str(exc))

    async def _worker(app: FastAPI) -> None:
        while True:
            config, pk = await app.state.jobs.get()
            try:
                await app.state.runner.run(config, episode_pk=pk)
            except Exception as exc:
                logger.warning("queued episode %s failed: %s", pk, exc)

    # entity CRUD -------------------------------------------------------------
    for segment, kind in COLLECTIONS.items():

        def _bind(segment: str, kind: str) -> None:
            @app.get(f"/{segment}", name=f"list_{segment}")
            async def list_collection(request: Request) -> Any:
                filters = dict(request.query_params)
                try:
                    return store.list(kind, filters)
                except UnknownFilterField as exc:
                    return _error(400, str(exc))

            @app.post(f"/{segment}", status_code=201, name=f"create_{segment}")
            async def create_item(request: Request) -> Any:
                doc = await request.json()
                if not isinstance(doc, dict):
                    return _error(400, "body must be a JSON object")
                pk = str(doc.get("pk") or new_pk())
                doc = dict(doc, pk=pk)
                if kind == "relationship":
                    edge = Relationship.from_dict(doc)
                    pair = edge.pair()
                    for existing in store.list("relationship"):
                        if Relationship.from_dict(existing).pair() == pair:
                            return _error(400, "a relationship for this pair already exists")
                try:
                    store.create(kind, pk, doc)
                except ValidationFailure as exc:
                    return _error(400, str(exc), violations=[str(v) for v in exc.violations])
                except DuplicateKey as exc:
                    return _error(400, str(exc))
                return JSONResponse(status_code=201, content=store.get(kind, pk))

            @app.get(f"/{segment}/{{pk}}", name=f"get_{segment}")
            async def get_item(pk: str) -> Any:
                doc = store.get(kind, pk)
                if doc is None:
                    return _error(404, f"{kind} {pk!r} not found")
                return doc

            @app.delete(f"/{segment}/{{pk}}", status_code=204, response_class=Response, name=f"delete_{segment}")
            async def delete_item(pk: str):
                if not store.delete(kind, pk):
                    return _error(404, f"{kind} {pk!r} not found")
                return Response(status_code=204)

        _bind(segment, kind)

    # simulation --------------------------------------------------------------
    @app.post("/simulate", status_code=202)
    async def simulate(request: Request) -> Any:
        body = await request.json()
        try:
            config = SimulationConfig.from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, f"malformed config: {exc}")
        try:
            app.state.runner.resolve(config)
        except (ResolutionError, EndpointNotConfigured) as exc:
            return _error(400, str(exc))
        pk = new_pk()
        set_queued(store, pk)
        app.state.jobs.put_nowait((config, pk))
        return JSONResponse(status_code=202, content={"episode_pk": pk})

    @app.get("/simulate/status/{pk}")
    async def simulate_status(pk: str) -> Any:
        doc = store.get("status", pk)
        if doc is None:
            return _error(404, f"no simulation with pk {pk!r}")
        out = {"status": doc["status"]}
        if "progress" in doc:
            out["progress"] = doc["progress"]
        if "detail" in doc:
            out["detail"] = doc["detail"]
        return out

    # streaming ---------------------------------------------------------------
    @app.websocket("/ws/simulation")
    async def ws_simulation(ws: WebSocket) -> None:
        await ws.accept()
        try:
            first = await ws.receive_json()
        except WebSocketDisconnect:
            return
        except Exception:
            await ws.send_json({"type": WS_ERROR, "payload": {"reason": "first frame must be JSON"}})
            await ws.close()
            return
        if not isinstance(first, dict) or first.get("type") != WS_START_SIM:
            await ws.send_json(
                {"type": WS_ERROR, "payload": {"reason": f"expected {WS_START_SIM} as the first frame"}}
            )
            await ws.close()
            return
        try:
            config = SimulationConfig.from_dict(first.get("payload") or {})
        except (KeyError, TypeError, ValueError) as exc:
            await ws.send_json({"type": WS_ERROR, "payload": {"reason": f"malformed config: {exc}"}})
            await ws.close()
            return

        async def stream_action(entry: TranscriptEntry) -> None:
            await ws.send_json({"type": WS_SERVER_ACTION, "payload": entry.to_dict()})

        runner = EpisodeRunner(
            store,
            llm_client=app.state.llm_client,
            judge=app.state.judge,
            on_action=stream_action,
        )
        try:
            runner.resolve(config)
        except (ResolutionError, EndpointNotConfigured) as exc:
            await ws.send_json({"type": WS_ERROR, "payload": {"reason": str(exc)}})
            await ws.close()
            return
        pk = new_pk()
        set_queued(store, pk)
        try:
            record = await runner.run(config, episode_pk=pk)
            for score in record.evaluations:
                await ws.send_json({"type": WS_SERVER_EVAL, "payload": score.to_dict()})
            await ws.send_json(
                {
                    "type": WS_FINISH_SIM,
                    "payload": {"episode_pk": pk, "termination": record.termination.to_dict()},
                }
            )
            await ws.close()
        except (WebSocketDisconnect, RuntimeError):
            # Client went away mid-run; the episode was aborted (its record,
            # if any, is already marked by the runner).
            logger.info("websocket client left during episode %s", pk)

    return app
