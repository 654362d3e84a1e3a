"""HTTP JSON API over the annotation store.

POST /api/workers      admin: issue a worker token          {"name", "role"}
GET  /api/tasks/next   worker: next candidate or status
POST /api/judgments    worker: {"candidate_id", "label", "idempotency_key"?}
GET  /api/progress     worker or admin: queue counters
POST /api/filter       admin: run the agreement filter      {"n_judges", "required_agree"}
GET  /api/export       admin: kept test set as JSONL

Errors come back as {"error": code, "detail": message} with a matching
status code. Worker auth: "Authorization: Bearer <token>" (or
"X-Worker-Token"); admin auth: "X-Admin-Token".
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .store import AgreementPolicy, AnnotationError, AnnotationStore, UnknownWorkerError

__all__ = ["create_app"]


def _worker_token(request: Request) -> str:
    auth = request.headers.get("authorization", "")
    if auth.lower().startswith("bearer "):
        return auth[7:].strip()
    token = request.headers.get("x-worker-token", "")
    if token:
        return token
    raise UnknownWorkerError("missing worker token")


def create_app(
    store: AnnotationStore, admin_token: str, static_dir: str | None = None
) -> FastAPI:
    app = FastAPI(title="incoforge annotation service", docs_url=None, redoc_url=None)

    @app.exception_handler(AnnotationError)
    def _annotation_error(_request, exc: AnnotationError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "detail": str(exc)}
        )

    def _require_admin(request: Request) -> None:
        if request.headers.get("x-admin-token", "") != admin_token:
            raise UnknownWorkerError("admin token required")

    @app.post("/api/workers", status_code=201)
    async def create_worker(request: Request):
        _require_admin(request)
        body = await request.json()
        return store.create_worker(
            name=str(body.get("name", "")), role=str(body.get("role", "judge"))
        )

    @app.get("/api/tasks/next")
    def next_task(request: Request):
        return store.next_task(_worker_token(request))

    @app.post("/api/judgments")
    async def submit(request: Request):
        token = _worker_token(request)
        body = await request.json()
        if "candidate_id" not in body or "label" not in body:
            raise AnnotationError("body needs candidate_id and label")
        return store.submit(
            token,
            str(body["candidate_id"]),
            int(body["label"]),
            key=body.get("idempotency_key"),
        )

    @app.get("/api/progress")
    def progress(request: Request):
        if request.headers.get("x-admin-token", "") != admin_token:
            store.authenticate(_worker_token(request))
        return store.progress()

    @app.post("/api/filter")
    async def run_filter(request: Request):
        _require_admin(request)
        body = await request.json() if int(request.headers.get("content-length") or 0) else {}
        policy = AgreementPolicy(
            n_judges=int(body.get("n_judges", 4)),
            required_agree=int(body.get("required_agree", 3)),
        )
        result = store.run_filter(policy)
        return {"kept": result["kept"], "kept_count": len(result["kept"])}

    @app.get("/api/export")
    def export(request: Request):
        _require_admin(request)
        lines = [json.dumps(rec, ensure_ascii=False) for rec in store.export_kept()]
        return PlainTextResponse(
            "\n".join(lines) + ("\n" if lines else ""),
            media_type="application/x-ndjson",
        )

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
