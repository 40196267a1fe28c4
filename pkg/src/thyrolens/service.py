"""JSON API over the hypothesis session.

Endpoints: GET /health, GET /classes, GET /records/{id}, POST /explain,
GET /session. Stateless between requests except the append-only session
log. All errors carry a stable ``error_code``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse

from . import session as hs
from .errors import (RecordNotFoundError, RequestValidationError,
                     ThyrolensError)
from .gbdt import GbdtModel, load_model
from .schema import (ClassLabel, FeatureStats, LabeledDataset, compute_stats,
                     ingest_csv, thyroid_schema)


@dataclass
class ServiceConfig:
    model_path: str
    data_path: str
    host: str = "127.0.0.1"
    port: int = 8077
    log_path: str | None = None


def create_app(model: GbdtModel, data: LabeledDataset, stats: FeatureStats,
               log: hs.SessionLog | None = None,
               params: hs.EngineParams = hs.EngineParams()) -> FastAPI:
    model.check_schema(data.schema)
    log = log if log is not None else hs.SessionLog()
    app = FastAPI(title="thyrolens", docs_url=None, redoc_url=None)
    schema = data.schema
    display_order = [schema.feature_names[i] for i in schema.display_order()]

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_, exc: RequestValidationError):
        status = 404 if isinstance(exc, RecordNotFoundError) else 400
        return JSONResponse(status_code=status,
                            content={"error_code": exc.code, "detail": str(exc)})

    @app.exception_handler(ThyrolensError)
    async def _domain_error(_, exc: ThyrolensError):
        return JSONResponse(status_code=400,
                            content={"error_code": "domain_error", "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "model_fingerprint": model.fingerprint,
                "records": len(data)}

    @app.get("/classes")
    def classes():
        out = []
        for c in ClassLabel:
            n_cf, n_sc = hs.default_counts(c)
            out.append({"index": int(c), "name": c.display_name,
                        "default_counterexamples": n_cf,
                        "default_similar_cases": n_sc})
        return {"classes": out, "display_order": display_order}

    @app.get("/records/{record_id}")
    def get_record(record_id: str):
        record = data.by_id(record_id)
        if record is None:
            raise RecordNotFoundError(record_id)
        by_name = dict(zip(schema.feature_names, record.values))
        return {"record_id": record.id,
                "values": [{"name": n, "value": by_name[n]} for n in display_order]}

    @app.post("/explain")
    def explain(payload: dict = Body(...)):
        req = hs.parse_request(payload, schema)
        bundle = hs.handle_request(req, model, data, stats, log=log, params=params)
        return bundle.to_dict(schema)

    @app.get("/session")
    def session_entries():
        return {"entries": log.entries()}

    return app


def load_app(config: ServiceConfig,
             params: hs.EngineParams = hs.EngineParams()) -> FastAPI:
    """Build the app from artifact paths; raises with a diagnostic on failure."""
    model = load_model(config.model_path)
    data = ingest_csv(config.data_path, thyroid_schema())
    stats = compute_stats(data)
    log = hs.SessionLog(config.log_path)
    app = create_app(model, data, stats, log=log, params=params)
    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(config: ServiceConfig,
          params: hs.EngineParams = hs.EngineParams()) -> None:
    import uvicorn

    app = load_app(config, params)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
