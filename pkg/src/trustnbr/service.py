"""HTTP API serving alerts, explanations, and neighborhood evidence.

JSON over HTTP, versioned under ``/v1``. Endpoints read from an immutable
ready session; session builds run in a background thread and are idempotent
by configuration hash. Alert endpoints never expose production ground truth;
the opt-in ``/debug/truth`` route exists for evaluation demos only.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .embed import mds_embed, pairwise_distances
from .errors import TrustnbrError
from .pipeline import SessionBundle, load_session, run_all
from .retrieval import DistanceKind, retrieve_k_nearest
from .simuser import Alert

MAX_K = 500
DEFAULT_DATA_DIR_ENV = "TRUSTNBR_DATA_DIR"


class AlertSummary(BaseModel):
    alert_id: str
    model_confidence: float
    timestamp: float | None = None


class AlertPage(BaseModel):
    items: list[AlertSummary]
    page: int
    page_size: int
    total: int


class ShapBar(BaseModel):
    feature_name: str
    phi: float
    feature_value: float


class AlertView(BaseModel):
    alert_id: str
    model_confidence: float
    base_value: float
    shap_bars: list[ShapBar]  # sorted by |phi| descending


class NeighborhoodPoint(BaseModel):
    id: str
    x: float
    y: float
    true_label: int | None  # null for the query: production truth stays hidden
    label_verified: bool | None
    retrieval_distance: float | None
    viz_distance_to_query: float
    is_query: bool


class NeighborhoodView(BaseModel):
    alert_id: str
    k: int
    retrieval_kind: str
    viz_kind: str
    stress: float
    points: list[NeighborhoodPoint]


class SessionRequest(BaseModel):
    csv_path: str
    label_column: str
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    split_seed: int = 7
    train_seed: int = 13
    n_trees: int = 100
    max_depth: int = 8
    background_size: int = 128
    background_seed: int = 29
    threshold: float = 0.5


class SessionStatus(BaseModel):
    session_id: str
    state: Literal["pending", "running", "ready", "failed"]
    error: str | None = None


@dataclass
class _SessionRecord:
    session_id: str
    state: str = "pending"
    error: str | None = None
    bundle: SessionBundle | None = None


@dataclass
class ServiceState:
    current: SessionBundle | None = None
    sessions: dict = field(default_factory=dict)
    data_dir: Path = field(default_factory=lambda: Path(os.environ.get(DEFAULT_DATA_DIR_ENV, ".trustnbr")))
    lock: threading.Lock = field(default_factory=threading.Lock)


def _embedding_seed(alert_id: str, k: int, viz: str) -> int:
    digest = hashlib.sha256(f"{alert_id}:{k}:{viz}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(
    bundle: SessionBundle | None = None,
    data_dir: str | Path | None = None,
    enable_truth: bool = False,
) -> FastAPI:
    app = FastAPI(title="trustnbr", version="1")
    state = ServiceState(current=bundle)
    if data_dir is not None:
        state.data_dir = Path(data_dir)
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        # The API contract uses 400 for malformed parameters, not 422.
        return _error(400, str(exc.errors()))

    def current() -> SessionBundle | None:
        return state.current

    def find_alert(bundle: SessionBundle, alert_id: str) -> Alert | None:
        for alert in bundle.alert_set.alerts:
            if alert.instance_id == alert_id:
                return alert
        return None

    @app.get("/v1/alerts", response_model=AlertPage)
    def list_alerts(
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=50, ge=1, le=500),
        sort: str = Query(default="confidence"),
    ):
        bundle = current()
        if bundle is None:
            return _error(503, "no session loaded")
        if sort not in ("confidence", "id"):
            return _error(400, f"unknown sort key {sort!r}")
        alerts = list(bundle.alert_set.alerts)
        if sort == "confidence":
            alerts.sort(key=lambda a: (-a.model_confidence, a.instance_id))
        else:
            alerts.sort(key=lambda a: a.instance_id)
        window = alerts[page * page_size : (page + 1) * page_size]
        return AlertPage(
            items=[
                AlertSummary(alert_id=a.instance_id, model_confidence=a.model_confidence)
                for a in window
            ],
            page=page,
            page_size=page_size,
            total=len(alerts),
        )

    @app.get("/v1/alerts/{alert_id}", response_model=AlertView)
    def alert_view(alert_id: str):
        bundle = current()
        if bundle is None:
            return _error(503, "no session loaded")
        alert = find_alert(bundle, alert_id)
        if alert is None:
            return _error(404, f"unknown alert id {alert_id!r}")
        order = np.argsort(-np.abs(alert.shap.phi), kind="stable")
        bars = [
            ShapBar(
                feature_name=bundle.feature_names[j],
                phi=float(alert.shap.phi[j]),
                feature_value=float(alert.features[j]),
            )
            for j in order
        ]
        return AlertView(
            alert_id=alert.instance_id,
            model_confidence=alert.model_confidence,
            base_value=alert.shap.base_value,
            shap_bars=bars,
        )

    @app.get("/v1/alerts/{alert_id}/neighborhood", response_model=NeighborhoodView)
    def neighborhood(
        alert_id: str,
        k: int = Query(default=10, ge=1, le=MAX_K),
        retrieval: str = Query(default="S"),
        viz: str = Query(default="S"),
    ):
        bundle = current()
        if bundle is None:
            return _error(503, "no session loaded")
        alert = find_alert(bundle, alert_id)
        if alert is None:
            return _error(404, f"unknown alert id {alert_id!r}")
        try:
            retrieval_kind = DistanceKind.from_code(retrieval)
            viz_kind = DistanceKind.from_code(viz)
        except TrustnbrError as exc:
            return _error(400, str(exc))

        query = alert.as_case()
        neighbors = retrieve_k_nearest(bundle.case_base, query, k, retrieval_kind)
        items = [query] + [n.case for n in neighbors.neighbors]
        dm = pairwise_distances(items, viz_kind, bundle.case_base, local_weight_query=query)
        embedding = mds_embed(dm, seed=_embedding_seed(alert_id, k, viz_kind.value))
        points = [
            NeighborhoodPoint(
                id=query.instance_id,
                x=float(embedding.coords[0, 0]),
                y=float(embedding.coords[0, 1]),
                true_label=None,
                label_verified=None,
                retrieval_distance=None,
                viz_distance_to_query=0.0,
                is_query=True,
            )
        ]
        for i, nb in enumerate(neighbors.neighbors, start=1):
            points.append(
                NeighborhoodPoint(
                    id=nb.case.instance_id,
                    x=float(embedding.coords[i, 0]),
                    y=float(embedding.coords[i, 1]),
                    true_label=nb.case.true_label,
                    label_verified=nb.case.label_verified,
                    retrieval_distance=nb.distance,
                    viz_distance_to_query=float(dm.values[0, i]),
                    is_query=False,
                )
            )
        return NeighborhoodView(
            alert_id=alert_id,
            k=len(neighbors.neighbors),
            retrieval_kind=retrieval_kind.value,
            viz_kind=viz_kind.value,
            stress=embedding.stress,
            points=points,
        )

    def _build_session(record: _SessionRecord, request: SessionRequest) -> None:
        record.state = "running"
        try:
            out_dir = state.data_dir / record.session_id
            run_all(
                request.csv_path,
                out_dir,
                request.label_column,
                fractions=request.fractions,
                split_seed=request.split_seed,
                forest_params={"n_trees": request.n_trees, "max_depth": request.max_depth},
                train_seed=request.train_seed,
                background_size=request.background_size,
                background_seed=request.background_seed,
            )
            bundle = load_session(out_dir, threshold=request.threshold)
            record.bundle = bundle
            record.state = "ready"
            with state.lock:
                state.current = bundle
        except Exception as exc:  # build errors surface through the status endpoint
            record.error = str(exc)
            record.state = "failed"

    @app.post("/v1/sessions", response_model=SessionStatus)
    def create_session(request: SessionRequest):
        session_id = hashlib.sha256(
            request.model_dump_json().encode("utf-8")
        ).hexdigest()[:16]
        with state.lock:
            record = state.sessions.get(session_id)
            if record is None:
                record = _SessionRecord(session_id=session_id)
                state.sessions[session_id] = record
                worker = threading.Thread(target=_build_session, args=(record, request), daemon=True)
                worker.start()
        return SessionStatus(session_id=session_id, state=record.state, error=record.error)

    @app.get("/v1/sessions/{session_id}/status", response_model=SessionStatus)
    def session_status(session_id: str):
        record = state.sessions.get(session_id)
        if record is None:
            return _error(404, f"unknown session id {session_id!r}")
        return SessionStatus(session_id=session_id, state=record.state, error=record.error)

    if enable_truth:

        @app.get("/debug/truth")
        def debug_truth():
            bundle = current()
            if bundle is None:
                return _error(503, "no session loaded")
            return {a.instance_id: a.true_label for a in bundle.alert_set.alerts}

    return app
