"""HTTP annotation service: exposes the pending batch, accepts answers.

The service and the training loop share no in-memory state beyond the
session object, whose writes are serialized by its lock and made durable
through the append-only answer log.
"""

from __future__ import annotations

from fastapi import FastAPI, Header, HTTPException
from pydantic import BaseModel

from .graph import UNKNOWN
from .session import AnswerOutOfRange, AnswerRejected, HumanSession


class LabelRequest(BaseModel):
    node_id: int
    answer: int  # ID class index, or -1 for unknown/out-of-scope


class NeighborSummary(BaseModel):
    class_counts: dict[str, int]
    unknown: int


class PendingItemModel(BaseModel):
    node_id: int
    round: int
    degree: int
    feature_preview: list[int]
    neighbor_summary: NeighborSummary
    two_hop_summary: NeighborSummary | None = None


class StatusModel(BaseModel):
    round: int
    answered: int
    pending: int
    total_budget: int
    precision_so_far: float
    status: str
    finished: bool


class ClassesModel(BaseModel):
    classes: list[str]
    unknown: int


def create_app(session: HumanSession, session_token: str | None = None) -> FastAPI:
    app = FastAPI(title="gosl annotation service")
    app.state.session = session

    def check_token(token: str | None) -> None:
        if session_token is not None and token != session_token:
            raise HTTPException(status_code=403, detail="missing or wrong session token")

    @app.get("/api/status", response_model=StatusModel)
    def status():
        return session.status()

    @app.get("/api/queue", response_model=list[PendingItemModel])
    def queue():
        return session.pending_items()

    @app.get("/api/node/{node_id}", response_model=PendingItemModel)
    def node_detail(node_id: int):
        if node_id not in session.loop.pending or node_id in session.partial:
            raise HTTPException(status_code=404, detail=f"node {node_id} is not pending")
        return session.pending_item(node_id, hops=2)

    @app.get("/api/classes", response_model=ClassesModel)
    def classes():
        return {"classes": session.class_names(), "unknown": UNKNOWN}

    @app.post("/api/label")
    def label(req: LabelRequest, x_session_token: str | None = Header(default=None)):
        check_token(x_session_token)
        try:
            session.submit_answer(req.node_id, req.answer)
        except AnswerOutOfRange as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except AnswerRejected as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"accepted": True, **session.status()}

    @app.get("/api/report")
    def report():
        rep = session.final_report()
        if rep is None:
            raise HTTPException(status_code=409, detail="session not finished")
        return rep

    return app


def serve(state_path, bind: str = "127.0.0.1:8000", session_token: str | None = None):
    """Resume the session at ``state_path`` and serve it over HTTP."""
    import uvicorn

    session = HumanSession.open(state_path)
    app = create_app(session, session_token)
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
