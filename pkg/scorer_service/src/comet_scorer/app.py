"""FastAPI application implementing the scoring contract."""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .models import StubModel

DEFAULT_BATCH_CAP = 64


class ScoreItem(BaseModel):
    src: str = Field(min_length=1)
    mt: str = Field(min_length=1)
    ref: str = Field(min_length=1)


class ScoreRequest(BaseModel):
    items: list[ScoreItem] = Field(min_length=1)


class ScoreResponse(BaseModel):
    scores: list[float]
    system_score: float
    model: str


def create_app(model_factory=None, batch_cap: int = DEFAULT_BATCH_CAP, load_on_startup: bool = True) -> FastAPI:
    """Build the service.

    ``model_factory`` produces the scoring model (defaults to the stub);
    with ``load_on_startup`` false the app starts in the loading state and
    ``app.state.load_model()`` brings it up, which is how tests exercise
    the 503 -> ok transition.
    """
    factory = model_factory or StubModel

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if load_on_startup:
            app.state.load_model()
        yield

    app = FastAPI(title="comet-scorer-service", lifespan=lifespan)
    app.state.model = None
    app.state.batch_cap = batch_cap

    def load_model():
        if app.state.model is None:
            app.state.model = factory()
        return app.state.model

    app.state.load_model = load_model

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    async def health():
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading", "model": None})
        return {"status": "ok", "model": model.name}

    @app.post("/score", response_model=ScoreResponse)
    async def score(request: ScoreRequest):
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        if len(request.items) > app.state.batch_cap:
            return JSONResponse(
                status_code=400,
                content={"detail": f"batch of {len(request.items)} exceeds cap {app.state.batch_cap}"},
            )
        items = [item.model_dump() for item in request.items]
        scores, system_score = model.score_batch(items)
        return ScoreResponse(scores=scores, system_score=system_score, model=model.name)

    return app
