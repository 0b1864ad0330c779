"""FastAPI application wrapping the solver package."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (
    InvalidInputError,
    NumericalFailureError,
    UndefinedMetricError,
)
from . import handlers, schemas

app = FastAPI(title="reluinv", description="Constrained ReLU network inversion service")


@app.exception_handler(InvalidInputError)
@app.exception_handler(UndefinedMetricError)
async def _bad_input(request: Request, exc: Exception):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(NumericalFailureError)
async def _numerical(request: Request, exc: Exception):
    return JSONResponse(status_code=500, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/networks/generate", response_model=schemas.GenerateResponse)
def generate(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
    return handlers.generate(req)


@app.post("/solve", response_model=schemas.SolveResponse)
def solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
    return handlers.solve(req)


@app.post("/export/milp", response_model=schemas.MilpExportResponse)
def export_milp(req: schemas.MilpExportRequest) -> schemas.MilpExportResponse:
    return handlers.export(req)


@app.post("/oracle", response_model=schemas.OracleResponse)
def oracle(req: schemas.OracleRequest) -> schemas.OracleResponse:
    return handlers.oracle(req)


@app.post("/metrics/gap", response_model=schemas.GapResponse)
def gap(req: schemas.GapRequest) -> schemas.GapResponse:
    return handlers.gap(req)
