"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..instances import ProblemInstance
from ..model import NetworkSpec, network_from_dict, network_to_dict
from ..result import RunResult
from ..subproblems import FeasibleSet
from .. import lp

_SENSES = {"le": lp.LE, "ge": lp.GE, "eq": lp.EQ}


class LayerModel(BaseModel):
    weights: list[list[float]]
    bias: list[float]
    activation: Literal["relu", "linear"]


class NetworkModel(BaseModel):
    input_dim: int
    layers: list[LayerModel]

    def to_spec(self) -> NetworkSpec:
        return network_from_dict(self.model_dump())

    @classmethod
    def from_spec(cls, net: NetworkSpec) -> "NetworkModel":
        return cls.model_validate(network_to_dict(net))


class LinearConstraintModel(BaseModel):
    coeffs: list[float]
    rhs: float
    sense: Literal["le", "ge", "eq"]


class InstanceModel(BaseModel):
    target: list[float]
    box_lo: list[float]
    box_hi: list[float]
    linear_constraints: list[LinearConstraintModel] = Field(default_factory=list)
    starts: list[list[float]]
    name: str = "instance"
    seed: Optional[int] = None

    def to_instance(self, net: NetworkSpec) -> ProblemInstance:
        rows = tuple(
            (np.asarray(c.coeffs, dtype=float), c.rhs, _SENSES[c.sense])
            for c in self.linear_constraints
        )
        feasible = FeasibleSet(
            np.asarray(self.box_lo, dtype=float),
            np.asarray(self.box_hi, dtype=float),
            rows,
        )
        return ProblemInstance(
            net, np.asarray(self.target, dtype=float), feasible,
            np.asarray(self.starts, dtype=float), name=self.name, seed=self.seed,
        )


class IterationModel(BaseModel):
    iter: int
    time_s: float
    phase: str
    g_curr: float
    g_best: float
    step: float
    cuts: int
    status: str


class SolveRequest(BaseModel):
    model: NetworkModel
    instance: InstanceModel
    algo: Literal["ogo", "pgd"]
    config: dict = Field(default_factory=dict)
    start_index: int = 0


class SolveResponse(BaseModel):
    x: list[float]
    value: float
    status: str
    iterations: list[IterationModel]
    warnings: list[str]
    certified: list[list[int]]

    @classmethod
    def from_result(cls, result: RunResult) -> "SolveResponse":
        return cls(
            x=result.x.tolist(),
            value=result.value,
            status=result.status.value,
            iterations=[
                IterationModel(
                    iter=r.iter, time_s=r.time_s, phase=r.phase, g_curr=r.g_curr,
                    g_best=r.g_best, step=r.step, cuts=r.cuts, status=r.status,
                )
                for r in result.iterations
            ],
            warnings=list(result.warnings),
            certified=[sorted(s) for s in result.certified],
        )


class GenerateRequest(BaseModel):
    arch: list[int]
    seed: int = 0
    normalize: bool = False
    sample_count: int = 4096


class GenerateResponse(BaseModel):
    model: NetworkModel


class MilpExportRequest(BaseModel):
    model: NetworkModel
    instance: InstanceModel
    fixed_pattern_at: Optional[list[float]] = None  # export the region of this point instead


class MilpExportResponse(BaseModel):
    lp_text: str


class LocalMinimumModel(BaseModel):
    x: list[float]
    value: float


class OracleRequest(BaseModel):
    model: NetworkModel
    instance: InstanceModel
    mode: Literal["grid", "fw-regions"]
    resolution: float = 1e-3
    fw_iterations: int = 1000


class RegionMinimumModel(BaseModel):
    active: list[int]
    value: float
    gap: float


class OracleResponse(BaseModel):
    x_best: list[float]
    g_best: float
    local_minima: list[LocalMinimumModel] = Field(default_factory=list)
    regions: list[RegionMinimumModel] = Field(default_factory=list)


class GapRequest(BaseModel):
    v0: float
    vk: float
    vstar: float


class GapResponse(BaseModel):
    rho: float
