"""Service operations shared by the HTTP app and the CLI."""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .. import ogo, pgd
from ..bench import percent_gap_closed
from ..errors import BoundaryCapError, InvalidInputError
from ..instances import generate_network, normalize_outputs, oracle_grid, oracle_region_fw
from ..milp import export_fixed_pattern, export_milp
from ..model import pattern_of
from ..regions import neighbor_patterns
from . import schemas


def generate(req: schemas.GenerateRequest) -> schemas.GenerateResponse:
    net = generate_network(req.arch, req.seed)
    if req.normalize:
        net = normalize_outputs(net, req.sample_count, req.seed + 1)
    return schemas.GenerateResponse(model=schemas.NetworkModel.from_spec(net))


def solve(req: schemas.SolveRequest) -> schemas.SolveResponse:
    net = req.model.to_spec()
    inst = req.instance.to_instance(net)
    if not 0 <= req.start_index < inst.starts.shape[0]:
        raise InvalidInputError(f"start index {req.start_index} out of range")
    x0 = inst.starts[req.start_index]
    if req.algo == "ogo":
        result = ogo.run(net, inst.loss, inst.feasible, x0, ogo.OgoConfig.from_dict(req.config))
    else:
        result = pgd.run(net, inst.loss, inst.feasible, x0, pgd.PgdConfig.from_dict(req.config))
    return schemas.SolveResponse.from_result(result)


def export(req: schemas.MilpExportRequest) -> schemas.MilpExportResponse:
    net = req.model.to_spec()
    inst = req.instance.to_instance(net)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.lp"
        if req.fixed_pattern_at is not None:
            pattern, _ = pattern_of(net, np.asarray(req.fixed_pattern_at, dtype=float))
            export_fixed_pattern(net, pattern, inst.feasible, path)
        else:
            export_milp(net, inst.target, inst.feasible, path)
        return schemas.MilpExportResponse(lp_text=path.read_text())


def oracle(req: schemas.OracleRequest) -> schemas.OracleResponse:
    net = req.model.to_spec()
    inst = req.instance.to_instance(net)
    if req.mode == "grid":
        x_best, g_best, minima = oracle_grid(net, inst.loss, inst.feasible, req.resolution)
        return schemas.OracleResponse(
            x_best=x_best.tolist(),
            g_best=g_best,
            local_minima=[
                schemas.LocalMinimumModel(x=x.tolist(), value=g) for x, g in minima
            ],
        )
    # fw-regions: minimize the affine piece of every neighbor region of each start.
    seen = set()
    regions = []
    best_x, best_g = None, np.inf
    for s in range(inst.starts.shape[0]):
        try:
            patterns = list(
                neighbor_patterns(net, inst.starts[s], 1e-6, inst.feasible)
            )
        except BoundaryCapError as exc:
            raise InvalidInputError(str(exc)) from exc
        for pat in patterns:
            if pat.active in seen:
                continue
            seen.add(pat.active)
            fw = oracle_region_fw(net, inst.loss, inst.feasible, pat, req.fw_iterations)
            regions.append(
                schemas.RegionMinimumModel(
                    active=sorted(pat.active), value=fw.value, gap=fw.gap
                )
            )
            if fw.value < best_g:
                best_x, best_g = fw.x, fw.value
    if best_x is None:
        raise InvalidInputError("no feasible region found at the given starts")
    return schemas.OracleResponse(x_best=best_x.tolist(), g_best=best_g, regions=regions)


def gap(req: schemas.GapRequest) -> schemas.GapResponse:
    return schemas.GapResponse(rho=percent_gap_closed(req.v0, req.vk, req.vstar))
