"""Guided solver behavior: termination, certificates, step bookkeeping, logs."""

import numpy as np
import pytest

from reluinv import ogo
from reluinv.errors import InvalidInputError
from reluinv.instances import make_random_instance, oracle_grid, oracle_region_fw, toy_network_1d
from reluinv.model import LossSpec, pattern_of
from reluinv.result import RunStatus
from reluinv.subproblems import FeasibleSet


def test_config_validation():
    with pytest.raises(InvalidInputError):
        ogo.OgoConfig(step_shrink=1.2)
    with pytest.raises(InvalidInputError):
        ogo.OgoConfig(step_grow=0.5)
    with pytest.raises(InvalidInputError):
        ogo.OgoConfig(eps=0.0)
    with pytest.raises(InvalidInputError):
        ogo.OgoConfig(step_init=2.0, step_max=1.0).resolve_step_min(1)
    cfg = ogo.OgoConfig()
    assert cfg.resolve_step_min(4) == pytest.approx(2e-5)


def test_config_from_dict_rejects_unknown():
    with pytest.raises(InvalidInputError):
        ogo.OgoConfig.from_dict({"bogus": 1})
    cfg = ogo.OgoConfig.from_dict({"eps": 1e-4, "max_iters": 50})
    assert cfg.eps == 1e-4 and cfg.max_iters == 50


def test_knot_optimum_certifies_both_regions(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [2.4], ogo.OgoConfig())
    assert res.status == RunStatus.EPS_LOCAL_OPTIMAL
    assert abs(res.x[0] - 3.0) < 1e-5
    assert sorted(sorted(s) for s in res.certified) == [[0, 1], [0, 1, 2]]


def test_plateau_interior_terminates_at_plateau_value(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [4.5], ogo.OgoConfig())
    assert res.status == RunStatus.EPS_LOCAL_OPTIMAL
    _, _, minima = oracle_grid(toy_net, toy_loss, toy_box, resolution=1e-3)
    assert any(abs(res.value - g) <= 1e-5 for _, g in minima)
    assert res.value == pytest.approx(1.0, abs=1e-9)


def test_plateau_edge_escapes(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [4.0], ogo.OgoConfig())
    assert res.value < 1.0 - 1e-6  # strictly below the edge value
    assert res.status == RunStatus.EPS_LOCAL_OPTIMAL


def test_convex_single_region_matches_fw():
    # On [0, 1.5]^2 pick an instance and compare against the region oracle at
    # the solution's own pattern: the certified value cannot exceed it.
    inst = make_random_instance([2, 6, 1], seed=5)
    res = ogo.run(inst.net, inst.loss, inst.feasible, inst.starts[0], ogo.OgoConfig())
    assert res.status == RunStatus.EPS_LOCAL_OPTIMAL
    pat, _ = pattern_of(inst.net, res.x)
    fw = oracle_region_fw(inst.net, inst.loss, inst.feasible, pat, 800)
    assert res.value <= fw.value + 1e-5


def test_incumbent_monotone_and_step_bounds(toy_net, toy_loss, toy_box):
    snaps = []
    res = ogo.run(
        toy_net, toy_loss, toy_box, [2.2],
        ogo.OgoConfig(max_iters=60), on_iteration=snaps.append,
    )
    step_min = ogo.OgoConfig().resolve_step_min(1)
    best = np.inf
    for s in snaps:
        assert s["g_best"] <= best + 1e-15
        best = s["g_best"]
        assert step_min <= s["step"] <= ogo.OgoConfig().step_max
        if s["improved"] and not s["dual"]:
            # record reset on improvement; the count may grow again only when
            # the same iteration re-enters the dual phase
            assert s["certified_count"] == 0
    assert res.n_iterations == len(snaps)


def test_all_iterates_inside_box(toy_net, toy_loss):
    box = FeasibleSet([1.2], [4.8])
    rows = []
    res = ogo.run(
        toy_net, toy_loss, box, [2.0],
        ogo.OgoConfig(max_iters=50), on_iteration=rows.append,
    )
    assert rows
    for s in rows:
        assert box.contains(s["x"], 1e-8)
    for r in res.iterations:
        assert np.isfinite(r.g_curr)
    assert 1.2 - 1e-12 <= res.x[0] <= 4.8 + 1e-12


def test_outside_start_projected_with_warning(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [9.0], ogo.OgoConfig(max_iters=25))
    assert res.warnings and "projected" in res.warnings[0]


def test_pattern_cap_exceeded_status(toy_net, toy_loss, toy_box):
    cfg = ogo.OgoConfig(tau=10.0, boundary_cap=2)  # everything looks like boundary
    res = ogo.run(toy_net, toy_loss, toy_box, [2.5], cfg)
    assert res.status == RunStatus.PATTERN_CAP_EXCEEDED


def test_iteration_limit_status(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [2.4], ogo.OgoConfig(max_iters=3))
    assert res.status == RunStatus.ITERATION_LIMIT
    assert res.n_iterations == 4  # iterations 0..N inclusive
    assert res.iterations[-1].status == RunStatus.ITERATION_LIMIT.value


def test_rejects_dimension_mismatch(toy_net, toy_loss):
    with pytest.raises(InvalidInputError):
        ogo.run(toy_net, toy_loss, FeasibleSet([0, 0], [1, 1]), [0.5, 0.5], ogo.OgoConfig())


def test_region_reports_bound_validity(toy_net, toy_loss, toy_box):
    res = ogo.run(toy_net, toy_loss, toy_box, [3.6], ogo.OgoConfig())
    assert res.region_reports
    for rep in res.region_reports:
        from reluinv.model import ActivationPattern

        pat = ActivationPattern(rep.active, toy_net.n_relu)
        fw = oracle_region_fw(toy_net, toy_loss, toy_box, pat, 600)
        assert rep.bound <= fw.value + 1e-6


def test_eps_local_certificate_against_grid(toy_net, toy_loss, toy_box):
    # Theorem-2 style check: each certified region's true minimum cannot be
    # more than eps below the returned value.
    cfg = ogo.OgoConfig()
    res = ogo.run(toy_net, toy_loss, toy_box, [2.8], cfg)
    assert res.status == RunStatus.EPS_LOCAL_OPTIMAL
    from reluinv.model import ActivationPattern

    for active in res.certified:
        pat = ActivationPattern(active, toy_net.n_relu)
        fw = oracle_region_fw(toy_net, toy_loss, toy_box, pat, 2000)
        assert fw.value >= res.value - cfg.eps


def test_log_rows_schema(toy_net, toy_loss, toy_box, tmp_path):
    from reluinv.result import read_log_csv, write_log_csv

    res = ogo.run(toy_net, toy_loss, toy_box, [2.4], ogo.OgoConfig(max_iters=10))
    path = tmp_path / "log.csv"
    write_log_csv(path, res.iterations)
    rows = read_log_csv(path)
    assert len(rows) == res.n_iterations
    assert rows[0].iter == 0
    assert rows[-1].status == res.status.value
    assert path.read_text().splitlines()[0] == "iter,time_s,phase,g_curr,g_best,step,cuts,status"


def test_anti_stalling_step_shrinks_without_improvement(toy_net, toy_loss, toy_box):
    snaps = []
    ogo.run(
        toy_net, toy_loss, toy_box, [2.4],
        ogo.OgoConfig(max_iters=80), on_iteration=snaps.append,
    )
    step_min = ogo.OgoConfig().resolve_step_min(1)
    for prev, cur in zip(snaps, snaps[1:]):
        if not cur["improved"]:
            assert cur["step"] < prev["step"] or cur["step"] == step_min
