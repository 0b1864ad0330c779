"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances are fixed here and
nowhere else; the oracles (grid search, Frank-Wolfe, finite differences, vertex
or assignment enumeration) are independent of the code paths they check.
"""

import itertools
import json
import time

import numpy as np
import pytest

from conftest import fd_gradient, sample_fd_safe_points
from reluinv import lp, ogo, pgd
from reluinv.bench import ApproachSpec, percent_gap_closed, run_once, run_suite
from reluinv.instances import (
    generate_network,
    make_random_instance,
    oracle_grid,
    oracle_region_fw,
    sample_region,
    toy_network_1d,
)
from reluinv.milp import export_milp, fixed_assignment_rows, parse_lp_file
from reluinv.model import (
    ActivationPattern,
    Layer,
    LossSpec,
    NetworkSpec,
    loss_and_gradient,
    masked_affine,
    masked_forward,
    pattern_of,
    save_network,
)
from reluinv.regions import feasibility_cut_from_region, region_system
from reluinv.result import RunStatus, best_so_far_at
from reluinv.subproblems import FeasibleSet


def _report(num: int, ok: bool, detail: str):
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num:02d}: {detail}"


def test_criterion_01_oracle_equivalence_1d(toy_net, toy_loss, toy_box):
    t0 = time.perf_counter()
    _, _, minima = oracle_grid(toy_net, toy_loss, toy_box, resolution=1e-4)
    min_values = np.array([g for _, g in minima])
    rng = np.random.default_rng(101)
    starts = rng.uniform(0.0, 5.0, 20)
    knot_hits = 0
    for x0 in starts:
        res = ogo.run(toy_net, toy_loss, toy_box, [x0], ogo.OgoConfig())
        assert res.status == RunStatus.EPS_LOCAL_OPTIMAL, f"start {x0}: {res.status}"
        assert np.min(np.abs(min_values - res.value)) <= 1e-5, f"start {x0}: value {res.value}"
        if 2.0 < x0 < 4.0:
            assert abs(res.x[0] - 3.0) <= 1e-5, f"start {x0}: ended at {res.x[0]}"
            actives = sorted(sorted(s) for s in res.certified)
            assert actives == [[0, 1], [0, 1, 2]], f"start {x0}: certified {actives}"
            knot_hits += 1
    elapsed = time.perf_counter() - t0
    _report(
        1,
        elapsed < 5.0 and knot_hits >= 1,
        f"20 starts eps-local-optimal at grid minima, {knot_hits} knot landings, {elapsed:.2f}s",
    )


def test_criterion_02_type_classification():
    # Type 1: interior optimum of f = relu(x-1) - relu(x-3) against target 1.
    net1 = NetworkSpec((
        Layer(np.array([[1.0], [1.0]]), np.array([-1.0, -3.0]), "relu"),
        Layer(np.array([[1.0, -1.0]]), np.array([0.0]), "linear"),
    ))
    loss1 = LossSpec(np.ones(1))
    box1 = FeasibleSet([0.0], [4.0])
    res1 = ogo.run(net1, loss1, box1, [1.4], ogo.OgoConfig())
    _, b1 = pattern_of(net1, res1.x, 1e-6)
    assert res1.status == RunStatus.EPS_LOCAL_OPTIMAL
    assert res1.value <= 1e-5 and abs(res1.x[0] - 2.0) < 0.05
    assert not b1.neurons, f"type-1 terminal boundary {sorted(b1.neurons)}"

    # Type 2: the toy knot optimum has a nonempty terminal boundary set.
    toy = toy_network_1d()
    loss = LossSpec(np.zeros(1))
    box = FeasibleSet([0.0], [5.0])
    res2 = ogo.run(toy, loss, box, [2.4], ogo.OgoConfig())
    _, b2 = pattern_of(toy, res2.x, 1e-6)
    assert res2.status == RunStatus.EPS_LOCAL_OPTIMAL
    assert b2.neurons, "type-2 terminal boundary is empty"

    # Type 3: plateau interior terminates at the grid plateau value.
    _, _, minima = oracle_grid(toy, loss, box, resolution=1e-4)
    plateau = min(g for _, g in minima if g > 0.5)
    res3 = ogo.run(toy, loss, box, [4.5], ogo.OgoConfig())
    assert res3.status == RunStatus.EPS_LOCAL_OPTIMAL
    assert abs(res3.value - plateau) <= 1e-5

    # The non-optimal plateau edge is escaped.
    res4 = ogo.run(toy, loss, box, [4.0], ogo.OgoConfig())
    assert res4.value < plateau - 1e-6
    _report(
        2,
        True,
        f"type 1 boundary empty, type 2 boundary {sorted(b2.neurons)}, plateau "
        f"value {res3.value:.6f}, edge escaped to {res4.value:.2e}",
    )


def test_criterion_03_outer_approximation_validity():
    checked = 0
    worst = -np.inf
    for seed in range(50):
        inst = make_random_instance([2, 16, 16, 1], seed=1000 + seed)
        res = ogo.run(
            inst.net, inst.loss, inst.feasible, inst.starts[0], ogo.OgoConfig(eps=1e-4)
        )
        seen = set()
        for rep in res.region_reports:
            if rep.active in seen:
                continue
            seen.add(rep.active)
            pat = ActivationPattern(rep.active, inst.net.n_relu)
            fw = oracle_region_fw(inst.net, inst.loss, inst.feasible, pat, 1500)
            slack = rep.bound - fw.value
            worst = max(worst, slack)
            assert slack <= 1e-6, f"seed {seed}: bound exceeds oracle by {slack:.2e}"
            checked += 1
    _report(3, checked >= 50, f"{checked} region bounds lower-bound the FW oracle (worst slack {worst:.2e})")


def test_criterion_04_feasibility_cut_separation():
    rng = np.random.default_rng(404)
    box = FeasibleSet([-1.0, -1.0], [1.0, 1.0])
    pairs = 0
    failures = 0
    while pairs < 1000:
        net = generate_network([2, 6, 4, 1], seed=int(rng.integers(0, 10**6)))
        regions = []
        for _ in range(40):
            x = rng.uniform(-1, 1, 2)
            pat, bnd = pattern_of(net, x, 1e-6)
            if bnd.neurons:
                continue
            region = region_system(net, pat)
            members = sample_region(net, region, box, 100, rng)
            regions.append((region, members))
            if len(regions) >= 5:
                break
        for region, members in regions:
            exteriors = []
            for _ in range(200):
                cand = rng.uniform(-1, 1, 2)
                if not region.contains(cand, 1e-6):
                    exteriors.append(cand)
                if len(exteriors) >= 10:
                    break
            for x_out in exteriors:
                cut = feasibility_cut_from_region(region, x_out)
                r, d = cut.as_leq()
                if not float(r @ x_out + d) > 0.0:
                    failures += 1
                if np.any(members @ r + d > 1e-9):
                    failures += 1
                pairs += 1
                if pairs >= 1000:
                    break
            if pairs >= 1000:
                break
    _report(4, failures == 0, f"{pairs} cuts separate exterior points from 100 sampled members, {failures} failures")


def test_criterion_05_gradient_correctness():
    rng = np.random.default_rng(505)
    plan = [
        ([2, 6, 1], 250),
        ([3, 8, 4, 2], 250),
        ([4, 16, 8, 2], 200),
        ([8, 32, 16, 4], 150),
        ([100, 64, 32, 8], 100),
        ([256, 128, 64, 128, 64], 50),  # S2
    ]
    total = 0
    worst = 0.0
    for arch, count in plan:
        net = generate_network(arch, seed=int(rng.integers(0, 10**6)))
        loss = LossSpec(rng.uniform(size=net.output_dim))
        for x in sample_fd_safe_points(net, rng, count, lo=0.0, hi=1.0):
            g, grad = loss_and_gradient(net, loss, x)
            fd = fd_gradient(net, loss, x, h=1e-6)
            err = float(np.abs(grad - fd).max()) / max(1.0, float(np.abs(grad).max()))
            worst = max(worst, err)
            assert err <= 1e-4, f"{arch}: rel error {err:.2e}"
            total += 1
    _report(5, total >= 1000, f"{total} interior points, worst relative FD error {worst:.2e}")


def test_criterion_06_masked_affine_algebra():
    rng = np.random.default_rng(606)
    triples = 0
    worst = 0.0
    while triples < 1000:
        depth = int(rng.integers(2, 4))
        arch = [int(rng.integers(2, 5))] + [int(rng.integers(3, 7)) for _ in range(depth)] + [
            int(rng.integers(1, 3))
        ]
        net = generate_network(arch, seed=int(rng.integers(0, 10**6)))
        relu = [int(j) for j in net.relu_indices]
        for _ in range(10):
            active = frozenset(j for j in relu if rng.random() < 0.5)
            pat = ActivationPattern(active, net.n_relu)
            x = rng.uniform(-1, 1, net.input_dim)
            _, trace = masked_forward(net, pat, x)
            j = int(rng.choice(relu))
            li, row_i = net.locate(j)
            row, off = masked_affine(net, pat, j)
            err = abs(float(row @ x + off) - float(trace.pre[li][row_i]))
            worst = max(worst, err)
            assert err <= 1e-10, f"affine mismatch {err:.2e}"
            triples += 1
            if triples >= 1000:
                break
    _report(6, triples >= 1000, f"{triples} (net, pattern, x) triples agree within 1e-10 (worst {worst:.2e})")


def test_criterion_07_milp_consistency(tmp_path):
    cases = [
        ("toy", toy_network_1d(), FeasibleSet([0.0], [5.0])),
        ("a", generate_network([2, 4, 3, 1], seed=5), FeasibleSet([0.0, 0.0], [1.0, 1.0])),
        ("b", generate_network([2, 5, 4, 1], seed=9), FeasibleSet([0.0, 0.0], [1.0, 1.0])),
        ("c", generate_network([3, 6, 2], seed=3), FeasibleSet([0.0] * 3, [1.0] * 3)),
    ]
    details = []
    for name, net, box in cases:
        assert net.n_relu <= 10
        path = export_milp(net, np.zeros(net.output_dim), box, tmp_path / f"{name}.lp")
        parsed = parse_lp_file(path)
        binaries = parsed["binaries"]
        from_file = set()
        for bits in itertools.product((0, 1), repeat=len(binaries)):
            rows, lo, hi, _ = fixed_assignment_rows(parsed, dict(zip(binaries, bits)))
            if lp.check_feasible(rows, lo, hi):
                from_file.add(bits)
        relu = [int(j) for j in net.relu_indices]
        from_regions = set()
        for bits in itertools.product((0, 1), repeat=len(relu)):
            active = frozenset(j for j, b in zip(relu, bits) if b)
            region = region_system(net, ActivationPattern(active, net.n_relu))
            if lp.check_feasible(region.lp_rows() + box.lp_rows(), box.lo, box.hi):
                from_regions.add(bits)
        assert from_file == from_regions, f"{name}: {len(from_file)} vs {len(from_regions)}"
        details.append(f"{name}:{len(from_file)}/{2 ** len(relu)}")
        if name == "toy":
            assert len(from_file) == 5
    _report(7, True, "feasible assignments match nonempty regions (" + ", ".join(details) + ")")


def test_criterion_08_comparative_benchmark(tmp_path):
    approaches = [
        ApproachSpec("ogo", "ogo", {"eps": 1e-4}),
        ApproachSpec("pgd", "pgd", {"step_scale": 1e-3}),
    ]
    instances = []
    for i in range(10):
        instances.append(make_random_instance([2, 32, 32, 4], seed=8000 + i))
    for i in range(10):
        instances.append(make_random_instance([4, 64, 32, 8], seed=8100 + i))
    finals: dict[str, dict[str, float]] = {"ogo": {}, "pgd": {}}
    at60: dict[str, dict[str, float]] = {"ogo": {}, "pgd": {}}
    best: dict[str, float] = {}
    for inst in instances:
        for app in approaches:
            res = run_once(inst, app)
            finals[app.name][inst.name] = res.value
            at60[app.name][inst.name] = best_so_far_at(res.iterations, 60.0)
            best[inst.name] = min(best.get(inst.name, np.inf), res.value)
        if inst.net.input_dim <= 2:
            _, g_grid, _ = oracle_grid(inst.net, inst.loss, inst.feasible, resolution=5e-3)
            best[inst.name] = min(best[inst.name], g_grid)
    mean_ogo = float(np.mean([at60["ogo"][i.name] - best[i.name] for i in instances]))
    mean_pgd = float(np.mean([at60["pgd"][i.name] - best[i.name] for i in instances]))
    _report(
        8,
        mean_ogo <= mean_pgd,
        f"mean |v - v*| at 60s: ogo {mean_ogo:.3e} <= pgd {mean_pgd:.3e} over 20 instances",
    )


def test_criterion_09_metric_identities(tmp_path):
    assert percent_gap_closed(10.0, 10.0, 0.0) == 0.0
    assert percent_gap_closed(10.0, 0.0, 0.0) == 1.0
    assert percent_gap_closed(10.0, 2.0, 0.0) == 0.8
    net = toy_network_1d()
    model_path = tmp_path / "model.json"
    save_network(net, model_path)
    inst_path = tmp_path / "toy.json"
    inst_path.write_text(
        json.dumps(
            {
                "model": "model.json",
                "target": [0.0],
                "box_lo": [0.0],
                "box_hi": [5.0],
                "starts": [[2.4], [3.7]],
            }
        )
    )
    suite = {
        "instances": [{"path": "toy.json"}],
        "approaches": [
            {"name": "ogo", "algo": "ogo", "config": {"max_iters": 120}},
            {"name": "pgd", "algo": "pgd", "config": {}},
        ],
    }
    suite_path = tmp_path / "suite.json"
    suite_path.write_text(json.dumps(suite))
    run_suite(suite_path, tmp_path / "a", jobs=1)
    run_suite(suite_path, tmp_path / "b", jobs=1)
    identical = (tmp_path / "a" / "summary.csv").read_bytes() == (
        tmp_path / "b" / "summary.csv"
    ).read_bytes()
    _report(9, identical, "formula cases exact; repeated suite summary is bitwise identical")


def test_criterion_10_invariant_trials():
    trials = 0
    # Projection idempotence on random boxes.
    rng = np.random.default_rng(110)
    for _ in range(6000):
        d = int(rng.integers(1, 5))
        lo = rng.uniform(-2, 0, d)
        hi = lo + rng.uniform(0.1, 2, d)
        box = FeasibleSet(lo, hi)
        x = rng.uniform(-4, 4, d)
        once = pgd.project(x, box)
        assert pgd.project(once, box).tobytes() == once.tobytes()
        trials += 1
    # Step-size bounds, incumbent monotonicity, and record reset over many runs.
    for run_idx in range(100):
        inst = make_random_instance(
            [int(rng.integers(1, 3)), int(rng.integers(3, 7)), 1],
            seed=2000 + run_idx,
        )
        cfg = ogo.OgoConfig(max_iters=40, eps=1e-4)
        step_min = cfg.resolve_step_min(inst.net.input_dim)
        best = [np.inf]

        def check(s, step_min=step_min, best=best):
            nonlocal trials
            assert step_min - 1e-15 <= s["step"] <= cfg.step_max + 1e-15
            assert s["g_best"] <= best[0] + 1e-15
            best[0] = s["g_best"]
            if s["improved"] and not s["dual"]:
                assert s["certified_count"] == 0
            trials += 3
        ogo.run(inst.net, inst.loss, inst.feasible, inst.starts[0], cfg, on_iteration=check)
    _report(10, trials >= 10_000, f"{trials} randomized invariant checks passed")
