"""Command-line client: builds service requests and runs them in-process or against a server."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .bench import run_suite
from .errors import InvalidInputError, NumericalFailureError, ReluInvError
from .model import load_network, network_to_dict
from .result import write_log_csv, LOG_COLUMNS, IterationRow
from .service import handlers, schemas

EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3


def _post(url: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(url.rstrip("/") + route, json=payload, timeout=600.0)
    if resp.status_code == 400 or resp.status_code == 422:
        raise InvalidInputError(resp.text)
    if resp.status_code >= 500:
        raise NumericalFailureError(resp.text)
    return resp.json()


def _dispatch(url: str | None, route: str, handler, req, response_model):
    if url:
        return response_model.model_validate(_post(url, route, req.model_dump()))
    return handler(req)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericalFailureError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL_FAILURE)
        except (InvalidInputError, ReluInvError, FileNotFoundError, json.JSONDecodeError) as exc:
            click.echo(f"invalid input: {exc}", err=True)
            sys.exit(EXIT_INVALID_INPUT)

    return wrapper


def _read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _instance_model(path: str) -> schemas.InstanceModel:
    data = _read_json(path)
    data.pop("model", None)
    data.pop("seed", None) if data.get("seed") is None else None
    return schemas.InstanceModel.model_validate(data)


def _network_model(path: str) -> schemas.NetworkModel:
    return schemas.NetworkModel.from_spec(load_network(path))


@click.group()
def main():
    """Find constrained inputs of a trained ReLU network that produce a desired output."""


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--algo", type=click.Choice(["ogo", "pgd"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--log", "log_path", type=click.Path(), default=None, help="Iteration log CSV.")
@click.option("--start-index", type=int, default=0, show_default=True)
@click.option("--url", default=None, help="Send the request to a running service instead.")
@_exit_codes
def run(model_path, instance_path, algo, config_path, log_path, start_index, url):
    """Run one optimization on an instance and print the result as JSON."""
    req = schemas.SolveRequest(
        model=_network_model(model_path),
        instance=_instance_model(instance_path),
        algo=algo,
        config=_read_json(config_path) if config_path else {},
        start_index=start_index,
    )
    resp = _dispatch(url, "/solve", handlers.solve, req, schemas.SolveResponse)
    if log_path:
        rows = [
            IterationRow(r.iter, r.time_s, r.phase, r.g_curr, r.g_best, r.step, r.cuts, r.status)
            for r in resp.iterations
        ]
        write_log_csv(log_path, rows)
    click.echo(json.dumps({"x": resp.x, "value": resp.value, "status": resp.status}))


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True)
@_exit_codes
def suite(spec_path, out_dir, jobs):
    """Run a benchmark suite and write summary/profile CSVs."""
    records = run_suite(spec_path, out_dir, jobs)
    ok = sum(1 for r in records if not r.status.startswith("error"))
    click.echo(f"{ok}/{len(records)} runs completed; outputs in {out_dir}")
    if ok < len(records):
        for r in records:
            if r.status.startswith("error"):
                click.echo(f"  {r.instance} / {r.approach}: {r.status}", err=True)


@main.command()
@click.option("--arch", required=True, help="Comma-separated layer sizes, input first.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--normalize", is_flag=True, help="Scale outputs onto [0, 1] with an affine layer.")
@click.option("--samples", type=int, default=4096, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--url", default=None)
@_exit_codes
def gen(arch, seed, normalize, samples, out_path, url):
    """Generate a random network and write it as a model JSON file."""
    try:
        sizes = [int(tok) for tok in arch.split(",") if tok.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"bad architecture {arch!r}: {exc}") from exc
    req = schemas.GenerateRequest(arch=sizes, seed=seed, normalize=normalize, sample_count=samples)
    resp = _dispatch(url, "/networks/generate", handlers.generate, req, schemas.GenerateResponse)
    Path(out_path).write_text(json.dumps(network_to_dict(resp.model.to_spec())))
    click.echo(f"wrote {out_path}")


@main.command("export-milp")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--fixed-pattern-at",
    default=None,
    help="JSON input vector; export that point's region instead of the full encoding.",
)
@click.option("--url", default=None)
@_exit_codes
def export_milp(model_path, instance_path, out_path, fixed_pattern_at, url):
    """Write the big-M encoding (or one region's LP) to a CPLEX LP file."""
    req = schemas.MilpExportRequest(
        model=_network_model(model_path),
        instance=_instance_model(instance_path),
        fixed_pattern_at=json.loads(fixed_pattern_at) if fixed_pattern_at else None,
    )
    resp = _dispatch(url, "/export/milp", handlers.export, req, schemas.MilpExportResponse)
    Path(out_path).write_text(resp.lp_text)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["grid", "fw-regions"]), required=True)
@click.option("--resolution", type=float, default=1e-3, show_default=True)
@click.option("--fw-iters", type=int, default=1000, show_default=True)
@click.option("--url", default=None)
@_exit_codes
def oracle(model_path, instance_path, mode, resolution, fw_iters, url):
    """Brute-force reference values: grid search or per-region Frank-Wolfe minima."""
    req = schemas.OracleRequest(
        model=_network_model(model_path),
        instance=_instance_model(instance_path),
        mode=mode,
        resolution=resolution,
        fw_iterations=fw_iters,
    )
    resp = _dispatch(url, "/oracle", handlers.oracle, req, schemas.OracleResponse)
    click.echo(resp.model_dump_json())


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("reluinv.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
