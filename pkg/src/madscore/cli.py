"""Command-line front end.

Subcommands build models, generate datasets, train the denoiser, run
standard or manifold-attracted inference, sweep hyperparameter grids, and
run the oracle cross-check suite.  Every command is deterministic given its
flags and seed; data files carry a schema version line and the run's full
config snapshot is stored in the adjacent summary JSON (data files contain
no timestamps, so reruns are byte-identical).

Exit codes: 0 success, 2 validation failure, 3 numerical failure,
4 bad input.  Failures emit one machine-readable JSON object on stderr:
{"code": ..., "message": ..., "context": {...}}.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import synthdata
from .models import (
    DegenerateGaussian,
    DiracMixture,
    GaussianMixture,
    ProductModel,
    RadialGaussianMixture,
    load_model,
    save_model,
)
from .nnscore import (
    DEFAULT_LEARNED_FD_DELTA,
    LearnedScoreOracle,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_denoiser,
    validation_loss,
    write_training_log,
    TrainingDivergedError,
)
from .sampler import (
    DivergenceError,
    MeansReference,
    RingsReference,
    batch_summary,
    edm_schedule,
    run_batch,
    write_batch_summary,
    write_endpoints_csv,
    write_trajectory_csv,
)
from .svgplot import render_scatter
from .validate import run_validation_suite
from .xscore import (
    AnalyticScoreOracle,
    CorrectionSingularError,
    DEFAULT_FD_DELTA,
    MadParams,
    OracleRangeError,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_BAD_INPUT = 4

_MAX_BASIN_CENTERS = 256


class ValidationFailure(Exception):
    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


def _emit_error(code, message, context=None):
    payload = {"code": code, "message": message, "context": context or {}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _workers():
    raw = os.environ.get("MAD_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 4
    except ValueError:
        raise click.UsageError(f"MAD_THREADS must be an integer, got {raw!r}")


def _parse_grid(text, name):
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise click.UsageError(f"--{name} must be a comma-separated float list")
    if not values:
        raise click.UsageError(f"--{name} must list at least one value")
    return values


def _dataset_spec(kind, count, seed, manifold, ambient_dim, noise_std):
    return synthdata.DatasetSpec(
        kind=kind.replace("-", "_"),
        count=count,
        seed=seed,
        manifold=manifold,
        ambient_dim=ambient_dim,
        noise_std=noise_std,
    )


def _basin_centers(model):
    """Mode centers used for per-basin endpoint statistics."""
    if isinstance(model, GaussianMixture):
        return model.means
    if isinstance(model, DiracMixture):
        return model.locations
    if isinstance(model, DegenerateGaussian):
        mean, _ = model._ambient_mean_cov(0.0)
        return mean[None, :]
    if isinstance(model, ProductModel):
        blocks = [_basin_centers(f) for f in model.factors]
        if any(b is None for b in blocks):
            return None
        total = int(np.prod([b.shape[0] for b in blocks]))
        if total > _MAX_BASIN_CENTERS:
            return None
        grids = np.meshgrid(*[np.arange(b.shape[0]) for b in blocks], indexing="ij")
        rows = []
        for combo in zip(*[g.ravel() for g in grids]):
            rows.append(np.concatenate([b[i] for b, i in zip(blocks, combo)]))
        return np.asarray(rows)
    return None


def _model_reference(model):
    if isinstance(model, RadialGaussianMixture):
        return RingsReference(model.centers, model.radius)
    centers = _basin_centers(model)
    if centers is not None:
        return MeansReference(centers)
    return None


def _build_oracle(model_path, checkpoint_path):
    if (model_path is None) == (checkpoint_path is None):
        raise click.UsageError("provide exactly one of --model or --checkpoint")
    if model_path is not None:
        model = load_model(model_path)
        return AnalyticScoreOracle(model), model, DEFAULT_FD_DELTA
    net = load_checkpoint(checkpoint_path)
    return LearnedScoreOracle(net), None, DEFAULT_LEARNED_FD_DELTA


def _build_schedule(steps, sigma_min, sigma_max, rho, oracle):
    schedule = edm_schedule(steps, sigma_min, sigma_max, rho)
    top = schedule.times[0] * (1.0 + 0.05)  # forward-difference headroom
    if top > oracle.sigma_max or sigma_min < oracle.sigma_min:
        raise click.UsageError(
            f"schedule range [{sigma_min}, {sigma_max}] does not fit oracle "
            f"validity range [{oracle.sigma_min}, {oracle.sigma_max}]"
        )
    return schedule


@click.group()
def cli():
    """Extended-score diffusion inference at toy scale."""


@cli.command("model")
@click.option("--kind", type=click.Choice(["line-mixture", "tilted", "radial"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--min-center-distance", type=float, default=None,
              help="Radial only: rejection-sample centers at least this far apart.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cmd_model(kind, seed, min_center_distance, out):
    """Write one of the built-in analytic target models as JSON."""
    if kind == "line-mixture":
        model = synthdata.line_mixture_model()
    elif kind == "tilted":
        model = synthdata.tilted_model(seed)
    else:
        model = synthdata.radial_model(seed, min_center_distance=min_center_distance)
    save_model(model, out)
    click.echo(f"wrote {out}")


@cli.command("dataset")
@click.option("--kind", type=click.Choice(["line-mixture", "tilted", "radial", "noisy-manifold"]),
              required=True)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--manifold", type=click.Choice(["line", "circle"]), default=None)
@click.option("--ambient-dim", type=int, default=None)
@click.option("--noise-std", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--spec-out", type=click.Path(dir_okay=False), default=None)
def cmd_dataset(kind, count, seed, manifold, ambient_dim, noise_std, out, spec_out):
    """Sample a dataset to CSV (one row per point)."""
    spec = _dataset_spec(kind, count, seed, manifold, ambient_dim, noise_std)
    points = synthdata.sample_dataset(spec)
    synthdata.dataset_to_csv(points, out, spec)
    if spec_out:
        synthdata.save_spec(spec, spec_out)
    click.echo(f"wrote {out} ({points.shape[0]} points in R^{points.shape[1]})")


def _run_cells(oracle, schedule, cells, n, seed, derivative, reference):
    """Run a list of (label, mode, params) cells; failures do not stop the sweep."""
    seeds = [seed + i for i in range(n)]
    rows = []
    for label, mode, params in cells:
        row = {"label": label, "mode": mode}
        if params is not None:
            row |= {"a": params.a, "b": params.b, "p": params.p}
        try:
            trajectories = run_batch(
                oracle, schedule, seeds, mode=mode, params=params,
                derivative=derivative, max_workers=_workers(),
            )
        except (CorrectionSingularError, DivergenceError, OracleRangeError) as err:
            row |= {"status": "failed", "error": str(err)}
            rows.append((row, None))
            continue
        summary = batch_summary(trajectories, reference)
        row["status"] = "ok"
        if "reference_rms_distance" in summary:
            row["reference_rms_distance"] = summary["reference_rms_distance"]
        if "max_correction" in summary:
            row["max_correction"] = summary["max_correction"]
            row["min_correction"] = summary["min_correction"]
        rows.append((row, (trajectories, summary)))
    return rows


@cli.command("sample")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["standard", "mad"]), default="standard",
              show_default=True)
@click.option("--a", type=float, default=1.0, show_default=True)
@click.option("--b", type=float, default=1.0, show_default=True)
@click.option("--p", type=float, default=1.0, show_default=True)
@click.option("--delta", type=float, default=None,
              help="Forward-difference step (default 1e-4 analytic, 1e-3 learned).")
@click.option("--m-guard", type=float, default=1e-6, show_default=True)
@click.option("--derivative", type=click.Choice(["fd", "analytic"]), default="fd",
              show_default=True)
@click.option("--steps", type=int, default=40, show_default=True)
@click.option("--sigma-min", type=float, default=0.002, show_default=True)
@click.option("--sigma-max", type=float, default=80.0, show_default=True)
@click.option("--rho", type=float, default=7.0, show_default=True)
@click.option("--n", type=int, default=64, show_default=True, help="Number of trajectories.")
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed; run uses seed..seed+n-1.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--trajectories/--no-trajectories", default=False, show_default=True)
@click.option("--svg/--no-svg", default=False, show_default=True)
def cmd_sample(model_path, checkpoint_path, mode, a, b, p, delta, m_guard, derivative,
               steps, sigma_min, sigma_max, rho, n, seed, out_dir, trajectories, svg):
    """Run inference and write endpoints CSV, summary JSON, optional extras."""
    oracle, model, default_delta = _build_oracle(model_path, checkpoint_path)
    schedule = _build_schedule(steps, sigma_min, sigma_max, rho, oracle)
    params = None
    if mode == "mad":
        params = MadParams(a=a, b=b, p=p, delta=delta or default_delta, m_guard=m_guard)
    config = {
        "command": "sample",
        "oracle": model_path or checkpoint_path,
        "mode": mode,
        "params": params.to_dict() if params else None,
        "derivative": derivative if mode == "mad" else None,
        "schedule": schedule.to_dict(),
        "n": n,
        "seed": seed,
        "schema_version": 1,
    }
    reference = _model_reference(model) if model is not None else None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    seeds = [seed + i for i in range(n)]
    batch = run_batch(oracle, schedule, seeds, mode=mode, params=params,
                      derivative=derivative, max_workers=_workers())
    write_endpoints_csv(batch, out / "endpoints.csv")
    write_batch_summary(batch_summary(batch, reference), out / "summary.json", config)
    if trajectories:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for t in batch:
            write_trajectory_csv(t, traj_dir / f"trajectory_{t.seed:06d}.csv")
    if svg:
        if oracle.dim == 2:
            endpoints = np.stack([t.endpoint for t in batch])
            background = None
            if model is not None:
                rng = np.random.Generator(np.random.Philox(key=0))
                background = model.sample(20000, rng)
            render_scatter(out / "endpoints.svg", endpoints, background,
                           title=f"{mode} endpoints")
        else:
            click.echo("svg skipped: oracle is not 2-d", err=True)
    click.echo(f"wrote {out / 'endpoints.csv'} and {out / 'summary.json'}")


@cli.command("train")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              help="Dataset CSV; alternatively give a --kind spec.")
@click.option("--kind", type=click.Choice(["line-mixture", "tilted", "radial", "noisy-manifold"]),
              default=None)
@click.option("--count", type=int, default=4096, show_default=True)
@click.option("--data-seed", type=int, default=0, show_default=True)
@click.option("--manifold", type=click.Choice(["line", "circle"]), default=None)
@click.option("--ambient-dim", type=int, default=None)
@click.option("--noise-std", type=float, default=None)
@click.option("--iterations", type=int, default=20000, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--learning-rate", type=float, default=1e-3, show_default=True)
@click.option("--lr-schedule", type=click.Choice(["cosine", "constant"]), default="cosine",
              show_default=True)
@click.option("--sigma-min", type=float, default=0.002, show_default=True)
@click.option("--sigma-max", type=float, default=80.0, show_default=True)
@click.option("--hidden", type=str, default="128,128,128", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None)
def cmd_train(data_path, kind, count, data_seed, manifold, ambient_dim, noise_std,
              iterations, batch_size, learning_rate, lr_schedule, sigma_min, sigma_max,
              hidden, seed, out, log_path):
    """Train the MLP denoiser and write a checkpoint (plus optional log CSV)."""
    if (data_path is None) == (kind is None):
        raise click.UsageError("provide exactly one of --data or --kind")
    if data_path is not None:
        data = synthdata.load_dataset_csv(data_path)
    else:
        spec = _dataset_spec(kind, count, data_seed, manifold, ambient_dim, noise_std)
        data = synthdata.sample_dataset(spec)
    config = TrainConfig(
        iterations=iterations,
        batch_size=batch_size,
        learning_rate=learning_rate,
        lr_schedule=lr_schedule,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        hidden=tuple(int(h) for h in hidden.split(",") if h.strip()),
        seed=seed,
    )
    net, history = train_denoiser(config, data)
    held_out = validation_loss(net, data, seed=seed + 1)
    save_checkpoint(net, out, meta={"config": config.to_dict(), "validation_loss": held_out})
    if log_path:
        write_training_log(history, log_path, config)
    final = history[-1, 1] if history.size else float("nan")
    click.echo(f"wrote {out} (final loss {final:.4f}, validation loss {held_out:.4f})")


@cli.command("sweep")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--a-grid", type=str, default="1", show_default=True)
@click.option("--b-grid", type=str, default="1,10,30", show_default=True)
@click.option("--p-grid", type=str, default="1,2,8", show_default=True)
@click.option("--delta", type=float, default=None)
@click.option("--m-guard", type=float, default=1e-6, show_default=True)
@click.option("--derivative", type=click.Choice(["fd", "analytic"]), default="fd",
              show_default=True)
@click.option("--steps", type=int, default=40, show_default=True)
@click.option("--sigma-min", type=float, default=0.002, show_default=True)
@click.option("--sigma-max", type=float, default=80.0, show_default=True)
@click.option("--rho", type=float, default=7.0, show_default=True)
@click.option("--n", type=int, default=128, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def cmd_sweep(model_path, checkpoint_path, a_grid, b_grid, p_grid, delta, m_guard,
              derivative, steps, sigma_min, sigma_max, rho, n, seed, out_dir):
    """Grid-run the attracted mode against the standard baseline."""
    oracle, model, default_delta = _build_oracle(model_path, checkpoint_path)
    schedule = _build_schedule(steps, sigma_min, sigma_max, rho, oracle)
    reference = _model_reference(model) if model is not None else None
    cells = [("standard", "standard", None)]
    for a in _parse_grid(a_grid, "a-grid"):
        for b in _parse_grid(b_grid, "b-grid"):
            for p in _parse_grid(p_grid, "p-grid"):
                try:
                    params = MadParams(a=a, b=b, p=p, delta=delta or default_delta,
                                       m_guard=m_guard)
                except ValueError as err:
                    raise click.UsageError(str(err))
                cells.append((f"a={a} b={b} p={p}", "mad", params))
    rows = _run_cells(oracle, schedule, cells, n, seed, derivative, reference)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "command": "sweep",
        "oracle": model_path or checkpoint_path,
        "schedule": schedule.to_dict(),
        "n": n,
        "seed": seed,
        "derivative": derivative,
        "schema_version": 1,
    }
    columns = ["label", "mode", "a", "b", "p", "status", "reference_rms_distance",
               "min_correction", "max_correction", "error"]
    lines = ["# schema_version: 1", ",".join(columns)]
    for row, _ in rows:
        lines.append(",".join(str(row.get(c, "")) for c in columns))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    payload = {"config": config, "cells": [row for row, _ in rows]}
    (out / "sweep.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    n_failed = sum(1 for row, _ in rows if row["status"] != "ok")
    click.echo(f"wrote {out / 'sweep.csv'} ({len(rows)} cells, {n_failed} failed)")


@cli.command("validate")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", type=click.Path(dir_okay=False), default=None)
@click.option("--inject-error", is_flag=True, default=False,
              help="Negative control: perturb one comparison so the suite must fail.")
def cmd_validate(seed, report, inject_error):
    """Cross-check all closed forms against brute-force oracles."""
    result, passed = run_validation_suite(seed=seed, inject_error=inject_error)
    for check in result["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        click.echo(
            f"{status} {check['name']}: error {check['error']:.3e} "
            f"(tolerance {check['tolerance']:.3e})"
        )
    if report:
        Path(report).write_text(
            json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    if not passed:
        raise ValidationFailure("oracle cross-check suite failed", {"seed": seed})
    click.echo("all checks passed")


def main(argv=None):
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as err:
        return int(err.exit_code)
    except click.UsageError as err:
        _emit_error(EXIT_BAD_INPUT, err.format_message(), {"kind": "usage"})
        return EXIT_BAD_INPUT
    except click.ClickException as err:
        _emit_error(EXIT_BAD_INPUT, err.format_message(), {"kind": "click"})
        return EXIT_BAD_INPUT
    except ValidationFailure as err:
        _emit_error(EXIT_VALIDATION, str(err), err.context)
        return EXIT_VALIDATION
    except CorrectionSingularError as err:
        _emit_error(EXIT_NUMERICAL, str(err),
                    {"gamma": err.gamma, "b": err.b, "t": err.t})
        return EXIT_NUMERICAL
    except (DivergenceError, TrainingDivergedError, OracleRangeError) as err:
        _emit_error(EXIT_NUMERICAL, str(err), {"kind": type(err).__name__})
        return EXIT_NUMERICAL
    except (ValueError, OSError, json.JSONDecodeError) as err:
        _emit_error(EXIT_BAD_INPUT, str(err), {"kind": type(err).__name__})
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
