"""Experiment orchestration: dispatch a configuration and persist its reports."""

from __future__ import annotations

import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
from filelock import FileLock, Timeout

from .bilinear import QuadratureSpec, kernel_decay_check
from .config import DATUM_COMMANDS, ConfigError, ExperimentConfig
from .families import FamilyError
from .field import SpectralField
from .fieldio import CFF1Error, read_field, write_field, write_trajectory
from .grid import GridError, make_grid
from .lab import LabError, caloric_ensemble, embedding_ensemble, product_ensemble
from .norms import NormError, NormSpec, norm_of, norms_to_csv
from .solver import (
    CONVERGED,
    HorizonError,
    SolverConfig,
    SolverError,
    estimate_bilinear_constant,
    existence_horizon,
    picard_solve,
    smallness_evaluate,
)
from .spectral import OperatorError, random_divfree_field, shear_field, shell_profile, taylor_green_field

log = logging.getLogger(__name__)

OK, FAILURE, VERDICT = 0, 1, 2
LOCK_NAME = ".critflow.lock"
DEFAULT_OUT = "critflow-out"


@dataclass
class Outcome:
    """What a command produced: a deterministic summary plus extra report files."""

    summary: dict
    status: int = OK
    files: dict[str, str] = field(default_factory=dict)
    text: str = ""


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def build_datum(cfg: ExperimentConfig) -> SpectralField:
    grid = make_grid(cfg.d, cfg.n, cfg.L)
    if cfg.input is not None:
        f = read_field(cfg.input)
        if f.grid != grid:
            raise ConfigError(f"input field grid (d={f.grid.d}, n={f.grid.n}) does not match the configuration")
        return f * cfg.amplitude
    if cfg.datum == "zero":
        return SpectralField.zeros(grid)
    if cfg.datum == "shear":
        return shear_field(grid, cfg.amplitude)
    if cfg.datum == "taylor-green":
        return taylor_green_field(grid, cfg.amplitude)
    return random_divfree_field(grid, shell_profile(cfg.shells), cfg.seed) * cfg.amplitude


def _solver_config(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(
        T=cfg.T,
        family=cfg.index_family(),
        time_nodes=cfg.M + 1,
        picard_tol=cfg.picard_tol,
        max_iters=cfg.max_iters,
        quad=QuadratureSpec(cfg.panels, cfg.gauss_points),
        homogeneous=cfg.homogeneous,
    )


def _constant(cfg: ExperimentConfig):
    grid = make_grid(cfg.d, cfg.n, cfg.L)
    return estimate_bilinear_constant(cfg.index_family(), cfg.ensemble_size, cfg.seed, grid, cfg.T,
                                      time_nodes=cfg.M + 1, quad=QuadratureSpec(cfg.panels, cfg.gauss_points))


def _cmd_solve(cfg: ExperimentConfig, out: Path) -> Outcome:
    rep = picard_solve(build_datum(cfg), _solver_config(cfg), initial=cfg.initial)
    text = rep.to_text()
    if cfg.dump_fields:
        write_trajectory(out / "fields" / "solution", rep.solution, "u")
        write_trajectory(out / "fields" / "w", rep.w, "w")
    csv_rows = text.split("[iterations]\n", 1)[1]
    return Outcome(rep.summary(), OK if rep.verdict == CONVERGED else VERDICT, {"iterations.csv": csv_rows}, text)


def _cmd_smallness(cfg: ExperimentConfig, out: Path) -> Outcome:
    v = smallness_evaluate(build_datum(cfg), cfg.index_family(), cfg.T, cfg.homogeneous)
    return Outcome({"value": v.value, **v.metadata})


def _cmd_horizon(cfg: ExperimentConfig, out: Path) -> Outcome:
    u0 = build_datum(cfg)
    family = cfg.index_family()
    summary = {"family": family.as_dict()}
    if cfg.delta == "auto":
        est = _constant(cfg)
        delta = est.delta_hat
        summary["C_hat"] = est.C_hat
    else:
        delta = cfg.delta
    summary["delta"] = delta
    try:
        T = existence_horizon(u0, family, delta, T_max=cfg.T_max)
    except HorizonError as exc:
        summary.update(horizon=None, verdict=str(exc))
        return Outcome(summary, VERDICT)
    summary.update(horizon=T, verdict="ok")
    return Outcome(summary)


def _cmd_norm(cfg: ExperimentConfig, out: Path) -> Outcome:
    spec = NormSpec(cfg.norm_kind, s=cfg.norm_s, q=cfg.norm_q, p=cfg.norm_p, alpha=cfg.norm_alpha, levels=cfg.levels)
    v = norm_of(build_datum(cfg), spec)
    return Outcome({"value": v.value, "spec": asdict(spec), **v.metadata}, files={"norms.csv": norms_to_csv([v])})


def _ratio_outcome(report) -> Outcome:
    return Outcome(report.summary(), files={"ratios.csv": report.to_csv()})


def _cmd_product(cfg: ExperimentConfig, out: Path) -> Outcome:
    return _ratio_outcome(product_ensemble(cfg.d, cfg.s, cfg.p, cfg.q, cfg.ensemble_size, cfg.seed, cfg.n,
                                           cfg.refine, profile=shell_profile(cfg.shells)))


def _cmd_embedding(cfg: ExperimentConfig, out: Path) -> Outcome:
    exps = {"s": cfg.s if cfg.s is not None else 0.0, "q": cfg.q if cfg.q is not None else 2.0}
    if cfg.pair == "c":
        exps.update(p1=cfg.p1, p2=cfg.p2)
    if cfg.pair in ("d", "d-sobolev"):
        exps.update(s2=cfg.s2, q2=cfg.q2)
        if cfg.pair == "d":
            exps["p"] = cfg.p if cfg.p is not None else 2.0
    return _ratio_outcome(embedding_ensemble(cfg.pair, cfg.d, cfg.ensemble_size, cfg.seed, cfg.n, cfg.refine,
                                             shell_profile(cfg.shells), **exps))


def _cmd_caloric(cfg: ExperimentConfig, out: Path) -> Outcome:
    return _ratio_outcome(caloric_ensemble(cfg.index_family(), cfg.ensemble_size, cfg.seed, cfg.n,
                                           shell_profile(cfg.shells)))


def _cmd_constant(cfg: ExperimentConfig, out: Path) -> Outcome:
    est = _constant(cfg)
    return Outcome(est.summary())


def _cmd_kernel(cfg: ExperimentConfig, out: Path) -> Outcome:
    rep = kernel_decay_check(cfg.d, np.array(cfg.radii), cfg.kernel_n, cfg.kernel_L)
    summary = {"bound_constant": rep.bound_constants, "radii": rep.radii, "kernel_magnitudes": rep.kernel_magnitudes,
               **rep.metadata}
    return Outcome(summary, files={"kernel.csv": rep.to_csv()})


DISPATCH = {
    "solve": _cmd_solve,
    "smallness": _cmd_smallness,
    "horizon": _cmd_horizon,
    "norm": _cmd_norm,
    "verify-product": _cmd_product,
    "verify-embedding": _cmd_embedding,
    "verify-caloric": _cmd_caloric,
    "estimate-constant": _cmd_constant,
    "kernel-check": _cmd_kernel,
}

#: Errors that reflect bad input rather than bugs.
USAGE_ERRORS = (ConfigError, FamilyError, GridError, NormError, SolverError, LabError, OperatorError, CFF1Error,
                OSError)


def _summary_text(cfg: ExperimentConfig, outcome: Outcome) -> str:
    if outcome.text:
        return outcome.text
    lines = [f"# critflow {cfg.command}"]
    for key, value in sorted(_clean(outcome.summary).items()):
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None, threads: int | None = None,
                   config_text: str | None = None) -> int:
    """Run one experiment and write its reports into ``out_dir``.

    Returns 0 on success, 2 when the computation finished but its verdict
    failed (divergence, no admissible horizon) and 1 on usage or I/O errors.
    ``summary.json`` depends only on the configuration and seed; wall-clock
    facts go to ``metadata.json``.
    """
    out = Path(out_dir or cfg.output or DEFAULT_OUT)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(out / LOCK_NAME), timeout=0)
        lock.acquire()
    except Timeout:
        print(f"critflow: output directory {out} is in use by another run", file=sys.stderr)
        return FAILURE
    except OSError as exc:
        print(f"critflow: cannot use output directory {out}: {exc}", file=sys.stderr)
        return FAILURE
    try:
        started = time.time()
        workers = threads or os.cpu_count() or 1
        try:
            with scipy.fft.set_workers(workers):
                outcome = DISPATCH[cfg.command](cfg, out)
        except USAGE_ERRORS as exc:
            print(f"critflow: {exc}", file=sys.stderr)
            return FAILURE
        summary = {"command": cfg.command, "config": cfg.as_dict(), "status": outcome.status,
                   "result": outcome.summary}
        meta = {"started": started, "finished": time.time(), "elapsed_s": time.time() - started,
                "threads": workers, "python": platform.python_version(), "numpy": np.__version__,
                "scipy": scipy.__version__, "host": platform.node()}
        try:
            (out / "summary.json").write_text(dumps(summary), encoding="utf-8")
            (out / "metadata.json").write_text(dumps(meta), encoding="utf-8")
            (out / "summary.txt").write_text(_summary_text(cfg, outcome), encoding="utf-8")
            for name, content in outcome.files.items():
                (out / name).write_text(content, encoding="utf-8")
            if config_text is not None:
                (out / "config.txt").write_text(config_text, encoding="utf-8")
            if cfg.dump_fields and cfg.command in DATUM_COMMANDS:
                (out / "fields").mkdir(exist_ok=True)
                write_field(out / "fields" / "datum.cff", build_datum(cfg))
        except OSError as exc:
            print(f"critflow: failed to write reports: {exc}", file=sys.stderr)
            return FAILURE
        return outcome.status
    finally:
        lock.release()
