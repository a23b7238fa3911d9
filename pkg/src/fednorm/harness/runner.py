"""Run every sweep point x seed of an experiment and stream rows to CSV."""

from __future__ import annotations

import csv
import json
import logging
import os
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import snapshot_metrics
from ..core import normalize_weights
from ..errors import FedNormError
from ..server import ServerConfig, run_training
from .config import ExperimentConfig, log_rounds, sweep_points

log = logging.getLogger(__name__)

COLUMNS = [
    "experiment_id", "sweep_point", "seed", "round", "tau_eff", "sampled",
    "grad_phi_sq_true", "grad_phi_sq_surrogate", "moreau_grad_sq", "envelope_gap",
    "wallclock_ms",
]
METRIC_COLUMNS = ["tau_eff", "grad_phi_sq_true", "grad_phi_sq_surrogate", "moreau_grad_sq", "envelope_gap"]
OUT_DIR_ENV = "FEDNORM_OUT_DIR"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _run_job(cfg: ExperimentConfig, sp, seed, problems):
    """Rows for one (sweep point, seed) job, plus metadata about the run."""
    t_start = time.perf_counter()
    try:
        problem = problems[sp.alpha]
        n = problem.n
        clients = sp.build_clients(n)
        scfg = ServerConfig(
            gamma_x=cfg.server.gamma_x, gamma_y=cfg.server.gamma_y,
            eta_x=cfg.clients.eta_x, eta_y=cfg.clients.eta_y,
            P=sp.participation(n), T=cfg.server.T, S=sp.snapshot_period(n),
            weight_mode=sp.weight_mode, variant=sp.variant,
        )
        p = normalize_weights([c.p for c in clients])
        moreau = cfg.logging.moreau

        def metric_fn(t, point, w):
            return snapshot_metrics(problem, w, p, point, moreau=moreau)

        rounds = log_rounds(cfg.server.T, cfg.logging.every)
        traj = run_training(
            problem, clients, scfg,
            noise=(cfg.noise.sigma_L, cfg.noise.beta_L), master_seed=seed,
            x0=cfg.init.x0, y0=cfg.init.y0, metric_fn=metric_fn, log_rounds=rounds,
        )
    except (FedNormError, ArithmeticError, ValueError) as exc:
        log.warning("sweep point %s seed %s failed: %s", sp.label, seed, exc)
        row = dict.fromkeys(COLUMNS, "")
        row.update(experiment_id=cfg.experiment_id, sweep_point=sp.label, seed=str(seed))
        return [row], {"sweep_point": sp.label, "seed": seed, "error": f"{type(exc).__name__}: {exc}",
                       "round": getattr(exc, "round", None)}

    elapsed_ms = (time.perf_counter() - t_start) * 1000.0
    rows = []
    for t in rounds:
        rec = traj.records[t]
        m = rec.metrics.as_dict() if rec.metrics is not None else {}
        rows.append({
            "experiment_id": cfg.experiment_id,
            "sweep_point": sp.label,
            "seed": str(seed),
            "round": str(t),
            "tau_eff": _fmt(rec.tau_eff),
            "sampled": str(len(rec.sampled)),
            "grad_phi_sq_true": _fmt(m.get("grad_phi_sq_true")),
            "grad_phi_sq_surrogate": _fmt(m.get("grad_phi_sq_surrogate")),
            "moreau_grad_sq": _fmt(m.get("moreau_grad_sq")),
            "envelope_gap": _fmt(m.get("envelope_gap")),
            "wallclock_ms": _fmt(elapsed_ms) if cfg.logging.record_wallclock else "",
        })
    return rows, {"sweep_point": sp.label, "seed": seed, "deviations": list(traj.deviations),
                  "x_bar": traj.x_bar.tolist(), "x_final": traj.final.x.tolist()}


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1, seed_override=None):
    """Execute all sweep points x seeds; return the rows written to the CSV.

    Jobs may run on several threads, but rows are written in job order
    (sweep points outer, seeds inner), so the CSV does not depend on
    ``threads``.  Metadata (version, config hash, deviations, failures) goes
    to ``meta.json`` next to the CSV.
    """
    out = Path(out_dir or os.environ.get(OUT_DIR_ENV) or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [seed_override] if seed_override is not None else list(cfg.seeds)
    points = sweep_points(cfg)
    problems = {}
    for sp in points:
        if sp.alpha not in problems:
            problems[sp.alpha] = sp.build_problem()
    jobs = [(sp, s) for sp in points for s in seeds]

    csv_path = out / cfg.output.csv
    all_rows, runs = [], []
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()

        def work(job):
            return _run_job(cfg, job[0], job[1], problems)

        if threads > 1:
            pool = ThreadPoolExecutor(max_workers=threads)
            results = pool.map(work, jobs)
        else:
            pool = None
            results = map(work, jobs)
        try:
            for rows, meta in results:
                writer.writerows(rows)
                fh.flush()
                all_rows.extend(rows)
                runs.append(meta)
        finally:
            if pool is not None:
                pool.shutdown()

    meta = {
        "experiment_id": cfg.experiment_id,
        "version": version_string(),
        "config_hash": cfg.config_hash(),
        "csv": str(csv_path),
        "deviations": sorted({d for r in runs for d in r.get("deviations", [])}),
        "failures": [r for r in runs if "error" in r],
        "runs": runs,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return all_rows
