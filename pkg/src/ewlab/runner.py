"""Checkpointed execution of realization-granular experiment tasks.

A task is (tag, kwargs) with a module-level worker function taking the
kwargs and returning a JSON-serializable result.  Results are written to
one file per task under out/checkpoints/<command>/, keyed by the config
fingerprint, so an interrupted run restarts where it stopped (--resume)
and a changed configuration is refused rather than silently mixed.
Aggregation always reads the checkpoint files back in tag order, which
makes the final tables bit-identical for any worker count.
"""

from __future__ import annotations

import json
import shutil
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import __version__
from .config import grid_from, mollifier_from, test_function_from
from .errors import ConfigurationError
from .harness import run_covariance_realization, run_fluctuation_realization
from .noise import NoiseRealization
from .rng import EXPERIMENT_IDS
from .solver import SolverConfig, solve_she


def task_fluctuation(params: dict, index: int) -> dict:
    """One fluctuation solve; returns {f_tag: X_eps}."""
    return run_fluctuation_realization(
        eps=params["eps"],
        t=params["t"],
        g=test_function_from(params["g"]),
        beta=params["beta"],
        grid=grid_from(params["grid"]),
        mollifier=mollifier_from(params),
        dt=params["dt"],
        seed=params["seed"],
        index=index,
        f_tags=tuple(params["f_tags"]),
        floor=params["floor"],
    )


def task_polymer(params: dict, index: int) -> dict:
    """One partition-function solve; site values at T and the checkpoints."""
    grid = grid_from(params["grid"])
    m = mollifier_from(params)
    dt = params["dt"]
    n_steps = int(round(params["T"] / dt))
    noise = NoiseRealization(
        grid=grid, mollifier=m, dt=dt, n_slices=n_steps,
        seed=params["seed"], stream_id=index,
        experiment_id=EXPERIMENT_IDS["polymer"],
    )
    cfg = SolverConfig(grid=grid, mollifier=m, beta=params["beta"], dt=dt)
    snaps = sorted(float(s) for s in params["checkpoint_times"])
    res = solve_she(cfg, noise, snapshot_times=snaps)
    q = grid.n_cells // 4
    ax = np.array([q, 3 * q])
    sites = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    pick = lambda a: a[sites[:, 0], sites[:, 1], sites[:, 2]].tolist()
    return {
        "final": pick(res.final.values),
        "snaps": {f"{s:g}": pick(res.snapshots[s]) for s in snaps},
    }


def task_covariance(params: dict, index: int) -> dict:
    """One stationarized solve; covariance profiles per f_tag."""
    out = run_covariance_realization(
        beta=params["beta"],
        T=params["T"],
        grid=grid_from(params["grid"]),
        mollifier=mollifier_from(params),
        dt=params["dt"],
        seed=params["seed"],
        index=index,
        offsets=tuple(params["offsets"]),
        f_tags=tuple(params["f_tags"]),
        block=params["block"],
    )
    return {
        tag: {str(k): v for k, v in prof.items()} for tag, prof in out.items()
    }


def checkpoint_dir(out: Path, command: str) -> Path:
    return Path(out) / "checkpoints" / command


def prepare_checkpoints(cdir: Path, fp: str, resume: bool) -> None:
    """Create or validate the checkpoint directory for fingerprint `fp`."""
    cdir = Path(cdir)
    meta_path = cdir / "meta.json"
    if cdir.exists():
        old = None
        if meta_path.exists():
            old = json.loads(meta_path.read_text()).get("fingerprint")
        if old != fp:
            if resume:
                raise ConfigurationError(
                    f"cannot resume: checkpoints in {cdir} belong to "
                    f"fingerprint {old}, current configuration is {fp}"
                )
            shutil.rmtree(cdir)
        elif not resume:
            shutil.rmtree(cdir)
    cdir.mkdir(parents=True, exist_ok=True)
    meta_path.write_text(json.dumps({"fingerprint": fp}) + "\n")


def _run_one(worker, params: dict, index: int, path: Path) -> None:
    result = worker(params, index)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(result, sort_keys=True))
    tmp.replace(path)


def run_tasks(worker, tasks: list, cdir: Path, workers: int = 1) -> dict:
    """Execute (tag, params, index) tasks, skipping finished checkpoints.

    Returns {tag: result} for every task, read back from the checkpoint
    files so the aggregation input never depends on execution order.
    """
    cdir = Path(cdir)
    paths = {tag: cdir / f"{tag}.json" for tag, _, _ in tasks}
    pending = [t for t in tasks if not paths[t[0]].exists()]
    if workers <= 1 or len(pending) <= 1:
        for tag, params, index in pending:
            _run_one(worker, params, index, paths[tag])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_run_one, worker, params, index, paths[tag])
                for tag, params, index in pending
            ]
            for f in as_completed(futs):
                f.result()
    return {tag: json.loads(paths[tag].read_text()) for tag, _, _ in tasks}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list, rows: list, meta: dict) -> None:
    """Comma-separated table with '#'-prefixed metadata lines on top."""
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    Path(path).write_text("\n".join(lines) + "\n")


def output_meta(command: str, fp: str, seed: int) -> dict:
    return {
        "command": command,
        "fingerprint": fp,
        "seed": seed,
        "version": __version__,
    }


def write_manifest(
    out: Path, command: str, fp: str, seed: int, workers: int,
    wall_clock_s: float, outputs: list,
) -> Path:
    """Sidecar with the run facts that must stay out of the deterministic
    tables (wall clock, worker count)."""
    path = Path(out) / "run_manifest.json"
    doc = {
        "command": command,
        "fingerprint": fp,
        "seed": seed,
        "version": __version__,
        "workers": workers,
        "wall_clock_s": round(wall_clock_s, 3),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "outputs": [str(Path(p).name) for p in outputs],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path
