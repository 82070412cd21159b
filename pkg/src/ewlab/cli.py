"""Batch command-line front end.

Subcommands: theory | fluctuations | polymer | toy | covdecay.  Each reads
one JSON config (defaults in `ewlab.config.DEFAULTS`), runs its experiment
with per-realization checkpointing, and writes tables whose bytes depend
only on (config, master seed), never on worker count or timing.  Exit
codes: 0 success, 2 configuration error, 3 quality/budget error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import (
    fingerprint,
    grid_from,
    load_config,
    mollifier_from,
    test_function_from,
)
from .errors import (
    BlowUpError,
    BudgetError,
    ConfigurationError,
    QualityError,
    TruncationError,
)
from .harness import (
    FluctuationSample,
    covariance_rows,
    estimate_sigma_f,
    fluctuation_grid,
    normality_report,
    variance_scaling_rows,
)
from .polymer import ZInftySamples, negative_moment_rows
from .runner import (
    checkpoint_dir,
    output_meta,
    prepare_checkpoints,
    run_tasks,
    task_covariance,
    task_fluctuation,
    task_polymer,
    write_csv,
    write_manifest,
)
from .stats import powerlaw_fit
from .theory import (
    estimate_nu_eff_sq,
    sigma_t_sq,
    toy_gaussian_covariance,
    toy_gaussian_sigma_f,
)

VARIANCE_HEADER = [
    "eps", "n", "mean_X", "var_X_rescaled", "var_ci_lo", "var_ci_hi",
    "theory_sigma2", "ratio",
]
NORMALITY_HEADER = [
    "eps", "n", "ks_stat", "ks_p", "ad_stat", "skew", "skew_ci_lo",
    "skew_ci_hi", "exkurt", "exkurt_ci_lo", "exkurt_ci_hi",
]


def cmd_theory(cfg: dict, out: Path, workers: int, resume: bool) -> list:
    fp = fingerprint("theory", cfg)
    m = mollifier_from(cfg)
    g = test_function_from(cfg["g"])
    nu = estimate_nu_eff_sq(
        m, cfg["beta"], T=cfg["truncation_T"], n_paths=cfg["n_paths"],
        x_quadrature_nodes=cfg["x_quadrature_nodes"], rng=cfg["seed"],
        dt=cfg["dt_paths"],
    )
    card = output_meta("theory", fp, cfg["seed"])
    card.update({
        "beta": cfg["beta"],
        "nu_eff_sq": nu.nu_eff_sq,
        "se": nu.std_error,
        "truncation_T": nu.truncation_T,
        "n_paths": nu.n_paths,
        "sigma_t_sq": [
            {"t": t, "g": cfg["g"], "value": sigma_t_sq(nu, g, t).sigma_t_sq}
            for t in cfg["t_values"]
        ],
    })
    path = out / "theory_card.json"
    path.write_text(json.dumps(card, indent=2) + "\n")
    return [path]


def _fluctuation_theory_targets(cfg: dict, g) -> dict:
    """sigma_f^2 * sigma_t^2 per f_tag, using the configured nu_eff^2 or
    estimating it inline."""
    m = mollifier_from(cfg)
    if cfg["nu_eff_sq"] is not None:
        nu_sq = float(cfg["nu_eff_sq"])
    elif cfg["beta"] == 0.0:
        nu_sq = 1.0
    else:
        nu_sq = estimate_nu_eff_sq(
            m, cfg["beta"], T=cfg["nu_truncation_T"], n_paths=cfg["nu_paths"],
            rng=cfg["seed"], dt=cfg["nu_dt"],
        ).nu_eff_sq
    st = sigma_t_sq(nu_sq, g, cfg["t"], beta=cfg["beta"]).sigma_t_sq
    return {tag: float(cfg["sigma_f_sq"][tag]) * st for tag in cfg["f_tags"]}


def cmd_fluctuations(cfg: dict, out: Path, workers: int, resume: bool) -> list:
    fp = fingerprint("fluctuations", cfg)
    g = test_function_from(cfg["g"])
    ladder = [float(e) for e in cfg["eps_ladder"]]
    # pre-flight: every rung must have an admissible grid before any compute
    grids = {
        eps: fluctuation_grid(eps, cfg["t"], g, cfg["spacing"], cfg["wrap_tol"])
        for eps in ladder
    }
    tasks = []
    for i, eps in enumerate(ladder):
        params = {
            "eps": eps, "t": cfg["t"], "g": cfg["g"], "beta": cfg["beta"],
            "grid": {"spacing": cfg["spacing"], "n_cells": grids[eps].n_cells},
            "dt": cfg["dt"], "seed": cfg["seed"], "f_tags": cfg["f_tags"],
            "floor": cfg["floor"], "mollifier_radius": cfg["mollifier_radius"],
        }
        for r in range(int(cfg["n_realizations"][i])):
            tasks.append((f"e{i}-r{r:06d}", params, r))
    cdir = checkpoint_dir(out, "fluctuations")
    prepare_checkpoints(cdir, fp, resume)
    results = run_tasks(task_fluctuation, tasks, cdir, workers)

    targets = _fluctuation_theory_targets(cfg, g)
    meta = output_meta("fluctuations", fp, cfg["seed"])
    written = []
    for tag in cfg["f_tags"]:
        samples = {}
        for i, eps in enumerate(ladder):
            vals = [
                results[f"e{i}-r{r:06d}"][tag]
                for r in range(int(cfg["n_realizations"][i]))
            ]
            samples[eps] = FluctuationSample(
                eps, cfg["t"], tag, np.array(vals), fingerprint=fp,
                seed=cfg["seed"],
            )
        rows = variance_scaling_rows(
            samples, {eps: targets[tag] for eps in ladder}, seed=cfg["seed"]
        )
        suffix = "" if tag == cfg["f_tags"][0] else f"_{tag}"
        path = out / f"variance_scaling{suffix}.csv"
        write_csv(path, VARIANCE_HEADER, rows, {**meta, "f_tag": tag})
        written.append(path)
        norm_rows = [
            normality_report(samples[eps], seed=cfg["seed"])
            for eps in sorted(samples, reverse=True)
            if samples[eps].n >= 100
        ]
        if norm_rows:
            npath = out / f"normality{suffix}.csv"
            write_csv(npath, NORMALITY_HEADER, norm_rows, {**meta, "f_tag": tag})
            written.append(npath)
        if tag == cfg["f_tags"][0]:
            # standardized draws of the primary observable, for QQ plots
            d_rows = []
            for eps in sorted(samples, reverse=True):
                x = samples[eps].values
                z = (x - x.mean()) / x.std(ddof=1) if x.std(ddof=1) > 0 else x * 0.0
                d_rows.extend(
                    {"eps": eps, "index": i, "z": float(z[i])}
                    for i in range(z.size)
                )
            dpath = out / "draws.csv"
            write_csv(dpath, ["eps", "index", "z"], d_rows, {**meta, "f_tag": tag})
            written.append(dpath)
    return written


def cmd_polymer(cfg: dict, out: Path, workers: int, resume: bool) -> list:
    fp = fingerprint("polymer", cfg)
    grid = grid_from(cfg["grid"])
    T = float(cfg["T"])
    if T < 16.0:
        raise ConfigurationError("polymer horizon T must be >= 16")
    if grid.side < 2.0 * math.sqrt(T) - 1e-9:
        raise ConfigurationError(
            f"box side {grid.side:g} below the diffusive diameter "
            f"2*sqrt(T) = {2 * math.sqrt(T):g}"
        )
    n_real = int(cfg["n_realizations"])
    params = {
        "beta": cfg["beta"], "T": T, "grid": cfg["grid"], "dt": cfg["dt"],
        "seed": cfg["seed"], "checkpoint_times": cfg["checkpoint_times"],
        "mollifier_radius": cfg["mollifier_radius"],
    }
    tasks = [(f"r{r:06d}", params, r) for r in range(n_real)]
    cdir = checkpoint_dir(out, "polymer")
    prepare_checkpoints(cdir, fp, resume)
    results = run_tasks(task_polymer, tasks, cdir, workers)

    order = [f"r{r:06d}" for r in range(n_real)]
    values = np.array([results[k]["final"] for k in order])
    snaps = {
        float(s): np.array([results[k]["snaps"][f"{float(s):g}"] for k in order])
        for s in cfg["checkpoint_times"]
    }
    zs = ZInftySamples(
        beta=cfg["beta"], T=T, values=values, method="solver",
        seed=cfg["seed"], snapshots=snaps,
    )
    meta = output_meta("polymer", fp, cfg["seed"])
    written = []

    sf_rows = []
    for tag in cfg["f_tags"]:
        s = estimate_sigma_f(tag, zs, floor=cfg["floor"])
        sf_rows.append({"f_tag": tag, "value": s.value, "se": s.std_error, "n": s.n})
    path = out / "sigma_f.csv"
    write_csv(path, ["f_tag", "value", "se", "n"], sf_rows, meta)
    written.append(path)

    by_t = {float(t): snaps[float(t)] for t in cfg["horizons"] if float(t) != T}
    by_t.update({T: values} if T in map(float, cfg["horizons"]) else {})
    nm_rows = negative_moment_rows(
        by_t, orders=tuple(cfg["orders"]), floor=cfg["floor"], seed=cfg["seed"]
    )
    path = out / "negative_moments.csv"
    write_csv(
        path,
        ["t", "order", "value", "se", "ci_lo", "ci_hi", "clamped", "non_bounded"],
        nm_rows, meta,
    )
    written.append(path)

    z_rows = []
    for t in sorted(set(snaps) | {T}):
        arr = snaps.get(t, values if t == T else None)
        for r in range(n_real):
            for s in range(arr.shape[1]):
                z_rows.append({"t": t, "realization": r, "site": s,
                               "z": float(arr[r, s])})
    path = out / "zinfty_samples.csv"
    write_csv(path, ["t", "realization", "site", "z"], z_rows, meta)
    written.append(path)
    return written


_TOY_FS = {
    "identity": (lambda y: y, lambda y: np.ones_like(y)),
    "square": (lambda y: y**2, lambda y: 2.0 * y),
    "cube": (lambda y: y**3, lambda y: 3.0 * y**2),
    "log": (np.log, lambda y: 1.0 / y),
    "log-minus-y": (lambda y: np.log(y) - y, lambda y: 1.0 / y - 1.0),
}


def cmd_toy(cfg: dict, out: Path, workers: int, resume: bool) -> list:
    fp = fingerprint("toy", cfg)
    rows = []
    for tag in cfg["f_tags"]:
        if tag not in _TOY_FS:
            raise ConfigurationError(f"unknown toy f_tag {tag!r}")
        f, f_prime = _TOY_FS[tag]
        sf = toy_gaussian_sigma_f(f, f_prime)
        for delta in cfg["deltas"]:
            rows.append({
                "f_tag": tag,
                "sigma_f": sf,
                "delta": float(delta),
                "cov_over_delta": toy_gaussian_covariance(f, float(delta)),
            })
    path = out / "toy_gaussian.csv"
    write_csv(path, ["f_tag", "sigma_f", "delta", "cov_over_delta"], rows,
              output_meta("toy", fp, cfg["seed"]))
    return [path]


def cmd_covdecay(cfg: dict, out: Path, workers: int, resume: bool) -> list:
    fp = fingerprint("covdecay", cfg)
    grid = grid_from(cfg["grid"])
    offsets = [int(o) for o in cfg["offsets"]]
    if any(not 0 < o < grid.n_cells // 2 for o in offsets):
        raise ConfigurationError("offsets must lie in (0, n_cells/2)")
    n_real = int(cfg["n_realizations"])
    params = {
        "beta": cfg["beta"], "T": cfg["T"], "grid": cfg["grid"],
        "dt": cfg["dt"], "seed": cfg["seed"], "offsets": offsets,
        "f_tags": cfg["f_tags"], "block": cfg["block"],
        "mollifier_radius": cfg["mollifier_radius"],
    }
    tasks = [(f"r{r:06d}", params, r) for r in range(n_real)]
    cdir = checkpoint_dir(out, "covdecay")
    prepare_checkpoints(cdir, fp, resume)
    results = run_tasks(task_covariance, tasks, cdir, workers)

    profiles = []
    for r in range(n_real):
        raw = results[f"r{r:06d}"]
        profiles.append({
            tag: {("mean" if k == "mean" else int(k)): v for k, v in prof.items()}
            for tag, prof in raw.items()
        })
    rows = covariance_rows(profiles, offsets, f_tags=tuple(cfg["f_tags"]))
    meta = output_meta("covdecay", fp, cfg["seed"])
    path = out / "cov_decay.csv"
    write_csv(path, ["offset", "cov", "cov_se", "f_tag"], rows, meta)

    report = dict(meta)
    by_tag = {tag: [r for r in rows if r["f_tag"] == tag] for tag in cfg["f_tags"]}
    base_tag = cfg["f_tags"][0]
    usable = [
        (r["offset"] * grid.spacing, r["cov"], r["cov_se"])
        for r in by_tag[base_tag] if r["cov"] > 0
    ]
    if len(usable) >= 4:
        slope, (lo, hi) = powerlaw_fit(usable)
        report["fit"] = {"f_tag": base_tag, "slope": slope,
                         "ci": [lo, hi], "n_offsets": len(usable)}
    else:
        report["fit"] = {"f_tag": base_tag, "slope": None,
                         "reason": f"only {len(usable)} usable offsets"}
    if len(cfg["f_tags"]) > 1:
        other = cfg["f_tags"][1]
        ratios = []
        for rb, ro in zip(by_tag[base_tag], by_tag[other]):
            if rb["cov"] > 0 and ro["cov"] > 0:
                ratio = ro["cov"] / rb["cov"]
                rel = math.hypot(ro["cov_se"] / ro["cov"], rb["cov_se"] / rb["cov"])
                ratios.append({"offset": rb["offset"], "ratio": ratio,
                               "se": ratio * rel})
        report["ratio"] = {"numerator": other, "denominator": base_tag,
                           "rows": ratios}
    rpath = out / "fit_report.json"
    rpath.write_text(json.dumps(report, indent=2) + "\n")
    return [path, rpath]


_COMMANDS = {
    "theory": cmd_theory,
    "fluctuations": cmd_fluctuations,
    "polymer": cmd_polymer,
    "toy": cmd_toy,
    "covdecay": cmd_covdecay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewlab",
        description="Batch experiments on the smoothed multiplicative "
                    "heat equation and its Gaussian limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config (defaults used when omitted)")
        p.add_argument("--out", type=Path, required=True,
                       help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override")
        p.add_argument("--resume", action="store_true",
                       help="continue from existing checkpoints")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    try:
        cfg = load_config(args.command, args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        written = _COMMANDS[args.command](cfg, out, args.workers, args.resume)
        write_manifest(
            out, args.command, fingerprint(args.command, cfg), cfg["seed"],
            args.workers, time.monotonic() - t0, written,
        )
    except ConfigurationError as exc:
        print(f"ewlab {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (QualityError, TruncationError, BudgetError, BlowUpError) as exc:
        print(f"ewlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
