"""Command line front end: ``asd run | sweep | prob | eval``.

Exit status is 0 on success, 1 for invalid input (config, arguments,
fixtures, checkpoints) and 2 when a run fails at runtime.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import ctt, learner, metrics
from .data import FixtureError, load_fixture
from .pipeline import ConfigError, run
from .sampling import coverage_probability, coverage_probability_mc

log = logging.getLogger("asd")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

RUN_FILES = ("metrics.json", "losses.csv", "noise_rate.csv", "phi_history.csv",
             "config.resolved", "record.json", "checkpoint.npz")

SWEEP_AXES = {"n_l": "n_l", "N_miss": "n_miss", "noise_ratio": "noise_ratio", "sampler": "sampler"}


class UsageError(ValueError):
    pass


def metrics_json(m: dict) -> str:
    # sorted keys and repr floats: byte-identical for identical runs
    return json.dumps(m, sort_keys=True, indent=2) + "\n"


def _prepare_out(out: Path, names, force: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise UsageError(f"{out / clash[0]} exists; pass --force to overwrite")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_run(out: Path, record, data_cfg) -> None:
    cfg = record.config
    (out / "metrics.json").write_text(metrics_json(record.metrics), encoding="utf-8")
    _write_csv(
        out / "losses.csv",
        ["iteration", "l_ins", "l_sup", "l_unsup", "total", "unsup_mask_rate"],
        ([t, *(repr(float(v)) for v in r.as_dict().values())] for t, r in record.losses),
    )
    _write_csv(out / "noise_rate.csv", ["iteration", "noise_rate"],
               ([t, repr(float(v))] for t, v in record.noise_rate))
    ctt.dump_phi_history(out / "phi_history.csv", record.phi_history)
    (out / "config.resolved").write_text(cfgmod.dump(cfg, data_cfg), encoding="utf-8")
    summary = {
        "config": dataclasses.asdict(cfg),
        "metrics": record.metrics,
        "phi_updates": len(record.phi_history),
        "noise_rate_points": len(record.noise_rate),
        "final_loss": record.losses[-1][1].as_dict() if record.losses else None,
        "timings_seconds": record.timings,
    }
    (out / "record.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    learner.save_checkpoint(record.model, out / "checkpoint.npz")


def _fmt_metrics(m: dict) -> str:
    parts = [f"{key.upper()}={m[key]:.4f}" for key in ("acc", "nmi", "ari") if key in m]
    parts.append(f"histogram={m['cluster_histogram']}")
    return " ".join(parts)


def _load_config(path, seed):
    run_cfg, data_cfg = cfgmod.load(path)
    if seed is not None:
        run_cfg = dataclasses.replace(run_cfg, seed=seed)
    dataset = data_cfg.load(Path(path).parent)
    run_cfg.validate(dataset.k, dataset.n)
    return run_cfg, data_cfg, dataset


def cmd_run(args) -> int:
    run_cfg, data_cfg, dataset = _load_config(args.config, args.seed)
    out = Path(args.out)
    _prepare_out(out, RUN_FILES, args.force)

    def progress(t, report):
        if t % 100 == 0:
            log.info("iter %d  loss %.4f  mask %.2f", t, report.total, report.unsup_mask_rate)

    record = run(run_cfg, dataset, progress=progress)
    write_run(out, record, data_cfg)
    print(_fmt_metrics(record.metrics))
    return EXIT_OK


def _parse_axis_values(axis: str, raw: str, k: int) -> list:
    vals = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if axis == "sampler":
            vals.append(tok)
        elif axis == "noise_ratio":
            vals.append(float(tok))
        elif axis == "n_l" and tok.endswith("k"):
            vals.append(int(tok[:-1] or 1) * k)
        else:
            vals.append(int(tok))
    if not vals:
        raise UsageError("--values is empty")
    return vals


def _sweep_one(job):
    cfg, dataset = job
    try:
        return run(cfg, dataset).metrics, None
    except Exception as exc:  # a failed point is reported, the sweep goes on
        return None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(args) -> int:
    run_cfg, data_cfg, dataset = _load_config(args.config, args.seed)
    axis = args.axis
    try:
        values = _parse_axis_values(axis, args.values, dataset.k)
    except ValueError as exc:
        raise UsageError(f"--values: {exc}") from None
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    configs = []
    for v in values:
        point = dataclasses.replace(run_cfg, **{SWEEP_AXES[axis]: v})
        try:
            point.validate(dataset.k, dataset.n)
        except ConfigError as exc:
            raise UsageError(f"sweep value {v!r}: {exc}") from None
        configs += [dataclasses.replace(point, seed=run_cfg.seed + r) for r in range(args.repeats)]
    out = Path(args.out)
    _prepare_out(out, ["sweep.csv"], args.force)
    jobs = [(c, dataset) for c in configs]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = list(map(_sweep_one, jobs))

    rows = []
    for i, v in enumerate(values):
        chunk = results[i * args.repeats:(i + 1) * args.repeats]
        ok = [m for m, err in chunk if m is not None]
        errors = [err for m, err in chunk if err is not None]
        row = [axis, v, len(ok), len(errors)]
        for key in ("acc", "nmi", "ari"):
            xs = [m[key] for m in ok if key in m]
            row += [repr(float(np.mean(xs))), repr(float(np.std(xs)))] if xs else ["", ""]
        row.append("; ".join(errors))
        rows.append(row)
        log.info("%s=%s done (%d ok, %d failed)", axis, v, len(ok), len(errors))
    _write_csv(out / "sweep.csv",
               ["axis", "value", "runs", "failures", "acc_mean", "acc_std",
                "nmi_mean", "nmi_std", "ari_mean", "ari_std", "errors"], rows)
    for row in rows:
        acc = f"{float(row[4]):.4f}" if row[4] else "n/a"
        print(f"{axis}={row[1]}  acc_mean={acc}  failures={row[3]}")
    return EXIT_OK


def cmd_prob(args) -> int:
    lo = args.nl_min
    hi = args.nl_max if args.nl_max is not None else lo
    if hi < lo:
        raise UsageError("--nl-max must be >= --nl-min")
    rows = []
    for n_l in range(lo, hi + 1):
        try:
            p = coverage_probability(n_l, args.k, args.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        row = [n_l, repr(p)]
        if args.mc_trials:
            est, se = coverage_probability_mc(n_l, args.k, args.n, args.mc_trials, seed=args.seed + n_l)
            row += [repr(est), repr(se)]
        rows.append(row)
    header = ["n_l", "p_all"] + (["mc_estimate", "std_error"] if args.mc_trials else [])
    if args.out:
        out = Path(args.out)
        _prepare_out(out, ["coverage.csv"], args.force)
        _write_csv(out / "coverage.csv", header, rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = learner.load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise learner.CheckpointError(f"checkpoint {args.checkpoint} not found") from None
    if args.data:
        dataset = load_fixture(args.data, k=model.k)
    else:
        _, data_cfg, dataset = _load_config(args.config, None)
    if dataset.d != model.d:
        raise UsageError(f"width mismatch: checkpoint expects d={model.d}, data has d={dataset.d}")
    pred = learner.predict_clusters(model, dataset.features)
    m = metrics.evaluate(pred, dataset.labels) if dataset.labels is not None else {}
    m["cluster_histogram"] = np.bincount(pred, minlength=model.k).tolist()
    if args.out:
        out = Path(args.out)
        _prepare_out(out, ["metrics.json"], args.force)
        (out / "metrics.json").write_text(metrics_json(m), encoding="utf-8")
    print(_fmt_metrics(m))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asd", description="Cold-start clustering with a semi-supervised learner.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override pipeline.seed")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat runs along one ablation axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma list; n_l accepts forms like 4k")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prob", help="probability that a random draw covers every class")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--nl-min", type=int, required=True)
    p.add_argument("--nl-max", type=int)
    p.add_argument("--mc-trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("eval", help="score a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV fixture")
    src.add_argument("--config", help="config whose [data] section names the dataset")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, UsageError, FixtureError, learner.CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
