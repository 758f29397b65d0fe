"""Command line entry point.

    terc train    -c run.cfg -o outdir
    terc analyze  -i traj.jsonl --alg alg2 --estimator plugin [--quartiles] [--baseline pi] -o report.json
    terc retrain  -c run.cfg --report report.json -o outdir
    terc report   -i report.json -f {csv,json,dot,plotdata}
    terc generate --kind four_redundant --n 10000 --seed 0 -o data.csv

Exit codes: 0 success, 2 configuration or usage error, 3 training or
analysis failure (partial outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from terc import report as rpt
from terc.config import (
    ALGORITHMS, ESTIMATORS, ConfigError, RunConfig, build_agent, build_analysis, build_env,
    config_hash, load_config,
)
from terc.data import REAL, SampleTable, TrajectoryBatch
from terc.envs import KINDS, SyntheticSpec, gen_synthetic
from terc.neural import save_checkpoint
from terc.rl import TrainingDiverged, expert_filter, split_quartile_batches, train_actor_critic, train_q
from terc.rl.ppo import train_ppo

log = logging.getLogger("terc")

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg: RunConfig, outdir) -> int:
    outdir = Path(outdir)
    if not cfg.env or not cfg.agent:
        raise ConfigError("train needs [env] and [agent] sections")
    env = build_env(cfg.env, cfg.seed)
    kind, length, acfg = build_agent(cfg.agent)
    outdir.mkdir(parents=True, exist_ok=True)
    traj = outdir / "trajectories.jsonl"
    stamp = {"config_hash": cfg.hash, "config": cfg.to_dict()}
    log.info("training %s on %s for %d %s (seed %d)", kind, env.name, length,
             "steps" if kind == "ppo" else "episodes", cfg.seed)
    try:
        if kind == "q":
            table, batch = train_q(env, length, acfg, cfg.seed)
            (outdir / "qtable.json").write_text(
                json.dumps({"n_actions": table.n_actions, "values": table.to_dict()}, sort_keys=True) + "\n"
            )
        elif kind == "ac":
            nets, batch = train_actor_critic(env, length, acfg, cfg.seed)
            save_checkpoint(outdir / "checkpoint.json", nets, extra=stamp)
        else:
            nets, batch = train_ppo(env, length, acfg, cfg.seed)
            save_checkpoint(outdir / "checkpoint.json", nets, extra=stamp)
    except TrainingDiverged as err:
        if err.partial is not None and len(err.partial):
            err.partial.meta.update(stamp, failed=str(err))
            err.partial.write_jsonl(traj)
        log.error("%s", err)
        return EXIT_FAILED
    batch.meta.update(stamp)
    batch.write_jsonl(traj)
    rets = list(batch.returns.values())
    tail = rets[-min(len(rets), 1000):]
    log.info("wrote %s: %d rows, %d episodes, mean return of last %d episodes %.4f",
             traj, len(batch), len(rets), len(tail), float(np.mean(tail)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _load_input(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    if path.suffix == ".csv":
        return None, SampleTable.from_csv(path)
    batch = TrajectoryBatch.read_jsonl(path)
    batch.check()
    return batch, None


def _prepare(table, settings):
    if settings["estimator"] == "plugin" and any(table.kinds[v] == REAL for v in table.variables):
        log.info("quantising real-valued columns into %d bins for the plug-in estimator", settings["bins"])
        return table.quantized(settings["bins"])
    return table


def _settings_record(settings):
    rec = dict(settings)
    rec["tolerance"] = {"mode": settings["tolerance"].mode, "epsilon": settings["tolerance"].epsilon}
    rec["mine"] = dict(settings["mine"].__dict__)
    return rec


def cmd_analyze(input_path, settings, seed, output) -> int:
    batch, table = _load_input(input_path)
    quartile_tables = None
    if batch is not None:
        if settings["expert_threshold"] is not None:
            batch = expert_filter(batch, settings["expert_threshold"])
            if len(batch) == 0:
                raise ConfigError(f"no episode reaches the expert threshold {settings['expert_threshold']}")
        if settings["quartiles"]:
            try:
                quartile_tables = [_prepare(b.to_table(), settings) for b in split_quartile_batches(batch)]
            except ValueError as err:
                raise ConfigError(str(err)) from err
        if settings["block"] != "all":
            batch = split_quartile_batches(batch)[settings["block"] - 1]
        table = batch.to_table()
    elif settings["quartiles"] or settings["block"] != "all" or settings["expert_threshold"] is not None:
        raise ConfigError("quartiles, block and expert_threshold need a trajectory (JSONL) input")
    table = _prepare(table, settings)

    record = _settings_record(settings)
    source = {"path": Path(input_path).name, "blake2b": rpt.file_digest(input_path)}
    seeds = {"analysis": seed, "data": batch.seed if batch is not None else None}
    prov = rpt.provenance(config_hash({"settings": record, "seed": seed, "input": source}), seeds)
    analysis = rpt.analyze_table(table, settings, seed, quartile_tables)
    analysis["settings"] = record
    report = rpt.make_report(analysis, source, prov)

    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rpt.dumps(report))
    if report.get("variables"):
        out.with_suffix(".csv").write_text(rpt.to_csv(report))
    out.with_suffix(".dot").write_text(rpt.to_dot(report.get("significant", [])))
    for f in report["failures"]:
        log.error("estimation failed for %s: %s", f["variable"], f["error"])
    if report["failures"]:
        return EXIT_FAILED
    sel = report["selection"]["selected"] if report.get("selection") else []
    log.info("significant: %s; %s selected: %s", report["significant"], settings["algorithm"], sel)
    return EXIT_OK


def cmd_retrain(cfg: RunConfig, outdir, keep=None, report_path=None) -> int:
    """Train again observing only ``keep`` (or a report's significant variables)."""
    if (keep is None) == (report_path is None):
        raise ConfigError("retrain needs exactly one of --keep or --report")
    if report_path is not None:
        if not Path(report_path).exists():
            raise ConfigError(f"report file {report_path} does not exist")
        keep = rpt.load_report(report_path).get("significant") or []
    if not keep:
        raise ConfigError("nothing to keep: the selected variable set is empty")
    env = {**cfg.env, "keep": list(keep)}
    build_env(env, cfg.seed)  # validates the names
    return cmd_train(RunConfig(cfg.seed, env, cfg.agent, cfg.analysis, cfg.source), outdir)


# ---------------------------------------------------------------------------
# report / generate


def cmd_report(path, fmt, output=None) -> int:
    if fmt not in rpt.FORMATS:
        raise ConfigError(f"unknown format {fmt!r}; choose from {rpt.FORMATS}")
    if not Path(path).exists():
        raise ConfigError(f"report file {path} does not exist")
    text = rpt.render(rpt.load_report(path), fmt)
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_generate(kind, n, seed, output) -> int:
    table = gen_synthetic(SyntheticSpec(kind, n, seed))
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output)
    log.info("wrote %s (%d rows)", output, n)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="terc", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an agent and record its trajectories")
    t.add_argument("-c", "--config", required=True)
    t.add_argument("-o", "--out", required=True, help="output directory")

    a = sub.add_parser("analyze", help="Phi analysis, null model and subset selection")
    a.add_argument("-i", "--input", required=True, help="trajectory .jsonl or table .csv")
    a.add_argument("-c", "--config", help="run config; its [analysis] section supplies defaults")
    a.add_argument("--alg", choices=ALGORITHMS)
    a.add_argument("--estimator", choices=ESTIMATORS)
    a.add_argument("--tolerance", choices=("exact", "statistical"))
    a.add_argument("--runs", type=int)
    a.add_argument("--iters", type=int, help="neural estimator iterations")
    a.add_argument("--quartiles", action="store_true", help="add per-quartile Phi tables")
    a.add_argument("--block", choices=("all", "1", "2", "3", "4"),
                   help="analyse only this training quartile")
    a.add_argument("--expert-threshold", type=float)
    a.add_argument("--baseline", choices=("pi",))
    a.add_argument("--seed", type=int)
    a.add_argument("-o", "--out", required=True, help="report .json path (.csv and .dot written alongside)")

    rt = sub.add_parser("retrain", help="train again on a reduced state")
    rt.add_argument("-c", "--config", required=True)
    src = rt.add_mutually_exclusive_group(required=True)
    src.add_argument("--report", help="keep the significant variables of this report")
    src.add_argument("--keep", help="comma-separated variable names to keep")
    rt.add_argument("-o", "--out", required=True, help="output directory")

    r = sub.add_parser("report", help="render a report")
    r.add_argument("-i", "--input", required=True)
    r.add_argument("-f", "--format", required=True)
    r.add_argument("-o", "--out")

    g = sub.add_parser("generate", help="write a synthetic redundancy dataset as CSV")
    g.add_argument("--kind", choices=KINDS, default="four_redundant")
    g.add_argument("--n", type=int, default=10000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True)
    return p


def _analysis_settings(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    analysis = dict(cfg.analysis)
    for key, val in (("algorithm", args.alg), ("estimator", args.estimator), ("tolerance", args.tolerance),
                     ("runs", args.runs), ("iters", args.iters), ("expert_threshold", args.expert_threshold),
                     ("baseline", args.baseline)):
        if val is not None:
            analysis[key] = val
    if args.block is not None:
        analysis["block"] = "all" if args.block == "all" else int(args.block)
    if args.quartiles:
        analysis["quartiles"] = True
    seed = cfg.seed
    if args.seed is not None:
        seed = args.seed
    if "TERC_SEED" in os.environ:
        seed = int(os.environ["TERC_SEED"])
    return build_analysis(analysis, seed), seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            return cmd_train(load_config(args.config), args.out)
        if args.command == "analyze":
            settings, seed = _analysis_settings(args)
            return cmd_analyze(args.input, settings, seed, args.out)
        if args.command == "retrain":
            keep = [k.strip() for k in args.keep.split(",")] if args.keep else None
            return cmd_retrain(load_config(args.config), args.out, keep, args.report)
        if args.command == "report":
            return cmd_report(args.input, args.format, args.out)
        return cmd_generate(args.kind, args.n, args.seed, args.out)
    except ConfigError as err:
        print(f"terc: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"terc: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
