"""``tschsim`` command line: train, fedavg, eval, sweep, report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

from .federate import (FederateError, TableFormatError, argmax_flips, fedavg, fedavg_weights,
                       load_model, quantize, table_bytes)
from .metrics import CSV_COLUMNS, SUMMARY_METRICS, MetricsError, packet_delays
from .scenario import (PROTOCOLS, SWEEP_COLUMNS, ConfigError, ScenarioConfig, evaluate,
                       rows_to_csv, sweep, train_model, write_atomic)
from .topology import TopologyError
from .trace import TraceFormatError, load_trace
from .traffic import PATTERNS


class CliError(Exception):
    pass


def _load_config(args, mode: str) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig(
        protocol="rl-asl" if mode == "train" else "orchestra", mode=mode)
    changes = {"mode": mode}
    for attr, key in (("seed", "seed"), ("repeats", "repeats"), ("duration_ms", "duration_ms"),
                      ("protocol", "protocol"), ("qtable", "qtable"), ("traffic", "traffic"),
                      ("topology", "topology")):
        v = getattr(args, attr, None)
        if v is not None:
            changes[key] = v
    return cfg.with_changes(**changes)


def _common(p: argparse.ArgumentParser, repeats: bool = True) -> None:
    p.add_argument("--config", metavar="PATH", help="scenario YAML file")
    p.add_argument("--seed", type=int)
    if repeats:
        p.add_argument("--repeats", type=int)
    p.add_argument("--out", metavar="DIR", default="runs")
    p.add_argument("--duration-ms", dest="duration_ms", type=float)
    p.add_argument("--protocol", choices=sorted(PROTOCOLS))
    p.add_argument("--qtable", metavar="PATH")
    p.add_argument("--traffic", choices=PATTERNS)
    p.add_argument("--topology", help="builtin topology name")


# -- subcommands -----------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_config(args, "train")
    cfg.validate()
    res = train_model(cfg, full_paper_scale=args.full_paper_scale)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.qtab")
    write_atomic(model_path, table_bytes(res.model))
    write_atomic(os.path.join(args.out, "convergence.csv"), res.convergence_csv())
    write_atomic(os.path.join(args.out, "scenario.yaml"), cfg.to_yaml())
    print(f"trained {res.model.episodes} episodes ({res.model.label}) -> {model_path}")
    return 0


def cmd_fedavg(args) -> int:
    models = []
    for path in args.models:
        if not os.path.isfile(path):
            raise CliError(f"model file not found: {path}")
        models.append(load_model(path))
    q = fedavg(models)
    for path, m, w in zip(args.models, models, fedavg_weights(models)):
        print(f"{path}: episodes={m.episodes} weight={w} ({float(w):.6f})")
    fp = models[0].fingerprint
    label = "fedavg:" + "+".join(m.label for m in models if m.label)
    table = q
    if args.quantize:
        table = quantize(q, args.scale)
        flips = argmax_flips(q, table)
        if flips:
            print(f"warning: quantization flips the greedy action in {flips} states",
                  file=sys.stderr)
    blob = table_bytes(table, label[:255], fp)
    write_atomic(args.output, blob)
    print(f"wrote {len(blob)} bytes -> {args.output}")
    return 0


def _eval_files(out: str, res, tag: str = "") -> None:
    for i, (rep, run) in enumerate(zip(res.reports, res.results)):
        stem = os.path.join(out, f"{tag}r{i}")
        write_atomic(stem + "_metrics.csv", rep.to_csv())
        write_atomic(stem + "_metrics.json", rep.to_json())
        write_atomic(stem + "_trace.txt", run.trace.dumps())
    cols = ["metric", "mean", "ci95"]
    rows = [{"metric": m, "mean": res.summary[m], "ci95": res.summary[f"{m}_ci95"]}
            for m in SUMMARY_METRICS]
    write_atomic(os.path.join(out, f"{tag}summary.csv"), rows_to_csv(rows, cols))


def cmd_eval(args) -> int:
    cfg = _load_config(args, "eval")
    cfg.validate()
    res = evaluate(cfg)
    os.makedirs(args.out, exist_ok=True)
    _eval_files(args.out, res)
    s = res.summary
    print(f"{cfg.protocol} on {cfg.topology_name()}/{cfg.traffic}, {cfg.repeats} repeat(s)")
    for m in SUMMARY_METRICS:
        print(f"  {m:<18} {s[m]:.6g} ± {s[m + '_ci95']:.3g}")
    return 0


def _parse_values(text: str) -> list:
    vals = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            vals.append(int(tok))
        except ValueError:
            try:
                vals.append(float(tok))
            except ValueError:
                vals.append(tok)
    return vals


def cmd_sweep(args) -> int:
    cfg = _load_config(args, "eval")
    if not cfg.protocol.startswith("rl-asl"):
        cfg = cfg.with_changes(protocol="rl-asl")
    values = _parse_values(args.values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    qtable = None
    if args.no_retrain:
        cfg.validate()
        # the same frozen table at every point, whatever config it was trained under
        qtable = load_model(cfg.qtable, cfg.agent_cfg().n_states).qtable
        qtable = qtable if qtable.frozen else qtable.freeze()
    try:
        rows = sweep(cfg, args.param, values, retrain=not args.no_retrain,
                     train_traffic=args.train_traffic,
                     train_duration_ms=args.train_duration_ms, qtable=qtable)
    except KeyError as exc:
        raise ConfigError(str(exc).strip("'\"")) from exc
    os.makedirs(args.out, exist_ok=True)
    text = rows_to_csv(rows, SWEEP_COLUMNS)
    write_atomic(os.path.join(args.out, "sweep.csv"), text)
    print(f"{args.param:>16} {'PDR':>8} {'latency ms':>11} {'RDC %':>8}")
    for r in rows:
        print(f"{r['value']!s:>16} {r['pdr']:8.4f} {r['latency_mean_ms']:11.1f} "
              f"{100 * r['rdc']:8.3f}")
    return 0


REPORT_KEYS = {"protocol", "scenario", "seed", "network", "nodes"}


def _load_report(path: str) -> dict:
    if not os.path.isfile(path):
        raise CliError(f"report file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: not a JSON metrics report ({exc})") from None
    if not isinstance(doc, dict) or set(doc) != REPORT_KEYS \
            or list(doc["network"]) != list(CSV_COLUMNS):
        raise CliError(f"{path}: incompatible report schema")
    return doc


def cmd_report(args) -> int:
    docs = [(p, _load_report(p)) for p in args.reports]
    os.makedirs(args.out, exist_ok=True)
    metrics = ("pdr", "latency_mean_ms", "latency_p95_ms", "power_mw", "power_rx_idle_mw",
               "rdc", "idle_listen_slots", "lifetime_days")
    rows = []
    for path, d in docs:
        net = d["network"]
        rows.append({"protocol": d["protocol"], "scenario": d["scenario"], "seed": d["seed"],
                     **{m: net[m] for m in metrics}})
    # trade-off triplet, each metric over its maximum across the compared runs
    for key in ("pdr", "latency_mean_ms", "power_mw"):
        top = max((r[key] for r in rows if r[key] is not None), default=None)
        for r in rows:
            r[f"norm_{key}"] = r[key] / top if top and r[key] is not None else None
    cols = ["protocol", "scenario", "seed", *metrics,
            "norm_pdr", "norm_latency_mean_ms", "norm_power_mw"]
    write_atomic(os.path.join(args.out, "comparison.csv"), rows_to_csv(rows, cols))

    states = [c[len("power_"):-len("_mw")] for c in CSV_COLUMNS
              if c.startswith("power_") and c != "power_mw"]
    prow = [{"protocol": d["protocol"], "seed": d["seed"],
             **{s: d["network"][f"power_{s}_mw"] for s in states}} for _, d in docs]
    write_atomic(os.path.join(args.out, "power_breakdown.csv"),
                 rows_to_csv(prow, ["protocol", "seed", *states]))

    if args.traces:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trace", "delay_ms", "cdf"])
        for path in args.traces:
            if not os.path.isfile(path):
                raise CliError(f"trace file not found: {path}")
            tr = load_trace(path)
            delays = sorted(packet_delays(tr))
            for i, d in enumerate(delays, 1):
                w.writerow([os.path.basename(path), repr(d * tr.timeslot_ms), repr(i / len(delays))])
        write_atomic(os.path.join(args.out, "latency_cdf.csv"), buf.getvalue())

    print(f"{'protocol':<14}{'PDR':>8}{'lat ms':>9}{'mW':>9}{'idle mW':>9}{'RDC %':>8}")
    for r in rows:
        lat = r["latency_mean_ms"]
        print(f"{r['protocol']:<14}{r['pdr']:8.4f}{(lat if lat is not None else float('nan')):9.1f}"
              f"{r['power_mw']:9.4f}{r['power_rx_idle_mw']:9.4f}{100 * r['rdc']:8.3f}")
    return 0


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tschsim", description="TSCH adaptive-listening simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train listen/skip agents and save the merged model")
    _common(p, repeats=False)
    p.add_argument("--full-paper-scale", action="store_true",
                   help="train for 1e8 ms of virtual time instead of 1e7")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fedavg", help="merge trained models into one frozen table")
    p.add_argument("models", nargs="+", metavar="MODEL")
    p.add_argument("-o", "--output", required=True, metavar="PATH")
    p.add_argument("--quantize", action="store_true", help="store int16 fixed-point values")
    p.add_argument("--scale", type=int, default=10)
    p.set_defaults(func=cmd_fedavg)

    p = sub.add_parser("eval", help="evaluate a protocol and write metrics and traces")
    _common(p)
    p.add_argument("--full-paper-scale", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate across values of one agent parameter")
    _common(p)
    p.add_argument("--param", required=True, help="dotted agent field, e.g. rewards.r_skip")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--no-retrain", action="store_true",
                   help="evaluate --qtable at every point instead of retraining")
    p.add_argument("--train-traffic", default="high", choices=PATTERNS)
    p.add_argument("--train-duration-ms", type=float)
    p.add_argument("--full-paper-scale", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="compare metrics reports across protocols")
    p.add_argument("reports", nargs="+", metavar="METRICS_JSON")
    p.add_argument("--traces", nargs="*", metavar="TRACE")
    p.add_argument("--out", metavar="DIR", default="runs/report")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, FederateError, TableFormatError, TopologyError,
            TraceFormatError, MetricsError) as exc:
        print(f"tschsim {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
