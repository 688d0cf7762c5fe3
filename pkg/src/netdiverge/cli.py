"""Command-line entry point.

Subcommands: ``train``, ``detect``, ``generate``, ``evaluate``, ``plot-data``,
``subnet``, and ``pipeline`` (generate, train, detect, evaluate in one run,
driven by a single config file, for reproducible end-to-end checks).

Exit codes: 0 clean, 1 anomaly flagged, 2 usage/config error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .evaluate import roc_sweep, score
from .model_free import ModelFreeReference, detect_stream_mf, train_model_free
from .mmp import MmpReference, detect_stream_mmp, train_mmp
from .quantize import Alphabet
from .reports import read_reports_csv, write_reports_csv
from .spatial import SubnetDetectionConfig, SubnetSpec, train_and_detect_subnet
from .synth import (
    RNG_NAME,
    AnomalyKind,
    AnomalySpec,
    apply_anomalies,
    generate_iid,
    generate_mmp,
    read_labels_csv,
    write_labels_csv,
)
from .reports import Detector
from .trace import (
    FULL_DAY,
    Aggregation,
    BucketConfig,
    Role,
    TimeOfDayInterval,
    TrafficTrace,
    Unit,
    load_trace,
    write_trace,
)


def _parse_interval(text: str | None) -> TimeOfDayInterval:
    if not text:
        return FULL_DAY
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"interval must be START:END[:LABEL] in minutes, got {text!r}")
    try:
        start, end = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"interval minutes must be integers, got {text!r}") from None
    return TimeOfDayInterval(start, end, parts[2] if len(parts) == 3 else "")


def _parse_member(text: str) -> tuple[str, Role]:
    node, sep, role = text.partition(":")
    if not sep or not node:
        raise ConfigError(f"member must be NODE:ROLE, got {text!r}")
    try:
        return node, Role(role)
    except ValueError:
        raise ConfigError(f"unknown role {role!r} in member {text!r}") from None


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def _merged(args: argparse.Namespace, section: str) -> dict:
    """Config-section values with explicit CLI flags taking precedence."""
    cfg = _load_config(getattr(args, "config", None)).get(section, {})
    merged = dict(cfg)
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config"):
            merged[key] = value
    return merged


def _load_selected_trace(opts: dict) -> TrafficTrace:
    path = opts.get("trace")
    if not path:
        raise ConfigError("a trace file is required (--trace)")
    trace = load_trace(path, sample_period=opts.get("period"), unit=opts.get("unit"))
    node = opts.get("node")
    if node:
        return trace.select(node, Role(opts.get("role") or "unspecified"))
    return trace


def _load_any_reference(path: str) -> ModelFreeReference | MmpReference:
    try:
        data = json.loads(Path(path).read_text())
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read reference {path}: {exc}") from None
    if "mu" in data:
        return ModelFreeReference.from_json_dict(data)
    if "P" in data:
        return MmpReference.from_json_dict(data)
    raise DataError(f"{path} is neither a model-free nor an MMP reference")


# --- train ---


def cmd_train(args: argparse.Namespace) -> int:
    opts = _merged(args, "train")
    mode = opts.get("mode")
    if mode not in ("model-free", "mmp"):
        raise ConfigError("--mode must be model-free or mmp")
    out = opts.get("out")
    if not out:
        raise ConfigError("--out is required")
    trace = _load_selected_trace(opts)
    interval = _parse_interval(opts.get("interval"))
    k = int(opts.get("k", 8))
    beta = float(opts.get("beta", 0.01))
    epsilon = float(opts.get("epsilon", 1e-4))

    if mode == "model-free":
        bucket = BucketConfig(int(opts.get("bucket", 1)), Aggregation(opts.get("agg", "sum")))
        window_n = int(opts.get("window", 100))
        ref, summary = train_model_free(
            trace, k, bucket, window_n, beta, interval, epsilon=epsilon
        )
    else:
        window_n = int(opts.get("window", 500))
        ref, summary = train_mmp(trace, k, window_n, beta, interval, epsilon=epsilon)
    ref.save(out)

    edges = ", ".join(f"{e:g}" for e in ref.alphabet.edges)
    print(f"reference written to {out}")
    print(f"alphabet edges: [{edges}]")
    print(f"effective K: {summary.effective_k} (requested {summary.requested_k})")
    print(f"training {'buckets' if mode == 'model-free' else 'samples'}: {summary.training_count}")
    print(f"unseen symbols: {summary.unseen_symbols}")
    if summary.uniform_rows:
        print(f"states with uniform rows (never left in training): {summary.uniform_rows}")
    return 0


# --- detect ---


def cmd_detect(args: argparse.Namespace) -> int:
    opts = _merged(args, "detect")
    ref_path = opts.get("ref")
    out = opts.get("out")
    if not ref_path or not out:
        raise ConfigError("--ref and --out are required")
    ref = _load_any_reference(ref_path)
    trace = _load_selected_trace(opts)
    stride = int(opts["stride"]) if opts.get("stride") is not None else None
    if isinstance(ref, ModelFreeReference):
        reports = detect_stream_mf(ref, trace, stride)
    else:
        reports = detect_stream_mmp(ref, trace, stride)
    write_reports_csv(reports, out)
    flagged = sum(r.is_anomaly for r in reports)
    print(f"{len(reports)} windows scanned, {flagged} flagged; reports written to {out}")
    return 1 if flagged else 0


# --- generate ---


def _build_scenario(scenario: dict, seed_override: int | None) -> tuple[TrafficTrace, list[AnomalySpec], int]:
    try:
        master = int(seed_override if seed_override is not None else scenario["seed"])
        period = int(scenario.get("sample_period", 60))
        unit = Unit(scenario.get("unit", "bytes"))
        start_ts = int(scenario.get("start_timestamp", 0))
        stream_cfgs = scenario["streams"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from None
    if not stream_cfgs:
        raise ConfigError("scenario needs at least one stream")

    streams = []
    for i, sc in enumerate(stream_cfgs):
        seed = sc.get("seed")
        seed = np.random.SeedSequence([master, 0, i]) if seed is None else int(seed)
        common = dict(
            node_id=sc.get("node_id", f"N{i}"),
            role=Role(sc.get("role", "unspecified")),
            sample_period=period,
            unit=unit,
            start_timestamp=start_ts,
        )
        kind = sc.get("kind", "iid")
        if kind == "iid":
            t = generate_iid(sc["pmf"], sc["values"], int(sc["length"]), seed, **common)
        elif kind == "mmp":
            t = generate_mmp(
                np.asarray(sc["transition"], dtype=float),
                sc["values"],
                int(sc["length"]),
                seed,
                int(sc.get("initial_state", 0)),
                **common,
            )
        else:
            raise ConfigError(f"unknown stream kind {kind!r}")
        streams.extend(t.streams)
    trace = TrafficTrace(tuple(streams), period, unit)

    specs = []
    for ac in scenario.get("anomalies", []):
        kind = AnomalyKind(ac["kind"])
        members = tuple(_parse_member(m) for m in ac["members"]) if "members" in ac else None
        specs.append(
            AnomalySpec(
                kind=kind,
                start=int(ac["start"]),
                end=int(ac["end"]),
                label_id=int(ac["label_id"]),
                node_id=ac.get("node_id"),
                role=Role(ac.get("role", "unspecified")),
                members=members,
                factor=ac.get("factor"),
                amount=ac.get("amount"),
                pmf=tuple(ac["pmf"]) if "pmf" in ac else None,
                values=tuple(ac["values"]) if "values" in ac else None,
            )
        )
    return trace, specs, master


def _run_generate(scenario: dict, seed_override: int | None, out_trace: str, out_labels: str) -> None:
    trace, specs, master = _build_scenario(scenario, seed_override)
    trace, labels = apply_anomalies(trace, specs, master)
    write_trace(trace, out_trace, extra_metadata={"rng": RNG_NAME, "seed": master})
    write_labels_csv(labels, out_labels)


def cmd_generate(args: argparse.Namespace) -> int:
    if not args.scenario:
        raise ConfigError("--scenario is required")
    scenario = _load_config(args.scenario)
    if not scenario:
        raise ConfigError(f"scenario file {args.scenario} is empty")
    if not args.out_trace or not args.out_labels:
        raise ConfigError("--out-trace and --out-labels are required")
    _run_generate(scenario, args.seed, args.out_trace, args.out_labels)
    print(f"trace written to {args.out_trace} ({RNG_NAME}), labels to {args.out_labels}")
    return 0


# --- evaluate ---


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts = _merged(args, "evaluate")
    if not opts.get("reports") or not opts.get("labels"):
        raise ConfigError("--reports and --labels are required")
    reports = read_reports_csv(opts["reports"])
    labels = read_labels_csv(opts["labels"], opts.get("period"))
    metrics = score(reports, labels)
    print(metrics.format_table())
    if opts.get("out"):
        Path(opts["out"]).write_text(json.dumps(metrics.to_json_dict(), indent=2) + "\n")
    sweep = opts.get("sweep")
    if sweep:
        try:
            lo, hi, count = sweep.split(":")
            grid = np.linspace(float(lo), float(hi), int(count))
        except ValueError:
            raise ConfigError(f"--sweep must be LO:HI:COUNT, got {sweep!r}") from None
        points = roc_sweep(reports, labels, [float(g) for g in grid])
        sweep_out = opts.get("sweep_out") or "roc.csv"
        with open(sweep_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["eta", "detection_rate", "false_alarm_rate"])
            for p in points:
                writer.writerow([repr(p.eta), p.detection_rate, p.false_alarm_rate])
        print(f"ROC sweep written to {sweep_out}")
    return 0


# --- plot-data ---


def cmd_plot_data(args: argparse.Namespace) -> int:
    if not args.reports or not args.out:
        raise ConfigError("--reports and --out are required")
    reports = read_reports_csv(args.reports)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_start", "statistic", "eta", "is_anomaly"])
        for r in reports:
            stat = "inf" if math.isinf(r.statistic) else repr(r.statistic)
            writer.writerow([r.window_start, stat, repr(r.eta), "true" if r.is_anomaly else "false"])
    print(f"plot data written to {args.out}")
    return 0


# --- subnet ---


def _subnet_config(section: dict) -> tuple[SubnetSpec, SubnetDetectionConfig]:
    try:
        members = tuple(_parse_member(m) for m in section["members"])
    except KeyError:
        raise ConfigError("subnet config needs a members list") from None
    spec = SubnetSpec(
        members,
        int(section.get("per_node_k", 3)),
        section.get("name", ""),
        int(section.get("max_joint_size", 4096)),
    )
    cfg = SubnetDetectionConfig(
        detector=Detector(section.get("detector", "model_free")),
        window_n=int(section.get("window", 100)),
        beta=float(section.get("beta", 0.01)),
        stride=int(section["stride"]) if section.get("stride") is not None else None,
        bucket=BucketConfig(int(section.get("bucket", 1)), Aggregation(section.get("agg", "sum"))),
        tolerance=int(section.get("tolerance", 0)),
        epsilon=float(section.get("epsilon", 1e-4)),
        interval=_parse_interval(section.get("interval")),
    )
    return spec, cfg


def cmd_subnet(args: argparse.Namespace) -> int:
    section = _load_config(args.config).get("subnet")
    if not section:
        raise ConfigError("--config with a 'subnet' section is required")
    if not args.reference_trace or not args.live_trace or not args.out:
        raise ConfigError("--reference-trace, --live-trace and --out are required")
    spec, cfg = _subnet_config(section)
    reference = load_trace(args.reference_trace, sample_period=args.period, unit=args.unit)
    live = load_trace(args.live_trace, sample_period=args.period, unit=args.unit)
    reports = train_and_detect_subnet(spec, reference, live, cfg)
    write_reports_csv(reports, args.out)
    flagged = sum(r.is_anomaly for r in reports)
    print(f"{len(reports)} joint windows scanned, {flagged} flagged; reports written to {args.out}")
    return 1 if flagged else 0


# --- pipeline ---


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    for key in ("train_scenario", "live_scenario", "train"):
        if key not in config:
            raise ConfigError(f"pipeline config needs a '{key}' section")
    outdir = Path(args.outdir or ".")
    outdir.mkdir(parents=True, exist_ok=True)

    train_trace_path = outdir / "train_trace.csv"
    live_trace_path = outdir / "live_trace.csv"
    labels_path = outdir / "labels.csv"
    ref_path = outdir / "reference.json"
    reports_path = outdir / "reports.csv"
    metrics_path = outdir / "metrics.json"

    _run_generate(config["train_scenario"], None, str(train_trace_path), str(outdir / "train_labels.csv"))
    _run_generate(config["live_scenario"], None, str(live_trace_path), str(labels_path))

    train_args = argparse.Namespace(
        config=None, func=None, trace=str(train_trace_path), out=str(ref_path), **{
            k: v for k, v in config["train"].items()
        }
    )
    code = cmd_train(train_args)
    if code != 0:
        return code

    detect_section = dict(config.get("detect", {}))
    detect_args = argparse.Namespace(
        config=None,
        func=None,
        ref=str(ref_path),
        trace=str(live_trace_path),
        out=str(reports_path),
        node=config["train"].get("node"),
        role=config["train"].get("role"),
        **detect_section,
    )
    detect_code = cmd_detect(detect_args)

    reports = read_reports_csv(reports_path)
    labels = read_labels_csv(labels_path)
    metrics = score(reports, labels)
    metrics_path.write_text(json.dumps(metrics.to_json_dict(), indent=2) + "\n")
    print(metrics.format_table())
    return detect_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netdiverge",
        description="Divergence-based anomaly detection for network traffic count series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_trace_flags(p):
        p.add_argument("--trace", help="trace CSV path")
        p.add_argument("--period", type=int, help="sample period in seconds (else sidecar)")
        p.add_argument("--unit", choices=[u.value for u in Unit], help="traffic unit (else sidecar)")
        p.add_argument("--node", help="node_id to select when the trace has several streams")
        p.add_argument("--role", choices=[r.value for r in Role], help="role of the selected stream")
        p.add_argument("--config", help="JSON config file supplying defaults")

    p_train = sub.add_parser("train", help="train a detector reference on an anomaly-free trace")
    add_common_trace_flags(p_train)
    p_train.add_argument("--mode", choices=["model-free", "mmp"])
    p_train.add_argument("--k", type=int, help="alphabet size (default 8)")
    p_train.add_argument("--bucket", type=int, help="samples per bucket (model-free, default 1)")
    p_train.add_argument("--agg", choices=[a.value for a in Aggregation], help="bucket aggregation")
    p_train.add_argument("--window", type=int, help="window length (default 100 buckets / 500 samples)")
    p_train.add_argument("--beta", type=float, help="target false-alarm probability (default 0.01)")
    p_train.add_argument("--interval", help="time-of-day interval START:END[:LABEL] in minutes")
    p_train.add_argument("--epsilon", type=float, help="smoothing floor (default 1e-4)")
    p_train.add_argument("--out", help="output reference JSON path")
    p_train.set_defaults(func=cmd_train)

    p_detect = sub.add_parser("detect", help="scan a live trace against a trained reference")
    add_common_trace_flags(p_detect)
    p_detect.add_argument("--ref", help="reference JSON path")
    p_detect.add_argument("--stride", type=int, help="window advance (default window/2)")
    p_detect.add_argument("--out", help="output report CSV path")
    p_detect.set_defaults(func=cmd_detect)

    p_gen = sub.add_parser("generate", help="generate a synthetic trace with labeled anomalies")
    p_gen.add_argument("--scenario", help="scenario JSON path")
    p_gen.add_argument("--seed", type=int, help="override the scenario seed")
    p_gen.add_argument("--out-trace", help="output trace CSV path")
    p_gen.add_argument("--out-labels", help="output labels CSV path")
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score reports against ground-truth labels")
    p_eval.add_argument("--reports", help="report CSV path")
    p_eval.add_argument("--labels", help="labels CSV path")
    p_eval.add_argument("--period", type=int, help="label sample period (default: inferred)")
    p_eval.add_argument("--out", help="write metrics JSON here")
    p_eval.add_argument("--sweep", help="ROC sweep grid LO:HI:COUNT")
    p_eval.add_argument("--sweep-out", dest="sweep_out", help="ROC sweep CSV path (default roc.csv)")
    p_eval.add_argument("--config", help="JSON config file supplying defaults")
    p_eval.set_defaults(func=cmd_evaluate)

    p_plot = sub.add_parser("plot-data", help="emit plot-ready CSV from a report file")
    p_plot.add_argument("--reports", help="report CSV path")
    p_plot.add_argument("--out", help="output CSV path")
    p_plot.set_defaults(func=cmd_plot_data)

    p_subnet = sub.add_parser("subnet", help="joint spatio-temporal detection over a PoP group")
    p_subnet.add_argument("--config", help="JSON config with a 'subnet' section")
    p_subnet.add_argument("--reference-trace", dest="reference_trace", help="anomaly-free trace CSV")
    p_subnet.add_argument("--live-trace", dest="live_trace", help="live trace CSV")
    p_subnet.add_argument("--period", type=int, help="sample period (else sidecar)")
    p_subnet.add_argument("--unit", choices=[u.value for u in Unit], help="unit (else sidecar)")
    p_subnet.add_argument("--out", help="output report CSV path")
    p_subnet.set_defaults(func=cmd_subnet)

    p_pipe = sub.add_parser("pipeline", help="generate, train, detect, evaluate from one config")
    p_pipe.add_argument("--config", required=True, help="pipeline JSON config")
    p_pipe.add_argument("--outdir", help="output directory (default .)")
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
