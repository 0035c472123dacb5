"""Command-line front end.

Exit codes: 0 on success, 1 on configuration errors, 2 when a
transmission aborts or a stream is unrepairable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import codespace, feedback, harness
from .channel import SignalFrame, TrialRng, apply
from .codespace import DecodeStatus
from .framing import UnrepairableStreamError
from .harness import ConfigError, ScenarioConfig
from .stack import TransmissionAborted


def _load_codebook(name_or_path: str) -> codespace.Codebook:
    try:
        return harness._codebook_by_name(name_or_path, "codebook")
    except ConfigError:
        path = Path(name_or_path)
        if not path.exists():
            raise ConfigError("codebook", f"no builtin codebook or file named {name_or_path!r}")
        return codespace.parse_codebook(path.read_text())


def _write_or_print(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_encode(args) -> int:
    book = _load_codebook(args.codebook)
    bits = args.bits.replace(" ", "")
    block = int(math.log2(len(book)))
    if not bits or len(bits) % block:
        raise ConfigError("bits", f"length must be a positive multiple of {block}")
    lines = []
    no_erasure = np.zeros(book.dimension, dtype=bool)
    for i in range(0, len(bits), block):
        index = int(bits[i : i + block], 2)
        signal = codespace.SignalVector(book.vectors[index].copy(), no_erasure.copy())
        lines.append(codespace.format_signal(signal))
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_decode(args) -> int:
    book = _load_codebook(args.codebook)
    signal = codespace.parse_signal(args.signal)
    lines = []
    if args.table:
        for sym, dist in codespace.distance_table(book, signal):
            lines.append(f"{sym}\t{dist:g}")
    outcome = codespace.nn_decode(book, signal)
    if outcome.status is DecodeStatus.AMBIGUOUS:
        lines.append(f"ambiguous: {', '.join(str(c) for c in outcome.candidates)} at distance {outcome.distance:g}")
    elif outcome.status is DecodeStatus.DETECTED_UNCORRECTABLE:
        lines.append(f"uncorrectable: nearest distance {outcome.distance:g} beyond radius")
    else:
        lines.append(f"{outcome.status.value}: symbol {outcome.symbol} at distance {outcome.distance:g}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0 if outcome.resolved else 2


def _cmd_channel(args) -> int:
    model = harness.build_error_model(json.loads(args.model))
    frame = SignalFrame.from_bits(args.input)
    corrupted = apply(model, frame, TrialRng(args.seed, args.trial))
    lines = [codespace.format_signal(corrupted[i]) for i in range(len(corrupted))]
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _read_config(args) -> ScenarioConfig:
    text = Path(args.config).read_text()
    config = ScenarioConfig.from_json(text)
    if args.seed is not None or args.trials is not None:
        data = json.loads(text)
        if args.seed is not None:
            data["master_seed"] = args.seed
        if args.trials is not None:
            data["trials"] = args.trials
        config = ScenarioConfig.from_json(json.dumps(data))
    return config


def _out_dir(args, config: ScenarioConfig | None = None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None and config.out_dir:
        return Path(config.out_dir)
    return Path(".")


def _cmd_stack_run(args) -> int:
    config = _read_config(args)
    stack = harness.build_stack(config.stack)
    model = harness.build_error_model(config.error_model)
    rng = TrialRng(config.master_seed, 0)
    bits = harness._random_bits(rng.stage(harness._MESSAGE_STAGE).generator(), config.message_bits)
    message = harness._top_message(stack, bits)
    out = _out_dir(args, config)
    try:
        received, report = harness.transmit(stack, message, model, rng)
    except TransmissionAborted as err:
        harness.write_json(
            {"aborted_at": err.layer_name, "message_bits": config.message_bits},
            out / "stack_run_summary.json",
        )
        print(f"aborted at layer {err.layer_name!r}", file=sys.stderr)
        return 2
    lines = ["layer,errors_in,corrected,introduced,errors_out"]
    for row in report.rows:
        lines.append(f"{row.layer},{row.errors_in},{row.corrected},{row.introduced},{row.errors_out}")
    harness.write_csv(lines, out / "stack_run_report.csv")
    harness.write_json(
        {
            "message": str(message),
            "received": str(received),
            "delivered_clean": received == message,
            "report_csv": str(out / "stack_run_report.csv"),
        },
        out / "stack_run_summary.json",
    )
    print(f"wrote {out / 'stack_run_report.csv'}")
    return 0


def _cmd_feedback_run(args) -> int:
    data = json.loads(Path(args.config).read_text())
    spec = data.get("error_function", {"type": "identity"})
    kind = spec.get("type", "identity")
    if kind == "identity":
        error_function = feedback.Identity()
    elif kind == "affine":
        error_function = feedback.Affine(float(spec.get("gain", 1.0)), float(spec.get("offset", 0.0)))
    else:
        raise ConfigError("error_function.type", f"unknown error function {kind!r}")
    session = feedback.Session(
        reference=float(data.get("reference", 0.0)),
        error_function=error_function,
        delay=int(data.get("delay", 0)),
        q=float(data.get("q", 1e-3)),
        plant=float(data.get("plant", 0.0)),
    )
    rounds = int(data.get("rounds", 40))
    disturbance = data.get("disturbance")
    for r in range(1, rounds + 1):
        hit = disturbance is not None and r == int(disturbance.get("round", -1))
        feedback.step(session, disturbance=float(disturbance["value"]) if hit else None)
    out = _out_dir(args)
    lines = ["round,delta,fill_bits,plant_value"]
    for rec in session.log:
        delta_txt = "" if rec.delta is None else repr(rec.delta)
        lines.append(f"{rec.round},{delta_txt},{rec.fill_bits},{rec.plant_value!r}")
    harness.write_csv(lines, out / "feedback_rounds.csv")
    harness.write_json(
        {"final_plant": session.plant, "reference": session.reference, "rounds": rounds},
        out / "feedback_summary.json",
    )
    print(f"wrote {out / 'feedback_rounds.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    config = _read_config(args)
    report = harness.sweep(config)
    out = _out_dir(args, config)
    rows = [
        {
            "point": row.point,
            "trials": row.trials,
            "raw_rate": row.raw_rate,
            "residual_rate": row.residual_rate,
            "overhead_ratio": row.overhead_ratio,
            "net_info_per_use": row.net_information_per_use,
            "ci99_half_width": row.ci99_half_width,
        }
        for row in report.rows
    ]
    if args.format == "json":
        harness.write_json(rows, out / "sweep.json")
        written = out / "sweep.json"
    else:
        harness.write_csv(report.csv_lines(), out / "sweep.csv")
        written = out / "sweep.csv"
    harness.write_json(
        {"config": json.loads(config.to_json()), "grid_points": len(rows), "rows": rows},
        out / "sweep_summary.json",
    )
    print(f"wrote {written}")
    return 0


def _cmd_scenario(args) -> int:
    summary = harness.scenario(args.name, _out_dir(args), seed=args.seed)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chansim",
        description="Simulate error-correcting channels: codebooks, disturbers, stacks, feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a bit string as prototype signal vectors")
    p.add_argument("--codebook", default="hamming74", help="builtin name or codebook file")
    p.add_argument("--bits", required=True, help="message bits, e.g. 0101")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode one signal vector against a codebook")
    p.add_argument("--codebook", default="hamming74")
    p.add_argument("--signal", required=True, help="signal literal, '?' marks erasures")
    p.add_argument("--table", action="store_true", help="also print the full distance table")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("channel", help="corrupt a frame of bit vectors with an error model")
    p.add_argument("--model", required=True, help='JSON spec, e.g. {"type":"random_flip","p":0.1}')
    p.add_argument("--input", required=True, help="whitespace-separated bit-vector literals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_channel)

    p = sub.add_parser("stack-run", help="one transmission through a configured stack")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_stack_run)

    p = sub.add_parser("feedback-run", help="run a feedback session round by round")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_feedback_run)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over the config grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("scenario", help="run a named preset scenario")
    p.add_argument("name", choices=harness.SCENARIO_NAMES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_scenario)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (TransmissionAborted, UnrepairableStreamError) as err:
        print(f"transmission failed: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
