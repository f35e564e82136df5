"""Command-line front end.

Settings are resolved in order: built-in defaults, ``--config`` file,
``--set key=value`` overrides, explicit flags. The config file is plain
``key=value`` lines using the flag names (``flip-prob=0.25``); ``#`` starts
a comment. Channel keys may also be written ``channel.flip_prob``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from . import adversary as adv
from .channel import NoiseModel
from .classical import bitstring, eve_xor_recover, xor_three_pass
from .errors import ConfigurationError, SimulationError
from .experiments import (
    RNG_SCHEME,
    ExperimentConfig,
    compare_protocols,
    run_experiment,
    run_sweep,
    trial_transcript,
    tune_flip_prob,
)
from .protocol import AngleMode

EXIT_OK = 0
EXIT_CONFIG = 2

SUBCOMMANDS = ("qtpp", "bb84", "compare", "classical-demo", "sweep")
SWEEP_CSV_COLUMNS = ["param_name", "param_value", "mean_qber", "qber_ci95_halfwidth", "eve_accuracy", "detection_rate"]


def _passes(text: str) -> Optional[List[int]]:
    text = text.strip()
    if text in ("", "default"):
        return None
    return [int(p) for p in text.split(",") if p.strip()]


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise ValueError("must be a 64-bit unsigned integer")
    return v


# canonical key -> (parser, default)
SETTINGS: Dict[str, tuple] = {
    "seed": (_seed, 0),
    "bits": (int, 1000),
    "trials": (int, 1),
    "adversary": (str, "passive"),
    "attack-passes": (_passes, None),
    "basis-angle": (float, 0.0),
    "guess-rule": (lambda s: s or None, None),
    "angle-mode": (AngleMode.parse, AngleMode()),
    "theta": (float, None),
    "fixed-offset": (float, 0.0),
    "jitter-sigma": (float, 0.0),
    "flip-prob": (float, 0.0),
    "loss-prob": (float, 0.0),
    "check-fraction": (float, 0.2),
    "threshold": (float, 0.11),
}
ALIASES = {
    "channel.fixed_offset": "fixed-offset",
    "channel.jitter_sigma": "jitter-sigma",
    "channel.flip_prob": "flip-prob",
    "channel.loss_prob": "loss-prob",
    "detection_threshold": "threshold",
    "bits_per_session": "bits",
    "master_seed": "seed",
}


def canonical_key(key: str) -> str:
    key = key.strip()
    if key in ALIASES:
        return ALIASES[key]
    norm = key.replace("_", "-")
    if norm in SETTINGS:
        return norm
    raise ConfigurationError(f"unknown config key {key!r}")


def parse_setting(key: str, raw: str):
    name = canonical_key(key)
    parser = SETTINGS[name][0]
    try:
        return name, parser(raw.strip())
    except (ValueError, ConfigurationError) as exc:
        raise ConfigurationError(f"invalid value {raw!r} for {key!r}: {exc}") from None


def read_config_file(path: Path) -> Dict[str, object]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {str(path)!r}: {exc.strerror}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        name, value = parse_setting(key, raw)
        values[name] = value
    return values


def resolve_settings(args: argparse.Namespace) -> Dict[str, object]:
    values = {k: default for k, (_, default) in SETTINGS.items()}
    if args.config:
        values.update(read_config_file(args.config))
    for item in args.set or ():
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        name, value = parse_setting(*item.split("=", 1))
        values[name] = value
    for name in SETTINGS:
        raw = getattr(args, name.replace("-", "_"), None)
        if raw is not None:
            values[name] = parse_setting(name, raw)[1]
    if values["theta"] is not None:
        values["angle-mode"] = AngleMode("fixed", theta=values["theta"])
    return values


def build_config(values: Dict[str, object], protocol: str) -> ExperimentConfig:
    kind = values["adversary"]
    try:
        kind = adv.AttackKind(kind)
    except ValueError:
        raise ConfigurationError(
            f"invalid value {kind!r} for 'adversary': choose from {[k.value for k in adv.AttackKind]}"
        ) from None
    passes = values["attack-passes"]
    strategy = adv.AdversaryStrategy(
        kind=kind,
        attacked_passes=frozenset(adv.DEFAULT_PASSES[kind] if passes is None else passes),
        measurement_basis_angle=values["basis-angle"],
        guess_rule=values["guess-rule"],
    )
    channel = NoiseModel(
        fixed_offset=values["fixed-offset"],
        jitter_sigma=values["jitter-sigma"],
        flip_prob=values["flip-prob"],
        loss_prob=values["loss-prob"],
    )
    return ExperimentConfig(
        protocol=protocol,
        trials=values["trials"],
        bits_per_session=values["bits"],
        adversary=strategy,
        channel=channel,
        check_fraction=values["check-fraction"],
        detection_threshold=values["threshold"],
        master_seed=values["seed"],
        angle_mode=values["angle-mode"],
    )


# -- output ---------------------------------------------------------------

def _clean(obj):
    """Replace non-finite floats by None so the JSON stays strict."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dump_json(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def dump_csv(columns: List[str], rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def _header(config: ExperimentConfig, subcommand: str) -> dict:
    return {
        "version": __version__,
        "subcommand": subcommand,
        "seed": config.master_seed,
        "rng": RNG_SCHEME,
        "config": config.to_dict(),
    }


def _run_protocol(args, values) -> str:
    config = build_config(values, args.command)
    results = run_experiment(config).results_dict()
    if args.format == "csv":
        return dump_csv(list(results), [results])
    report = _header(config, args.command)
    report["results"] = results
    report["sweep"] = []
    if getattr(args, "transcript", False):
        report["transcript"] = trial_transcript(config, 0).to_dict(debug=args.debug)
    return dump_json(report)


def _run_compare(args, values) -> str:
    config = build_config(values, "qtpp")
    bb84_config = replace(config, protocol="bb84")
    if args.floor_target is not None:
        # the same flip rate gives the two protocols different floors
        config, bb84_config = (
            replace(c, channel=replace(c.channel, flip_prob=tune_flip_prob(c, args.floor_target)))
            for c in (config, bb84_config)
        )
    rows = compare_protocols(config, bb84_config)
    row_dicts = [r.to_dict() for r in rows.values()]
    if args.format == "csv":
        return dump_csv(list(row_dicts[0]), row_dicts)
    report = _header(config, "compare")
    report["results"] = rows["qtpp"].under_attack.results_dict()
    report["compare"] = {name: d for name, d in zip(rows, row_dicts)}
    report["compare"]["flip_prob"] = {"qtpp": config.channel.flip_prob, "bb84": bb84_config.channel.flip_prob}
    report["sweep"] = []
    return dump_json(report)


def _run_sweep(args, values) -> str:
    config = build_config(values, args.protocol)
    if args.points < 1:
        raise ConfigurationError("--points must be >= 1")
    grid = [float(v) for v in np.linspace(args.start, args.stop, args.points)]
    points = run_sweep(config, args.param.replace("-", "_"), grid)
    rows = [
        {
            "param_name": p.param_name,
            "param_value": p.param_value,
            "mean_qber": p.report.mean_qber,
            "qber_ci95_halfwidth": p.report.qber_ci95,
            "eve_accuracy": p.report.eve_accuracy,
            "detection_rate": p.report.detection_rate,
        }
        for p in points
    ]
    if (args.format or "csv") == "csv":
        return dump_csv(SWEEP_CSV_COLUMNS, rows)
    report = _header(config, "sweep")
    report["sweep_param"] = points[0].param_name if points else args.param
    report["results"] = None
    report["sweep"] = [
        {"param_value": r["param_value"], "mean_qber": r["mean_qber"], "qber_ci95": r["qber_ci95_halfwidth"],
         "eve_accuracy": r["eve_accuracy"], "detection_rate": r["detection_rate"]}
        for r in rows
    ]
    return dump_json(report)


def _run_classical(args, values) -> str:
    transcript, recovered = xor_three_pass(args.message, args.ka, args.kb)
    eve = eve_xor_recover(transcript)
    fields = {
        "m1": bitstring(transcript.m1),
        "m2": bitstring(transcript.m2),
        "m3": bitstring(transcript.m3),
        "bob_recovered": bitstring(recovered),
        "eve_recovered": bitstring(eve),
    }
    if args.format == "json":
        return dump_json({"version": __version__, "subcommand": "classical-demo", "results": fields})
    return " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


RUNNERS: Dict[str, Callable] = {
    "qtpp": _run_protocol,
    "bb84": _run_protocol,
    "compare": _run_compare,
    "sweep": _run_sweep,
    "classical-demo": _run_classical,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value settings file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting (repeatable)")
    p.add_argument("--seed", help="master seed (64-bit unsigned, default 0)")
    p.add_argument("--bits", help="bits per session")
    p.add_argument("--trials", help="number of independent sessions")
    p.add_argument("--adversary", help="passive | intercept-resend | entangle-cnot")
    p.add_argument("--attack-passes", help="comma-separated pass indices, e.g. 1,2,3")
    p.add_argument("--basis-angle", help="intercept-resend measurement basis angle (rad)")
    p.add_argument("--guess-rule", help="first | last | majority | parity")
    p.add_argument("--angle-mode", help="uniform | fixed(THETA) | grid(M)")
    p.add_argument("--theta", help="shorthand for --angle-mode fixed(THETA)")
    p.add_argument("--fixed-offset", help="per-pass channel misalignment (rad)")
    p.add_argument("--jitter-sigma", help="per-pass Gaussian rotation std-dev (rad)")
    p.add_argument("--flip-prob", help="per-pass bit-flip probability")
    p.add_argument("--loss-prob", help="per-pass photon loss probability")
    p.add_argument("--check-fraction", help="fraction of key bits sacrificed for QBER estimation")
    p.add_argument("--threshold", help="QBER above which a session is flagged")
    p.add_argument("--output", type=Path, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtpp-sim", description="Quantum three-pass protocol Monte Carlo simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (("qtpp", "run QTPP sessions"), ("bb84", "run the BB84 baseline")):
        p = sub.add_parser(name, help=help_text)
        _add_experiment_flags(p)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "qtpp":
            p.add_argument("--transcript", action="store_true", help="embed the first session's transcript")
            p.add_argument("--debug", action="store_true", help="include key angles in the transcript")

    p = sub.add_parser("compare", help="QTPP vs BB84 under matched settings")
    _add_experiment_flags(p)
    p.add_argument(
        "--floor-target", type=float, default=None,
        help="tune each protocol's flip-prob so its noise-only QBER is about this value",
    )
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("sweep", help="sweep one parameter over a linear grid")
    _add_experiment_flags(p)
    p.add_argument("--param", required=True, help="theta | flip-prob | fixed-offset | jitter-sigma | loss-prob | basis-angle")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--protocol", choices=("qtpp", "bb84"), default="qtpp")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="default csv")

    p = sub.add_parser("classical-demo", help="XOR three-pass protocol and Eve's recovery")
    p.add_argument("--message", required=True)
    p.add_argument("--ka", required=True)
    p.add_argument("--kb", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--output", type=Path)
    return parser


def parse_and_run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        values = resolve_settings(args) if args.command != "classical-demo" else {}
        text = RUNNERS[args.command](args, values)
    except SimulationError as exc:
        print(f"qtpp-sim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(parse_and_run())
