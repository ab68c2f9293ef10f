"""Command-line entry point: dataset generation, validation, training, and
evaluation as subcommands.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 runtime or
numeric failure. Every file-producing run writes one manifest alongside its
outputs recording the resolved flags, seed, input/output hashes, and wall
time, so a run can be reproduced from its manifest alone. Seeds default to
a fixed constant, never the clock.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Any, Callable

from . import __version__, data, evaluate, figures
from .data import DataError, GenerationSpec, JsonlError, SuiteGenerationError
from .loss import DSEP_DIRECTIONS, DSEP_LITERAL
from .model import ModelIOError, load_model, model_vocab_sha256, save_model
from .textio import DSEP, TRANSITIVITY, vocab_sha256
from .training import TrainConfig, TrainingDivergedError, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DEFAULT_SEED = 12345
OUT_DIR_ENV = "SEMCAUSAL_OUT_DIR"

# Preset example counts per suite.
SUITE_DEFAULT_COUNTS = {
    "train": 50_000,
    "length": 10_000,
    "branching": 10_000,
    "reversed": 10_000,
    "shuffled": 10_000,
    "long-names": 10_000,
    "adversarial": 1_000,
}

_REQUIRED = object()


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "on", "yes"):
        return True
    if value in ("0", "false", "off", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _parse_int_range(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_float_range(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


@dataclass(frozen=True)
class Flag:
    kind: Callable[[str], Any]
    default: Any = None
    choices: tuple | None = None
    help: str = ""


GEN_FLAGS: dict[str, Flag] = {
    "task": Flag(str, _REQUIRED, (TRANSITIVITY, DSEP), "reasoning task"),
    "suite": Flag(str, _REQUIRED, data.SUITES, "dataset suite"),
    "count": Flag(int, None, None, "examples to generate (default: suite preset)"),
    "seed": Flag(int, DEFAULT_SEED, None, "generation seed"),
    "out": Flag(str, None, None, "output JSONL path (default: <task>_<suite>.jsonl)"),
    "length_range": Flag(_parse_int_range, None, None, "chain length / node count range MIN,MAX"),
    "name_len_range": Flag(_parse_int_range, None, None, "node name length range MIN,MAX"),
    "density_range": Flag(_parse_float_range, None, None, "edge density range MIN,MAX"),
    "p_flip": Flag(_parse_float_list, None, None, "edge flip probability choices, comma-separated"),
    "z_max": Flag(int, None, None, "max conditioning set size"),
    "balance": Flag(_parse_bool, False, None, "best-effort 50/50 label balance (transitivity)"),
}

TRAIN_FLAGS: dict[str, Flag] = {
    "data": Flag(str, _REQUIRED, None, "training JSONL path"),
    "out": Flag(str, "model.bin", None, "output model path"),
    "probe": Flag(str, None, None, "held-out probe JSONL (default: first 1000 training rows)"),
    "semantic": Flag(str, "on", ("on", "off"), "semantic loss term"),
    "lambda_start": Flag(float, 0.05, None, "semantic weight at step 0"),
    "lambda_end": Flag(float, 0.30, None, "semantic weight at the final step"),
    "epochs": Flag(int, 3, None, "training epochs"),
    "batch_size": Flag(int, 8, None, "batch size"),
    "lr": Flag(float, 1e-2, None, "learning rate (toy-scale default; preset 2e-5 suits large models)"),
    "weight_decay": Flag(float, 0.01, None, "decoupled weight decay"),
    "warmup": Flag(int, 100, None, "linear warmup steps"),
    "seed": Flag(int, DEFAULT_SEED, None, "training seed"),
    "d_embed": Flag(int, 32, None, "embedding width"),
    "d_hidden": Flag(int, 32, None, "hidden width"),
    "max_seq_len": Flag(int, 512, None, "token sequence cap"),
    "dsep_direction": Flag(str, DSEP_LITERAL, DSEP_DIRECTIONS, "d-separation consistency direction"),
}

EVAL_FLAGS: dict[str, Flag] = {
    "model": Flag(str, _REQUIRED, None, "model file"),
    "data": Flag(str, _REQUIRED, None, "evaluation JSONL path(s), comma-separated"),
    "out": Flag(str, "eval_report", None, "output path prefix"),
    "format": Flag(str, "both", ("json", "csv", "both"), "report format"),
    "figures": Flag(_parse_bool, True, None, "render distribution/bias figures"),
    "seed": Flag(int, DEFAULT_SEED, None, "recorded in report metadata"),
}

VALIDATE_FLAGS: dict[str, Flag] = {
    "in": Flag(str, _REQUIRED, None, "JSONL file to validate"),
}

SUBCOMMAND_FLAGS = {
    "gen": GEN_FLAGS,
    "train": TRAIN_FLAGS,
    "eval": EVAL_FLAGS,
    "validate": VALIDATE_FLAGS,
}


def _register(parser: argparse.ArgumentParser, flags: dict[str, Flag]) -> None:
    parser.add_argument("--config", default=None, help="key=value config file merged under flags")
    parser.add_argument(
        "--show-config", action="store_true", help="print the resolved configuration and exit"
    )
    for name, flag in flags.items():
        parser.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=flag.kind,
            choices=flag.choices,
            default=argparse.SUPPRESS,
            help=flag.help,
        )


def _read_config_file(path: str, flags: dict[str, Flag]) -> dict[str, Any]:
    values: dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_number}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            dest = key.strip().replace("-", "_")
            if dest not in flags:
                raise UsageError(f"{path}:{line_number}: unknown key {key.strip()!r}")
            flag = flags[dest]
            try:
                parsed = flag.kind(value.strip())
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}:{line_number}: {exc}")
            if flag.choices and parsed not in flag.choices:
                raise UsageError(
                    f"{path}:{line_number}: {key.strip()} must be one of {flag.choices}"
                )
            values[dest] = parsed
    return values


def _resolve(namespace: argparse.Namespace, flags: dict[str, Flag]) -> dict[str, Any]:
    """defaults < config file < command-line flags."""
    resolved = {name: flag.default for name, flag in flags.items()}
    config_path = getattr(namespace, "config", None)
    if config_path:
        resolved.update(_read_config_file(config_path, flags))
    for name in flags:
        if hasattr(namespace, name):
            resolved[name] = getattr(namespace, name)
    missing = [name for name, value in resolved.items() if value is _REQUIRED]
    if missing:
        pretty = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"missing required flags: {pretty}")
    return resolved


def _out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, ".")


def _default_out(filename: str) -> str:
    return os.path.join(_out_dir(), filename)


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(
    path: str,
    subcommand: str,
    config: dict[str, Any],
    inputs: list[str],
    outputs: list[str],
    started: float,
) -> None:
    manifest = {
        "artifact_version": __version__,
        "subcommand": subcommand,
        "flags": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(config.items())},
        "seed": config.get("seed"),
        "inputs": {p: _sha256_file(p) for p in inputs},
        "outputs": {p: _sha256_file(p) for p in outputs},
        "duration_seconds": round(time.monotonic() - started, 3),
    }
    _atomic_write_text(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _strip_jsonl_suffix(path: str) -> str:
    return path[: -len(".jsonl")] if path.endswith(".jsonl") else path


def cmd_gen(config: dict[str, Any]) -> int:
    started = time.monotonic()
    if config["count"] is None:
        config["count"] = SUITE_DEFAULT_COUNTS[config["suite"]]
    if config["out"] is None:
        config["out"] = _default_out(f"{config['task']}_{config['suite']}.jsonl")
    overrides: dict[str, Any] = {}
    if config["length_range"] is not None:
        overrides["length_range"] = config["length_range"]
    if config["name_len_range"] is not None:
        overrides["name_len_range"] = config["name_len_range"]
    if config["density_range"] is not None:
        overrides["density_range"] = config["density_range"]
    if config["p_flip"] is not None:
        overrides["p_flip_choices"] = config["p_flip"]
    if config["z_max"] is not None:
        overrides["z_size_max"] = config["z_max"]
    if config["balance"]:
        overrides["balance_labels"] = True
    if config["suite"] == "adversarial" and overrides:
        raise UsageError("parameter overrides are not supported for the adversarial suite")

    spec = GenerationSpec(
        task=config["task"],
        suite=config["suite"],
        count=config["count"],
        seed=config["seed"],
        overrides=overrides,
    )
    examples, report = data.generate_suite(spec)
    out = config["out"]
    data.write_jsonl(examples, out)
    base = _strip_jsonl_suffix(out)
    report_path = base + ".report.json"
    _atomic_write_text(report_path, json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    _write_manifest(base + ".manifest.json", "gen", config, [], [out, report_path], started)
    print(f"wrote {len(examples)} examples to {out} (acceptance {report.acceptance_rate:.1%})")
    return EXIT_OK


def cmd_train(config: dict[str, Any]) -> int:
    started = time.monotonic()
    dataset = data.read_jsonl(config["data"])
    if not dataset:
        raise DataError(f"no examples in {config['data']}")
    inputs = [config["data"]]
    if config["probe"]:
        probe = data.read_jsonl(config["probe"])
        inputs.append(config["probe"])
    else:
        probe = dataset[: min(1000, len(dataset))]
    train_config = TrainConfig(
        epochs=config["epochs"],
        batch_size=config["batch_size"],
        learning_rate=config["lr"],
        weight_decay=config["weight_decay"],
        warmup_steps=config["warmup"],
        lambda_start=config["lambda_start"],
        lambda_end=config["lambda_end"],
        semantic_enabled=config["semantic"] == "on",
        dsep_direction=config["dsep_direction"],
        seed=config["seed"],
        d_embed=config["d_embed"],
        d_hidden=config["d_hidden"],
        max_seq_len=config["max_seq_len"],
    )
    model, log = train(dataset, train_config, probe)
    out = config["out"]
    save_model(model, out)
    log_csv = out + ".trainlog.csv"
    log.write_csv(log_csv)
    summary_path = out + ".summary.json"
    summary = {"config": {k: v for k, v in sorted(config.items())}, "log": log.summary_dict()}
    _atomic_write_text(summary_path, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _write_manifest(
        out + ".manifest.json", "train", config, inputs, [out, log_csv, summary_path], started
    )
    final_bias = log.epochs[-1].probe_bias if log.epochs else float("nan")
    print(f"trained {len(log.steps)} steps; final probe bias {final_bias:.3f}; model at {out}")
    return EXIT_OK


def cmd_eval(config: dict[str, Any]) -> int:
    started = time.monotonic()
    model_path = config["model"]
    model_vocab = model_vocab_sha256(model_path)
    if model_vocab != vocab_sha256():
        raise ModelIOError(
            f"model {model_path} was built against a different vocabulary "
            f"({model_vocab[:12]}... != {vocab_sha256()[:12]}...)"
        )
    model = load_model(model_path)
    paths = [p for p in config["data"].split(",") if p]
    suites: dict[str, list] = {}
    for path in paths:
        name = _strip_jsonl_suffix(os.path.basename(path))
        if name in suites:
            raise UsageError(f"duplicate suite name {name!r} among --data paths")
        suites[name] = data.read_jsonl(path)
    metadata = {
        "model_sha256": _sha256_file(model_path),
        "datasets": {os.path.basename(p): _sha256_file(p) for p in paths},
        "seed": config["seed"],
        "artifact_version": __version__,
    }
    report = evaluate.evaluate_suites(model, suites, metadata)
    out = config["out"]
    outputs = []
    if config["format"] in ("json", "both"):
        json_path = out + ".json"
        _atomic_write_text(json_path, evaluate.report_to_json(report))
        outputs.append(json_path)
    if config["format"] in ("csv", "both"):
        csv_path = out + ".csv"
        _atomic_write_text(csv_path, evaluate.report_to_csv(report))
        outputs.append(csv_path)
    if config["figures"]:
        dist_path = out + "_distribution.png"
        bias_path = out + "_bias.png"
        figures.render_distribution_figure(report, dist_path)
        figures.render_bias_figure(report, bias_path)
        outputs.extend([dist_path, bias_path])
    _write_manifest(out + ".manifest.json", "eval", config, [model_path] + paths, outputs, started)
    collapsed = [name for name, r in sorted(report.suites.items()) if r.collapse.collapsed]
    verdict = f"collapsed on: {', '.join(collapsed)}" if collapsed else "no collapse detected"
    print(f"aggregate accuracy {report.aggregate.accuracy:.3f}; {verdict}")
    return EXIT_OK


def cmd_validate(config: dict[str, Any]) -> int:
    report = data.validate_file(config["in"])
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    if report.attempted == 0:
        print(f"{config['in']}: empty file, nothing validated", file=sys.stderr)
        return EXIT_VALIDATION
    if report.accepted != report.attempted:
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "validate": cmd_validate,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="semcausal", description=__doc__)
    parser.add_argument("--version", action="version", version=f"semcausal {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    descriptions = {
        "gen": "generate a dataset suite with validation",
        "train": "train the toy classifier",
        "eval": "evaluate a model over one or more suites",
        "validate": "re-validate a JSONL dataset",
    }
    for name, flags in SUBCOMMAND_FLAGS.items():
        _register(sub.add_parser(name, help=descriptions[name]), flags)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
        if namespace.subcommand is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        flags = SUBCOMMAND_FLAGS[namespace.subcommand]
        config = _resolve(namespace, flags)
        if namespace.show_config:
            shown = {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(config.items())}
            print(json.dumps(shown, sort_keys=True, indent=2))
            return EXIT_OK
        return COMMANDS[namespace.subcommand](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SuiteGenerationError, TrainingDivergedError, ModelIOError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
