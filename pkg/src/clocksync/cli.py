"""Command-line front end.

Configuration comes from an optional strict JSON file (``--config``) with
flags layered on top.  Exit codes: 0 success, 2 configuration error,
3 validation failure, 4 runtime or numeric error.  Every failure writes a
one-line JSON error record to stderr.

Output columns
--------------
run-protocol, sweep:
    kind, size, terminal, basis, t, s, lambda, alpha, phi, expectation,
    visibility, p_plus, channel_uses
empirical-uncertainty:
    kind, size, t, s, lambda, alpha, phi, nu, trials, seed, quadrature,
    mean_phi_hat, std_phi_hat, nominal_std
estimate (csv):
    j, bit, theta_hat, margin, shots_x, shots_y, resampled
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

from .channel_algebra import ChannelParams, is_cptp, is_phase_covariant, make_channel
from .errors import ClocksyncError, MalformedSpec, MissingField, NotCptp, ParseError
from .estimation import (
    BIT_COLUMNS,
    ShotSampler,
    choose_quadrature,
    empirical_uncertainty,
    estimate_offset,
)
from .protocols import (
    OUTCOME_COLUMNS,
    ProtocolSpec,
    analytic_expectation,
    nominal_uncertainty,
    outcome_row,
    simulate_expectation,
)

COMMANDS = ("validate-channel", "run-protocol", "sweep", "estimate", "empirical-uncertainty")

EMPIRICAL_COLUMNS = (
    "kind", "size", "t", "s", "lambda", "alpha", "phi", "nu", "trials", "seed",
    "quadrature", "mean_phi_hat", "std_phi_hat", "nominal_std",
)

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4

_CHANNEL_KEYS = ("t", "s", "lambda", "alpha")
_PROTOCOL_KEYS = ("kind", "size", "terminal", "basis")
_SCALARS = {
    "command": str,
    "phi": float,
    "true_T": float,
    "k": int,
    "nu": int,
    "trials": int,
    "omega": float,
    "seed": int,
    "tol": float,
    "points": int,
    "method": str,
    "out": str,
    "format": str,
    "timestamp": bool,
    "degrees": bool,
}
DEFAULTS = {"tol": 1e-9, "nu": 64, "seed": 0, "omega": 1.0, "points": 32, "method": "analytic", "timestamp": True}
_REQUIRED = {
    "validate-channel": ("channel.t", "channel.s", "channel.lambda", "channel.alpha"),
    "run-protocol": ("protocol.kind", "protocol.size", "phi"),
    "sweep": ("protocol.kind", "protocol.size"),
    "estimate": ("protocol.kind", "true_T", "k"),
    "empirical-uncertainty": ("protocol.kind", "protocol.size", "phi", "trials"),
}


@dataclass
class ExperimentConfig:
    command: str
    channel: ChannelParams
    protocol: ProtocolSpec | None = None
    phi: float | None = None
    true_T: float | None = None
    k: int | None = None
    nu: int = 64
    trials: int | None = None
    omega: float = 1.0
    seed: int = 0
    tol: float = 1e-9
    points: int = 32
    method: str = "analytic"
    out: str | None = None
    format: str | None = None
    timestamp: bool = True

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        return "json" if self.command in ("validate-channel", "estimate") else "csv"


def _coerce(key: str, value: Any, kind: type):
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            raise TypeError
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if not isinstance(value, str):
            raise TypeError
        return value
    except (TypeError, ValueError):
        raise ParseError(f"invalid value for {key!r}: {value!r}", key) from None


def _flatten_file(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("config file must hold a JSON object")
    flat = {}
    for key, value in data.items():
        if key in ("channel", "protocol"):
            allowed = _CHANNEL_KEYS if key == "channel" else _PROTOCOL_KEYS
            if not isinstance(value, dict):
                raise ParseError(f"{key!r} must be an object", key)
            for sub, v in value.items():
                if sub not in allowed:
                    raise ParseError(f"unknown key {sub!r} in {key!r}", sub)
                flat[f"{key}.{sub}"] = v
        elif key in _SCALARS:
            flat[key] = value
        else:
            raise ParseError(f"unknown key {key!r}", key)
    return flat


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def build_arg_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="clocksync", allow_abbrev=False, description="Quantum clock-synchronization protocol simulator.")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--command", choices=COMMANDS)
    for name in _CHANNEL_KEYS:
        p.add_argument(f"--{name}", dest=f"channel.{name}", type=float)
    p.add_argument("--kind", dest="protocol.kind")
    p.add_argument("--n", "--r", dest="protocol.size", type=int)
    p.add_argument("--terminal", dest="protocol.terminal")
    p.add_argument("--basis", dest="protocol.basis")
    p.add_argument("--phi", type=float)
    p.add_argument("--true-T", dest="true_T", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--nu", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--method", choices=("analytic", "simulate"))
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--no-timestamp", dest="timestamp", action="store_const", const=False)
    p.add_argument("--degrees", action="store_const", const=True)
    return p


def parse_config(argv: Sequence[str] = (), file_text: str | None = None) -> ExperimentConfig:
    """Resolve flags over an optional JSON config into an :class:`ExperimentConfig`.

    ``file_text`` takes the place of reading ``--config``; when both are
    absent only flags and defaults are used.
    """
    args = vars(build_arg_parser().parse_args(list(argv)))
    config_path = args.pop("config")
    merged: dict = {}
    if file_text is None and config_path:
        try:
            with open(config_path) as fh:
                file_text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read config {config_path!r}: {exc.strerror}", "config") from None
    if file_text is not None:
        merged.update(_flatten_file(file_text))
    merged.update({k: v for k, v in args.items() if v is not None})

    command = merged.get("command")
    if command is None:
        raise MissingField(["command"])
    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}", "command")
    missing = [key for key in _REQUIRED[command] if key not in merged]
    if missing:
        raise MissingField(missing)

    values = dict(DEFAULTS)
    for key, kind in _SCALARS.items():
        if key in merged:
            values[key] = _coerce(key, merged[key], kind)
    degrees = values.pop("degrees", False)

    ch_raw = {k: _coerce(k, merged[f"channel.{k}"], float) for k in _CHANNEL_KEYS if f"channel.{k}" in merged}
    if degrees:
        if "alpha" in ch_raw:
            ch_raw["alpha"] = math.radians(ch_raw["alpha"])
        if "phi" in values:
            values["phi"] = math.radians(values["phi"])
    try:
        channel = ChannelParams.from_dict(ch_raw)
    except ClocksyncError as exc:
        raise ParseError(str(exc), "channel") from None

    protocol = None
    if "protocol.kind" in merged:
        try:
            protocol = ProtocolSpec(
                merged["protocol.kind"],
                _coerce("size", merged.get("protocol.size", 1), int),
                merged.get("protocol.terminal"),
                merged.get("protocol.basis", "X"),
            )
        except MalformedSpec as exc:
            raise ParseError(str(exc), "protocol") from None

    if values.get("format") not in (None, "csv", "json"):
        raise ParseError(f"unknown format {values['format']!r}", "format")
    if values["method"] not in ("analytic", "simulate"):
        raise ParseError(f"unknown method {values['method']!r}", "method")
    values.pop("command")
    return ExperimentConfig(command=command, channel=channel, protocol=protocol, **values)


def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def _json_value(value) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return _fmt_float(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps_json(value) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json_value(value) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt_float(value)
    return str(value)


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def emit(rows: Iterable[dict], fmt: str, path: str | None, columns: Sequence[str] | None = None) -> None:
    """Write homogeneous rows as CSV (header first) or as a JSON array of records."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in columns])
        _write(buf.getvalue(), path)
    elif fmt == "json":
        _write(dumps_json([{c: row[c] for c in columns} for row in rows]), path)
    else:
        raise ParseError(f"unknown format {fmt!r}", "format")


def _emit_record(record: dict, config: ExperimentConfig) -> None:
    if config.timestamp:
        record = dict(record, timestamp=datetime.now(timezone.utc).isoformat())
    _write(dumps_json(record), config.out)


def _run_validate(config: ExperimentConfig) -> int:
    M = make_channel(config.channel)
    report = is_cptp(M, config.tol)
    record = {"channel": config.channel.to_dict(), **report.to_dict()}
    record["phase_covariant"] = is_phase_covariant(M, config.tol)
    record["ptm"] = M.to_dict()
    if config.output_format == "csv":
        emit([{"cptp": report.cptp, "min_eigenvalue": report.min_eigenvalue, "tp_residual": report.tp_residual}], "csv", config.out)
    else:
        _emit_record(record, config)
    return EXIT_OK if report.cptp else EXIT_VALIDATION


def _protocol_rows(config: ExperimentConfig, phis) -> list[dict]:
    fn = simulate_expectation if config.method == "simulate" else analytic_expectation
    return [outcome_row(config.protocol, config.channel, phi, fn(config.protocol, config.channel, phi)) for phi in phis]


def _run_estimate(config: ExperimentConfig) -> int:
    est = estimate_offset(
        config.k,
        config.nu,
        config.protocol.kind,
        config.channel,
        config.true_T,
        config.omega,
        ShotSampler(config.seed),
    )
    if config.output_format == "csv":
        emit(est.bit_rows(), "csv", config.out, BIT_COLUMNS)
    else:
        _emit_record({"true_T": config.true_T, **est.to_dict()}, config)
    return EXIT_OK


def _run_empirical(config: ExperimentConfig) -> int:
    spec = config.protocol
    result = empirical_uncertainty(
        spec.kind, spec.size, config.channel, config.phi, config.nu, config.trials, ShotSampler(config.seed)
    )
    basis = choose_quadrature(spec, config.channel, config.phi)
    nominal = nominal_uncertainty(spec.with_basis(basis), config.channel, config.phi) / math.sqrt(config.nu)
    ch = config.channel
    row = {
        "kind": spec.kind.value, "size": spec.size, "t": ch.t, "s": ch.s, "lambda": ch.lam,
        "alpha": ch.alpha, "phi": config.phi, "nu": config.nu, "trials": config.trials,
        "seed": config.seed, "quadrature": basis, "mean_phi_hat": result.mean_phi_hat,
        "std_phi_hat": result.std_phi_hat, "nominal_std": nominal,
    }
    emit([row], config.output_format, config.out, EMPIRICAL_COLUMNS)
    return EXIT_OK


def run(config: ExperimentConfig) -> int:
    if config.command == "validate-channel":
        return _run_validate(config)
    if config.command == "run-protocol":
        emit(_protocol_rows(config, [config.phi]), config.output_format, config.out, OUTCOME_COLUMNS)
        return EXIT_OK
    if config.command == "sweep":
        phis = [2 * math.pi * i / config.points for i in range(config.points)]
        emit(_protocol_rows(config, phis), config.output_format, config.out, OUTCOME_COLUMNS)
        return EXIT_OK
    if config.command == "estimate":
        return _run_estimate(config)
    return _run_empirical(config)


def _error_record(exc: BaseException, command: str | None) -> str:
    record = {"error": type(exc).__name__, "message": str(exc), "command": command}
    key = getattr(exc, "key", None)
    if key is not None:
        record["key"] = key
    if isinstance(exc, MissingField):
        record["fields"] = exc.fields
    return json.dumps(record)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except (ParseError, MissingField) as exc:
        print(_error_record(exc, None), file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(config)
    except NotCptp as exc:
        print(_error_record(exc, config.command), file=sys.stderr)
        return EXIT_VALIDATION
    except (ClocksyncError, OSError, ArithmeticError) as exc:
        print(_error_record(exc, config.command), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
