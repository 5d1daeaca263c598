"""Experiment configuration: ``key = value`` lines with ``#`` comments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Any, Callable

from .families import FamilyError, IndexFamily

SCHEMA = 1

COMMANDS = (
    "solve",
    "smallness",
    "horizon",
    "norm",
    "verify-product",
    "verify-embedding",
    "verify-caloric",
    "estimate-constant",
    "kernel-check",
)

#: Commands that iterate or evaluate with an exponent family.
FAMILY_COMMANDS = ("solve", "smallness", "horizon", "verify-caloric", "estimate-constant")

#: Commands that read an initial datum.
DATUM_COMMANDS = ("solve", "smallness", "horizon", "norm")

DATUMS = ("zero", "shear", "taylor-green", "random")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"{message} at line {line}")


def _number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t.endswith("pi"):
        head = t[:-2].strip().rstrip("*").strip()
        return (_number(head) if head else 1.0) * math.pi
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        return float(t)


def _integer(text: str) -> int:
    value = _number(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _number_list(text: str) -> tuple[float, ...]:
    return tuple(_number(x) for x in text.replace(",", " ").split())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_integer(x) for x in text.replace(",", " ").split())


def _auto_number(text: str) -> float | str:
    return "auto" if text.strip().lower() == "auto" else _number(text)


def _text(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    schema: int = SCHEMA
    # grid
    d: int = 3
    n: int = 32
    L: float = 2 * math.pi
    # exponent family
    family: str | None = None
    q: float | None = None
    p: float | None = None
    r: float | None = None
    s: float | None = None
    # solver
    T: float = 1.0
    M: int = 64
    picard_tol: float = 1e-8
    max_iters: int = 50
    panels: int = 1
    gauss_points: int = 4
    homogeneous: bool = True
    initial: str = "heat"
    # datum
    datum: str = "random"
    amplitude: float = 1.0
    shells: tuple[int, ...] = (1, 2, 3, 4)
    input: str | None = None
    # horizon
    delta: float | str = "auto"
    T_max: float = 50.0
    # ensembles
    seed: int = 1
    ensemble_size: int = 10
    refine: bool = True
    # norm command
    norm_kind: str = "sobolev_hom"
    norm_s: float = 0.0
    norm_q: float = 2.0
    norm_p: float = 2.0
    norm_alpha: float = 0.0
    levels: int = 1
    # embedding command
    pair: str = "c"
    p1: float = 2.0
    p2: float = 4.0
    s2: float | None = None
    q2: float | None = None
    # kernel command
    radii: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    kernel_n: int | None = None
    kernel_L: float | None = None
    # output
    output: str | None = None
    dump_fields: bool = False
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def index_family(self) -> IndexFamily:
        if self.family is None:
            raise ConfigError(f"command {self.command!r} needs a family")
        return IndexFamily.build(self.family, self.d, self.q, self.p, self.r, self.s)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "lines":
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


CONVERTERS: dict[str, Callable[[str], Any]] = {
    "command": _text,
    "schema": _integer,
    "d": _integer,
    "n": _integer,
    "L": _number,
    "family": _text,
    "q": _number,
    "p": _number,
    "r": _number,
    "s": _number,
    "T": _number,
    "M": _integer,
    "picard_tol": _number,
    "max_iters": _integer,
    "panels": _integer,
    "gauss_points": _integer,
    "homogeneous": _boolean,
    "initial": _text,
    "datum": _text,
    "amplitude": _number,
    "shells": _int_list,
    "input": _text,
    "delta": _auto_number,
    "T_max": _number,
    "seed": _integer,
    "ensemble_size": _integer,
    "refine": _boolean,
    "norm_kind": _text,
    "norm_s": _number,
    "norm_q": _number,
    "norm_p": _number,
    "norm_alpha": _number,
    "levels": _integer,
    "pair": _text,
    "p1": _number,
    "p2": _number,
    "s2": _number,
    "q2": _number,
    "radii": _number_list,
    "kernel_n": _integer,
    "kernel_L": _number,
    "output": _text,
    "dump_fields": _boolean,
}


def _check(ok: bool, message: str, line: int | None):
    if not ok:
        raise ConfigError(message, line)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document; errors name the offending line."""
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in CONVERTERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno)
        try:
            values[key] = CONVERTERS[key](value)
        except ValueError:
            raise ConfigError(f"malformed value {value!r} for {key!r}", lineno) from None
        lines[key] = lineno
        if key == "command" and values[key] not in COMMANDS:
            raise ConfigError("unknown command", lineno)

    at = lines.get
    _check(values.get("schema", SCHEMA) == SCHEMA, f"unsupported schema (expected {SCHEMA})", at("schema"))
    d = values.get("d", 3)
    _check(2 <= d <= 4, "d out of range (2 to 4)", at("d"))
    n = values.get("n", 32)
    _check(n >= 8 and n & (n - 1) == 0, "n must be a power of two and at least 8", at("n"))
    _check(values.get("L", 1.0) > 0, "L must be positive", at("L"))
    _check(values.get("T", 1.0) > 0, "T must be positive", at("T"))
    _check(values.get("M", 64) >= 1, "M must be at least 1", at("M"))
    _check(values.get("picard_tol", 1.0) > 0, "picard_tol must be positive", at("picard_tol"))
    _check(values.get("max_iters", 1) >= 1, "max_iters must be at least 1", at("max_iters"))
    _check(values.get("panels", 1) >= 1, "panels must be at least 1", at("panels"))
    _check(values.get("gauss_points", 4) >= 2, "gauss_points must be at least 2", at("gauss_points"))
    _check(values.get("ensemble_size", 10) >= 1, "ensemble_size must be positive", at("ensemble_size"))
    _check(values.get("initial", "heat") in ("heat", "zero"), "initial must be heat or zero", at("initial"))
    delta = values.get("delta", "auto")
    _check(delta == "auto" or delta > 0, "delta must be positive or auto", at("delta"))
    if "datum" in values:
        _check(values["datum"] in DATUMS, f"datum must be one of {', '.join(DATUMS)}", at("datum"))
    if "radii" in values:
        radii = values["radii"]
        _check(len(radii) > 0 and all(r > 0 for r in radii) and list(radii) == sorted(radii),
               "radii must be positive and sorted", at("radii"))

    if "family" in values:
        try:
            IndexFamily.build(values["family"], d, values.get("q"), values.get("p"), values.get("r"), values.get("s"))
        except FamilyError as exc:
            raise ConfigError(str(exc), at("family")) from None

    if "command" not in values:
        raise ConfigError("missing command")
    command = values["command"]
    if command in FAMILY_COMMANDS and "family" not in values:
        raise ConfigError(f"command {command!r} needs a family", at("command"))
    if command == "verify-product":
        for key in ("s", "p", "q"):
            _check(key in values, f"verify-product needs {key}", at("command"))
    if command == "verify-embedding":
        _check("pair" in values, "verify-embedding needs pair", at("command"))
    return ExperimentConfig(**values, lines=lines)


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
