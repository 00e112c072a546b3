"""Sectioned key=value run configuration.

    # comment
    [params]
    d = 200
    detuning_mhz = 160
    omega_mhz = 2.4

    [grid]
    dt = 0.01

    [scenario]
    preset = sl
    duration = 5
    phi = pi

Numbers may be written as simple arithmetic with ``pi`` (``pi/2``,
``-2*pi``).  Every error names the offending line.  ``[stage NAME]``
sections define a custom timeline in the order they appear.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

TIERS = ("ideal", "adiabatic", "three_level")
DISPERSIONS = ("full", "common", "none")
PRESETS = ("sl", "fig3", "custom")
INITIAL = ("zero", "dual_gaussian", "uniform")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# ---------------------------------------------------------------- value parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    text = text.strip()
    # "2pi" and "0.5pi" read as products
    for i in range(len(text) - 1, 0, -1):
        if text[i:].startswith("pi") and (text[i - 1].isdigit() or text[i - 1] == "."):
            text = text[:i] + "*" + text[i:]
    try:
        value = _eval(ast.parse(text, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ValueError(f"cannot parse number {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"number {text!r} is not finite")
    return value


def _to_float(raw):
    return parse_number(raw)


def _to_int(raw):
    value = parse_number(raw)
    if value != int(value):
        raise ValueError(f"expected an integer, got {raw!r}")
    return int(value)


def _to_bool(raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _to_pair(raw):
    parts = [p for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {raw!r}")
    return tuple(parse_number(p) for p in parts)


def _to_ramp(raw):
    parts = raw.split(",")
    if len(parts) == 1:
        v = parse_number(parts[0])
        return (v, v)
    if len(parts) == 2:
        return tuple(parse_number(p) for p in parts)
    raise ValueError(f"expected a value or 'start, end', got {raw!r}")


def _to_list(raw):
    return tuple(parse_number(p) for p in raw.split(",") if p.strip())


def _choice(options):
    def conv(raw):
        value = raw.strip()
        if value not in options:
            raise ValueError(f"{value!r} is not one of {', '.join(options)}")
        return value
    return conv


def _to_str(raw):
    return raw.strip()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


# key -> (converter, default); default None means optional without default,
# REQUIRED means the key must be present
REQUIRED = object()

SCHEMA = {
    "params": {
        "d": (_to_float, REQUIRED), "gamma_mhz": (_to_float, 3.0), "gamma0_hz": (_to_float, 0.0),
        "detuning_mhz": (_to_float, None), "delta_plus_mhz": (_to_float, None),
        "delta_minus_mhz": (_to_float, None), "two_photon_mhz": (_to_float, 0.0),
        "eta_mhz": (_to_float, None), "omega_mhz": (_to_float, None),
        "omega_plus_mhz": (_to_float, None), "omega_minus_mhz": (_to_float, None),
    },
    "grid": {
        "n_points": (_to_int, 512), "dt": (_to_float, 0.01), "sample_stride": (_to_int, 10),
    },
    "run": {
        "tier": (_choice(TIERS), "adiabatic"), "dispersion": (_choice(DISPERSIONS), "full"),
        "decay": (_to_bool, True),
    },
    "scenario": {
        "preset": (_choice(PRESETS), REQUIRED), "phi": (_to_float, 0.0),
        "initial": (_choice(INITIAL), None), "centers": (_to_pair, None),
        "width": (_to_float, None), "amplitude": (_to_float, None),
        "duration": (_to_float, None), "backward": (_to_bool, None),
        "t_sl": (_to_float, None), "t_recall": (_to_float, None),
        "calibrate": (_to_bool, None),
    },
    "pulse": {
        "amplitude": (_to_float, 1.0), "tau": (_to_float, REQUIRED),
        "center_time": (_to_float, REQUIRED), "omega_plus_sb_mhz": (_to_float, 0.0),
        "omega_minus_sb_mhz": (_to_float, None), "relative_phase": (_to_float, 0.0),
    },
    "stage": {
        "duration": (_to_float, REQUIRED), "omega_plus_mhz": (_to_ramp, (0.0, 0.0)),
        "omega_minus_mhz": (_to_ramp, (0.0, 0.0)), "eta_active": (_to_int, 0),
        "input": (_choice(("none", "forward", "backward")), "none"),
    },
    "sweep": {
        "parameter": (_to_str, REQUIRED), "values": (_to_list, REQUIRED), "jobs": (_to_int, 1),
    },
}

# scenario keys each preset accepts, with their defaults
PRESET_KEYS = {
    "sl": {"phi": 0.0, "duration": REQUIRED, "initial": "dual_gaussian", "centers": (0.3, 0.7),
           "width": 0.05, "amplitude": 1.0},
    "fig3": {"phi": 0.0, "backward": True, "t_sl": 40.0, "t_recall": 50.0, "calibrate": True},
    "custom": {"phi": 0.0, "initial": "zero", "centers": (0.3, 0.7), "width": 0.05,
               "amplitude": 1.0},
}

SECTION_ORDER = ("params", "grid", "run", "scenario", "pulse", "stage", "sweep")


@dataclass
class RunConfig:
    params: dict
    grid: dict
    run: dict
    scenario: dict
    pulse: dict | None = None
    stages: list = field(default_factory=list)
    sweep: dict | None = None

    @property
    def tier(self) -> str:
        return self.run["tier"]

    def to_text(self) -> str:
        """Resolved configuration in the input format; parses back to an equal config."""
        out = []
        for name in ("params", "grid", "run", "scenario", "pulse"):
            body = getattr(self, name)
            if body is None:
                continue
            out.append(f"[{name}]")
            out += [f"{k} = {_fmt(v)}" for k, v in body.items()]
            out.append("")
        for stage_name, body in self.stages:
            out.append(f"[stage {stage_name}]")
            out += [f"{k} = {_fmt(v)}" for k, v in body.items()]
            out.append("")
        if self.sweep is not None:
            out.append("[sweep]")
            out += [f"{k} = {_fmt(v)}" for k, v in self.sweep.items()]
            out.append("")
        return "\n".join(out)

    def with_value(self, dotted: str, value) -> "RunConfig":
        """Copy with one ``section.key`` replaced (used by sweeps)."""
        section, _, key = dotted.partition(".")
        if section not in ("params", "grid", "run", "scenario", "pulse") or not key:
            raise ConfigError(f"cannot sweep {dotted!r}: use section.key with a numeric key")
        body = getattr(self, section)
        if body is None:
            raise ConfigError(f"cannot sweep {dotted!r}: section [{section}] is absent")
        conv = SCHEMA[section].get(key, (None,))[0]
        if conv not in (_to_float, _to_int):
            raise ConfigError(f"cannot sweep {dotted!r}: not a numeric parameter")
        new = dict(body)
        new[key] = conv(repr(float(value)))
        return parse_config(_replace_section(self, section, new).to_text())


def _replace_section(cfg: RunConfig, section: str, body: dict) -> RunConfig:
    values = dict(params=cfg.params, grid=cfg.grid, run=cfg.run, scenario=cfg.scenario,
                  pulse=cfg.pulse, stages=cfg.stages, sweep=cfg.sweep)
    values[section] = body
    return RunConfig(**values)


def _fill(section: str, raw: dict, header_line: int, schema=None) -> dict:
    schema = SCHEMA[section] if schema is None else schema
    out = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            value_text, line = raw[key]
            try:
                out[key] = conv(value_text)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}", line) from None
        elif default is REQUIRED:
            raise ConfigError(f"[{section}] missing required key '{key}'", header_line)
        elif default is not None:
            out[key] = default
    return out


def parse_config(text: str) -> RunConfig:
    sections: list[tuple[str, str | None, int, dict]] = []
    current = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw_line.strip()!r}", lineno)
            head = line[1:-1].split()
            if not head:
                raise ConfigError("empty section header", lineno)
            kind = head[0]
            if kind not in SCHEMA:
                raise ConfigError(f"unknown section [{kind}]; allowed: "
                                  f"{', '.join(SECTION_ORDER)}", lineno)
            if kind == "stage":
                if len(head) != 2:
                    raise ConfigError("stage sections need exactly one name: [stage NAME]", lineno)
                label = head[1]
            else:
                if len(head) != 1:
                    raise ConfigError(f"section [{kind}] takes no name", lineno)
                label = None
            for k, lab, ln, _ in sections:
                if k == kind and lab == label:
                    name = kind if label is None else f"stage {label}"
                    raise ConfigError(f"duplicate section [{name}] (first at line {ln})", lineno)
            current = (kind, label, lineno, {})
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw_line.strip()!r}", lineno)
        if current is None:
            raise ConfigError("key = value outside any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        kind = current[0]
        if key not in SCHEMA[kind]:
            raise ConfigError(f"unknown key '{key}' in [{kind}]; allowed: "
                              f"{', '.join(SCHEMA[kind])}", lineno)
        if key in current[3]:
            raise ConfigError(f"duplicate key '{key}' (first at line {current[3][key][1]})", lineno)
        if value == "":
            raise ConfigError(f"empty value for '{key}'", lineno)
        current[3][key] = (value, lineno)

    found = {(k, lab): (ln, raw) for k, lab, ln, raw in sections}
    for required in ("params", "scenario"):
        if (required, None) not in found:
            raise ConfigError(f"missing required section [{required}]")

    def section(kind):
        if (kind, None) in found:
            ln, raw = found[(kind, None)]
            return ln, raw
        return 0, {}

    ln, raw = section("params")
    params = _fill("params", raw, ln)
    ln, raw = section("grid")
    grid = _fill("grid", raw, ln)
    ln, raw = section("run")
    run = _fill("run", raw, ln)

    ln, raw = section("scenario")
    preset = _fill("scenario", raw, ln, {"preset": SCHEMA["scenario"]["preset"]})["preset"]
    allowed = PRESET_KEYS[preset]
    for key, (_, line) in raw.items():
        if key != "preset" and key not in allowed:
            raise ConfigError(f"[scenario] key '{key}' is not used by preset '{preset}'; "
                              f"allowed: {', '.join(allowed)}", line)
    schema = {"preset": SCHEMA["scenario"]["preset"]}
    schema.update({k: (SCHEMA["scenario"][k][0], d) for k, d in allowed.items()})
    scenario = _fill("scenario", raw, ln, schema)

    pulse = None
    if ("pulse", None) in found:
        ln, raw = found[("pulse", None)]
        pulse = _fill("pulse", raw, ln)

    stages = []
    for kind, label, ln, raw in sections:
        if kind == "stage":
            body = _fill("stage", raw, ln)
            if body["eta_active"] not in (-1, 0, 1):
                raise ConfigError(f"[stage {label}] eta_active must be -1, 0 or 1",
                                  raw["eta_active"][1])
            if body["input"] != "none" and pulse is None:
                raise ConfigError(f"[stage {label}] input = {body['input']} needs a [pulse] section",
                                  raw["input"][1])
            stages.append((label, body))
    if stages and preset != "custom":
        raise ConfigError(f"[stage] sections are only used by preset 'custom', not '{preset}'",
                          next(ln for k, _, ln, _ in sections if k == "stage"))

    sweep = None
    if ("sweep", None) in found:
        ln, raw = found[("sweep", None)]
        sweep = _fill("sweep", raw, ln)
        if not sweep["values"]:
            raise ConfigError("[sweep] values must list at least one number", raw["values"][1])
        if sweep["jobs"] < 1:
            raise ConfigError("[sweep] jobs must be >= 1", raw["jobs"][1])

    return RunConfig(params, grid, run, scenario, pulse, stages, sweep)
