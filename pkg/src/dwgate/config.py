"""Flat INI run configuration validated against the shipped schema."""

import configparser
from dataclasses import dataclass
from importlib import resources
import math
import re

from .errors import ConfigurationError

SCHEMA_FILE = "config_schema.ini"


@dataclass(frozen=True)
class KeySpec:
    section: str
    key: str
    type: str
    default: object
    description: str
    choices: tuple = ()

    def parse(self, raw, where):
        raw = raw.strip()
        t = self.type
        try:
            if t == "float":
                v = float(raw)
                if not math.isfinite(v):
                    raise ValueError("not finite")
                return v
            if t == "float-or-auto":
                if raw.lower() == "auto":
                    return None
                v = float(raw)
                if not math.isfinite(v):
                    raise ValueError("not finite")
                return v
            if t == "int":
                return int(raw)
            if t == "bool":
                low = raw.lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError("expected true/false")
            if t.startswith("choice"):
                if raw not in self.choices:
                    raise ValueError(f"expected one of {'|'.join(self.choices)}")
                return raw
            return raw  # str, path
        except ValueError as exc:
            raise ConfigurationError(f"{where}: [{self.section}] {self.key} = {raw!r}: {exc}") from None

    def render(self, v):
        if v is None:
            return "auto"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)


def _read_schema_text():
    return resources.files("dwgate").joinpath("data", SCHEMA_FILE).read_text()


def load_schema(text=None):
    """{section: {key: KeySpec}} in file order."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    cp.optionxform = str
    cp.read_string(text if text is not None else _read_schema_text())
    schema = {}
    for section in cp.sections():
        schema[section] = {}
        for key, entry in cp.items(section):
            parts = [s.strip() for s in entry.split(";", 2)]
            if len(parts) != 3:
                raise ConfigurationError(f"schema entry [{section}] {key} malformed")
            typ, default, desc = parts
            choices = ()
            m = re.fullmatch(r"choice\((.*)\)", typ)
            if m:
                choices = tuple(m.group(1).split("|"))
            spec = KeySpec(section, key, typ, None, desc, choices)
            value = spec.parse(default, "schema") if default or typ in ("str", "path") else None
            schema[section][key] = KeySpec(section, key, typ, value, desc, choices)
    return schema


def _line_numbers(text):
    """{(section, key): line number} for diagnostics."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        key = re.split(r"[=:]", s, 1)[0].strip()
        out[(section, key)] = n
    return out


class RunConfig:
    """Resolved configuration: every schema key with a typed value."""

    def __init__(self, values, schema, source="<defaults>"):
        self.values = values
        self.schema = schema
        self.source = source

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    def to_dict(self):
        return {s: dict(kv) for s, kv in self.values.items()}

    def to_ini(self):
        lines = []
        for section, keys in self.schema.items():
            lines.append(f"[{section}]")
            for key, spec in keys.items():
                lines.append(f"{key} = {spec.render(self.values[section][key])}")
            lines.append("")
        return "\n".join(lines)

    def comment_block(self, prefix="# "):
        return "".join(f"{prefix}{line}\n" if line else f"{prefix.rstrip()}\n"
                       for line in ["resolved config:"] + self.to_ini().splitlines())


def parse_config(text, source="<string>", schema=None, overrides=None):
    """Parse INI ``text``; unknown sections or keys raise ``ConfigurationError`` with line numbers.

    ``overrides`` maps (section, key) to raw string values applied last.
    """
    schema = schema or load_schema()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    lines = _line_numbers(text)
    values = {s: {k: spec.default for k, spec in keys.items()} for s, keys in schema.items()}
    for section in cp.sections():
        if section not in schema:
            ln = lines.get((section, None), "?")
            raise ConfigurationError(f"{source}:{ln}: unknown section [{section}]; "
                                     f"known: {', '.join(schema)}")
        for key, raw in cp.items(section):
            ln = lines.get((section, key), "?")
            if key not in schema[section]:
                raise ConfigurationError(f"{source}:{ln}: unknown key {key!r} in [{section}]; "
                                         f"known: {', '.join(schema[section])}")
            values[section][key] = schema[section][key].parse(raw, f"{source}:{ln}")
    for (section, key), raw in (overrides or {}).items():
        if section not in schema or key not in schema[section]:
            raise ConfigurationError(f"override: unknown key [{section}] {key}")
        values[section][key] = schema[section][key].parse(str(raw), "override")
    cfg = RunConfig(values, schema, source)
    validate(cfg)
    return cfg


def load_config(path=None, overrides=None):
    if path is None:
        return parse_config("", "<defaults>", overrides=overrides)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), overrides=overrides)


def validate(cfg: RunConfig):
    """Cross-key checks that the per-key types cannot express."""
    g = cfg["grid"]
    for key in ("n_1d", "n_spectrum", "n_gate"):
        n = g[key]
        if n < 32 or n & (n - 1):
            raise ConfigurationError(f"[grid] {key} = {n}: must be a power of two >= 32")
    s = cfg["schedule"]
    if s["ramp_time_ms"] < 0 or s["hold_time_ms"] < 0:
        raise ConfigurationError("[schedule] times must be non-negative")
    if cfg["propagation"]["dt_tau"] is not None and cfg["propagation"]["dt_tau"] <= 0:
        raise ConfigurationError("[propagation] dt_tau must be positive")
    for sec in ("sp_levels", "spectrum"):
        if cfg[sec]["n_samples"] < 1:
            raise ConfigurationError(f"[{sec}] n_samples must be >= 1")
    if cfg["spectrum"]["n_levels"] > 30:
        raise ConfigurationError("[spectrum] n_levels must be <= 30")
    i = cfg["interaction"]
    explicit = [i["sigma1_x"], i["sigma2_x"], i["weight1"]]
    if i["kind"] == "gaussian" and (i["sigma2_x"] is not None or i["weight1"] is not None):
        raise ConfigurationError("[interaction] gaussian takes sigma1_x only")
    if i["kind"] == "double_gaussian" and any(v is not None for v in explicit) \
            and any(v is None for v in explicit):
        raise ConfigurationError("[interaction] double_gaussian needs sigma1_x, sigma2_x and weight1 together")
    sw = cfg["sweep"]
    if sw["axis1"] == sw["axis2"]:
        raise ConfigurationError("[sweep] axis1 and axis2 must differ")
    for a in ("axis1", "axis2"):
        if sw[f"{a}_n"] < 1:
            raise ConfigurationError(f"[sweep] {a}_n must be >= 1")
