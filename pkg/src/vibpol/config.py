"""Strict TOML/JSON run configuration with explicit units on every dimensional field."""
from __future__ import annotations

import difflib
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .core import SystemParams, TIME_CONVENTIONS
from .signals import Pulse
from .units import UnitError, format_quantity, parse_quantity

RUN_KINDS = ("dynamics", "trps", "twodir", "dipoles", "validate")
PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6")


class ConfigError(ValueError):
    """Invalid configuration; ``location`` is (line, column) when known."""

    def __init__(self, message, key=None, location=None):
        self.key = key
        self.location = location
        where = ""
        if location:
            where = f"line {location[0]}, column {location[1]}" + (f" ({key})" if key else "") + ": "
        elif key:
            where = f"{key}: "
        super().__init__(where + message)


@dataclass
class Grid:
    start: float
    stop: float
    num: int

    def values(self):
        return np.linspace(self.start, self.stop, self.num)


@dataclass
class RunConfig:
    run: str
    system: SystemParams
    output_dir: Path
    prefix: str
    block: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)
    source: str | None = None


def _locate(text, path):
    """Best-effort (line, column) of the last key in ``path`` inside TOML ``text``."""
    if text is None:
        return None
    lines = text.splitlines()
    start, header_loc = 0, None
    *tables, key = path
    if tables:
        header = re.compile(r"^\s*\[\s*" + r"\s*\.\s*".join(re.escape(t) for t in tables) + r"\s*\]")
        for i, line in enumerate(lines):
            if header.match(line):
                start, header_loc = i + 1, (i + 1, 1)
                break
    pat = re.compile(r"(?:^|[\s{,])" + re.escape(key) + r"\s*=")
    for i in range(start, len(lines)):
        m = pat.search(lines[i])
        if m:
            col = m.start() + (0 if lines[i][m.start()] == key[0] else 1)
            eq = lines[i].index("=", col)
            value_col = len(lines[i]) - len(lines[i][eq + 1:].lstrip()) + 1
            return i + 1, value_col
    return header_loc


class _Reader:
    """Pops keys from a table, remembering the path for diagnostics."""

    def __init__(self, table, path, text):
        if not isinstance(table, dict):
            raise ConfigError("expected a table", ".".join(path), _locate(text, path) if path else None)
        self.table = dict(table)
        self.path = path
        self.text = text

    def error(self, key, message):
        full = self.path + (key,)
        return ConfigError(message, ".".join(full), _locate(self.text, full))

    def has(self, key):
        return key in self.table

    def raw(self, key, default=...):
        if key not in self.table:
            if default is ...:
                near = difflib.get_close_matches(key, list(self.table), n=1)
                extra = f" (found unknown key '{near[0]}')" if near else ""
                raise self.error(key, f"missing required key '{key}'{extra}")
            return default
        return self.table.pop(key)

    def quantity(self, key, dim, default=...):
        val = self.raw(key, default)
        if val is default and default is not ...:
            return default
        try:
            if isinstance(val, list):
                return [parse_quantity(v, dim) for v in val]
            return parse_quantity(val, dim)
        except UnitError as exc:
            raise self.error(key, str(exc)) from None

    def number(self, key, default=..., kind=float):
        val = self.raw(key, default)
        if val is default and default is not ...:
            return default
        if isinstance(val, str) and val.strip().lower() in ("inf", "infinity"):
            val = math.inf
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise self.error(key, f"expected a number, got {val!r}")
        if kind is int and (not isinstance(val, int)):
            raise self.error(key, f"expected an integer, got {val!r}")
        return kind(val)

    def boolean(self, key, default=...):
        val = self.raw(key, default)
        if not isinstance(val, bool):
            raise self.error(key, f"expected true/false, got {val!r}")
        return val

    def string(self, key, default=..., choices=None):
        val = self.raw(key, default)
        if not isinstance(val, str):
            raise self.error(key, f"expected a string, got {val!r}")
        if choices and val not in choices:
            raise self.error(key, f"'{val}' is not one of {', '.join(choices)}")
        return val

    def sub(self, key, default=...):
        val = self.raw(key, default)
        return _Reader(val, self.path + (key,), self.text)

    def done(self):
        if self.table:
            key = sorted(self.table)[0]
            raise self.error(key, f"unknown key '{key}'")


def _grid(r, key, dim):
    g = r.sub(key)
    out = Grid(g.quantity("start", dim), g.quantity("stop", dim), g.number("num", kind=int))
    g.done()
    if out.num < 1:
        raise r.error(key, "grid needs num >= 1")
    if out.num > 1 and out.stop <= out.start:
        raise r.error(key, "grid stop must exceed start")
    return out


def _grid_dict(g, dim):
    return {"start": format_quantity(g.start, dim), "stop": format_quantity(g.stop, dim), "num": g.num}


def _pulse(r, key):
    p = r.sub(key)
    center = p.quantity("center", "wavenumber")
    sigma = p.quantity("sigma", "wavenumber")
    pol = p.raw("polarization", [0.0, 0.0, 1.0])
    amp = p.number("amplitude", 1.0)
    p.done()
    try:
        pulse = Pulse(center, sigma, tuple(float(x) for x in pol), amp)
    except (ValueError, TypeError) as exc:
        raise r.error(key, str(exc)) from None
    return pulse, {"center": format_quantity(center, "wavenumber"), "sigma": format_quantity(sigma, "wavenumber"),
                   "polarization": list(pulse.polarization), "amplitude": amp}


def _per_mol(val, dim):
    if isinstance(val, list):
        return [format_quantity(x, dim) for x in val]
    return format_quantity(val, dim)


def _system(r):
    s = r.sub("system")
    N = s.number("N", kind=int)
    kw = {"N": N}
    res = {"N": N}
    for key, dim in [("omega", "wavenumber"), ("delta_omega", "wavenumber"), ("g", "wavenumber"),
                     ("v", "wavenumber"), ("gamma", "wavenumber")]:
        kw[key] = s.quantity(key, dim)
        res[key] = _per_mol(kw[key], dim)
    kw["anharmonicity"] = s.quantity("anharmonicity", "wavenumber", 0.0)
    res["anharmonicity"] = _per_mol(kw["anharmonicity"], "wavenumber")
    mu = s.quantity("mu", "dipole", 0.122)
    direction = s.raw("mu_direction", [0.0, 0.0, 1.0])
    res["mu"] = _per_mol(mu, "dipole")
    res["mu_direction"] = direction
    try:
        dirs = np.asarray(direction, dtype=float)
        if dirs.ndim == 1:
            dirs = np.tile(dirs, (N, 1))
        norms = np.linalg.norm(dirs, axis=1)
        if dirs.shape != (N, 3) or np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("mu_direction must be a unit 3-vector or N unit 3-vectors")
        kw["mu"] = np.asarray(mu, dtype=float).reshape(-1, 1) * dirs
    except ValueError as exc:
        raise s.error("mu_direction", str(exc)) from None
    kw["loc_length"] = s.quantity("loc_length", "length", 0.05)
    res["loc_length"] = _per_mol(kw["loc_length"], "length")
    if s.has("positions"):
        kw["positions"] = s.quantity("positions", "length")
        res["positions"] = _per_mol(kw["positions"], "length")
    kw["omega_c"] = s.quantity("omega_c", "wavenumber")
    res["omega_c"] = format_quantity(kw["omega_c"], "wavenumber")
    if s.has("Q") == s.has("cavity_loss"):
        raise s.error("Q", "give exactly one of Q (dimensionless) or cavity_loss (omega_c/Q)")
    if s.has("Q"):
        kw["Q"] = s.number("Q")
    else:
        loss = s.quantity("cavity_loss", "wavenumber")
        kw["Q"] = math.inf if loss == 0 else kw["omega_c"] / loss
    res["Q"] = kw["Q"] if math.isfinite(kw["Q"]) else "inf"
    kw["T"] = s.quantity("T", "temperature")
    res["T"] = format_quantity(kw["T"], "temperature")
    kw["time_convention"] = s.string("time_convention", "angular", tuple(TIME_CONVENTIONS))
    res["time_convention"] = kw["time_convention"]
    s.done()
    for key in ("omega", "delta_omega", "g", "v", "gamma", "anharmonicity", "loc_length", "positions"):
        if isinstance(kw.get(key), list) and len(kw[key]) != N:
            raise s.error(key, f"expected {N} per-molecule values, got {len(kw[key])}")
    try:
        params = SystemParams(**kw)
    except ValueError as exc:
        raise s.error("N", str(exc)) from None
    return params, res


def _times_list(r, key):
    vals = r.quantity(key, "time")
    vals = vals if isinstance(vals, list) else [vals]
    if any(v < 0 for v in vals):
        raise r.error(key, "times must be non-negative")
    return vals


def _parse_block(kind, r, N):
    b = r.sub(kind)
    block, res = {}, {}
    if kind in ("dynamics", "trps"):
        block["initial"] = b.string("initial", "LP")
        block["config"] = b.number("config", 0, kind=int)
        if not 0 <= block["config"] < 2**N:
            raise b.error("config", f"config index must lie in [0, {2**N})")
        res.update(initial=block["initial"], config=block["config"])
    if kind == "dynamics":
        block["times"] = _grid(b, "times", "time")
        res["times"] = _grid_dict(block["times"], "time")
        if b.has("spatial"):
            sp = b.sub("spatial")
            block["spatial_x"] = _grid(sp, "x", "length")
            block["spatial_times"] = _times_list(sp, "times")
            sp.done()
            res["spatial"] = {"x": _grid_dict(block["spatial_x"], "length"),
                              "times": [format_quantity(t, "time") for t in block["spatial_times"]]}
    elif kind == "trps":
        block["tau_pr"] = _times_list(b, "tau_pr")
        block["omega"] = _grid(b, "omega", "wavenumber")
        block["probe"], res["probe"] = _pulse(b, "probe")
        block["lo"], res["lo"] = _pulse(b, "lo")
        block["include_leakage_term"] = b.boolean("include_leakage_term", True)
        block["cavity_width"] = b.boolean("cavity_width", True)
        block["axis_convention"] = b.string("axis_convention", "detuning", ("detuning", "absolute"))
        res.update(tau_pr=[format_quantity(t, "time") for t in block["tau_pr"]],
                   omega=_grid_dict(block["omega"], "wavenumber"),
                   include_leakage_term=block["include_leakage_term"], cavity_width=block["cavity_width"],
                   axis_convention=block["axis_convention"])
    elif kind == "twodir":
        block["initial"] = b.string("initial", "pure-ground", ("pure-ground", "thermal"))
        block["T2"] = _times_list(b, "T2")
        block["omega1"] = _grid(b, "omega1", "wavenumber")
        block["omega3"] = _grid(b, "omega3", "wavenumber")
        pulses = b.sub("pulses")
        block["pulses"], res["pulses"] = {}, {}
        for name in ("k1", "k2", "k3", "lo"):
            block["pulses"][name], res["pulses"][name] = _pulse(pulses, name)
        pulses.done()
        block["subtract_gsb"] = b.boolean("subtract_gsb", True)
        block["components"] = b.boolean("components", False)
        block["cavity_width"] = b.boolean("cavity_width", True)
        block["axis_convention"] = b.string("axis_convention", "detuning", ("detuning", "absolute"))
        res.update(initial=block["initial"], T2=[format_quantity(t, "time") for t in block["T2"]],
                   omega1=_grid_dict(block["omega1"], "wavenumber"),
                   omega3=_grid_dict(block["omega3"], "wavenumber"),
                   subtract_gsb=block["subtract_gsb"], components=block["components"],
                   cavity_width=block["cavity_width"], axis_convention=block["axis_convention"])
    elif kind == "dipoles":
        block["N"] = b.number("N", kind=int)
        block["g_sqrtN"] = b.quantity("g_sqrtN", "wavenumber")
        counts = b.raw("detuned_count")
        counts = counts if isinstance(counts, list) else [counts]
        if not all(isinstance(c, int) and not isinstance(c, bool) for c in counts):
            raise b.error("detuned_count", "expected an integer or list of integers")
        if any(not 0 <= c <= block["N"] for c in counts):
            raise b.error("detuned_count", f"detuned_count must lie in [0, {block['N']}]")
        block["detuned_count"] = counts
        block["delta_omega"] = b.quantity("delta_omega", "wavenumber")
        block["broadening"] = b.quantity("broadening", "wavenumber", None)
        block["shape"] = b.string("shape", "lorentzian", ("lorentzian", "gaussian"))
        block["omega"] = _grid(b, "omega", "wavenumber") if b.has("omega") else None
        block["axis_convention"] = b.string("axis_convention", "detuning", ("detuning", "absolute"))
        res.update(N=block["N"], g_sqrtN=format_quantity(block["g_sqrtN"], "wavenumber"),
                   detuned_count=counts, delta_omega=format_quantity(block["delta_omega"], "wavenumber"),
                   shape=block["shape"], axis_convention=block["axis_convention"])
        if block["broadening"] is not None:
            res["broadening"] = format_quantity(block["broadening"], "wavenumber")
        if block["omega"] is not None:
            res["omega"] = _grid_dict(block["omega"], "wavenumber")
    b.done()
    return block, res


def parse_config(data, text=None, base_dir=Path(".")):
    """Build a :class:`RunConfig` from an already-decoded mapping."""
    if isinstance(data, dict) and "resolved_config" in data:
        data = data["resolved_config"]
    r = _Reader(data, (), text)
    run = r.string("run", choices=RUN_KINDS)
    params, res_sys = _system(r)
    out = r.sub("output", {})
    out_dir = out.string("dir", "out")
    prefix = out.string("prefix", run)
    out.done()
    block, res_block = ({}, {})
    if run != "validate":
        block, res_block = _parse_block(run, r, params.N)
    r.done()
    resolved = {"run": run, "system": res_sys, "output": {"dir": out_dir, "prefix": prefix}}
    if run != "validate":
        resolved[run] = res_block
    out_path = Path(out_dir)
    if not out_path.is_absolute():
        out_path = base_dir / out_path
    return RunConfig(run, params, out_path, prefix, block, resolved, text)


def load_config(path):
    """Read a TOML config, a JSON config or a JSON sidecar, or a bundled preset name."""
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            text = resources.files("vibpol.presets").joinpath(f"{path}.toml").read_text()
            return parse_config(_loads_toml(text), text, Path("."))
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text()
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, location=(exc.lineno, exc.colno)) from None
        return parse_config(data, None, p.parent)
    return parse_config(_loads_toml(text), text, p.parent)


def _loads_toml(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        loc = (int(m.group(1)), int(m.group(2))) if m else None
        raise ConfigError(str(exc).split(" (at")[0], location=loc) from None
