"""Configuration files: flat key = value sections, units converted here.

Sections: [string], [sim], [source], [experiment].  Values may carry a
unit suffix where customary (r = 0.29 mm, t0 = 1 ms); the radius must
carry one, which guards the classic mm/m slip.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import MissingKey, ParseError, UnitError, UnknownKey
from .params import (AUTO, InitialCondition, SimConfig, SourceParams,
                     StringParams, validate_and_derive)

_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3}

_STRING_KEYS = {"rho", "E", "T0", "L", "r", "sigma0_u", "sigma0_v", "sigma1_u"}
_SIM_KEYS = {"f_s0", "oversampling", "h_safety", "theta_u", "theta_v",
             "stiffness_on", "losses_on", "T_end", "x_o",
             "ic_u_type", "ic_u_amp", "ic_u_width",
             "ic_v_type", "ic_v_amp", "ic_v_width",
             "n_modes_rule", "lambda_variant", "snapshot_times"}
_SOURCE_KEYS = {"F_s", "t0", "t_s", "zeta", "mu", "x_f"}
_EXPERIMENT_KEYS = {"name"}

EXPERIMENT_NAMES = ("snapshots", "waveforms", "dispersion",
                    "longitudinal-spectra", "struck-damped",
                    "duffing-convergence", "theta-convergence",
                    "explicit-vs-implicit")


@dataclass
class ExperimentSpec:
    """Parsed and unit-resolved description of one experiment."""

    name: str
    params: StringParams
    sim: SimConfig
    source: SourceParams | None


def _parse_quantity(raw: str, key: str, line: int, units: dict,
                    default_unit: str | None) -> float:
    parts = raw.split()
    if len(parts) == 1:
        if default_unit is None:
            raise UnitError(
                f"line {line}: {key} must carry a unit ({'/'.join(units)})")
        scale = units[default_unit]
        num = parts[0]
    elif len(parts) == 2:
        if parts[1] not in units:
            raise UnitError(f"line {line}: unsupported unit {parts[1]!r} on {key}")
        scale = units[parts[1]]
        num = parts[0]
    else:
        raise ParseError(f"line {line}: cannot parse value {raw!r} for {key}")
    try:
        return float(num) * scale
    except ValueError as exc:
        raise ParseError(f"line {line}: bad number {num!r} for {key}") from exc


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"line {line}: bad number {raw!r} for {key}") from exc


def _parse_bool(raw: str, key: str, line: int) -> bool:
    low = raw.strip().lower()
    if low in ("true", "on", "yes", "1"):
        return True
    if low in ("false", "off", "no", "0"):
        return False
    raise ParseError(f"line {line}: bad boolean {raw!r} for {key}")


def _read_sections(text: str):
    """Split INI-style text into {section: {key: (value, line)}}."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, got {rawline!r}")
        if current is None:
            raise ParseError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        sections[current][key.strip()] = (value.strip(), lineno)
    return sections


def _check_keys(section: str, entries: dict, allowed: set):
    for key, (_, lineno) in entries.items():
        if key not in allowed:
            raise UnknownKey(f"line {lineno}: unknown key {key!r} in [{section}]")


def _require(entries: dict, key: str, section: str) -> tuple[str, int]:
    if key not in entries:
        raise MissingKey(f"missing key {key!r} in [{section}]")
    return entries[key]


def _theta_value(raw: str, key: str, line: int):
    if raw.strip().lower() == AUTO:
        return AUTO
    return _parse_float(raw, key, line)


def _ic_from(entries: dict, prefix: str) -> InitialCondition:
    kind = entries.get(prefix + "_type", ("zero", 0))[0].strip().lower()
    amp = 0.0
    if prefix + "_amp" in entries:
        raw, line = entries[prefix + "_amp"]
        amp = _parse_quantity(raw, prefix + "_amp", line, _LENGTH_UNITS, "m")
    width = 0.1
    if prefix + "_width" in entries:
        raw, line = entries[prefix + "_width"]
        width = _parse_float(raw, prefix + "_width", line)
    return InitialCondition(kind=kind, amplitude=amp, width=width)


def parse_config_text(text: str,
                      overrides: dict[str, str] | None = None) -> ExperimentSpec:
    """Parse configuration text into an :class:`ExperimentSpec`.

    ``overrides`` maps "section.key" to raw replacement strings and is
    applied before any validation, so command-line overrides behave
    exactly like edited files.
    """
    sections = _read_sections(text)
    for full_key, value in (overrides or {}).items():
        if "." not in full_key:
            raise UnknownKey(f"override {full_key!r} must look like section.key")
        sec, key = full_key.split(".", 1)
        sections.setdefault(sec, {})[key] = (str(value), 0)

    known_sections = {"string", "sim", "source", "experiment"}
    for sec in sections:
        if sec not in known_sections:
            raise UnknownKey(f"unknown section [{sec}]")

    strings = sections.get("string", {})
    _check_keys("string", strings, _STRING_KEYS)
    for key in ("rho", "E", "T0", "L"):
        _require(strings, key, "string")
    _require(strings, "r", "string")

    def sval(key, default=None):
        if key in strings:
            raw, line = strings[key]
            return _parse_float(raw, key, line)
        if default is None:
            raise MissingKey(f"missing key {key!r} in [string]")
        return default

    raw_r, line_r = strings["r"]
    params = validate_and_derive(
        rho=sval("rho"), E=sval("E"), T0=sval("T0"),
        L=_parse_quantity(strings["L"][0], "L", strings["L"][1],
                          _LENGTH_UNITS, "m"),
        r=_parse_quantity(raw_r, "r", line_r, _LENGTH_UNITS, None),
        sigma0_u=sval("sigma0_u", 0.0), sigma0_v=sval("sigma0_v", 0.0),
        sigma1_u=sval("sigma1_u", 0.0))

    sim_entries = sections.get("sim", {})
    _check_keys("sim", sim_entries, _SIM_KEYS)

    def fval(key, default):
        if key in sim_entries:
            raw, line = sim_entries[key]
            return _parse_float(raw, key, line)
        return default

    def tval(key, default):
        if key in sim_entries:
            raw, line = sim_entries[key]
            return _parse_quantity(raw, key, line, _TIME_UNITS, "s")
        return default

    snapshot_times: tuple[float, ...] = ()
    if "snapshot_times" in sim_entries:
        raw, line = sim_entries["snapshot_times"]
        try:
            snapshot_times = tuple(float(tok) for tok in raw.split(","))
        except ValueError as exc:
            raise ParseError(f"line {line}: bad snapshot_times {raw!r}") from exc

    def theta(key):
        if key not in sim_entries:
            return 1.0
        raw, line = sim_entries[key]
        return _theta_value(raw, key, line)

    def flag(key, default):
        if key not in sim_entries:
            return default
        raw, line = sim_entries[key]
        return _parse_bool(raw, key, line)

    sim = SimConfig(
        base_rate=fval("f_s0", 48e3),
        oversampling=int(fval("oversampling", 1)),
        h_safety=fval("h_safety", 1.05),
        theta_u=theta("theta_u"),
        theta_v=theta("theta_v"),
        stiffness_on=flag("stiffness_on", True),
        losses_on=flag("losses_on", True),
        duration=tval("T_end", 1.0),
        tap=_parse_quantity(sim_entries["x_o"][0], "x_o", sim_entries["x_o"][1],
                            _LENGTH_UNITS, "m") if "x_o" in sim_entries else 0.32,
        ic_u=_ic_from(sim_entries, "ic_u"),
        ic_v=_ic_from(sim_entries, "ic_v"),
        n_modes_rule=sim_entries.get("n_modes_rule", ("cfl", 0))[0].strip(),
        lambda_variant=sim_entries.get("lambda_variant", ("discrete", 0))[0].strip(),
        snapshot_times=snapshot_times)

    source = None
    src_entries = sections.get("source", {})
    if src_entries:
        _check_keys("source", src_entries, _SOURCE_KEYS)
        if "zeta" in src_entries and "mu" in src_entries:
            raise ParseError("give either zeta or its alias mu, not both")
        kind_entry = src_entries.get("zeta", src_entries.get("mu"))
        kind = 2
        if kind_entry is not None:
            kind = int(_parse_float(kind_entry[0], "zeta", kind_entry[1]))
        fs_raw, fs_line = _require(src_entries, "F_s", "source")
        t0_raw, t0_line = _require(src_entries, "t0", "source")
        ts_raw, ts_line = _require(src_entries, "t_s", "source")
        xf_raw, xf_line = _require(src_entries, "x_f", "source")
        source = SourceParams(
            peak_force=_parse_float(fs_raw, "F_s", fs_line),
            onset=_parse_quantity(t0_raw, "t0", t0_line, _TIME_UNITS, "s"),
            duration=_parse_quantity(ts_raw, "t_s", ts_line, _TIME_UNITS, "s"),
            kind=kind,
            position=_parse_quantity(xf_raw, "x_f", xf_line, _LENGTH_UNITS, "m"))
        source.validate_against(params)

    exp_entries = sections.get("experiment", {})
    _check_keys("experiment", exp_entries, _EXPERIMENT_KEYS)
    name = exp_entries.get("name", ("waveforms", 0))[0].strip()
    if name not in EXPERIMENT_NAMES:
        raise ParseError(f"unknown experiment {name!r}; "
                         f"choose one of {', '.join(EXPERIMENT_NAMES)}")
    return ExperimentSpec(name=name, params=params, sim=sim, source=source)


def parse_config(path: str, overrides: dict[str, str] | None = None) -> ExperimentSpec:
    """Read and parse a configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), overrides)
