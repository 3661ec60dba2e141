"""Declarative run configuration: INI-style text with flat sections of
key = value pairs, validated against a typed schema with per-model presets.

A configuration round-trips bit-identically through serialize/parse, and
every value records whether it came from the user, a model preset, or the
global default (provenance is included in run manifests).
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from typing import Any

from .cells import MODEL_CLASSES, get_model
from .errors import ConfigError
from .grid import Grid1D, Stimulus1D
from .bench import ProbeSpec
from .steppers import Problem, SCHEMES


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (bit-stable decimal form)."""
    return f"{float(x):.17g}"


# presets keyed by model id: experiment geometry, stimulus, probes.
# The MS model runs on its nondimensional domain; its stimulus and diffusion
# scale are configuration items (the nondimensionalization of the stimulus is
# not uniquely determined by the physical-units setup).
MODEL_PRESETS: dict[str, dict[str, float]] = {
    "br": {
        "grid.length": 100.0, "grid.intervals": 1600,
        "diffusion.sigma": 0.024085,
        "stimulus.amplitude": 50.0, "stimulus.x_start": 0.0, "stimulus.x_end": 1.0,
        "stimulus.t_start": 0.5, "stimulus.t_end": 2.5,
        "run.final_time": 400.0, "run.dt": 0.01,
        "probe.threshold": -30.0, "probe.x1": 20.0, "probe.x2": 50.0,
    },
    "ms": {
        "grid.length": 800.0, "grid.intervals": 800,
        "diffusion.sigma": 3.45,
        "stimulus.amplitude": 0.5, "stimulus.x_start": 0.0, "stimulus.x_end": 8.0,
        "stimulus.t_start": 0.5, "stimulus.t_end": 2.5,
        "run.final_time": 350.0, "run.dt": 0.1,
        "probe.threshold": 0.5, "probe.x1": 50.0, "probe.x2": 80.0,
    },
    "tnnp": {
        "grid.length": 5.0, "grid.intervals": 160,
        "diffusion.sigma": 0.024085,
        "stimulus.amplitude": 50.0, "stimulus.x_start": 0.0, "stimulus.x_end": 1.0,
        "stimulus.t_start": 0.5, "stimulus.t_end": 2.5,
        "run.final_time": 12.0, "run.dt": 0.001,
        "probe.threshold": -30.0, "probe.x1": 1.0, "probe.x2": 2.5,
    },
}

_SCHEME_SET = set(SCHEMES)


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    s = s.strip()
    if not s:
        return ()
    return tuple(float(tok) for tok in s.replace(",", " ").split())


def _parse_str_list(s: str) -> tuple[str, ...]:
    s = s.strip()
    if not s:
        return ()
    return tuple(tok.strip() for tok in s.split(",") if tok.strip())


# (type tag, global default); None default means "from model preset"
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "model": {"id": ("str", "br")},
    "grid": {"length": ("float", None), "intervals": ("int", None)},
    "diffusion": {
        "sigma": ("float", None),
        "anisotropy_ratio": ("float", 0.0),
        "sigma_i": ("float", 0.0),
        "chi": ("float", 0.0),
    },
    "stimulus": {
        "amplitude": ("float", None), "x_start": ("float", None),
        "x_end": ("float", None), "t_start": ("float", None),
        "t_end": ("float", None),
    },
    "run": {
        "scheme": ("str", "sbdf2"), "dt": ("float", None),
        "final_time": ("float", None),
        "snapshot_times": ("float_list", ()),
        "sample_stride": ("float", 0.0),
        "output_dir": ("str", "out"),
        "deterministic": ("bool", True),
    },
    "probe": {"threshold": ("float", None), "x1": ("float", None), "x2": ("float", None)},
    "stability": {
        "scan_scheme": ("str", "sbdf2"), "scan_dt": ("float", 0.0),
        "scan_final_time": ("float", 0.0),
        "sample_stride": ("float", 0.5), "sweep_omega": ("bool", False),
    },
    "critical_dt": {
        "schemes": ("str_list", ("fe", "fbe", "sbdf2", "cn_rk2", "cn_rk4", "rl_cnab", "dc3")),
        "sig_figs": ("int", 3),
        "bracket_lo_factor": ("float", 0.5),
        "bracket_hi_factor": ("float", 2.5),
        "reference_speed_dt": ("float", 0.0),
        "final_time": ("float", 0.0),
    },
    "converge": {
        "schemes": ("str_list", ("sbdf2",)),
        "dts": ("float_list", ()),
        "reference_scheme": ("str", "sbdf2"),
        "reference_dt": ("float", 0.0),
        "min_ref_ratio": ("float", 64.0),
        "cache": ("bool", True),
    },
    "bench": {
        "schemes": ("str_list", ("sbdf2", "cn_rk2", "cn_rk4")),
        "target_rel_l2": ("float", 0.005),
        "repetitions": ("int", 3),
        "dt_hint_factor": ("float", 0.5),
    },
}

_PARSERS = {
    "float": float,
    "int": int,
    "str": lambda s: s.strip(),
    "bool": _parse_bool,
    "float_list": _parse_float_list,
    "str_list": _parse_str_list,
}


@dataclass
class RunConfig:
    """Fully validated configuration for one CLI invocation."""

    values: dict[str, Any]
    model_params: dict[str, float]
    provenance: dict[str, str]

    def __getitem__(self, dotted: str) -> Any:
        return self.values[dotted]

    # -- construction of runtime objects ------------------------------------

    def model(self):
        return get_model(self.values["model.id"], **self.model_params)

    def grid(self) -> Grid1D:
        return Grid1D(self.values["grid.length"], self.values["grid.intervals"])

    def sigma(self) -> float:
        s = self.values["diffusion.sigma"]
        if s and s > 0:
            return float(s)
        lam = self.values["diffusion.anisotropy_ratio"]
        sig_i = self.values["diffusion.sigma_i"]
        chi = self.values["diffusion.chi"]
        if min(lam, sig_i, chi) <= 0:
            raise ConfigError("diffusion.sigma",
                              "give sigma directly or all of anisotropy_ratio/sigma_i/chi")
        cm = self.model().membrane_capacity
        return (lam / (1.0 + lam)) * sig_i / (chi * cm)

    def stimulus(self) -> Stimulus1D:
        v = self.values
        return Stimulus1D(amplitude=v["stimulus.amplitude"],
                          x_start=v["stimulus.x_start"], x_end=v["stimulus.x_end"],
                          t_start=v["stimulus.t_start"], t_end=v["stimulus.t_end"])

    def probe(self) -> ProbeSpec:
        v = self.values
        return ProbeSpec(threshold=v["probe.threshold"], x1=v["probe.x1"], x2=v["probe.x2"])

    def problem(self) -> Problem:
        return Problem(self.model(), self.grid(), self.sigma(), self.stimulus())

    # -- serialization -------------------------------------------------------

    def serialize(self) -> str:
        out = io.StringIO()
        sections: dict[str, list[tuple[str, str]]] = {}
        for dotted, val in self.values.items():
            section, key = dotted.rsplit(".", 1)
            kind = SCHEMA[section][key][0]
            sections.setdefault(section, []).append((key, _format_value(kind, val)))
        if self.model_params:
            sections["model.params"] = [(k, fmt17(v)) for k, v in
                                        sorted(self.model_params.items())]
        for section in sorted(sections):
            out.write(f"[{section}]\n")
            for key, sval in sorted(sections[section]):
                out.write(f"{key} = {sval}\n")
            out.write("\n")
        return out.getvalue()

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _format_value(kind: str, val: Any) -> str:
    if kind == "float":
        return fmt17(val)
    if kind == "int":
        return str(int(val))
    if kind == "bool":
        return "true" if val else "false"
    if kind == "float_list":
        return ", ".join(fmt17(x) for x in val)
    if kind == "str_list":
        return ", ".join(val)
    return str(val)


def _validate(values: dict[str, Any], model_params: dict[str, float]):
    model_id = values["model.id"]
    if model_id not in MODEL_CLASSES:
        raise ConfigError("model.id", f"unknown model {model_id!r}")
    try:
        get_model(model_id, **model_params)
    except KeyError as exc:
        raise ConfigError("model.params", str(exc)) from None
    n = values["grid.intervals"]
    if n < 2 or n % 2 != 0:
        raise ConfigError("grid.intervals",
                          "must be an even integer >= 2 (Simpson quadrature)")
    if values["grid.length"] <= 0:
        raise ConfigError("grid.length", "must be positive")
    if values["run.dt"] <= 0:
        raise ConfigError("run.dt", "must be positive")
    if values["run.final_time"] <= 0:
        raise ConfigError("run.final_time", "must be positive")
    scheme = values["run.scheme"]
    if scheme not in _SCHEME_SET:
        raise ConfigError("run.scheme", f"unknown scheme {scheme!r}; one of {sorted(_SCHEME_SET)}")
    for key in ("critical_dt.schemes", "converge.schemes", "bench.schemes"):
        for s in values[key]:
            if s not in _SCHEME_SET:
                raise ConfigError(key, f"unknown scheme {s!r}")
    if values["stimulus.x_end"] <= values["stimulus.x_start"]:
        raise ConfigError("stimulus.x_end", "must exceed stimulus.x_start")
    if values["stimulus.t_end"] <= values["stimulus.t_start"]:
        raise ConfigError("stimulus.t_end", "must exceed stimulus.t_start")
    if not values["probe.x1"] < values["probe.x2"]:
        raise ConfigError("probe.x2", "must exceed probe.x1")
    for key in ("probe.x1", "probe.x2"):
        if not 0 <= values[key] <= values["grid.length"]:
            raise ConfigError(key, "probe lies outside the domain")
    for dt in values["converge.dts"]:
        if dt <= 0:
            raise ConfigError("converge.dts", "time-steps must be positive")
    if values["bench.target_rel_l2"] <= 0:
        raise ConfigError("bench.target_rel_l2", "must be positive")


def parse_config(text: str, overrides: list[str] = ()) -> RunConfig:
    """Parse and validate configuration text, applying --set overrides.

    Every invalid field is reported with its section.key locator; unknown
    sections or keys are rejected.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"malformed config: {exc}") from None

    raw: dict[str, str] = {}
    model_params: dict[str, float] = {}
    for section in cp.sections():
        if section == "model.params":
            for key, sval in cp.items(section):
                try:
                    model_params[key] = float(sval)
                except ValueError:
                    raise ConfigError(f"model.params.{key}",
                                      f"not a number: {sval!r}") from None
            continue
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, sval in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            raw[f"{section}.{key}"] = sval

    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected section.key=value, got {item!r}")
        dotted, sval = item.split("=", 1)
        dotted = dotted.strip()
        if dotted.startswith("model.params."):
            try:
                model_params[dotted.split(".", 2)[2]] = float(sval)
            except ValueError:
                raise ConfigError(dotted, f"not a number: {sval!r}") from None
            continue
        if "." not in dotted:
            raise ConfigError("--set", f"expected section.key=value, got {item!r}")
        section, key = dotted.rsplit(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(dotted, "unknown key")
        raw[dotted] = sval

    model_id = raw.get("model.id", SCHEMA["model"]["id"][1]).strip()
    preset = MODEL_PRESETS.get(model_id, {})

    values: dict[str, Any] = {}
    provenance: dict[str, str] = {}
    for section, keys in SCHEMA.items():
        for key, (kind, default) in keys.items():
            dotted = f"{section}.{key}"
            if dotted in raw:
                try:
                    values[dotted] = _PARSERS[kind](raw[dotted])
                except (ValueError, TypeError):
                    raise ConfigError(
                        dotted, f"expected {kind}, got {raw[dotted]!r}") from None
                provenance[dotted] = "user"
            elif dotted in preset:
                values[dotted] = preset[dotted]
                provenance[dotted] = "preset"
            elif default is not None:
                values[dotted] = default
                provenance[dotted] = "default"
            else:
                raise ConfigError(dotted, "required (no preset for this model)")
    if values["grid.intervals"] is not None:
        values["grid.intervals"] = int(values["grid.intervals"])
    for key in model_params:
        provenance[f"model.params.{key}"] = "user"

    _validate(values, model_params)
    return RunConfig(values=values, model_params=model_params, provenance=provenance)


def default_config(model_id: str = "br", **set_overrides) -> RunConfig:
    """Programmatic configuration with a model preset and optional overrides."""
    items = [f"model.id={model_id}"] + [f"{k}={v}" for k, v in set_overrides.items()]
    return parse_config("", overrides=items)
