"""Scenario files: flat INI sections validated before anything is computed.

Example (every key optional; the defaults reproduce the slow-driving
scenario ``eps0=-1.2, V_ac=10, hbar*Omega=1e-3, mu=0, T=0``)::

    [model]
    epsilon0 = -1.2
    v_ac = 10
    omega = 1e-3

    [run]
    kind = trace
    n_times = 256
    threads = 1
    amplitudes = 10, 12

    [quadrature]
    method = closed

    [truncation]
    tol = 1e-8
    n_max =

    [output]
    directory = out
    format = csv

Unknown sections or keys raise :class:`~driven_level.errors.ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidParams
from .green import TruncationPolicy
from .model import ModelParams
from .quadrature import QuadratureConfig

RUN_KINDS = ("trace", "adiabatic", "audit", "fig2")
FORMATS = ("csv", "json")
W_E_PATHS = ("auto", "scattering", "identity")


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelParams = field(default_factory=ModelParams)
    run: str = "trace"
    n_times: int = 256
    threads: int = 1
    amplitudes: tuple = (10.0, 12.0)
    w_e_path: str = "auto"
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    output_dir: Path = Path("out")
    output_format: str = "csv"

    def with_overrides(self, run=None, out=None, threads=None, fmt=None) -> "ScenarioConfig":
        changes = {}
        if run is not None:
            changes["run"] = run
        if out is not None:
            changes["output_dir"] = Path(out)
        if threads is not None:
            changes["threads"] = threads
        if fmt is not None:
            changes["output_format"] = fmt
        cfg = dataclasses.replace(self, **changes)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.run not in RUN_KINDS:
            raise ConfigError(f"run kind must be one of {RUN_KINDS}, got {self.run!r}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}, got {self.output_format!r}")
        if self.n_times < 16:
            raise ConfigError("n_times must be >= 16")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.amplitudes:
            raise ConfigError("amplitudes must list at least one drive amplitude")
        if self.w_e_path not in W_E_PATHS:
            raise ConfigError(f"w_e_path must be one of {W_E_PATHS}")
        try:
            self.quadrature.band_cutoff(self.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelParams)}
_QUAD_FLOAT = {"abs_tol", "rel_tol", "cutoff", "spectral_tol", "engine_tol"}
_QUAD_INT = {"order"}
_QUAD_STR = {"window_policy", "method"}
_SCHEMA = {
    "model": _MODEL_KEYS,
    "run": {"kind", "n_times", "threads", "amplitudes", "w_e_path"},
    "quadrature": _QUAD_FLOAT | _QUAD_INT | _QUAD_STR,
    "truncation": {"tol", "n_max"},
    "output": {"directory", "format"},
}


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False, inline_comment_prefixes=(";",))
    parser.optionxform = str  # keys are case sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")

    def get(section):
        return {k: v.strip() for k, v in parser[section].items()} if parser.has_section(section) else {}

    model_raw = get("model")
    try:
        model = ModelParams(**{k: _float("model", k, v) for k, v in model_raw.items()})
    except InvalidParams as exc:
        raise ConfigError(f"[model] {exc}") from None

    quad_raw = get("quadrature")
    quad_kwargs = {}
    for k, v in quad_raw.items():
        if k in _QUAD_FLOAT:
            quad_kwargs[k] = None if (k == "cutoff" and v == "") else _float("quadrature", k, v)
        elif k in _QUAD_INT:
            quad_kwargs[k] = _int("quadrature", k, v)
        else:
            quad_kwargs[k] = v
    try:
        quadrature = QuadratureConfig(**quad_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[quadrature] {exc}") from None

    trunc_raw = get("truncation")
    trunc_kwargs = {}
    if "tol" in trunc_raw:
        trunc_kwargs["tol"] = _float("truncation", "tol", trunc_raw["tol"])
    if trunc_raw.get("n_max", ""):
        trunc_kwargs["n_max"] = _int("truncation", "n_max", trunc_raw["n_max"])
    try:
        truncation = TruncationPolicy(**trunc_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[truncation] {exc}") from None

    run_raw = get("run")
    kwargs = {"model": model, "quadrature": quadrature, "truncation": truncation}
    if "kind" in run_raw:
        kwargs["run"] = run_raw["kind"]
    if "n_times" in run_raw:
        kwargs["n_times"] = _int("run", "n_times", run_raw["n_times"])
    if "threads" in run_raw:
        kwargs["threads"] = _int("run", "threads", run_raw["threads"])
    if "w_e_path" in run_raw:
        kwargs["w_e_path"] = run_raw["w_e_path"]
    if "amplitudes" in run_raw:
        items = [s for s in run_raw["amplitudes"].replace(",", " ").split() if s]
        kwargs["amplitudes"] = tuple(_float("run", "amplitudes", s) for s in items)
        for v in kwargs["amplitudes"]:
            try:
                model.replace(v_ac=v)
            except InvalidParams as exc:
                raise ConfigError(f"[run] amplitude {v}: {exc}") from None

    out_raw = get("output")
    if "directory" in out_raw:
        kwargs["output_dir"] = Path(out_raw["directory"])
    if "format" in out_raw:
        kwargs["output_format"] = out_raw["format"]

    cfg = ScenarioConfig(**kwargs)
    cfg.check()
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))
