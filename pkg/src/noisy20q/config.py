"""Experiment configuration files (YAML or JSON), schema version 1.

Every section and key is checked; unknown keys are errors.  See
``configs/README.md`` for the documented schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .analysis import capacity_bsc, capacity_general
from .channel import LipschitzFn, MdBSC, MdChannel, TabulatedChannel
from .engine import ProcedureConfig, choose_lambda
from .harness import PROCEDURES, ExperimentConfig, PMConfig

SCHEMA_VERSION = 1

SECTIONS = {
    "schema_version": None,
    "channel": {"family", "nu", "f", "states", "matrices"},
    "procedure": {
        "name", "M", "log_M", "d", "q", "lambda", "target_eps", "epsilon_term",
        "max_steps", "decoder", "backend", "prune",
        "M_pm", "n_queries", "refine", "stop_rule", "theta",
    },
    "experiment": {"n_trials", "master_seed", "truth", "delta_eval", "workers", "quantiles"},
    "sweep": {"parameter", "values"},
    "analysis": {"nu_grid", "eps_grid", "eps_max", "d", "tol", "mi_alpha"},
    "continuity": {"q", "xi", "c"},
}
SWEEP_PARAMETERS = ("M", "log_M", "lambda", "target_eps", "n_queries", "epsilon_term")


class ConfigError(ValueError):
    pass


def load_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    validate_keys(doc)
    return doc


def validate_keys(doc: dict) -> None:
    for key, value in doc.items():
        if key not in SECTIONS:
            raise ConfigError(f"unknown top-level key {key!r}")
        allowed = SECTIONS[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"unknown key {key}.{sub}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")


def _num(section: dict, key: str, default=None, name: str = "") -> Any:
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}{key} must be a number, got {value!r}") from None


def _int(section: dict, key: str, default=None, name: str = "") -> Any:
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{name}{key} must be an integer, got {value!r}")
    try:
        iv = int(value)
    except ValueError:
        raise ConfigError(f"{name}{key} must be an integer, got {value!r}") from None
    if isinstance(value, float) and iv != value:
        raise ConfigError(f"{name}{key} must be an integer, got {value!r}")
    return iv


def build_channel(doc: dict) -> MdChannel:
    sec = doc.get("channel")
    if sec is None:
        raise ConfigError("missing section 'channel'")
    fdef = sec.get("f", {"a": 0.0, "b": 0.0})
    if not isinstance(fdef, dict) or set(fdef) - {"a", "b"}:
        raise ConfigError("channel.f must be a mapping with keys a, b")
    try:
        f = LipschitzFn(_num(fdef, "a", 0.0, "channel.f."), _num(fdef, "b", 0.0, "channel.f."))
        family = sec.get("family", "mdbsc")
        if family == "mdbsc":
            if "nu" not in sec:
                raise ConfigError("channel.nu is required for family mdbsc")
            return MdBSC(_num(sec, "nu", name="channel."), f)
        if family == "tabulated":
            if "states" not in sec or "matrices" not in sec:
                raise ConfigError("tabulated channels need channel.states and channel.matrices")
            return TabulatedChannel.from_rows(f, sec["states"], sec["matrices"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid channel: {exc}") from exc
    raise ConfigError(f"channel.family must be 'mdbsc' or 'tabulated', got {family!r}")


def design_q(sec: dict, ch: MdChannel) -> float:
    q = sec.get("q", "argmax")
    if q == "argmax":
        cap = capacity_bsc(ch.nu, ch.f) if isinstance(ch, MdBSC) else capacity_general(ch)
        return min(max(cap.argmax_q, 1e-9), 1 - 1e-9)
    return _num(sec, "q", name="procedure.")


def procedure_config(sec: dict, ch: MdChannel) -> ProcedureConfig:
    if "M" in sec and "log_M" in sec:
        raise ConfigError("give procedure.M or procedure.log_M, not both")
    if "log_M" in sec:
        M = int(round(math.exp(_num(sec, "log_M", name="procedure."))))
    else:
        M = _int(sec, "M", None, "procedure.")
    if M is None:
        raise ConfigError("procedure.M is required")
    d = _int(sec, "d", 1, "procedure.")
    if "lambda" in sec and "target_eps" in sec:
        raise ConfigError("give procedure.lambda or procedure.target_eps, not both")
    try:
        if "lambda" in sec:
            lam = _num(sec, "lambda", name="procedure.")
        else:
            lam = choose_lambda(M, d, _num(sec, "target_eps", 0.1, "procedure."))
        return ProcedureConfig(
            M=M, d=d, q=design_q(sec, ch), lam=lam,
            epsilon_term=_num(sec, "epsilon_term", 0.0, "procedure."),
            max_steps=_int(sec, "max_steps", None, "procedure."),
            decoder=sec.get("decoder", "max_index"),
            backend=sec.get("backend", "auto"),
            prune=_num(sec, "prune", 1e-12, "procedure."),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid procedure: {exc}") from exc


def pm_config(sec: dict) -> PMConfig:
    try:
        return PMConfig(
            n_queries=_int(sec, "n_queries", 100, "procedure."),
            M_pm=_int(sec, "M_pm", 1, "procedure."),
            refine=bool(sec.get("refine", True)),
            stop_rule=sec.get("stop_rule", "fixed_n"),
            theta=_num(sec, "theta", 0.99, "procedure."),
            epsilon_term=_num(sec, "epsilon_term", 0.0, "procedure."),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid sorted PM parameters: {exc}") from exc


def experiment_config(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Build the experiment; ``overrides`` may set procedure, n_trials, master_seed, output_path, workers."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    ch = build_channel(doc)
    psec = dict(doc.get("procedure") or {})
    exp = doc.get("experiment") or {}
    name = overrides.pop("procedure", psec.get("name", "alg1")).replace("-", "_")
    if name not in PROCEDURES:
        raise ConfigError(f"procedure must be one of {PROCEDURES}, got {name!r}")
    proc = pm = None
    if name.startswith("alg"):
        if name == "alg1":
            psec["epsilon_term"] = 0.0
        proc = procedure_config(psec, ch)
        dim = proc.d
    else:
        if name == "sorted_pm":
            psec["epsilon_term"] = 0.0
        pm = pm_config(psec)
        dim = 1
    truth = exp.get("truth", "uniform")
    if truth == "uniform":
        truth = None
    elif isinstance(truth, (list, tuple)):
        truth = tuple(float(s) for s in truth)
        if len(truth) != dim:
            raise ConfigError(f"experiment.truth must have {dim} coordinates")
    else:
        raise ConfigError("experiment.truth must be 'uniform' or a list of coordinates")
    levels = tuple(float(v) for v in exp.get("quantiles", (0.5, 0.9, 0.99)))
    try:
        return ExperimentConfig(
            procedure=name, channel=ch, proc=proc, pm=pm,
            n_trials=overrides.pop("n_trials", _int(exp, "n_trials", 1000, "experiment.")),
            master_seed=overrides.pop("master_seed", _int(exp, "master_seed", 0, "experiment.")),
            truth=truth,
            delta_eval=_num(exp, "delta_eval", None, "experiment."),
            workers=overrides.pop("workers", _int(exp, "workers", 1, "experiment.")),
            levels=levels,
            **overrides,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid experiment: {exc}") from exc


@dataclass
class SweepPoint:
    label: dict
    config: ExperimentConfig


def sweep_configs(doc: dict, overrides: dict | None = None) -> list[SweepPoint]:
    """One experiment per sweep value; without a sweep section, a single point."""
    sweep = doc.get("sweep")
    if not sweep:
        return [SweepPoint({}, experiment_config(doc, overrides))]
    param = sweep.get("parameter")
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
    values = sweep.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values must be a non-empty list")
    points = []
    for v in values:
        sub = dict(doc)
        psec = dict(doc.get("procedure") or {})
        if param in ("M", "log_M"):
            psec.pop("M", None)
            psec.pop("log_M", None)
        if param == "lambda":
            psec.pop("target_eps", None)
        if param == "target_eps":
            psec.pop("lambda", None)
        psec[param] = v
        sub["procedure"] = psec
        points.append(SweepPoint({param: v}, experiment_config(sub, overrides)))
    return points
