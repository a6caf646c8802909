"""Run configuration: JSON file + command-line overrides, validated by a strict schema."""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Mapping, Optional, Union

import jsonschema

from ..classes.Bubble import QuadratureConfig
from ..classes.CriticalFinder import SearchConfig
from ..classes.InteractionMatrix import InteractionConfig
from ..classes.ShadowFlow import FlowConfig
from .constants import DEFAULT_SEED, FLOW_S0, POLE_TOL, POSITIVITY_SAMPLES
from .exceptions import SchemaError
from .utils import check_file_exists

logger = logging.getLogger(__name__)

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["field"],
    "properties": {
        "field": {"type": "string", "minLength": 1},
        "manifold": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {"type": {"const": "round_s4"}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "path"],
                    "properties": {"type": {"const": "table"}, "path": {"type": "string", "minLength": 1}},
                },
            ]
        },
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grad_tol": _POSITIVE,
                "merge_tol": _POSITIVE,
                "nondegeneracy_tol": _POSITIVE,
                "beta_tol": _POSITIVE,
                "rho_tol": _POSITIVE,
                "pole_tol": _POSITIVE,
                "local_tol": _POSITIVE,
                "quad_rel_tol": _POSITIVE,
            },
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "starts": _COUNT,
                "max_newton_iters": _COUNT,
                "max_restarts": {"type": "integer", "minimum": 0},
                "n_jobs": {"type": "integer", "not": {"const": 0}},
            },
        },
        "positivity_samples": _COUNT,
        "max_kplus": _COUNT,
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "number", "minimum": 0},
                "s0": _POSITIVE,
                "freeze_points": {"type": "boolean"},
            },
        },
        "mu": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["subset", "value"],
                "properties": {
                    "subset": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "value": {"enum": [0, 1]},
                },
            },
        },
    },
}


@dataclass
class RunConfig:
    """Fully resolved settings of one run.

    Attributes
    ----------
    field : str
        Expression source of K.
    manifold : dict
        {"type": "round_s4"} or {"type": "table", "path": ...}; a relative table
        path is resolved against the directory of the config file.
    seed : int
        Seed of every Sobol sample drawn during the run.
    search, interaction, flow, quadrature
        Per-module settings.
    positivity_samples : int
        Sobol samples used to estimate min K.
    flow_s0 : float
        Initial inverse scale of every bubble in the shadow flow.
    pole_tol : float
        Distance under which G is considered evaluated at its pole.
    mu : list of dict, optional
        Asserted intersection numbers, [{"subset": [...], "value": 0|1}].
    """

    field: str
    manifold: dict = field(default_factory=lambda: {"type": "round_s4"})
    seed: int = DEFAULT_SEED
    search: SearchConfig = field(default_factory=SearchConfig)
    interaction: InteractionConfig = field(default_factory=InteractionConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    positivity_samples: int = POSITIVITY_SAMPLES
    flow_s0: float = FLOW_S0
    pole_tol: float = POLE_TOL
    mu: Optional[List[dict]] = None

    def to_dict(self) -> dict:
        """Resolved config, defaults included, in the layout of the config file."""
        d = {
            "field": self.field,
            "manifold": dict(self.manifold),
            "seed": self.seed,
            "tolerances": {
                "grad_tol": self.search.grad_tol,
                "merge_tol": self.search.merge_tol,
                "nondegeneracy_tol": self.search.nondegeneracy_tol,
                "beta_tol": self.search.beta_tol,
                "rho_tol": self.interaction.rho_tol,
                "pole_tol": self.pole_tol,
                "local_tol": self.flow.local_tol,
                "quad_rel_tol": self.quadrature.rel_tol,
            },
            "search": {
                "starts": self.search.starts,
                "max_newton_iters": self.search.max_newton_iters,
                "max_restarts": self.search.max_restarts,
                "n_jobs": self.search.n_jobs,
            },
            "positivity_samples": self.positivity_samples,
            "max_kplus": self.interaction.max_kplus,
            "flow": {
                "horizon": self.flow.horizon,
                "s0": self.flow_s0,
                "freeze_points": self.flow.freeze_points,
            },
        }
        if self.mu is not None:
            d["mu"] = [dict(e) for e in self.mu]
        return d


def _validate(data: Mapping):
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path)
        raise SchemaError(e.message, field=path) from None


def config_from_dict(data: Mapping, overrides: Optional[Mapping] = None, base_dir: Optional[Path] = None) -> RunConfig:
    """Build a RunConfig from a config document.

    `overrides` holds command-line values keyed like the flat flag names
    (field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs,
    progress); entries set to None are ignored. Overrides win over the file.
    """
    data = dict(data)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "field" in overrides:
        data["field"] = overrides["field"]
    _validate(data)

    tol = data.get("tolerances", {})
    search = data.get("search", {})
    flow = data.get("flow", {})
    seed = overrides.get("seed", data.get("seed", DEFAULT_SEED))

    manifold = dict(data.get("manifold", {"type": "round_s4"}))
    if manifold["type"] == "table" and base_dir is not None and not Path(manifold["path"]).is_absolute():
        manifold["path"] = str(base_dir / manifold["path"])

    search_cfg = replace(
        SearchConfig(),
        seed=seed,
        **{k: tol[k] for k in ("grad_tol", "merge_tol", "nondegeneracy_tol", "beta_tol") if k in tol},
        **{k: search[k] for k in ("starts", "max_newton_iters", "max_restarts", "n_jobs") if k in search},
    )
    search_cfg = replace(
        search_cfg,
        **{
            k: overrides[k]
            for k in ("starts", "grad_tol", "merge_tol", "max_newton_iters", "n_jobs", "progress")
            if k in overrides
        },
    )
    interaction_cfg = replace(
        InteractionConfig(),
        **({"rho_tol": tol["rho_tol"]} if "rho_tol" in tol else {}),
        **({"max_kplus": data["max_kplus"]} if "max_kplus" in data else {}),
        progress=bool(overrides.get("progress", False)),
    )
    flow_cfg = replace(
        FlowConfig(),
        **({"local_tol": tol["local_tol"]} if "local_tol" in tol else {}),
        **{k: flow[k] for k in ("horizon", "freeze_points") if k in flow},
    )
    quad_cfg = replace(QuadratureConfig(), **({"rel_tol": tol["quad_rel_tol"]} if "quad_rel_tol" in tol else {}))

    return RunConfig(
        field=data["field"],
        manifold=manifold,
        seed=seed,
        search=search_cfg,
        interaction=interaction_cfg,
        flow=flow_cfg,
        quadrature=quad_cfg,
        positivity_samples=data.get("positivity_samples", POSITIVITY_SAMPLES),
        flow_s0=flow.get("s0", FLOW_S0),
        pole_tol=tol.get("pole_tol", POLE_TOL),
        mu=data.get("mu"),
    )


def load_config(config_path: Union[Path, str], overrides: Optional[Mapping] = None) -> RunConfig:
    """Read a JSON config file (UTF-8) and apply `overrides`.

    Raises
    ------
    FileNotFoundError
        When the file does not exist.
    SchemaError
        On malformed JSON (with the line number) or schema violations (with the field path).
    """
    if isinstance(config_path, str):
        config_path = Path(config_path)
    check_file_exists(config_path)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(e.msg, line=e.lineno) from None
    if not isinstance(data, dict):
        raise SchemaError("top level must be a JSON object", line=1)
    logger.info(f"config loaded from {config_path}")
    return config_from_dict(data, overrides, base_dir=config_path.parent)
