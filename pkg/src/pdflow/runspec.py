"""Run-spec JSON schema, default resolution, and object construction.

A run spec fully describes one simulation: problem, system, schedules,
horizon, initial state, integrator configuration, and sampling.  Specs are
schema-validated before execution and every defaulted field is echoed back in
the resolved spec that accompanies the run artifacts, so a run can be
reproduced byte-for-byte from its own output directory.

Curve JSON uses {"family": "power", "c": ..., "r": ...} with one sign
convention: for the Tikhonov role the stored r is the positive decay
exponent (eps(t) = c * t**-r); every other role stores the signed exponent.
"""

from __future__ import annotations

import copy
from typing import Optional

import jsonschema

from .dynamics import SystemKind, SystemParams, SystemState, has_dual_velocity
from .integrator import IntegratorConfig
from .problem import SeparableProblem, builtin, problem_from_json
from .schedules import Curve

__all__ = [
    "SpecError",
    "RUNSPEC_SCHEMA",
    "COMPARESPEC_SCHEMA",
    "resolve_spec",
    "resolve_compare_spec",
    "build_problem",
    "build_system",
    "build_initial",
    "build_config",
    "build_samples",
    "curve_from_json",
    "curve_to_json",
]


class SpecError(ValueError):
    """Invalid run spec (schema or semantics)."""


_CURVE_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["power", "zero"]},
        "c": {"type": "number"},
        "r": {"type": "number"},
    },
    "required": ["family"],
    "additionalProperties": False,
}

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_QUAD_SCHEMA = {
    "type": "object",
    "properties": {
        "P": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
        "q": _NUMBER_ARRAY,
        "c": {"type": "number"},
    },
    "required": ["P"],
    "additionalProperties": False,
}

_PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["example1", "example2", "random_qp"]},
        "params": {"type": "object"},
        "inline": {
            "type": "object",
            "properties": {
                "f": _QUAD_SCHEMA,
                "g": _QUAD_SCHEMA,
                "A": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
                "B": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
                "b": _NUMBER_ARRAY,
            },
            "required": ["f", "g", "A", "B", "b"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["tikhonov_pd", "second_order_dual", "rescaled_alm"]},
        "gamma": {"oneOf": [{"type": "number"}, _CURVE_SCHEMA]},
        "delta": {"oneOf": [{"type": "number"}, _CURVE_SCHEMA]},
        "beta": _CURVE_SCHEMA,
        "eps": _CURVE_SCHEMA,
        "a": _CURVE_SCHEMA,
        "mu": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_INITIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "x": _NUMBER_ARRAY,
        "y": _NUMBER_ARRAY,
        "lam": _NUMBER_ARRAY,
        "vx": _NUMBER_ARRAY,
        "vy": _NUMBER_ARRAY,
        "vlam": {"oneOf": [_NUMBER_ARRAY, {"type": "null"}]},
    },
    "additionalProperties": False,
}

_INTEGRATOR_SCHEMA = {
    "type": "object",
    "properties": {
        "rtol": {"type": "number", "exclusiveMinimum": 0},
        "atol": {"type": "number", "exclusiveMinimum": 0},
        "h_init": {"type": "number", "exclusiveMinimum": 0},
        "h_max": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "null"}]},
        "max_steps": {"type": "integer", "minimum": 1},
        "safety": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

_SAMPLES_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["log", "explicit"]},
        "count": {"type": "integer", "minimum": 2},
        "times": _NUMBER_ARRAY,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_HORIZON_SCHEMA = {
    "type": "object",
    "properties": {
        "t0": {"type": "number"},
        "T": {"type": "number"},
    },
    "required": ["t0", "T"],
    "additionalProperties": False,
}

_OUTPUTS_SCHEMA = {
    "type": "object",
    "properties": {"charts": {"type": "boolean"}},
    "additionalProperties": False,
}

RUNSPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "problem": _PROBLEM_SCHEMA,
        "system": _SYSTEM_SCHEMA,
        "horizon": _HORIZON_SCHEMA,
        "initial": _INITIAL_SCHEMA,
        "integrator": _INTEGRATOR_SCHEMA,
        "samples": _SAMPLES_SCHEMA,
        "outputs": _OUTPUTS_SCHEMA,
    },
    "required": ["problem", "system", "horizon"],
    "additionalProperties": False,
}

COMPARESPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "problem": _PROBLEM_SCHEMA,
        "horizon": _HORIZON_SCHEMA,
        "initial": _INITIAL_SCHEMA,
        "integrator": _INTEGRATOR_SCHEMA,
        "samples": _SAMPLES_SCHEMA,
        "outputs": _OUTPUTS_SCHEMA,
        "systems": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"name": {"type": "string"}, "system": _SYSTEM_SCHEMA},
                "required": ["name", "system"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["problem", "horizon", "systems"],
    "additionalProperties": False,
}

_INTEGRATOR_DEFAULTS = {
    "rtol": 1e-8,
    "atol": 1e-10,
    "h_init": 1e-3,
    "h_max": None,
    "max_steps": 5_000_000,
    "safety": 0.9,
}


def curve_from_json(doc: dict, role: str, t0: float) -> Curve:
    if doc["family"] == "zero":
        return Curve.zero()
    c = float(doc.get("c", 1.0))
    r = float(doc.get("r", 0.0))
    if role == "eps":
        r = -r  # stored as the positive decay exponent
    # nonnegative exponents are defined for all t >= 0; decaying ones only
    # from the horizon start
    return Curve.power(c, r, t0=t0 if r < 0.0 else 0.0)


def curve_to_json(curve: Curve, role: str) -> dict:
    if curve.family == "zero":
        return {"family": "zero"}
    if curve.family != "power":
        raise SpecError("user-oracle curves cannot be serialized to a run spec")
    c, r = curve.power_coeffs()
    if role == "eps":
        r = -r
    return {"family": "power", "c": c, "r": r}


def build_problem(doc: dict) -> SeparableProblem:
    if "inline" in doc:
        if "builtin" in doc:
            raise SpecError("problem must have exactly one of 'builtin' or 'inline'")
        return problem_from_json(doc["inline"])
    if "builtin" not in doc:
        raise SpecError("problem must have exactly one of 'builtin' or 'inline'")
    params = dict(doc.get("params", {}))
    if "dims" in params:
        params["dims"] = tuple(params["dims"])
    return builtin(doc["builtin"], **params)


def build_system(doc: dict, t0: float) -> tuple[SystemKind, SystemParams]:
    kind = SystemKind(doc["kind"])
    if kind == SystemKind.TIKHONOV_PD:
        for key in ("gamma", "delta", "beta", "eps"):
            if key not in doc:
                raise SpecError(f"tikhonov_pd system requires '{key}'")
        params = SystemParams(
            gamma=float(doc["gamma"]),
            delta=float(doc["delta"]),
            beta=curve_from_json(doc["beta"], "beta", t0),
            eps=curve_from_json(doc["eps"], "eps", t0),
        )
    elif kind == SystemKind.SECOND_ORDER_DUAL:
        for key in ("gamma", "delta"):
            if key not in doc or not isinstance(doc[key], dict):
                raise SpecError(f"second_order_dual requires curve-valued '{key}'")
        if "beta" in doc:
            raise SpecError("second_order_dual carries no time scaling: remove 'beta'")
        params = SystemParams(
            gamma=curve_from_json(doc["gamma"], "gamma", t0),
            delta=curve_from_json(doc["delta"], "delta", t0),
        )
    else:
        for key in ("gamma", "beta", "a"):
            if key not in doc or not isinstance(doc[key], dict):
                raise SpecError(f"rescaled_alm requires curve-valued '{key}'")
        params = SystemParams(
            gamma=curve_from_json(doc["gamma"], "gamma", t0),
            beta=curve_from_json(doc["beta"], "beta", t0),
            a=curve_from_json(doc["a"], "a", t0),
            mu=float(doc.get("mu", 0.0)),
        )
    try:
        params.validate(kind)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    return kind, params


def build_initial(doc: dict, prob: SeparableProblem, kind: SystemKind) -> SystemState:
    vlam = doc.get("vlam")
    try:
        return SystemState(
            x=doc["x"], y=doc["y"], lam=doc["lam"], vx=doc["vx"], vy=doc["vy"],
            vlam=vlam if vlam is not None else None,
        )
    except (KeyError, ValueError) as exc:
        raise SpecError(f"invalid initial state: {exc}") from exc


def build_config(doc: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(
            rtol=float(doc["rtol"]),
            atol=float(doc["atol"]),
            h_init=float(doc["h_init"]),
            h_max=None if doc["h_max"] is None else float(doc["h_max"]),
            max_steps=int(doc["max_steps"]),
            safety=float(doc["safety"]),
        )
    except ValueError as exc:
        raise SpecError(f"invalid integrator config: {exc}") from exc


def build_samples(doc: dict):
    if doc["kind"] == "log":
        return int(doc.get("count", 200))
    times = doc.get("times")
    if not times:
        raise SpecError("explicit samples require a 'times' array")
    return [float(t) for t in times]


def _validate_schema(spec: dict, schema: dict) -> None:
    try:
        jsonschema.validate(spec, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SpecError(f"spec schema violation at {path}: {exc.message}") from exc


def _resolved_common(spec: dict, prob: SeparableProblem, needs_vlam: bool) -> dict:
    horizon = {"t0": float(spec["horizon"]["t0"]), "T": float(spec["horizon"]["T"])}
    if not horizon["T"] > horizon["t0"]:
        raise SpecError("horizon must satisfy T > t0")

    initial = dict(spec.get("initial", {}))
    initial.setdefault("x", [1.0] * prob.n1)
    initial.setdefault("y", [1.0] * prob.n2)
    initial.setdefault("lam", [1.0] * prob.m)
    initial.setdefault("vx", [1.0] * prob.n1)
    initial.setdefault("vy", [1.0] * prob.n2)
    if needs_vlam:
        initial.setdefault("vlam", [1.0] * prob.m)
    else:
        initial.setdefault("vlam", None)

    integ = dict(_INTEGRATOR_DEFAULTS)
    integ.update(spec.get("integrator", {}))

    samples = dict(spec.get("samples", {"kind": "log", "count": 200}))
    if samples.get("kind") == "log":
        samples.setdefault("count", 200)

    outputs = dict(spec.get("outputs", {}))
    outputs.setdefault("charts", False)
    return {"horizon": horizon, "initial": initial, "integrator": integ,
            "samples": samples, "outputs": outputs}


def resolve_spec(spec: dict) -> dict:
    """Validate a run spec and return it with every default filled in."""
    _validate_schema(spec, RUNSPEC_SCHEMA)
    spec = copy.deepcopy(spec)
    prob = build_problem(spec["problem"])
    t0 = float(spec["horizon"]["t0"])
    kind, _ = build_system(spec["system"], t0)
    common = _resolved_common(spec, prob, has_dual_velocity(kind))
    resolved = {
        "problem": spec["problem"],
        "system": spec["system"],
        "horizon": common["horizon"],
        "initial": common["initial"],
        "integrator": common["integrator"],
        "samples": common["samples"],
        "outputs": common["outputs"],
    }
    # construction doubles as semantic validation
    build_initial(resolved["initial"], prob, kind)
    build_config(resolved["integrator"])
    build_samples(resolved["samples"])
    return resolved


def resolve_compare_spec(spec: dict) -> dict:
    """Validate a comparison spec (several systems, shared everything else)."""
    _validate_schema(spec, COMPARESPEC_SCHEMA)
    spec = copy.deepcopy(spec)
    prob = build_problem(spec["problem"])
    t0 = float(spec["horizon"]["t0"])
    names = [entry["name"] for entry in spec["systems"]]
    if len(set(names)) != len(names):
        raise SpecError("system names in a comparison must be unique")
    needs_vlam = False
    for entry in spec["systems"]:
        kind, _ = build_system(entry["system"], t0)
        needs_vlam = needs_vlam or has_dual_velocity(kind)
    common = _resolved_common(spec, prob, needs_vlam)
    return {
        "problem": spec["problem"],
        "horizon": common["horizon"],
        "initial": common["initial"],
        "integrator": common["integrator"],
        "samples": common["samples"],
        "outputs": common["outputs"],
        "systems": spec["systems"],
    }


def run_spec_for_member(compare_resolved: dict, name: str) -> dict:
    """Extract one member of a comparison as a standalone run spec."""
    entry = next((e for e in compare_resolved["systems"] if e["name"] == name), None)
    if entry is None:
        names = [e["name"] for e in compare_resolved["systems"]]
        raise SpecError(f"unknown system {name!r}; choose from {names}")
    kind = SystemKind(entry["system"]["kind"])
    initial = dict(compare_resolved["initial"])
    if not has_dual_velocity(kind):
        initial["vlam"] = None
    return {
        "problem": compare_resolved["problem"],
        "system": entry["system"],
        "horizon": compare_resolved["horizon"],
        "initial": initial,
        "integrator": compare_resolved["integrator"],
        "samples": compare_resolved["samples"],
        "outputs": compare_resolved["outputs"],
    }
