"""Experiment configuration: YAML documents validated against per-command schemas."""
from __future__ import annotations

import copy
from fractions import Fraction
from pathlib import Path

import jsonschema
import yaml

from .dynamics import HamiltonianSpec, builtin_hamiltonian
from .errors import ConfigError
from .moyal import PolySymbol, parse_symbol

_pos = {"type": "number", "exclusiveMinimum": 0}
_num = {"type": "number"}
_complex = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_span = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_pow2 = {"type": "integer", "minimum": 64}

HAMILTONIAN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["free", "harmonic", "quartic", "pendulum", "polynomial"]},
        "mass": _pos,
        "omega": _pos,
        "lambda": _pos,
        "expression": {"type": "string", "minLength": 1},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "free"}}}, "then": {"required": ["mass"]}},
        {"if": {"properties": {"kind": {"const": "harmonic"}}}, "then": {"required": ["mass", "omega"]}},
        {"if": {"properties": {"kind": {"const": "quartic"}}}, "then": {"required": ["mass", "lambda"]}},
        {"if": {"properties": {"kind": {"const": "polynomial"}}}, "then": {"required": ["expression"]}},
    ],
}

PACKET = {
    "type": "object",
    "additionalProperties": False,
    "required": ["q0", "p0"],
    "properties": {"Z": _complex, "q0": _num, "p0": _num},
}

GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["half_width", "N"],
    "properties": {"half_width": _pos, "N": _pow2},
}

HBARS = {"type": "array", "items": _pos, "minItems": 1}

SCHEMAS = {
    "propagate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["hamiltonian", "packet", "grid", "t_span", "hbar"],
        "properties": {
            "hamiltonian": HAMILTONIAN,
            "packet": PACKET,
            "grid": GRID,
            "t_span": _span,
            "hbar": HBARS,
            "germ": {"enum": ["moebius", "riccati"]},
            "flow_tol": _pos,
            "oracle_tol": _pos,
            "n_out": {"type": "integer", "minimum": 2},
            "snapshots": {"type": "boolean"},
            "workers": {"type": "integer", "minimum": 1},
        },
    },
    "compare-oracle": {
        "type": "object",
        "additionalProperties": False,
        "required": ["grid", "t", "hbar"],
        "properties": {
            "hamiltonian": HAMILTONIAN,
            "packet": PACKET,
            "grid": GRID,
            "t": _pos,
            "hbar": HBARS,
            "random_quadratic": {"type": "integer", "minimum": 1},
            "oracle_tol": _pos,
        },
    },
    "maslov": {
        "type": "object",
        "additionalProperties": False,
        "required": ["hamiltonian", "t_span"],
        "properties": {
            "hamiltonian": HAMILTONIAN,
            "q0": _num,
            "p0": _num,
            "t_span": _span,
            "Z_real": _num,
            "eps": {"type": "array", "items": _pos, "minItems": 2},
            "samples": {"type": "integer", "minimum": 2},
        },
    },
    "canonical": {
        "type": "object",
        "additionalProperties": False,
        "required": ["curve"],
        "properties": {
            "curve": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["graph", "circle"]},
                    "S": {"type": "string", "minLength": 1},
                    "amplitude_width": _pos,
                    "alpha_range": _span,
                    "samples_per_sqrt_hbar": {"type": "integer", "minimum": 4},
                    "radius": _pos,
                    "samples": {"type": "integer", "minimum": 16},
                    "Zf": _complex,
                },
                "allOf": [
                    {"if": {"properties": {"kind": {"const": "graph"}}},
                     "then": {"required": ["S", "alpha_range"]}},
                    {"if": {"properties": {"kind": {"const": "circle"}}},
                     "then": {"required": ["radius"]}},
                ],
            },
            "grid": GRID,
            "hbar": HBARS,
        },
    },
    "diagrams": {
        "type": "object",
        "additionalProperties": False,
        "required": ["N", "L"],
        "properties": {
            "N": {"type": "integer", "minimum": 0, "maximum": 4},
            "L": {"type": "integer", "minimum": 0, "maximum": 8},
            "mass": _pos,
            "hbar": _pos,
            "g": _num,
            "t_window": _span,
            "kind": {"enum": ["PV", "Feynman", "retarded"]},
            "evaluate": {"type": "boolean"},
        },
    },
    "tree-check": {
        "type": "object",
        "additionalProperties": False,
        "required": ["mass", "g", "u0", "v0", "t"],
        "properties": {
            "mass": _pos,
            "g": _num,
            "u0": _num,
            "v0": _num,
            "t": {"type": "array", "items": _pos, "minItems": 1},
            "orders": {"type": "array", "items": {"enum": [0, 1, 2]}, "minItems": 1},
            "coupling_sign": {"enum": [-1, 1]},
        },
    },
}

DEFAULTS = {
    "propagate": {"germ": "moebius", "flow_tol": 1e-10, "oracle_tol": 1e-5, "n_out": 11,
                  "snapshots": False, "workers": 1},
    "compare-oracle": {"oracle_tol": 1e-5},
    "maslov": {"q0": 0.0, "p0": 0.0, "Z_real": 0.0, "eps": [1e-2, 1e-3, 1e-4], "samples": 201},
    "canonical": {"grid": {"half_width": 8.0, "N": 512}, "hbar": [0.1, 0.05, 0.025],
                  "curve": {"amplitude_width": 1.0, "samples_per_sqrt_hbar": 20, "samples": 400, "Zf": [0.0, 1.0]}},
    "diagrams": {"mass": 1.0, "hbar": 1.0, "g": 1.0, "t_window": [0.0, 1.0], "kind": "PV", "evaluate": True},
    "tree-check": {"orders": [1, 2], "coupling_sign": -1},
}


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in doc.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _path(err) -> str:
    return "/".join(str(x) for x in err.absolute_path) or "<root>"


def validate(command: str, doc) -> dict:
    """Validate ``doc`` for ``command`` and return it with defaults filled in."""
    if command not in SCHEMAS:
        raise ConfigError(f"no configuration schema for command {command!r}", "<root>")
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping", "<root>")
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: ([str(x) for x in e.absolute_path], e.message))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _path(e))
    cfg = _merge(DEFAULTS.get(command, {}), doc)
    # the merged document must still satisfy the schema
    for e in validator.iter_errors(cfg):
        raise ConfigError(e.message, _path(e))
    grid = cfg.get("grid")
    if grid and grid["N"] & (grid["N"] - 1):
        raise ConfigError("must be a power of two", "grid/N")
    for key in ("t_span", "t_window"):
        if key in cfg and not cfg[key][1] > cfg[key][0]:
            raise ConfigError("end must exceed start", key)
    return cfg


def load_config(path, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}", "<file>") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}", "<file>") from exc
    return validate(command, doc)


def _exact(x) -> Fraction:
    return Fraction(str(x))


def build_hamiltonian(spec: dict) -> HamiltonianSpec:
    """``p^2/(2 mass) + V(q)`` for the named kinds, or a symbol expression."""
    kind = spec["kind"]
    if kind == "pendulum":
        return builtin_hamiltonian("pendulum")
    if kind == "polynomial":
        return HamiltonianSpec.from_symbol(parse_symbol(spec["expression"], 1), name=spec["expression"])
    m = _exact(spec["mass"])
    terms = {((0, 2), 0): 1 / (2 * m)}
    if kind == "harmonic":
        terms[((2, 0), 0)] = m * _exact(spec["omega"]) ** 2 / 2
    elif kind == "quartic":
        terms[((4, 0), 0)] = _exact(spec["lambda"]) / 4
    return HamiltonianSpec.from_symbol(PolySymbol(1, terms), name=kind)


def quadratic_coefficients(H: HamiltonianSpec):
    """``(a, b, c)`` of ``q a q/2 + q b p + p c p/2`` for a quadratic symbol, else ``None``."""
    sym = H.symbol
    if sym is None or sym.degree() > 2:
        return None
    h0 = sym.hbar_part(0)
    a = b = c = 0.0
    for (exps, _), coef in h0.terms.items():
        qe, pe = exps
        v = complex(coef).real
        if (qe, pe) == (2, 0):
            a = 2 * v
        elif (qe, pe) == (1, 1):
            b = v
        elif (qe, pe) == (0, 2):
            c = 2 * v
        elif qe + pe == 1:
            return None
    return a, b, c
