"""Experiment configuration: JSON schema, validation, defaults and builders.

A config is a JSON object ``{"kind": ..., "seed": ..., "params": {...}}``.
Validation reports every violation at once.  :func:`resolve` fills in
defaults, so the resolved form is what reports embed; resolving a resolved
config is the identity.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from chaoscon.chaos.constraints import TailFunctionN
from chaoscon.chaos.tensors import ChaosSpec, CoefficientTensor, read_tensor_binary, read_tensor_text
from chaoscon.convex import ConvexFunctionSpec
from chaoscon.distributions import DistributionSpec

__all__ = [
    "ConfigError",
    "EXPERIMENT_KINDS",
    "build_chaos",
    "build_distribution",
    "build_function",
    "build_grid",
    "build_n_funcs",
    "build_tensor",
    "dumps",
    "load",
    "load_manifest",
    "resolve",
    "validate",
]

EXPERIMENT_KINDS = (
    "class-m-check",
    "entropy-tensorization",
    "lsi-ratio",
    "herbst",
    "chaos-moments",
    "logconcave-bounds",
    "tail-certificate",
    "decouple-compare",
    "exp-integrability-trend",
)


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}

_grid = {
    "oneOf": [
        {"type": "array", "items": _num, "minItems": 1},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "num"],
            "properties": {
                "start": _num,
                "stop": _num,
                "num": _int1,
                "spacing": {"enum": ["linear", "geometric"]},
            },
        },
    ]
}


def _obj(required: list[str], **props) -> dict:
    return {"type": "object", "additionalProperties": False, "required": required, "properties": props}


_distribution = {
    "oneOf": [
        _obj(["kind"], kind={"const": "gaussian"}, mean=_num, sd=_pos),
        _obj(["kind"], kind={"const": "rademacher"}),
        _obj(["kind"], kind={"const": "uniform"}, a=_num, b=_num),
        _obj(["kind", "v1", "p1", "v2"], kind={"const": "two_point"}, v1=_num,
             p1={"type": "number", "minimum": 0, "maximum": 1}, v2=_num),
        _obj(["kind", "atoms", "probs"], kind={"const": "discrete"},
             atoms={"type": "array", "items": _num, "minItems": 1},
             probs={"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}),
        _obj(["kind", "r"], kind={"const": "exp_power"}, r=_pos, scale=_pos),
    ]
}

_tensor = {
    "oneOf": [
        _obj(["kind", "n"], kind={"enum": ["identity", "zeros", "off_diagonal_ones", "normalized_ones"]},
             n=_int1, d={"type": "integer", "minimum": 1, "maximum": 4}, scale=_num),
        _obj(["kind", "n"], kind={"const": "random"}, n=_int1,
             d={"type": "integer", "minimum": 1, "maximum": 4}, seed={"type": "integer", "minimum": 0},
             entries={"enum": ["sign", "gaussian"]}, symmetrize={"type": "boolean"}, scale=_num),
        _obj(["kind", "entries"], kind={"const": "dense"}, entries={"type": "array"},
             symmetric={"type": "boolean"}, zero_diagonal={"type": "boolean"}, scale=_num),
        _obj(["kind", "path"], kind={"const": "file"}, path={"type": "string"},
             format={"enum": ["text", "binary"]}, scale=_num),
    ]
}

_chaos = _obj(
    ["tensors"],
    tensors={"type": "array", "items": _tensor},
    generator=_distribution,
    decoupled={"type": "boolean"},
    d={"type": "integer", "minimum": 1, "maximum": 4},
    n=_int1,
)

_n_func = {
    "oneOf": [
        _obj(["kind"], kind={"enum": ["rademacher", "exponential", "gaussian_like"]}),
        _obj(["kind", "knots", "values"], kind={"const": "tabulated"},
             knots={"type": "array", "items": _num, "minItems": 2},
             values={"type": "array", "items": _num, "minItems": 2}),
    ]
}

_function = {
    "oneOf": [
        _obj(["kind", "weights"], kind={"const": "linear"}, weights={"type": "array", "items": _num}),
        _obj(["kind", "index"], kind={"const": "coordinate"}, index={"type": "integer", "minimum": 0}),
        _obj(["kind", "pieces"], kind={"const": "random_max_affine"}, pieces=_int1,
             seed={"type": "integer", "minimum": 0}),
        _obj(["kind", "slopes", "intercepts"], kind={"const": "max_affine"},
             slopes={"type": "array", "items": {"type": "array", "items": _num}},
             intercepts={"type": "array", "items": _num}),
    ]
}

PARAMS = {
    "class-m-check": _obj(
        ["distribution", "m", "sigma_sq"],
        distribution=_distribution, m=_num, sigma_sq={"type": "number", "minimum": 0}, grid=_grid,
        quad_step=_pos, C=_pos, alpha=_pos,
        checks={"type": "array", "items": {"enum": ["class_m", "equivalence_ii", "subgaussian"]}, "minItems": 1},
    ),
    "entropy-tensorization": _obj(
        [], instances=_int1, max_factors={"type": "integer", "minimum": 1, "maximum": 4},
        max_atoms={"type": "integer", "minimum": 2, "maximum": 5},
        phi={"type": "array", "items": {"enum": ["square", "x_log_x"]}, "minItems": 1},
    ),
    "lsi-ratio": _obj(
        ["distribution", "dim", "function"], distribution=_distribution, dim=_int1, function=_function,
        lambda_grid=_grid, n_resamples=_int1, max_ratio=_pos,
    ),
    "herbst": _obj(
        ["distribution", "dim", "function", "C"], distribution=_distribution, dim=_int1, function=_function,
        C=_pos, t_grid=_grid,
    ),
    "chaos-moments": _obj(
        ["chaos", "p_grid"], chaos=_chaos, p_grid=_grid, centered={"type": "boolean"},
        bound={"enum": ["euclidean", "none"]}, n_outer=_int1, restarts=_int1, n_resamples=_int1,
    ),
    "logconcave-bounds": _obj(
        ["chaos", "p_grid"], chaos=_chaos, p_grid=_grid, n_funcs=_n_func, n_outer=_int1, restarts=_int1,
        n_resamples=_int1, band_limit=_pos,
    ),
    "tail-certificate": _obj(
        ["chaos", "alpha", "t_grid"], chaos=_chaos, alpha=_pos, t_grid=_grid,
        M={"oneOf": [_pos, _obj(["quantile"], quantile={"type": "number", "exclusiveMinimum": 0,
                                                        "exclusiveMaximum": 1})]},
        L_grid=_grid,
    ),
    "decouple-compare": _obj(
        ["tensor", "generator", "p_grid"], tensor=_tensor, generator=_distribution, p_grid=_grid,
        n_resamples=_int1,
    ),
    "exp-integrability-trend": _obj(
        ["alpha_grid"], alpha_grid=_grid, specs={"type": "array", "items": _chaos, "minItems": 1},
        family=_obj(["kind", "n"], kind={"enum": ["normalized_ones", "normalized_identity"]},
                    d={"type": "integer", "minimum": 1, "maximum": 4},
                    n={"type": "array", "items": _int1, "minItems": 1}),
    ),
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "params"],
    "properties": {
        "kind": {"enum": list(EXPERIMENT_KINDS)},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**63 - 1},
        "samples": {"type": "integer", "minimum": 0},
        "exact": {"type": "boolean"},
        "output": _obj([], dir={"type": "string"}, stem={"type": "string"}, figures={"type": "boolean"}),
        "params": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}, "required": ["kind"]},
         "then": {"properties": {"params": schema}}}
        for k, schema in PARAMS.items()
    ],
}

MANIFEST_SCHEMA = _obj(["configs"], configs={"type": "array", "minItems": 1,
                                             "items": {"oneOf": [{"type": "string"}, {"type": "object"}]}},
                       seed={"type": "integer", "minimum": 0})

DEFAULT_SAMPLES = {
    "class-m-check": 0,
    "entropy-tensorization": 0,
    "lsi-ratio": 100_000,
    "herbst": 1_000_000,
    "chaos-moments": 200_000,
    "logconcave-bounds": 200_000,
    "tail-certificate": 200_000,
    "decouple-compare": 200_000,
    "exp-integrability-trend": 200_000,
}

PARAM_DEFAULTS = {
    "class-m-check": {"grid": {"start": 1.0, "stop": 6.0, "num": 200, "spacing": "linear"}, "quad_step": 0.1,
                      "checks": ["class_m", "equivalence_ii"]},
    "entropy-tensorization": {"instances": 1000, "max_factors": 4, "max_atoms": 5, "phi": ["square", "x_log_x"]},
    "lsi-ratio": {"lambda_grid": [0.1, 0.25, 0.5, 1.0, 2.0], "n_resamples": 200},
    "herbst": {"t_grid": [1.0, 2.0, 3.0]},
    "chaos-moments": {"centered": False, "bound": "none", "n_outer": 2000, "restarts": 20, "n_resamples": 200},
    "logconcave-bounds": {"n_outer": 2000, "restarts": 20, "n_resamples": 200, "band_limit": 20.0},
    "tail-certificate": {"M": {"quantile": 0.5}},
    "decouple-compare": {"n_resamples": 200},
    "exp-integrability-trend": {},
}


def _kinds_of(alternative: dict) -> list:
    kind = alternative.get("properties", {}).get("kind", {})
    return [kind["const"]] if "const" in kind else list(kind.get("enum", []))


def _explain_one_of(err) -> str:
    """Say which kind-tagged alternative was meant and what is wrong with it."""
    inst = err.instance
    alts = err.validator_value
    if isinstance(inst, dict) and all(_kinds_of(a) for a in alts if isinstance(a, dict) and a.get("type") == "object"):
        known = [k for a in alts for k in _kinds_of(a)]
        if "kind" not in inst:
            return f"missing 'kind' (one of {', '.join(map(str, known))})"
        if inst["kind"] not in known:
            return f"unknown kind {inst['kind']!r} (expected one of {', '.join(map(str, known))})"
        for j, a in enumerate(alts):
            if inst["kind"] in _kinds_of(a):
                msgs = [e.message for e in err.context if e.relative_schema_path and e.relative_schema_path[0] == j]
                return f"kind {inst['kind']!r}: " + "; ".join(msgs)
    best = jsonschema.exceptions.best_match(err.context)
    return f"no accepted form matches ({best.message[:160]})"


def _errors(instance, schema) -> list[str]:
    validator = jsonschema.Draft202012Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "oneOf" and err.context:
            out.append(f"{where}: {_explain_one_of(err)}")
        else:
            out.append(f"{where}: {err.message}")
    return out


def _semantic_errors(cfg: dict) -> list[str]:
    """Checks the schema cannot express; each builder is tried and its error recorded."""
    errs = []
    params = cfg.get("params", {})
    for key in ("grid", "p_grid", "t_grid", "lambda_grid", "alpha_grid", "L_grid"):
        if key in params:
            try:
                g = build_grid(params[key])
                if key in ("p_grid",) and np.any(g < 1):
                    errs.append(f"params/{key}: moment orders must be >= 1")
                if key == "t_grid" and cfg["kind"] == "tail-certificate" and np.any(g < 1):
                    errs.append(f"params/{key}: t values must be >= 1")
            except ValueError as exc:
                errs.append(f"params/{key}: {exc}")
    builders = {"distribution": build_distribution, "generator": build_distribution, "tensor": build_tensor,
                "n_funcs": build_n_funcs}
    for key, fn in builders.items():
        if key in params:
            try:
                fn(params[key])
            except (ValueError, OSError) as exc:
                errs.append(f"params/{key}: {exc}")
    if "chaos" in params:
        try:
            build_chaos(params["chaos"])
        except (ValueError, OSError) as exc:
            errs.append(f"params/chaos: {exc}")
    for j, spec in enumerate(params.get("specs", [])):
        try:
            build_chaos(spec)
        except (ValueError, OSError) as exc:
            errs.append(f"params/specs/{j}: {exc}")
    if cfg.get("kind") == "exp-integrability-trend" and ("specs" in params) == ("family" in params):
        errs.append("params: give exactly one of 'specs' or 'family'")
    if "function" in params and "dim" in params:
        try:
            f = build_function(params["function"], params["dim"])
            if cfg.get("kind") == "herbst" and f.lipschitz > 1 + 1e-12:
                errs.append("params/function: must be 1-Lipschitz")
        except ValueError as exc:
            errs.append(f"params/function: {exc}")
    return errs


def validate(cfg: Any) -> list[str]:
    """Every violation in ``cfg`` (empty list when valid)."""
    errs = _errors(cfg, SCHEMA)
    if errs:
        return errs
    return _semantic_errors(cfg)


def resolve(cfg: dict, seed: int | None = None, samples: int | None = None, exact: bool | None = None) -> dict:
    """Validated copy of ``cfg`` with defaults and command-line overrides applied."""
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    out = copy.deepcopy(cfg)
    kind = out["kind"]
    out.setdefault("name", kind)
    out.setdefault("seed", 0)
    out.setdefault("samples", DEFAULT_SAMPLES[kind])
    out.setdefault("exact", False)
    output = out.setdefault("output", {})
    output.setdefault("dir", "out")
    output.setdefault("stem", out["name"])
    output.setdefault("figures", True)
    for k, v in PARAM_DEFAULTS[kind].items():
        out["params"].setdefault(k, copy.deepcopy(v))
    if seed is not None:
        out["seed"] = int(seed)
    if samples is not None:
        out["samples"] = int(samples)
    if exact:
        out["exact"] = True
    errs = validate(out)
    if errs:
        raise ConfigError(errs)
    return out


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None


def load_manifest(data: dict, base: Path) -> list[dict]:
    errs = _errors(data, MANIFEST_SCHEMA)
    if errs:
        raise ConfigError(errs)
    out = []
    for item in data["configs"]:
        cfg = load(base / item) if isinstance(item, str) else item
        if "seed" in data and "seed" not in cfg:
            cfg = {**cfg, "seed": data["seed"]}
        out.append(cfg)
    return out


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)


# -- builders ---------------------------------------------------------------

def build_grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        if spec.get("spacing", "linear") == "geometric":
            if start <= 0 or stop <= 0:
                raise ValueError("a geometric grid needs positive end points")
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)
    g = np.asarray(spec, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("grid values must be finite")
    return g


def build_distribution(spec: dict) -> DistributionSpec:
    try:
        return DistributionSpec.from_dict(spec)
    except TypeError as exc:
        raise ValueError(str(exc)) from None


def build_tensor(spec: dict, base: Path | None = None) -> CoefficientTensor:
    kind = spec["kind"]
    scale = float(spec.get("scale", 1.0))
    if kind == "identity":
        t = CoefficientTensor.identity(spec["n"], spec.get("d", 2))
    elif kind == "zeros":
        t = CoefficientTensor.zeros(spec["n"], spec.get("d", 2))
    elif kind == "off_diagonal_ones":
        t = CoefficientTensor.off_diagonal_ones(spec["n"], spec.get("d", 2))
    elif kind == "normalized_ones":
        d = spec.get("d", 1)
        n = spec["n"]
        t = CoefficientTensor(np.ones((n,) * d) / n ** (d / 2.0))
    elif kind == "random":
        t = CoefficientTensor.random(spec["n"], spec.get("d", 2), spec.get("seed", 0),
                                     kind=spec.get("entries", "sign"), symmetrize=spec.get("symmetrize", False))
    elif kind == "dense":
        t = CoefficientTensor(np.asarray(spec["entries"], dtype=float), spec.get("symmetric", False),
                              spec.get("zero_diagonal", False))
    elif kind == "file":
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        if spec.get("format", "text") == "binary":
            t = read_tensor_binary(path)
        else:
            ts = read_tensor_text(path)
            if len(ts) != 1:
                raise ValueError(f"{path} holds {len(ts)} tensors; list them as separate entries")
            t = ts[0]
    else:
        raise ValueError(f"unknown tensor kind {kind!r}")
    return t.scaled(scale) if scale != 1.0 else t


def build_chaos(spec: dict) -> ChaosSpec:
    family = [build_tensor(t) for t in spec["tensors"]]
    gen = build_distribution(spec.get("generator", {"kind": "rademacher"}))
    decoupled = spec.get("decoupled", True)
    if not family and not ("d" in spec and "n" in spec):
        raise ValueError("an empty tensor list needs explicit d and n")
    return ChaosSpec.iid(family, gen, spec.get("d"), spec.get("n"), decoupled)


def build_n_funcs(spec: dict) -> TailFunctionN:
    return TailFunctionN.from_dict(spec)


def build_function(spec: dict, dim: int) -> ConvexFunctionSpec:
    kind = spec["kind"]
    if kind == "linear":
        w = np.asarray(spec["weights"], dtype=float)
        if w.size != dim:
            raise ValueError(f"{w.size} weights for dimension {dim}")
        return ConvexFunctionSpec.linear(w)
    if kind == "coordinate":
        if spec["index"] >= dim:
            raise ValueError(f"coordinate {spec['index']} outside dimension {dim}")
        return ConvexFunctionSpec.linear(np.eye(dim)[spec["index"]])
    if kind == "random_max_affine":
        return ConvexFunctionSpec.random(dim, spec["pieces"], spec.get("seed", 0))
    if kind != "max_affine":
        raise ValueError(f"unknown function kind {kind!r}")
    if len(spec["slopes"]) != len(spec["intercepts"]):
        raise ValueError("need one intercept per slope row")
    f = ConvexFunctionSpec.from_rows([list(s) + [b] for s, b in zip(spec["slopes"], spec["intercepts"])])
    if f.dim != dim:
        raise ValueError(f"function has dimension {f.dim}, expected {dim}")
    return f
