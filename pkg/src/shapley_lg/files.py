"""Model, distribution, expression and report files.

Everything on disk is JSON. Floats are rendered by Python's shortest
round-trip representation, so reading a file back reproduces the exact
binary values that were written. Writers emit a canonical layout, making
repeated runs with the same inputs byte-identical.
"""

from __future__ import annotations

import json
import math
import re
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import subsets
from .blocks import BlockPartition, GroupedReport
from .errors import FileFormatError
from .expressions import FUNCTIONS, compile_expression
from .indices import SensitivityReport
from .model import LinearGaussianModel, validate_covariance, validate_model
from .montecarlo import BlackBoxModel, GaussianInput
from .permutations import CvSummary

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "beta": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "gamma": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
            "minItems": 1,
        },
        "mu": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["beta", "gamma"],
    "additionalProperties": False,
}

DISTRIBUTION_SCHEMA = {
    "type": "object",
    "properties": {
        "gamma": MODEL_SCHEMA["properties"]["gamma"],
        "mu": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["gamma"],
    "additionalProperties": False,
}

EXPRESSION_SCHEMA = {
    "type": "object",
    "properties": {
        "f": {"type": "string"},
        "consts": {"type": "object", "additionalProperties": {"type": "number"}},
        "defs": {"type": "object", "additionalProperties": {"type": "string"}},
        "blocks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "inputs": {
                        "type": "array",
                        "items": {"type": "string"},
                        "minItems": 1,
                    },
                    "expr": {"type": "string"},
                },
                "required": ["inputs", "expr"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["f"],
    "additionalProperties": False,
}

_SUBSET_ROW_SCHEMA = {
    "type": "object",
    "properties": {
        "subset": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "mask": {"type": "integer", "minimum": 0},
        "value": {"type": "number"},
    },
    "required": ["subset", "mask", "value"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "var_y": {"type": "number"},
        "shapley": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "sobol": {"type": "array", "items": _SUBSET_ROW_SCHEMA},
        "closed_sobol": {"type": "array", "items": _SUBSET_ROW_SCHEMA},
        "metadata": {
            "type": "object",
            "properties": {
                "algorithm": {"type": "string"},
                "p": {"type": "integer", "minimum": 1},
                "eval_count": {"type": ["integer", "null"]},
                "partition": {
                    "type": ["array", "null"],
                    "items": {"type": "array", "items": {"type": "integer"}},
                },
                "seed": {"type": ["integer", "null"]},
                "config": {"type": ["object", "null"]},
            },
            "required": ["algorithm", "p", "eval_count", "partition", "seed",
                         "config"],
            "additionalProperties": False,
        },
        "cv_summary": {
            "type": "object",
            "properties": {
                "per_i_cv": {"type": "array",
                             "items": {"type": ["number", "null"]}},
                "mean_cv": {"type": ["number", "null"]},
                "m": {"type": "integer"},
                "reps": {"type": "integer"},
                "seed": {"type": "integer"},
                "excluded": {"type": "array", "items": {"type": "integer"}},
            },
            "required": ["per_i_cv", "mean_cv", "m", "reps", "seed", "excluded"],
            "additionalProperties": False,
        },
    },
    "required": ["var_y", "shapley", "sobol", "closed_sobol", "metadata"],
    "additionalProperties": False,
}


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise FileFormatError(f"cannot read {path}: {err}") from err
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise FileFormatError(f"{path} is not valid JSON: {err}") from err


def _check_schema(obj, schema, path, what: str) -> None:
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as err:
        raise FileFormatError(f"{path} is not a valid {what} file: "
                              f"{err.message}") from err


def render_json(obj) -> str:
    """Canonical text for any document this package writes."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write(text: str, path=None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def read_model(path) -> LinearGaussianModel:
    """Load and validate a model file."""
    obj = _load_json(path)
    _check_schema(obj, MODEL_SCHEMA, path, "model")
    return validate_model(obj["beta"], obj["gamma"], obj.get("mu"))


def write_model(model: LinearGaussianModel, path=None) -> None:
    """Write a model file; ``mu`` is included only when it is not zero."""
    obj = {
        "beta": [float(v) for v in model.beta],
        "gamma": [[float(v) for v in row] for row in model.gamma],
    }
    if np.any(model.mu):
        obj["mu"] = [float(v) for v in model.mu]
    _write(render_json(obj), path)


def read_distribution(path) -> GaussianInput:
    """Load a Gaussian input distribution (covariance plus optional mean)."""
    obj = _load_json(path)
    _check_schema(obj, DISTRIBUTION_SCHEMA, path, "distribution")
    gamma = validate_covariance(obj["gamma"])
    mu = obj.get("mu")
    if mu is None:
        mu = np.zeros(gamma.shape[0])
    mu = np.asarray(mu, dtype=float)
    if mu.size != gamma.shape[0]:
        raise FileFormatError(
            f"{path}: mu has length {mu.size} but gamma is "
            f"{gamma.shape[0]} x {gamma.shape[0]}"
        )
    return GaussianInput(mu=mu, gamma=gamma)


_INPUT_NAME_RE = re.compile(r"^x([1-9][0-9]*)$")


def input_names(p: int) -> list[str]:
    """Conventional input names ``x1 .. xp``."""
    return [f"x{i}" for i in range(1, p + 1)]


def read_expression_file(path) -> dict:
    """Load and schema-check an expression file; compilation happens later."""
    obj = _load_json(path)
    _check_schema(obj, EXPRESSION_SCHEMA, path, "expression")
    reserved = set(FUNCTIONS)
    declared = list(obj.get("consts", {})) + list(obj.get("defs", {}))
    for name in declared:
        if name in reserved or _INPUT_NAME_RE.match(name):
            raise FileFormatError(
                f"{path}: name {name!r} collides with a function or input name"
            )
    if len(set(declared)) != len(declared):
        raise FileFormatError(f"{path}: a name is declared twice")
    return obj


def _compile_with_defs(text: str, base_names, consts: dict, defs: dict,
                       strict: bool):
    """Compile ``text`` with constants and resolvable definitions in scope.

    Definitions are evaluated in file order; in non-strict mode ones that
    reference unavailable names (e.g. inputs outside a block) are dropped
    from scope instead of failing.
    """
    available = set(base_names) | set(consts)
    resolved = []
    for name, body in defs.items():
        try:
            fn = compile_expression(body, available)
        except FileFormatError:
            if strict:
                raise
            continue
        resolved.append((name, fn))
        available.add(name)
    main = compile_expression(text, available)

    def run(env: dict):
        scope = dict(consts)
        scope.update(env)
        for name, fn in resolved:
            scope[name] = fn(scope)
        return main(scope)

    return run


def build_function(expr_obj: dict, p: int) -> BlackBoxModel:
    """Black-box model of the full expression over inputs ``x1 .. xp``."""
    consts = {k: float(v) for k, v in expr_obj.get("consts", {}).items()}
    defs = expr_obj.get("defs", {})
    names = input_names(p)
    run = _compile_with_defs(expr_obj["f"], names, consts, defs, strict=True)

    def eval_batch(x: np.ndarray, _names=tuple(names)):
        env = {_names[i]: x[:, i] for i in range(len(_names))}
        # constant subexpressions may collapse to a scalar
        return np.broadcast_to(np.asarray(run(env), dtype=float),
                               (x.shape[0],))

    return BlackBoxModel(eval=eval_batch, p=p)


def build_block_functions(expr_obj: dict,
                          p: int) -> tuple[list[BlackBoxModel], BlockPartition]:
    """Per-group black-box models and the partition they induce.

    Each block lists its inputs (ascending ``x<i>`` names) and an expression
    over them; the input lists must partition ``x1 .. xp``.
    """
    if "blocks" not in expr_obj:
        raise FileFormatError("expression file declares no blocks")
    consts = {k: float(v) for k, v in expr_obj.get("consts", {}).items()}
    defs = expr_obj.get("defs", {})
    entries = []
    for blk in expr_obj["blocks"]:
        indices = []
        for name in blk["inputs"]:
            match = _INPUT_NAME_RE.match(name)
            if match is None or int(match.group(1)) > p:
                raise FileFormatError(
                    f"block input {name!r} is not one of x1 .. x{p}"
                )
            indices.append(int(match.group(1)))
        if indices != sorted(indices):
            raise FileFormatError(
                f"block inputs {blk['inputs']} must be listed in ascending order"
            )
        entries.append((tuple(indices), blk))
    try:
        partition = BlockPartition.from_groups([g for g, _ in entries], p)
    except ValueError as err:
        raise FileFormatError(f"block inputs do not partition x1 .. x{p}: "
                              f"{err}") from err

    # Models must line up with partition.groups, which sorts by first member.
    entries.sort(key=lambda item: item[0][0])
    models = []
    for _, blk in entries:
        local = tuple(blk["inputs"])
        run = _compile_with_defs(blk["expr"], local, consts, defs, strict=False)

        def eval_batch(x: np.ndarray, _names=local, _run=run):
            env = {_names[i]: x[:, i] for i in range(len(_names))}
            return np.broadcast_to(np.asarray(_run(env), dtype=float),
                                   (x.shape[0],))

        models.append(BlackBoxModel(eval=eval_batch, p=len(local)))
    return models, partition


def _subset_rows(pairs, p: int) -> list[dict]:
    return [
        {
            "subset": [int(i) for i in subsets.decode(int(mask), p)],
            "mask": int(mask),
            "value": float(value),
        }
        for mask, value in pairs
    ]


def _metadata(algorithm: str, p: int, *, eval_count=None, partition=None,
              seed=None, config=None) -> dict:
    if partition is not None:
        partition = [[int(i) for i in g] for g in partition.groups]
    return {
        "algorithm": algorithm,
        "p": int(p),
        "eval_count": None if eval_count is None else int(eval_count),
        "partition": partition,
        "seed": None if seed is None else int(seed),
        "config": config,
    }


def report_from_sensitivity(rep: SensitivityReport, algorithm: str) -> dict:
    """Report document for a full-lattice computation."""
    p = rep.p
    size = 1 << p
    return {
        "var_y": float(rep.var_y),
        "shapley": [float(v) for v in rep.shapley],
        "sobol": _subset_rows(((j, rep.sobol[j]) for j in range(size)), p),
        "closed_sobol": _subset_rows(
            ((j, rep.closed_sobol[j]) for j in range(size)), p
        ),
        "metadata": _metadata(algorithm, p, eval_count=rep.eval_count),
    }


def report_from_grouped(grep: GroupedReport, algorithm: str) -> dict:
    """Report document for the per-group computation.

    Index rows cover the subsets contained in a single group; any other
    subset's Sobol index is zero by construction and not materialised.
    """
    p = grep.p
    sobol_pairs = [(0, 0.0)]
    closed_pairs = [(0, 0.0)]
    for j, group in enumerate(grep.partition.groups):
        weight = float(grep.group_weights[j])
        rep = grep.group_reports[j]
        for local in range(1, 1 << len(group)):
            gmask = sum(1 << (group[t] - 1)
                        for t in range(len(group)) if local >> t & 1)
            sobol_pairs.append((gmask, grep.scaled_sobol[j][local]))
            closed_pairs.append((gmask, weight * rep.closed_sobol[local]))
    sobol_pairs.sort()
    closed_pairs.sort()
    return {
        "var_y": float(grep.var_y),
        "shapley": [float(v) for v in grep.shapley],
        "sobol": _subset_rows(sobol_pairs, p),
        "closed_sobol": _subset_rows(closed_pairs, p),
        "metadata": _metadata(algorithm, p, eval_count=grep.eval_count,
                              partition=grep.partition),
    }


def report_from_estimate(shapley, var_y: float, algorithm: str, *, seed=None,
                         config=None, cv: CvSummary | None = None) -> dict:
    """Report document for an estimator; index rows are left empty."""
    doc = {
        "var_y": float(var_y),
        "shapley": [float(v) for v in shapley],
        "sobol": [],
        "closed_sobol": [],
        "metadata": _metadata(algorithm, len(shapley), seed=seed, config=config),
    }
    if cv is not None:
        doc["cv_summary"] = {
            "per_i_cv": [None if math.isnan(v) else float(v)
                         for v in cv.per_i_cv],
            "mean_cv": None if math.isnan(cv.mean_cv) else float(cv.mean_cv),
            "m": int(cv.m),
            "reps": int(cv.reps),
            "seed": int(cv.seed),
            "excluded": [int(i) for i in cv.excluded],
        }
    return doc


def write_report(doc: dict, path=None) -> None:
    """Schema-check and write a report document (stdout when no path)."""
    _check_schema(doc, REPORT_SCHEMA, path or "<stdout>", "report")
    _write(render_json(doc), path)


def read_report(path) -> dict:
    obj = _load_json(path)
    _check_schema(obj, REPORT_SCHEMA, path, "report")
    return obj
