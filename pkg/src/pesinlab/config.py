"""
Strict JSON experiment configuration.

Example::

    {"system": {"name": "cat_map"}, "task": "lyap", "n": 2000, "seed": 7, "out": "runs/a"}

Unknown keys anywhere are rejected; every error carries the path of the
offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .systems import InvalidSystem, make_system

TASKS = ("lyap", "dominate", "dichotomy", "bowen", "graph", "pesin")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _int(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return "must be an integer"
        if lo is not None and v < lo:
            return f"must be >= {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
    return check


def _real(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            return "must be a finite number"
        if lo is not None and (v <= lo if lo_open else v < lo):
            return f"must be {'>' if lo_open else '>='} {lo}"
        if hi is not None and (v >= hi if hi_open else v > hi):
            return f"must be {'<' if hi_open else '<='} {hi}"
    return check


def _choice(*options):
    def check(v):
        if v not in options:
            return f"must be one of {list(options)}"
    return check


def _n_range(v):
    if not isinstance(v, list) or len(v) != 2 or any(isinstance(a, bool) or not isinstance(a, int) for a in v):
        return "must be a list [n_min, n_max] of integers"
    if v[0] < 0 or v[1] - v[0] < 3:
        return "needs n_min >= 0 and n_max - n_min >= 3"
    if v[1] > 1000:
        return "n_max must be <= 1000"


def _point(v):
    if not isinstance(v, list) or not v:
        return "must be a non-empty list of numbers"
    if any(isinstance(a, bool) or not isinstance(a, (int, float)) or not math.isfinite(a) for a in v):
        return "must contain finite numbers"


def _deltas(v):
    if not isinstance(v, list) or not v:
        return "must be a non-empty list"
    for d in v:
        msg = _real(0, 0.5, lo_open=True, hi_open=True)(d)
        if msg:
            return "each entry " + msg


_DELTA = _real(0, 0.5, lo_open=True, hi_open=True)

# name -> (validator, tasks accepting it)
PARAMS = {
    "x": (_point, TASKS[:-1]),
    "n": (_int(0, 10**7), ("lyap", "dichotomy", "graph")),
    "qr_stride": (_int(1, 10), ("lyap",)),
    "warmup": (_int(0, 10**5), ("lyap",)),
    "j": (_int(1, 64), ("dominate", "graph")),
    "N_max": (_int(1, 1000), ("dominate", "dichotomy")),
    "window": (_int(0, 1000), ("dominate", "dichotomy")),
    "splitting_horizon": (_int(5, 300), ("dominate", "dichotomy", "graph")),
    "gap_threshold": (_real(0, 1, lo_open=True), ("dichotomy", "pesin")),
    "points": (_int(1, 10**5), ("dichotomy",)),
    "delta": (_DELTA, ("bowen", "graph", "pesin")),
    "deltas": (_deltas, ("pesin",)),
    "n_range": (_n_range, ("bowen", "pesin")),
    "method": (_choice("grid", "nested_mc"), ("bowen", "pesin")),
    "resolution": (_int(16, 1 << 15), ("bowen", "pesin")),
    "population": (_int(10, 10**7), ("bowen", "pesin")),
    "replicates": (_int(2, 1000), ("bowen", "pesin")),
    "mcmc_steps": (_int(0, 1000), ("bowen", "pesin")),
    "c": (_real(0, None, lo_open=True), ("graph",)),
    "samples": (_int(2, 10**4), ("graph",)),
    "point_count": (_int(1, 10**5), ("pesin",)),
    "lyap_n": (_int(100, 10**7), ("pesin",)),
    "tol": (_real(0, None, lo_open=True), ("pesin",)),
}

TOP_LEVEL = ("system", "task", "seed", "out", "workers")

# task-specific minimums layered over the generic ranges
_TASK_RULES = {
    ("lyap", "n"): _int(100),
    ("dichotomy", "n"): _int(500),
}


@dataclass
class ExperimentConfig:
    system: dict
    task: str
    seed: int = 0
    out: str = "runs/out"
    workers: int = 1
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"system": self.system, "task": self.task, "seed": self.seed, "out": self.out,
                "workers": self.workers, **self.params}

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def get(self, name, default=None):
        return self.params.get(name, default)


def parse_config(text: str | dict) -> ExperimentConfig:
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"$: malformed JSON ({exc.msg} at line {exc.lineno} column {exc.colno})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["$: top level must be an object"])

    errors = []
    task = doc.get("task")
    if task is None:
        errors.append("$.task: required")
    elif task not in TASKS:
        errors.append(f"$.task: unknown task {task!r}; expected one of {list(TASKS)}")

    system = doc.get("system")
    dim = None
    if system is None:
        errors.append("$.system: required")
    else:
        try:
            dim = make_system(system).dim
        except InvalidSystem as exc:
            errors.append(f"$.system: {exc}")

    seed = doc.get("seed", 0)
    msg = _int(0, 2**64 - 1)(seed)
    if msg:
        errors.append(f"$.seed: {msg}")
    out = doc.get("out", "runs/out")
    if not isinstance(out, str) or not out:
        errors.append("$.out: must be a non-empty string")
    workers = doc.get("workers", 1)
    msg = _int(1, 1024)(workers)
    if msg:
        errors.append(f"$.workers: {msg}")

    params = {}
    for key, value in doc.items():
        if key in TOP_LEVEL:
            continue
        if key not in PARAMS:
            errors.append(f"$.{key}: unknown field")
            continue
        check, tasks = PARAMS[key]
        if task in TASKS and task not in tasks:
            errors.append(f"$.{key}: not a parameter of task {task!r}")
            continue
        msg = check(value) or (_TASK_RULES[(task, key)](value) if (task, key) in _TASK_RULES else None)
        if msg:
            errors.append(f"$.{key}: {msg}")
            continue
        params[key] = value

    if "x" in params and dim is not None and len(params["x"]) != dim:
        errors.append(f"$.x: expected {dim} coordinates, got {len(params['x'])}")
    if params.get("method") == "grid" and dim is not None and dim > 2:
        errors.append("$.method: grid estimation supports d <= 2 only")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(system=system, task=task, seed=seed, out=out, workers=workers, params=params)
