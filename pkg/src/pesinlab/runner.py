"""
Experiment orchestration: dispatch a validated config to its task, write
CSV/JSON artifacts and a manifest with SHA-256 digests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cocycle import IndeterminateSplitting, lyapunov_spectrum_qr
from .config import ExperimentConfig
from .domination import (
    DominationReport,
    dichotomy_classify,
    domination_ratio,
    minimal_domination_N,
    oseledec_provider,
)
from .entropy import (
    default_splitting,
    derive_seed,
    local_entropy_estimate,
    pesin_report,
    _pmap,
)
from .graphs import bowen_radius_along, linear_graph, propagate_along_bowen
from .systems import make_system, sample_lebesgue

log = logging.getLogger(__name__)

DEFAULT_POINT = (0.2137, 0.3891, 0.5702, 0.7413)


@dataclass
class RunManifest:
    config: dict
    version: str
    duration: float
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def digests(self) -> dict:
        return {f["path"]: f["sha256"] for f in self.files}

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "duration_seconds": self.duration,
            "files": self.files,
            "warnings": self.warnings,
            "errors": self.errors,
        }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _point(cfg: ExperimentConfig, dim: int):
    if "x" in cfg.params:
        return np.asarray(cfg.params["x"], dtype=float)
    return np.asarray(DEFAULT_POINT[:dim], dtype=float) if dim <= len(DEFAULT_POINT) else sample_lebesgue(cfg.seed, 1, dim)[0]


def _method_params(cfg):
    keys = ("resolution", "population", "replicates", "mcmc_steps")
    return {k: cfg.params[k] for k in keys if k in cfg.params} or None


# each task returns ({filename: text}, [warnings])


def _task_lyap(system, cfg):
    spectrum = lyapunov_spectrum_qr(system, _point(cfg, system.dim), cfg.get("n", 2000), cfg.get("qr_stride", 1),
                                cfg.get("warmup", 50))
    return {"spectrum.json": _dumps(spectrum.to_json())}, []


def _task_dominate(system, cfg):
    x = _point(cfg, system.dim)
    j = cfg.get("j", 1)
    N_max, window = cfg.get("N_max", 10), cfg.get("window", 10)
    try:
        source = oseledec_provider(system, j, cfg.get("splitting_horizon", 40))
        if system.linear:
            source = default_splitting(system, x, j)
        N = minimal_domination_N(system, x, source, N_max, window)
        report = domination_ratio(system, x, source, N or N_max, window)
        out = {**report.to_json(), "N": N, "reason": None}
    except (IndeterminateSplitting, ValueError, np.linalg.LinAlgError) as exc:
        out = {**DominationReport(None, float("nan"), window, []).to_json(), "reason": str(exc)}
        out["worst_ratio"] = None
    out.update({"x": x.tolist(), "j": j, "N_max": N_max})
    warnings = [] if out["N"] is not None else [f"no N <= {N_max} certified: {out['reason'] or 'ratio > 1/2'}"]
    return {"domination.json": _dumps(out)}, warnings


def _task_dichotomy(system, cfg):
    params = {k: cfg.params[k] for k in ("n", "N_max", "window", "gap_threshold", "splitting_horizon") if k in cfg.params}
    if "x" in cfg.params:
        points = np.atleast_2d(cfg.params["x"])
    else:
        points = sample_lebesgue(cfg.seed, cfg.get("points", 1), system.dim)
    verdicts = _pmap(lambda p: dichotomy_classify(system, p, params), list(points), cfg.workers)
    rows = [{"index": i, "x": p.tolist(), **v.to_json()} for i, (p, v) in enumerate(zip(points, verdicts))]
    undecided = sum(v.kind == "Indeterminate" for v in verdicts)
    warnings = [f"{undecided} point(s) Indeterminate"] if undecided else []
    return {"dichotomy.json": _dumps({"verdicts": rows, "heuristic": "finite-horizon classifier"})}, warnings


def _task_bowen(system, cfg):
    x = _point(cfg, system.dim)
    est = local_entropy_estimate(system, x, cfg.get("delta", 0.1), cfg.get("n_range", [2, 6]),
                                 cfg.get("method", "grid"), _method_params(cfg), derive_seed(cfg.seed, 0))
    return {
        "bowen.csv": _csv(("n", "measure", "stderr", "method"), est.rows()),
        "bowen.json": _dumps(est.to_json()),
    }, []


def _task_graph(system, cfg):
    x = _point(cfg, system.dim)
    j = cfg.get("j", 1)
    delta, n, c = cfg.get("delta", 0.05), cfg.get("n", 10), cfg.get("c", 0.3)
    horizon = cfg.get("splitting_horizon", 40)
    sf = default_splitting(system, x, j, horizon)
    source = sf if system.linear else oseledec_provider(system, j, horizon)
    radius = bowen_radius_along(system, x, sf, c, n, delta, safety=0.5)
    graph = linear_graph(x, sf, c, radius, cfg.get("samples", 200))
    prop = propagate_along_bowen(system, x, n, delta, graph, source)
    warnings = [] if max(prop.trace) <= c * (1 + 1e-9) else ["dispersion exceeded its initial value"]
    summary = {"x": x.tolist(), "c": c, "delta": delta, "n": n, "radius": radius, "trace": prop.trace}
    return {"graph.csv": _csv(("step", "dispersion"), prop.rows()), "graph.json": _dumps(summary)}, warnings


def _task_pesin(system, cfg):
    keys = ("delta", "deltas", "point_count", "n_range", "method", "lyap_n", "gap_threshold", "tol")
    pc = {k: cfg.params[k] for k in keys if k in cfg.params}
    pc.update(seed=cfg.seed, workers=cfg.workers, method_params=_method_params(cfg))
    report = pesin_report(system, pc)
    data = report.to_json()
    # worker count is a scheduling hint and must not change the artifact bytes
    data["config"].pop("workers", None)
    warnings = [] if report.verdict == "FormulaHolds" else [f"verdict {report.verdict}"]
    return {"pesin_report.json": _dumps(data)}, warnings


TASK_RUNNERS = {
    "lyap": _task_lyap,
    "dominate": _task_dominate,
    "dichotomy": _task_dichotomy,
    "bowen": _task_bowen,
    "graph": _task_graph,
    "pesin": _task_pesin,
}


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunManifest:
    """Run one task and write its artifacts plus ``manifest.json``.

    Module errors are recorded in the manifest rather than raised; I/O
    failures propagate.
    """
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    echo = config.to_dict()
    # where the run is written and how it is scheduled do not change results
    echo.pop("workers")
    echo.pop("out")
    manifest = RunManifest(config=echo, version=__version__, duration=0.0)
    system = make_system(config.system)
    try:
        files, warnings = TASK_RUNNERS[config.task](system, config)
    except Exception as exc:  # recorded, reported as an operational failure
        log.exception("task %s failed", config.task)
        files, warnings = {}, []
        manifest.errors.append(f"{type(exc).__name__}: {exc}")
    files["config.json"] = _dumps(echo)
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        manifest.files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    manifest.warnings.extend(warnings)
    manifest.duration = time.perf_counter() - start
    (out / "manifest.json").write_text(_dumps(manifest.to_json()))
    return manifest


def emit_plot_data(report_dir, out_dir=None) -> dict:
    """Flatten Bowen estimates and dispersion traces into two-column CSV series.

    Returns {filename: rows}; files are written to ``out_dir`` when given.
    """
    report_dir = Path(report_dir)
    series = {}
    bowen = report_dir / "bowen.json"
    if bowen.exists():
        est = json.loads(bowen.read_text())
        lo, hi = est["fit_range"]
        series["plot_bowen.csv"] = (("n", "neg_log_measure"),
                                    [(r["n"], -math.log(r["measure"])) for r in est["records"] if lo <= r["n"] <= hi])
    graph = report_dir / "graph.csv"
    if graph.exists():
        with graph.open() as fh:
            rows = list(csv.reader(fh))[1:]
        series["plot_graph.csv"] = (("step", "dispersion"), [(int(s), float(v)) for s, v in rows])
    if not series:
        raise FileNotFoundError(f"no report files in {report_dir}; expected bowen.json and/or graph.csv")
    result = {}
    for name, (header, rows) in series.items():
        result[name] = rows
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / name).write_text(_csv(header, rows))
    return result
