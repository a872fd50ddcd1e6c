"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (with its runtime) that pytest prints in
the terminal summary; ``python tests/test_acceptance.py`` prints them directly.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pesinlab.cocycle import SplittingField, lyapunov_spectrum_qr
from pesinlab.config import parse_config
from pesinlab.domination import (
    dichotomy_classify,
    domination_ratio,
    eigensplitting,
    minimal_domination_N,
    oseledec_provider,
    power_system,
)
from pesinlab.entropy import distortion_epsilon, distortion_radius, local_entropy_estimate, pesin_report, slice_bowen_measure
from pesinlab.graphs import (
    bowen_radius_along,
    critical_tau,
    linear_graph,
    propagate_along_bowen,
    safe_tau,
    slope_contraction_factor,
    transform_graph,
)
from pesinlab.runner import run_experiment
from pesinlab.systems import (
    block,
    cat_map,
    identity,
    linear_automorphism,
    perturbed_cat,
    rotation,
    standard_map,
)

LOG_LAMBDA = 0.9624236501
CAT_RATIO = (3 - np.sqrt(5)) / (3 + np.sqrt(5))
X = np.array([0.2, 0.3])


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is not None:
            self.checks.append((False, f"{exc_type.__name__}: {exc}"))
        ok = all(c for c, _ in self.checks) and bool(self.checks)
        failed = [d for c, d in self.checks if not c]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in self.checks)
        line = f"[{'PASS' if ok else 'FAIL'}] {self.number:>2}. {self.title} ({elapsed:.2f} s): {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None:
            assert ok, line
        return False


def test_01_lyapunov_oracle():
    with Criterion(1, "cat map Lyapunov spectrum") as c:
        t0 = time.perf_counter()
        s = lyapunov_spectrum_qr(cat_map(), X, 2000)
        dt = time.perf_counter() - t0
        err = max(abs(s.exponents[0] - LOG_LAMBDA), abs(s.exponents[1] + LOG_LAMBDA))
        c.check(err <= 1e-6, f"max error {err:.2e} <= 1e-6")
        c.check(dt < 1.0, f"runtime {dt:.3f} s < 1 s")


def test_02_domination_certificate():
    with Criterion(2, "domination certificate") as c:
        t0 = time.perf_counter()
        rep = domination_ratio(cat_map(), X, eigensplitting(cat_map()), 1, 50)
        axes = SplittingField(X, np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
        rot_N = minimal_domination_N(rotation(0.3, 0.7), X, axes, 10, 50)
        dt = time.perf_counter() - t0
        c.check(rep.N == 1, f"cat N = {rep.N}")
        c.check(abs(rep.worst_ratio - 0.145898) <= 1e-6 and abs(rep.worst_ratio - CAT_RATIO) <= 1e-9,
                f"worst ratio {rep.worst_ratio:.9f}")
        c.check(rot_N is None, f"rotation N = {rot_N}")
        c.check(dt < 1.0, f"runtime {dt:.3f} s < 1 s")


def test_03_power_identity():
    with Criterion(3, "power-system identity") as c:
        linear = {"cat": cat_map(), "golden": linear_automorphism([[1, 1], [1, 0]]),
                  "[[3,2],[1,1]]": linear_automorphism([[3, 2], [1, 1]])}
        for name, system in linear.items():
            sp = eigensplitting(system)
            lhs = domination_ratio(power_system(system, 3), X, sp, 1, 10).worst_ratio
            rhs = domination_ratio(system, X, sp, 3, 10).worst_ratio
            c.check(abs(lhs - rhs) <= 1e-12, f"{name}: |diff| = {abs(lhs - rhs):.1e}")


def test_04_graph_contraction():
    with Criterion(4, "graph-transform contraction") as c:
        tau = critical_tau(1, 1, 1)
        c.check(abs(tau - 1 / 8) <= 1e-12, f"tau* = {tau!r}")
        returned = safe_tau(1, 1, 1)
        factor = slope_contraction_factor(returned, 1, 1, 1)
        c.check(abs(returned - 1 / 16) <= 1e-12 and factor < 1, f"factor at tau = {returned} is {factor:.6f}")
        sp = eigensplitting(cat_map(), 1, X)
        g = linear_graph(X, sp, 0.2, 0.01)
        mult = transform_graph(cat_map(), X, g, sp).dispersion / g.dispersion
        c.check(abs(mult - 0.145898) <= 1e-6 and abs(mult - CAT_RATIO) <= 1e-9, f"dispersion multiplier {mult:.9f}")


def test_05_propagation_trace():
    with Criterion(5, "graph propagation along a Bowen ball") as c:
        t0 = time.perf_counter()
        cc, delta, n = 0.3, 0.05, 10
        sp = eigensplitting(cat_map(), 1, X)
        r = bowen_radius_along(cat_map(), X, sp, cc, n, delta)
        trace = propagate_along_bowen(cat_map(), X, n, delta, linear_graph(X, sp, cc, r)).trace
        target = cc * CAT_RATIO**10
        c.check(all(b <= a for a, b in zip(trace, trace[1:])) and max(trace) <= cc + 1e-12, "cat trace monotone <= 0.3")
        c.check(abs(trace[-1] - target) <= 0.1 * target, f"final {trace[-1]:.4e} vs {target:.4e}")

        system = perturbed_cat(0.02)
        provider = oseledec_provider(system, 1)
        certified = domination_ratio(system, X, provider, 1, n).N
        radius = distortion_radius(system, X, 0.2, cc, sample_count=2000)
        delta_p = min(0.02, radius)
        sf = provider(X)
        rp = bowen_radius_along(system, X, sf, cc, n, delta_p, safety=0.5)
        ptrace = propagate_along_bowen(system, X, n, delta_p, linear_graph(X, sf, cc, rp), provider).trace
        c.check(certified == 1, f"perturbed N = {certified}")
        c.check(max(ptrace) <= cc * (1 + 1e-9), f"perturbed max {max(ptrace):.4f} <= {cc}")
        dt = time.perf_counter() - t0
        c.check(dt < 1.0, f"runtime {dt:.3f} s < 1 s")


def test_06_bowen_slope():
    with Criterion(6, "Bowen-ball slope") as c:
        t0 = time.perf_counter()
        est = local_entropy_estimate(cat_map(), X, 0.1, [2, 6], "grid", {"resolution": 4096})
        dt = time.perf_counter() - t0
        c.check(0.87 <= est.h_hat <= 1.06, f"grid slope {est.h_hat:.4f} in [0.87, 1.06]")
        c.check(dt < 60, f"grid runtime {dt:.2f} s < 60 s")
        ns = np.arange(2, 9)
        vals = [-np.log(slice_bowen_measure(cat_map(), X, 0.0, int(k), 0.05)) for k in ns]
        slope = np.polyfit(ns, vals, 1)[0]
        c.check(abs(slope - 0.9624) <= 5e-2, f"slice slope {slope:.4f}")


# standard maps are shears near their invariant circles: Bowen balls shrink
# polynomially there, which biases short-horizon slopes upward
BUILTINS = [
    ("cat_map", cat_map(), {}),
    ("golden", linear_automorphism([[1, 1], [1, 0]]), {"point_count": 10}),
    ("perturbed_cat(0.05)", perturbed_cat(0.05), {"point_count": 10}),
    ("rotation", rotation(0.3, 0.7), {}),
    ("identity", identity(2), {"point_count": 5, "method_params": {"resolution": 1024}}),
    ("standard_map(0)", standard_map(0.0), {"point_count": 10, "n_range": [40, 120], "method_params": {"resolution": 1024}}),
    ("standard_map(1)", standard_map(1.0), {"point_count": 10, "n_range": [10, 30]}),
    ("block(cat, rotation)", block(cat_map(), rotation(0.3)),
     {"point_count": 5, "method": "nested_mc", "method_params": {"population": 1500, "replicates": 4}}),
]


def test_07_pesin_verdict():
    with Criterion(7, "Pesin verdict and Ruelle sandwich") as c:
        for name, system, cfg in BUILTINS:
            rep = pesin_report(system, cfg)
            lo, up = rep.mane_lower_bound, rep.ruelle_upper_bound
            c.check(lo <= up + 3 * rep.sigma + 0.02, f"{name}: {lo:.4f} <= {up:.4f} + 3*{rep.sigma:.4f} + 0.02")
            if name == "cat_map":
                c.check(rep.verdict == "FormulaHolds" and abs(lo - up) <= 0.1, f"cat verdict {rep.verdict}")
                c.check(abs(lo - LOG_LAMBDA) <= 0.1 and abs(up - LOG_LAMBDA) <= 0.1, "cat sides near log lambda")
            if name == "rotation":
                c.check(rep.verdict == "FormulaHolds" and abs(lo) <= 2e-2 and abs(up) <= 2e-2,
                        f"rotation {rep.verdict}, {lo:.4f} vs {up:.4f}")


def test_08_dichotomy(tmp_path):
    with Criterion(8, "dichotomy classifier") as c:
        cat = dichotomy_classify(cat_map(), X)
        c.check(str(cat) == "Dominated(1, 1)", f"cat {cat}")
        for name, system in (("rotation", rotation(0.3, 0.7)), ("standard_map(0)", standard_map(0.0))):
            v = dichotomy_classify(system, X, {"n": 2000})
            c.check(v.kind == "TrivialSpectrum", f"{name} {v.kind}")
        runs = [dichotomy_classify(standard_map(1.0), X).to_json() for _ in range(3)]
        c.check(runs[0] == runs[1] == runs[2], "3 reruns identical")
        doc = {"system": {"name": "standard_map", "K": 1.0}, "task": "dichotomy", "points": 4, "n": 500, "seed": 1}
        digests = [run_experiment(parse_config({**doc, "workers": w}), tmp_path / str(w)).digests() for w in (1, 4)]
        c.check(digests[0] == digests[1], "workers 1 and 4 give identical digests")


def test_09_distortion():
    with Criterion(9, "distortion budget") as c:
        for name, system in (("cat", cat_map()), ("golden", linear_automorphism([[1, 1], [1, 0]]))):
            eps = distortion_epsilon(system, X, 0.05, 0.0, 2000).epsilon
            c.check(eps == 0.0, f"{name} c=0 gives {eps}")
        ests = [distortion_epsilon(perturbed_cat(0.05), X, r, 0.1, 10_000) for r in (0.08, 0.04, 0.02, 0.01)]
        mono = all(b.epsilon <= a.epsilon + 2 * np.hypot(a.stderr, b.stderr) for a, b in zip(ests, ests[1:]))
        c.check(mono, "perturbed eps " + ", ".join(f"{e.epsilon:.4f}" for e in ests))


REPRO = [
    {"system": {"name": "cat_map"}, "task": "lyap", "n": 500},
    {"system": {"name": "perturbed_cat", "epsilon": 0.05}, "task": "dominate"},
    {"system": {"name": "standard_map", "K": 1.0}, "task": "dichotomy", "points": 2, "n": 500},
    {"system": {"name": "cat_map"}, "task": "bowen", "method": "nested_mc", "population": 300, "replicates": 3},
    {"system": {"name": "perturbed_cat", "epsilon": 0.02}, "task": "graph"},
    {"system": {"name": "cat_map"}, "task": "pesin", "point_count": 3, "lyap_n": 300, "resolution": 1024},
]


def test_10_reproducibility(tmp_path):
    with Criterion(10, "byte-identical reruns") as c:
        for i, doc in enumerate(REPRO):
            cfg = parse_config({**doc, "seed": 13})
            a = run_experiment(cfg, tmp_path / f"{i}a")
            b = run_experiment(cfg, tmp_path / f"{i}b")
            c.check(a.ok and a.digests() == b.digests(), f"{doc['task']} digests match")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
