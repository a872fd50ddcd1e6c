"""
Bowen balls, Lebesgue measure of Bowen balls, local entropy, the Mane lower
bound, the distortion constant of restricted determinants and the Pesin
entropy-formula report.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .cocycle import (
    SplittingField,
    chi,
    finite_time_oseledec_splitting,
    lyapunov_spectrum_qr,
    orthonormalize,
)
from .domination import eigensplitting
from .systems import SmoothSystem, sample_lebesgue, torus_distance, torus_point, wrap, wrap_difference

METHODS = ("grid", "nested_mc")
GRID_DEFAULTS = {"resolution": 4096}
NESTED_MC_DEFAULTS = {"population": 2000, "replicates": 8, "mcmc_steps": 10}


class EstimatorFailure(RuntimeError):
    pass


def derive_seed(seed: int, index: int) -> int:
    """Per-point seed, a pure function of (master seed, index)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ball_volume(d: int, radius: float) -> float:
    return math.pi ** (d / 2) / float(gamma_fn(d / 2 + 1)) * radius**d


# -- Bowen balls -------------------------------------------------------------


def in_bowen_ball(system: SmoothSystem, x, y, n: int, delta: float) -> bool:
    """True iff d(f^j x, f^j y) <= delta for 0 <= j <= n."""
    if delta <= 0 or n < 0:
        raise ValueError("need delta > 0 and n >= 0")
    a, b = torus_point(x), torus_point(y)
    for j in range(n + 1):
        if torus_distance(a, b) > delta:
            return False
        if j < n:
            a, b = system.forward(a), system.forward(b)
    return True


def bowen_exit_times(system: SmoothSystem, x, ys, n_max: int, delta: float) -> np.ndarray:
    """For each y, the first j <= n_max with d(f^j x, f^j y) > delta, or n_max + 1.

    y lies in B_n exactly when its exit time exceeds n.
    """
    a = torus_point(x)
    b = wrap(np.atleast_2d(ys))
    exit_at = np.full(b.shape[0], n_max + 1, dtype=np.int64)
    alive = np.arange(b.shape[0])
    for j in range(n_max + 1):
        out = torus_distance(b, a) > delta
        exit_at[alive[out]] = j
        alive = alive[~out]
        b = b[~out]
        if j == n_max or alive.size == 0:
            break
        a, b = system.forward(a), system.forward(b)
    return exit_at


def _grid_curve(system, x, n_max, delta, resolution):
    d = system.dim
    if d > 2:
        raise ValueError("grid estimation supports d <= 2 only; use nested_mc")
    R = int(resolution)
    x = torus_point(x)
    axes = []
    for i in range(d):
        lo = math.ceil((x[i] - delta) * R - 0.5)
        hi = math.floor((x[i] + delta) * R - 0.5)
        axes.append((np.arange(lo, hi + 1) + 0.5) / R)
    mesh = np.meshgrid(*axes, indexing="ij")
    shape = mesh[0].shape
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    exits = bowen_exit_times(system, x, pts, n_max, delta).reshape(shape)
    cell = 1.0 / R**d
    est = np.empty(n_max + 1)
    se = np.empty(n_max + 1)
    for n in range(n_max + 1):
        mask = exits > n
        est[n] = mask.sum() * cell
        se[n] = math.sqrt(_boundary_cells(mask) / 12.0) * cell
    return est, se


def _boundary_cells(mask: np.ndarray) -> int:
    # cells of the set with at least one axis neighbour outside it
    padded = np.pad(mask, 1, constant_values=False)
    interior = padded.copy()
    for axis in range(mask.ndim):
        interior &= np.roll(padded, 1, axis=axis) & np.roll(padded, -1, axis=axis)
    return int(np.count_nonzero(padded & ~interior))


def _uniform_ball(rng, m, d, radius):
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * radius * rng.random((m, 1)) ** (1.0 / d)


def _nested_mc_run(system, x, n_max, delta, population, mcmc_steps, rng):
    d = system.dim
    x = torus_point(x)
    h = _uniform_ball(rng, population, d, delta)
    ratios = np.empty(n_max)
    for k in range(n_max):
        inside = bowen_exit_times(system, x, x + h, k + 1, delta) > k + 1
        survivors = h[inside]
        if survivors.shape[0] == 0:
            raise EstimatorFailure(f"nested_mc: no survivors at stage {k + 1}; increase the population")
        ratios[k] = survivors.shape[0] / h.shape[0]
        if k == n_max - 1:
            break
        h = survivors[rng.integers(0, survivors.shape[0], population)]
        cov = np.atleast_2d(np.cov(survivors.T)) if survivors.shape[0] > d else np.zeros((d, d))
        scale = np.sqrt(np.max(np.diag(cov))) if np.any(cov) else delta * 1e-3
        chol = np.linalg.cholesky(cov * (2.38**2 / d) + np.eye(d) * (1e-6 * scale) ** 2)
        for _ in range(mcmc_steps):
            prop = h + rng.standard_normal(h.shape) @ chol.T
            ok = bowen_exit_times(system, x, x + prop, k + 1, delta) > k + 1
            h = np.where(ok[:, None], prop, h)
    return ball_volume(d, delta) * np.concatenate([[1.0], np.cumprod(ratios)])


def _nested_mc_curve(system, x, n_max, delta, population, replicates, mcmc_steps, seed):
    if n_max == 0:
        return np.array([ball_volume(system.dim, delta)]), np.zeros(1)
    runs = []
    for r in range(replicates):
        rng = np.random.default_rng(derive_seed(seed, r))
        runs.append(_nested_mc_run(system, x, n_max, delta, population, mcmc_steps, rng))
    runs = np.array(runs)
    est = runs.mean(axis=0)
    se = runs.std(axis=0, ddof=1) / math.sqrt(replicates) if replicates > 1 else np.zeros(n_max + 1)
    return est, se


def bowen_measure_curve(system: SmoothSystem, x, n_max: int, delta: float, method: str = "grid",
                        params: dict | None = None, seed: int = 0):
    """Estimates of nu(B_n(f, delta, x)) and their standard errors for n = 0..n_max.

    ``grid`` counts cell centres of a resolution-R lattice inside the Bowen
    ball (deterministic; the error is the boundary-cell rounding).
    ``nested_mc`` multiplies stagewise survival ratios nu(B_{k+1})/nu(B_k),
    refreshing the population by resampling and random-walk moves restricted
    to B_{k+1}; independent replicates give the standard error.
    """
    if delta <= 0 or delta >= 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if method == "grid":
        p = {**GRID_DEFAULTS, **(params or {})}
        return _grid_curve(system, x, n_max, delta, p["resolution"])
    if method == "nested_mc":
        p = {**NESTED_MC_DEFAULTS, **(params or {})}
        return _nested_mc_curve(system, x, n_max, delta, p["population"], p["replicates"], p["mcmc_steps"], seed)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def bowen_ball_measure(system: SmoothSystem, x, n: int, delta: float, method: str = "grid",
                       params: dict | None = None, seed: int = 0) -> dict:
    est, se = bowen_measure_curve(system, x, n, delta, method, params, seed)
    return {"estimate": float(est[n]), "standard_error": float(se[n])}


@dataclass
class BowenEstimate:
    x: np.ndarray
    delta: float
    records: list
    h_hat: float
    fit_range: tuple
    residual: float
    intercept: float = 0.0

    def rows(self):
        return [(r["n"], r["measure"], r["stderr"], r["method"]) for r in self.records]

    def to_json(self) -> dict:
        return {
            "x": self.x.tolist(),
            "delta": self.delta,
            "records": self.records,
            "h_hat": self.h_hat,
            "fit_range": list(self.fit_range),
            "residual": self.residual,
            "intercept": self.intercept,
        }


def weighted_slope(ns, values, variances):
    """Weighted least-squares line through (n, value); returns slope, intercept, weighted RMS residual."""
    ns = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float)
    w = 1.0 / np.asarray(variances, dtype=float)
    W = w.sum()
    nbar = (w * ns).sum() / W
    ybar = (w * y).sum() / W
    slope = (w * (ns - nbar) * (y - ybar)).sum() / (w * (ns - nbar) ** 2).sum()
    intercept = ybar - slope * nbar
    resid = y - (intercept + slope * ns)
    return float(slope), float(intercept), float(math.sqrt((w * resid**2).sum() / W))


def local_entropy_estimate(system: SmoothSystem, x, delta: float, n_range, method: str = "grid",
                           params: dict | None = None, seed: int = 0) -> BowenEstimate:
    """Slope of -log nu(B_n) against n over ``n_range``, a finite-horizon
    stand-in for the limsup defining the local entropy at x."""
    n_min, n_max = int(n_range[0]), int(n_range[1])
    if n_min < 0 or n_max - n_min < 3:
        raise ValueError("n_range needs n_max - n_min >= 3")
    est, se = bowen_measure_curve(system, x, n_max, delta, method, params, seed)
    if np.any(est[n_min:] <= 0):
        bad = n_min + int(np.flatnonzero(est[n_min:] <= 0)[0])
        raise EstimatorFailure(f"zero Bowen-ball estimate at n = {bad}; increase resolution/population")
    ns = np.arange(n_min, n_max + 1)
    y = -np.log(est[ns])
    var = (se[ns] / est[ns]) ** 2 + 1e-10
    slope, intercept, resid = weighted_slope(ns, y, var)
    records = [
        {"n": int(n), "measure": float(est[n]), "stderr": float(se[n]), "method": method}
        for n in range(n_max + 1)
    ]
    return BowenEstimate(torus_point(x), float(delta), records, slope, (n_min, n_max), resid, intercept)


def default_splitting(system: SmoothSystem, x, j: int = 1, horizon: int = 40) -> SplittingField:
    if system.linear:
        return eigensplitting(system, j, x)
    return finite_time_oseledec_splitting(system, x, horizon, j)


def slice_bowen_measure(system: SmoothSystem, x, offset: float, n: int, delta: float,
                        resolution: int = 200_000, splitting: SplittingField | None = None) -> float:
    """Length of {t in [-delta, delta] : x + offset e_E + t e_F in B_n(f, delta, x)}."""
    if system.dim != 2:
        raise ValueError("slice measures are defined for d = 2")
    if resolution < 1000:
        raise ValueError("resolution must be >= 1000")
    sf = splitting if splitting is not None else default_splitting(system, x)
    e_E, e_F = sf.E[:, 0], sf.F[:, 0]
    dt = 2.0 * delta / resolution
    t = -delta + (np.arange(resolution) + 0.5) * dt
    x = torus_point(x)
    ys = x + offset * e_E + t[:, None] * e_F
    return float(np.count_nonzero(bowen_exit_times(system, x, ys, n, delta) > n) * dt)


# -- distortion of restricted determinants -------------------------------------


def _restricted_logdet(J, Q):
    s = np.linalg.svd(J @ Q, compute_uv=False)
    return np.sum(np.log(s), axis=-1)


@dataclass
class DistortionEstimate:
    epsilon: float
    stderr: float
    radius: float
    c: float
    samples: int


def distortion_epsilon(system: SmoothSystem, x, radius: float, c: float, sample_count: int = 10_000,
                       seed: int = 0, splitting: SplittingField | None = None, batches: int = 10) -> DistortionEstimate:
    """Empirical sup of |log|det D_y f|_E| - log|det D_x f|_F(x)|| over y within
    ``radius`` of x and subspaces E that are graphs over F(x) with dispersion < c.

    ``stderr`` is the spread of the per-batch maxima.
    """
    if radius <= 0 or c < 0:
        raise ValueError("need radius > 0 and c >= 0")
    sf = splitting if splitting is not None else default_splitting(system, x)
    x = torus_point(x)
    d, k, j = system.dim, sf.dim_E, sf.dim_F
    rng = np.random.default_rng(seed)
    ys = wrap(x + _uniform_ball(rng, sample_count, d, radius))
    tilts = rng.standard_normal((sample_count, k, j))
    norms = np.linalg.norm(tilts, ord=2, axis=(1, 2))
    tilts *= (c * rng.random(sample_count) / np.where(norms > 0, norms, 1.0))[:, None, None]
    W = sf.F[None, :, :] + sf.E[None, :, :] @ tilts
    Q = np.linalg.qr(W)[0] if c > 0 else np.broadcast_to(orthonormalize(sf.F), (sample_count, d, j))
    ref = _restricted_logdet(system.jacobian(x), orthonormalize(sf.F))
    dev = np.abs(_restricted_logdet(system.jacobian(ys), Q) - ref)
    batch_max = np.array([b.max() for b in np.array_split(dev, batches)])
    return DistortionEstimate(float(dev.max()), float(batch_max.std(ddof=1)) if batches > 1 else 0.0,
                              float(radius), float(c), int(sample_count))


def distortion_radius(system: SmoothSystem, x, target: float, c: float, r_max: float = 0.25, iterations: int = 20,
                      sample_count: int = 10_000, seed: int = 0, splitting: SplittingField | None = None):
    """Largest radius (by bisection) whose distortion estimate stays below ``target``.

    Returns None when even tiny radii exceed the target, i.e. the tilt budget
    c alone already violates it.
    """
    def ok(r):
        return distortion_epsilon(system, x, r, c, sample_count, seed, splitting).epsilon < target

    if ok(r_max):
        return r_max
    lo, hi = 0.0, r_max
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else None


# -- Mane bound, Sigma_j partition, Pesin report ------------------------------


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ManeBound:
    bound: float
    stderr: float
    table: list
    excluded: int
    delta: float


def mane_lower_bound(system: SmoothSystem, delta: float, point_count: int, n_range, method: str = "grid",
                     params: dict | None = None, seed: int = 0, points=None, workers: int = 1) -> ManeBound:
    """Monte-Carlo average over Lebesgue points of the local entropy estimate,
    i.e. an estimate of the integral of h_nu(f, delta, x) d mu."""
    if not system.volume_preserving:
        raise ValueError("Lebesgue measure is only invariant for volume-preserving systems")
    if points is None:
        if point_count < 1:
            raise ValueError("point_count must be >= 1")
        points = sample_lebesgue(seed, point_count, system.dim)
    points = np.atleast_2d(points)

    def one(item):
        i, p = item
        try:
            est = local_entropy_estimate(system, p, delta, n_range, method, params, derive_seed(seed, i))
            return {"index": i, "x": p.tolist(), "h_hat": est.h_hat, "residual": est.residual, "error": None}
        except (EstimatorFailure, np.linalg.LinAlgError) as exc:
            return {"index": i, "x": p.tolist(), "h_hat": None, "residual": None, "error": str(exc)}

    table = _pmap(one, list(enumerate(points)), workers)
    table.sort(key=lambda r: r["index"])
    good = np.array([r["h_hat"] for r in table if r["error"] is None], dtype=float)
    excluded = len(table) - good.size
    if good.size == 0:
        return ManeBound(float("nan"), float("nan"), table, excluded, float(delta))
    se = float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else 0.0
    return ManeBound(float(good.mean()), se, table, excluded, float(delta))


def point_spectra(system: SmoothSystem, points, n: int, workers: int = 1):
    points = np.atleast_2d(points)
    return _pmap(lambda p: lyapunov_spectrum_qr(system, p, n), list(points), workers)


def nonnegative_count(spectrum, gap_threshold: float) -> int:
    return int(sum(1 for v in spectrum.exponents if v >= -gap_threshold))


def sigma_partition(system: SmoothSystem, samples, n: int = 1000, gap_threshold: float = 1e-2,
                    seed: int = 0, spectra=None) -> dict:
    """Fraction of sample points with j nonnegative finite-time exponents, keyed by j.

    ``samples`` is either a point array or a count of Lebesgue points.
    """
    if isinstance(samples, (int, np.integer)):
        samples = sample_lebesgue(seed, int(samples), system.dim)
    samples = np.atleast_2d(samples)
    if spectra is None:
        spectra = point_spectra(system, samples, n)
    counts: dict[int, int] = {}
    for s in spectra:
        j = nonnegative_count(s, gap_threshold)
        counts[j] = counts.get(j, 0) + 1
    total = sum(counts.values())
    # exact fractions; the last class absorbs rounding so the weights sum to 1
    keys = sorted(counts)
    weights = {k: counts[k] / total for k in keys[:-1]}
    weights[keys[-1]] = 1.0 - sum(weights.values())
    return weights


PESIN_DEFAULTS = {
    "delta": 0.1,
    "deltas": None,
    "point_count": 20,
    "n_range": [2, 6],
    "method": "grid",
    "method_params": None,
    "lyap_n": 2000,
    "gap_threshold": 1e-2,
    "tol": 0.1,
    "seed": 0,
    "workers": 1,
}


@dataclass
class PesinReport:
    system: dict
    mane_lower_bound: float
    mane_stderr: float
    ruelle_upper_bound: float
    ruelle_stderr: float
    chi_integral: float
    sigma_weights: dict
    verdict: str
    tol: float
    config: dict
    per_point: list = field(default_factory=list)
    excluded: int = 0
    notes: list = field(default_factory=list)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.mane_stderr**2 + self.ruelle_stderr**2)

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "mane_lower_bound": self.mane_lower_bound,
            "mane_stderr": self.mane_stderr,
            "ruelle_upper_bound": self.ruelle_upper_bound,
            "ruelle_stderr": self.ruelle_stderr,
            "chi_integral": self.chi_integral,
            "sigma_weights": {str(k): v for k, v in self.sigma_weights.items()},
            "verdict": self.verdict,
            "tol": self.tol,
            "config": self.config,
            "per_point": self.per_point,
            "excluded": self.excluded,
            "notes": self.notes,
        }


def pesin_report(system: SmoothSystem, config: dict | None = None) -> PesinReport:
    """Compare the Mane lower bound with the Ruelle upper bound on Lebesgue points.

    Both sides use the same sample points.  The lower bound is aggregated over
    the classes Sigma_j (points with j nonnegative exponents) weighted by their
    fractions; with a single delta grid the sup over delta is a max.
    """
    cfg = {**PESIN_DEFAULTS, **(config or {})}
    if not system.volume_preserving:
        raise ValueError("pesin_report needs a volume-preserving system")
    points = sample_lebesgue(cfg["seed"], cfg["point_count"], system.dim)
    spectra = point_spectra(system, points, cfg["lyap_n"], cfg["workers"])
    js = [nonnegative_count(s, cfg["gap_threshold"]) for s in spectra]
    ruelle = np.array([sum(v for v in s.exponents if v >= 0) for s in spectra])
    chis = np.array([chi(s, j) for s, j in zip(spectra, js)])
    weights = sigma_partition(system, points, gap_threshold=cfg["gap_threshold"], spectra=spectra)
    m = len(points)
    ruelle_se = float(ruelle.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0

    deltas = cfg["deltas"] or [cfg["delta"]]
    best = None
    for delta in deltas:
        mb = mane_lower_bound(system, delta, m, cfg["n_range"], cfg["method"], cfg["method_params"],
                              cfg["seed"], points, cfg["workers"])
        lower, lower_se = _aggregate_classes(mb.table, js, weights)
        if best is None or (not math.isnan(lower) and (math.isnan(best[0]) or lower > best[0])):
            best = (lower, lower_se, mb, delta)
    lower, lower_se, mb, delta_used = best

    per_point = []
    for row, s, j, r, c in zip(mb.table, spectra, js, ruelle, chis):
        per_point.append({**row, "exponents": list(s.exponents), "j": j, "ruelle": float(r), "chi": float(c)})

    tol = float(cfg["tol"])
    notes = [f"delta used: {delta_used}"]
    if math.isnan(lower):
        verdict = "Inconclusive"
        notes.append("every local-entropy estimate failed")
    else:
        sigma = math.sqrt(lower_se**2 + ruelle_se**2)
        if abs(lower - float(ruelle.mean())) <= tol:
            verdict = "FormulaHolds"
        elif lower <= ruelle.mean() + tol + 3 * sigma:
            verdict = "InequalityOnly"
        else:
            verdict = "Inconclusive"
            notes.append("lower bound exceeds the Ruelle bound beyond tolerance")
    echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
    return PesinReport(
        system=system.descriptor,
        mane_lower_bound=float(lower),
        mane_stderr=float(lower_se),
        ruelle_upper_bound=float(ruelle.mean()),
        ruelle_stderr=ruelle_se,
        chi_integral=float(chis.mean()),
        sigma_weights=weights,
        verdict=verdict,
        tol=tol,
        config=echo,
        per_point=per_point,
        excluded=mb.excluded,
        notes=notes,
    )


def _aggregate_classes(table, js, weights):
    total, var = 0.0, 0.0
    used = 0.0
    for j, w in weights.items():
        vals = np.array([r["h_hat"] for r, jj in zip(table, js) if jj == j and r["error"] is None], dtype=float)
        if vals.size == 0:
            continue
        total += w * vals.mean()
        se = vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0
        var += (w * se) ** 2
        used += w
    if used == 0:
        return float("nan"), float("nan")
    # renormalize over classes that produced estimates
    return total / used, math.sqrt(var) / used
