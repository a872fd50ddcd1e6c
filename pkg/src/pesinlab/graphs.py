"""
(E, F)-graphs over a splitting, their dispersion, the one-step graph
transform and its propagation along a Bowen ball.

A graph is stored as samples (u_i, v_i): u_i are coordinates in the F
basis, v_i = psi(u_i) coordinates in the E basis, and the embedded points
are base + F u_i + E v_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import SplittingField, cocycle_product
from .domination import SplittingSource, splitting_along_orbit
from .systems import SmoothSystem, torus_point, wrap


class GraphFolded(ValueError):
    """Two image samples share their F-coordinates: the graph transform is not injective."""


class LeftBowenBall(ValueError):
    def __init__(self, step: int, distance: float, delta: float):
        super().__init__(f"sample left the Bowen ball at step {step}: distance {distance:.3g} > delta {delta:g}")
        self.step = step


def pairwise_dispersion(u, v) -> float:
    """max ||v_i - v_l|| / ||u_i - u_l|| over all sample pairs."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if v.ndim == 1:
        v = v[:, None]
    m = u.shape[0]
    if m < 2:
        raise ValueError("dispersion needs at least 2 samples")
    best = 0.0
    # row blocks keep the pairwise arrays small for large samples
    for start in range(0, m - 1, 256):
        rows = slice(start, min(start + 256, m - 1))
        du = np.linalg.norm(u[rows, None, :] - u[None, :, :], axis=-1)
        dv = np.linalg.norm(v[rows, None, :] - v[None, :, :], axis=-1)
        idx = np.arange(rows.start, rows.stop)[:, None]
        upper = np.arange(m)[None, :] > idx
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.where(upper, dv / du, 0.0)
        best = max(best, float(np.max(slopes)))
    return best


@dataclass(frozen=True, eq=False)
class GraphOverF:
    base: np.ndarray
    splitting: SplittingField
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if u.shape[0] != v.shape[0]:
            raise ValueError("u and v need the same number of samples")
        if u.shape[0] < 2:
            raise ValueError("a graph needs at least 2 samples")
        if u.shape[1] != self.splitting.dim_F or v.shape[1] != self.splitting.dim_E:
            raise ValueError("sample dimensions do not match the splitting")
        gaps = _min_pair_distance(u)
        if gaps <= 1e-12:
            raise ValueError("duplicate u samples")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "base", torus_point(self.base))

    @property
    def dispersion(self) -> float:
        return pairwise_dispersion(self.u, self.v)

    def offsets(self) -> np.ndarray:
        """Displacements F u + E v of the samples from the base point."""
        return self.u @ self.splitting.F.T + self.v @ self.splitting.E.T

    def points(self) -> np.ndarray:
        return wrap(self.base + self.offsets())

    @property
    def radius(self) -> float:
        return float(np.max(np.linalg.norm(self.offsets(), axis=1)))

    def sample_density(self) -> float:
        """Largest nearest-neighbour gap in u; a coarse diagnostic of how well
        pairwise slopes can resolve the true Lipschitz constant."""
        u = self.u
        d = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        return float(np.max(np.min(d, axis=1)))


def _min_pair_distance(u) -> float:
    if u.shape[1] == 1:
        s = np.sort(u[:, 0])
        return float(np.min(np.diff(s)))
    d = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    return float(np.min(d))


def function_graph(x, splitting: SplittingField, psi, radius: float, count: int = 200) -> GraphOverF:
    """Sample psi: F -> E on a 1-D F (evenly on [-radius, radius]) or on a
    lattice-free random cloud in the j-ball for j > 1."""
    j = splitting.dim_F
    if j == 1:
        u = np.linspace(-radius, radius, count)[:, None]
    else:
        rng = np.random.default_rng(count)
        g = rng.standard_normal((count, j))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = g * radius * rng.random((count, 1)) ** (1.0 / j)
    v = np.asarray(psi(u), dtype=float).reshape(count, splitting.dim_E)
    return GraphOverF(x, splitting, u, v)


def linear_graph(x, splitting: SplittingField, slope: float, radius: float, count: int = 200) -> GraphOverF:
    """psi(u) = slope * P u, P the first E x F coordinate pairing; dispersion = |slope|."""
    k, j = splitting.dim_E, splitting.dim_F
    P = np.eye(k, j)
    return function_graph(x, splitting, lambda u: slope * u @ P.T, radius, count)


def critical_tau(alpha: float, beta: float, c: float) -> float:
    """Supremum of tau for which the graph-transform contraction factor is below 1.

    Writing a = alpha (1 + c), the factor (1/2 + a tau/(c beta)) / (1 - a tau/beta)
    is < 1 exactly when tau < c beta / (2 a (1 + c)); this also keeps
    beta - a tau > 0.
    """
    if alpha <= 0 or beta <= 0 or c <= 0:
        raise ValueError("alpha, beta and c must be positive")
    return c * beta / (2.0 * alpha * (1.0 + c) ** 2)


def slope_contraction_factor(tau: float, alpha: float, beta: float, c: float) -> float:
    """Bound on dispersion(new) / c for the one-step transform at perturbation size tau."""
    a = tau * alpha * (1.0 + c)
    denom = 1.0 - a / beta
    if denom <= 0:
        return np.inf
    return (0.5 + a / (c * beta)) / denom


def safe_tau(alpha: float, beta: float, c: float) -> float:
    """Half the critical tau: a perturbation size with strict dispersion contraction."""
    return 0.5 * critical_tau(alpha, beta, c)


def transform_graph(system: SmoothSystem, x, graph: GraphOverF, splitting_at_fx: SplittingField) -> GraphOverF:
    """Push the graph through f and re-express it over the splitting at f(x)."""
    x = torus_point(x)
    images = system.displacement(x, graph.offsets())
    E, F = splitting_at_fx.E, splitting_at_fx.F
    coeffs = np.linalg.solve(np.hstack([E, F]), images.T).T
    k = E.shape[1]
    v_new, u_new = coeffs[:, :k], coeffs[:, k:]
    if _min_pair_distance(u_new) <= 1e-10 * max(1.0, float(np.max(np.abs(u_new)))):
        raise GraphFolded("image samples share F-coordinates; the transform folds at this scale")
    return GraphOverF(system.forward(x), splitting_at_fx, u_new, v_new)


@dataclass
class Propagation:
    graph: GraphOverF
    trace: list

    def rows(self):
        return list(enumerate(self.trace))


def propagate_along_bowen(system: SmoothSystem, x, n: int, delta: float, graph: GraphOverF,
                          splittings: SplittingSource | None = None) -> Propagation:
    """Apply ``transform_graph`` n times along the orbit of x, tracking dispersion.

    Every sample must stay within ``delta`` of the reference orbit at steps
    0..n; an exit raises ``LeftBowenBall`` naming the step.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    x = torus_point(x)
    source = graph.splitting if splittings is None else splittings
    fields = splitting_along_orbit(system, x, source, range(1, n + 1)) if n else []
    _check_inside(graph, delta, 0)
    trace = [graph.dispersion]
    y = x
    for step in range(1, n + 1):
        graph = transform_graph(system, y, graph, fields[step - 1])
        y = graph.base
        _check_inside(graph, delta, step)
        trace.append(graph.dispersion)
    return Propagation(graph, trace)


def _check_inside(graph: GraphOverF, delta: float, step: int):
    worst = float(np.max(np.linalg.norm(graph.offsets(), axis=1)))
    if worst > delta:
        raise LeftBowenBall(step, worst, delta)


def bowen_radius_along(system: SmoothSystem, x, splitting: SplittingField, slope: float, n: int, delta: float,
                       safety: float = 0.9) -> float:
    """Radius in F-coordinates so that a linear graph of the given slope over
    that radius stays in B_n(f, delta, x) to first order (exact for linear
    systems)."""
    P = np.eye(splitting.dim_E, splitting.dim_F)
    chart = splitting.F + slope * splitting.E @ P
    growth = np.linalg.norm(chart, 2)
    for m in range(1, n + 1):
        growth = max(growth, np.linalg.norm(cocycle_product(system, x, m) @ chart, 2))
    return safety * delta / growth
