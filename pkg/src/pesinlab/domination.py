"""
N-domination of invariant splittings, power systems f^N, projection norms
and the trivial-versus-dominated classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .cocycle import (
    IndeterminateSplitting,
    LyapunovSpectrum,
    SplittingField,
    cocycle_product,
    finite_time_oseledec_splitting,
    lyapunov_spectrum_qr,
    orthonormalize,
)
from .systems import SmoothSystem, apply_map, torus_point, wrap

DOMINATION_THRESHOLD = 0.5

SplittingSource = Union[SplittingField, Callable[[np.ndarray], SplittingField]]


def _restricted(A, basis=None):
    A = np.asarray(A, dtype=float)
    return A if basis is None else A @ np.asarray(basis, dtype=float)


def operator_norm(A, basis=None) -> float:
    """Largest singular value of A, or of A restricted to span(basis)."""
    return float(np.linalg.svd(_restricted(A, basis), compute_uv=False)[0])


def minimal_norm(A, basis=None) -> float:
    """m(A) = ||A^{-1}||^{-1}: the smallest singular value (of A @ basis when restricted)."""
    s = np.linalg.svd(_restricted(A, basis), compute_uv=False)
    if s[-1] <= 1e-14 * max(s[0], 1e-300) or s[-1] == 0.0:
        raise np.linalg.LinAlgError("rank-deficient map has no minimal norm")
    return float(s[-1])


@dataclass
class DominationReport:
    N: int | None
    worst_ratio: float
    window: int
    per_index_ratios: list

    @property
    def dominated(self) -> bool:
        return self.worst_ratio <= DOMINATION_THRESHOLD

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "worst_ratio": self.worst_ratio,
            "window": self.window,
            "per_index_ratios": list(self.per_index_ratios),
            "dominated": self.dominated,
        }


def eigensplitting(system: SmoothSystem, j: int = 1, x=None) -> SplittingField:
    """Invariant splitting of a linear system: F spans the j eigendirections of largest
    |eigenvalue|, E the rest.  Requires real eigenvalues."""
    if not system.linear:
        raise ValueError("eigensplitting needs a system with constant Jacobian")
    d = system.dim
    x = np.zeros(d) if x is None else torus_point(x)
    A = system.jacobian(x)
    vals, vecs = np.linalg.eig(A)
    if np.max(np.abs(vals.imag)) > 1e-12:
        raise ValueError("complex eigenvalues: no real eigensplitting")
    order = np.argsort(-np.abs(vals.real), kind="stable")
    vecs = vecs.real[:, order]
    return SplittingField(x, orthonormalize(vecs[:, j:]), orthonormalize(vecs[:, :j]))


def oseledec_provider(system: SmoothSystem, j: int, n: int = 40) -> Callable[[np.ndarray], SplittingField]:
    """Splitting source that recomputes the finite-time Oseledec splitting at every point."""
    def provider(y):
        return finite_time_oseledec_splitting(system, y, n, j)
    return provider


def _is_invariant(A, basis, tol=1e-9) -> bool:
    image = A @ basis
    residual = image - basis @ (basis.T @ image)
    return float(np.linalg.norm(residual)) <= tol * max(1.0, float(np.linalg.norm(image)))


def splitting_along_orbit(system: SmoothSystem, x, splitting: SplittingSource, indices) -> list:
    """Splittings at f^j(x) for each j in ``indices``.

    A fixed SplittingField is only accepted for constant-Jacobian systems where
    it is Df-invariant; otherwise pass a callable (see ``oseledec_provider``).
    """
    x = torus_point(x)
    out = []
    if isinstance(splitting, SplittingField):
        if not system.linear:
            raise ValueError("a fixed splitting can only be transported along orbits of linear systems")
        A = system.jacobian(x)
        for name, basis in (("E", splitting.E), ("F", splitting.F)):
            if not _is_invariant(A, basis):
                raise ValueError(f"splitting unavailable at index 1: {name} is not Df-invariant")
        for j in indices:
            out.append(SplittingField(apply_map(system, x, j), splitting.E, splitting.F))
        return out
    for j in indices:
        try:
            out.append(splitting(apply_map(system, x, j)))
        except (IndeterminateSplitting, ValueError) as exc:
            raise ValueError(f"splitting unavailable at orbit index {j}: {exc}") from exc
    return out


def domination_ratio(system: SmoothSystem, x, splitting: SplittingSource, N: int, window: int) -> DominationReport:
    """Worst ||Df^N|E|| / m(Df^N|F) over orbit indices j in [-window, window]."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if window < 0:
        raise ValueError("window must be >= 0")
    indices = range(-window, window + 1)
    fields = splitting_along_orbit(system, x, splitting, indices)
    ratios = []
    for sf in fields:
        A = cocycle_product(system, sf.point, N)
        ratios.append(operator_norm(A, sf.E) / minimal_norm(A, sf.F))
    worst = float(max(ratios))
    return DominationReport(N if worst <= DOMINATION_THRESHOLD else None, worst, window, ratios)


def minimal_domination_N(system: SmoothSystem, x, splitting: SplittingSource, N_max: int, window: int) -> int | None:
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    # resolve the splittings once; only N changes
    fields = splitting_along_orbit(system, x, splitting, range(-window, window + 1))
    for N in range(1, N_max + 1):
        ratios = []
        for sf in fields:
            A = cocycle_product(system, sf.point, N)
            ratios.append(operator_norm(A, sf.E) / minimal_norm(A, sf.F))
        if max(ratios) <= DOMINATION_THRESHOLD:
            return N
    return None


def power_system(system: SmoothSystem, N: int) -> SmoothSystem:
    """The system f^N: composed lifts, chain-rule Jacobian."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N == 1:
        return system

    def lift(x):
        for _ in range(N):
            x = system.lift(x)
        return x

    def inverse_lift(x):
        for _ in range(N):
            x = system.inverse_lift(x)
        return x

    def jac(x):
        y = wrap(x)
        prod = None
        for _ in range(N):
            J = system.jacobian(y)
            prod = J if prod is None else J @ prod
            y = system.forward(y)
        return prod

    def displacement(x, h):
        y = wrap(x)
        for _ in range(N):
            h = system.displacement(y, h)
            y = system.forward(y)
        return h

    return SmoothSystem(
        dim=system.dim,
        lift=lift,
        inverse_lift=inverse_lift,
        jacobian_fn=jac,
        descriptor={"name": "power", "base": system.descriptor, "N": int(N)},
        volume_preserving=system.volume_preserving,
        linear=system.linear,
        displacement_fn=displacement,
    )


def gamma_projection_norm(splitting: SplittingField) -> float:
    """max(||pi_E||, ||pi_F||) for the oblique projections of the splitting; always >= 1."""
    E, F = splitting.E, splitting.F
    basis = np.hstack([E, F])
    if abs(np.linalg.det(basis)) < 1e-8:
        raise ValueError("splitting is nearly degenerate")
    coeffs = np.linalg.inv(basis)
    k = E.shape[1]
    pi_E = E @ coeffs[:k]
    pi_F = F @ coeffs[k:]
    return float(max(np.linalg.norm(pi_E, 2), np.linalg.norm(pi_F, 2)))


@dataclass
class DichotomyVerdict:
    """Finite-horizon classification of the Oseledec splitting at one point.

    ``kind`` is "TrivialSpectrum", "Dominated" or "Indeterminate".  This is a
    heuristic: it never proves domination on all of Z, only on the window.
    """

    kind: str
    N: int | None = None
    j: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "N": self.N, "j": self.j, "diagnostics": self.diagnostics}

    def __str__(self):
        return f"Dominated({self.N}, {self.j})" if self.kind == "Dominated" else self.kind


DICHOTOMY_DEFAULTS = {"n": 1000, "N_max": 10, "window": 10, "gap_threshold": 1e-2, "splitting_horizon": 40}


def dichotomy_classify(system: SmoothSystem, x, params: dict | None = None) -> DichotomyVerdict:
    p = {**DICHOTOMY_DEFAULTS, **(params or {})}
    if p["n"] < 500:
        raise ValueError("dichotomy needs n >= 500")
    spectrum: LyapunovSpectrum = lyapunov_spectrum_qr(system, x, p["n"])
    ex = np.asarray(spectrum.exponents)
    gaps = (ex[:-1] - ex[1:]).tolist()
    diag = {"spectrum": list(spectrum.exponents), "gaps": gaps, "params": dict(p)}
    if np.max(np.abs(ex)) < p["gap_threshold"]:
        return DichotomyVerdict("TrivialSpectrum", diagnostics=diag)
    attempts = {}
    for j in range(1, system.dim):
        if gaps[j - 1] < p["gap_threshold"]:
            continue
        provider = oseledec_provider(system, j, p["splitting_horizon"])
        try:
            N = minimal_domination_N(system, x, provider, p["N_max"], p["window"])
        except ValueError as exc:
            attempts[j] = f"splitting failed: {exc}"
            continue
        if N is not None:
            diag["attempts"] = attempts
            return DichotomyVerdict("Dominated", N, j, diag)
        attempts[j] = f"no N <= {p['N_max']} certified"
    diag["attempts"] = attempts
    return DichotomyVerdict("Indeterminate", diagnostics=diag)
