"""
Derivative cocycles, QR (Benettin) Lyapunov spectra and finite-time
Oseledec splittings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .systems import SmoothSystem, torus_point

GAP_THRESHOLD = 1e-3


class IndeterminateSplitting(ValueError):
    """The finite-time spectrum has no usable gap at the requested index."""


class FrameDegeneracy(ArithmeticError):
    pass


@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: tuple
    horizon: int
    residual: float = 0.0

    def __post_init__(self):
        ex = tuple(float(v) for v in self.exponents)
        if any(a < b for a, b in zip(ex, ex[1:])):
            raise ValueError("exponents must be sorted in descending order")
        object.__setattr__(self, "exponents", ex)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def to_json(self) -> dict:
        return {"exponents": list(self.exponents), "horizon": self.horizon, "residual": self.residual}


@dataclass(frozen=True, eq=False)
class SplittingField:
    """Complementary subspaces E (d x k) and F (d x j) at ``point``, as orthonormal columns."""

    point: np.ndarray
    E: np.ndarray
    F: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        if E.shape[0] != F.shape[0] or E.shape[1] + F.shape[1] != E.shape[0]:
            raise ValueError(f"E {E.shape} and F {F.shape} are not complementary")
        for name, basis in (("E", E), ("F", F)):
            gram = basis.T @ basis
            if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-10:
                raise ValueError(f"{name} columns are not orthonormal")
        if abs(np.linalg.det(np.hstack([E, F]))) <= 1e-8:
            raise ValueError("E and F are not transversal (|det[E|F]| <= 1e-8)")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    @property
    def dim_E(self) -> int:
        return self.E.shape[1]

    @property
    def dim_F(self) -> int:
        return self.F.shape[1]

    @classmethod
    def from_vectors(cls, point, E, F):
        """Orthonormalize arbitrary spanning columns."""
        return cls(point, orthonormalize(E), orthonormalize(F))


def orthonormalize(vectors) -> np.ndarray:
    v = np.asarray(vectors, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    q, r = np.linalg.qr(v)
    # fix signs so the result does not depend on the LAPACK convention
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs


def cocycle_product(system: SmoothSystem, x, n: int) -> np.ndarray:
    """D_x f^n as the ordered product J(f^{n-1} x) ... J(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    y = torus_point(x)
    prod = np.eye(system.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            prod = system.jacobian(y) @ prod
            y = system.forward(y)
    if not np.all(np.isfinite(prod)):
        raise OverflowError(
            f"cocycle product over {n} steps overflows; use the QR-factored routines instead"
        )
    return prod


def past_cocycle_product(system: SmoothSystem, x, n: int) -> np.ndarray:
    """D_{f^{-n}x} f^n, with Jacobians evaluated on the backward-iterated orbit of x.

    Re-iterating forward from f^{-n}(x) would amplify rounding along the
    unstable direction and end far from x.
    """
    y = torus_point(x)
    back = []
    for _ in range(n):
        y = system.inverse(y)
        back.append(y)
    prod = np.eye(system.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        for z in reversed(back):
            prod = system.jacobian(z) @ prod
    if not np.all(np.isfinite(prod)):
        raise OverflowError(f"past cocycle over {n} steps overflows")
    return prod


def _qr_step(frame):
    q, r = np.linalg.qr(frame)
    diag = np.abs(np.diag(r))
    if np.any(diag < 1e-300):
        raise FrameDegeneracy("pushed frame degenerated; reduce the QR stride")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs, np.log(diag)


def lyapunov_spectrum_qr(system: SmoothSystem, x, n: int, qr_stride: int = 1, warmup: int = 50) -> LyapunovSpectrum:
    """Benettin/QR estimate of the Lyapunov spectrum along the orbit of ``x``.

    Before accumulating, an identity frame is pushed along the ``warmup``
    backward-iterated points preceding x and the logs of that transient are discarded, so the
    accumulation starts from an approximately aligned frame.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    if not 1 <= qr_stride <= 10:
        raise ValueError("qr_stride must be in [1, 10]")
    d = system.dim
    y = torus_point(x)

    q = np.eye(d)
    back = [y]
    for _ in range(warmup):
        back.append(system.inverse(back[-1]))
    for z in reversed(back[1:]):
        q, _ = _qr_step(system.jacobian(z) @ q)

    logs = np.zeros(d)
    tail_start = n - max(1, n // 10)
    tail_lo = np.full(d, np.inf)
    tail_hi = np.full(d, -np.inf)
    for k in range(1, n + 1):
        q = system.jacobian(y) @ q
        y = system.forward(y)
        if k % qr_stride == 0 or k == n:
            q, dlog = _qr_step(q)
            logs += dlog
            if k >= tail_start:
                running = np.sort(logs / k)[::-1]
                tail_lo = np.minimum(tail_lo, running)
                tail_hi = np.maximum(tail_hi, running)
    exps = np.sort(logs / n)[::-1]
    residual = float(np.max(tail_hi - tail_lo))
    return LyapunovSpectrum(tuple(exps), n, residual)


def finite_time_exponents(A: np.ndarray, n: int) -> np.ndarray:
    s = np.linalg.svd(A, compute_uv=False)
    return np.log(s) / n


def finite_time_oseledec_splitting(system: SmoothSystem, x, n: int, j: int, gap_threshold: float = GAP_THRESHOLD) -> SplittingField:
    """Finite-time Oseledec splitting E(x) (+) F(x) with dim F = j.

    F(x) is the image of the top-j right-singular subspace of D_{f^{-n}x} f^n,
    i.e. its top-j left-singular subspace (past expansion).  E(x) is spanned by
    the d - j least-expanded right-singular vectors of D_x f^n (future
    contraction).
    """
    d = system.dim
    if not 1 <= j <= d - 1:
        raise ValueError(f"j must be in [1, {d - 1}]")
    y = torus_point(x)
    past = past_cocycle_product(system, y, n)
    future = cocycle_product(system, y, n)

    u_past, s_past, _ = np.linalg.svd(past)
    _, s_fut, vt_fut = np.linalg.svd(future)
    gap_past = (np.log(s_past[j - 1]) - np.log(s_past[j])) / n
    gap_fut = (np.log(s_fut[j - 1]) - np.log(s_fut[j])) / n
    gap = min(gap_past, gap_fut)
    if not gap > gap_threshold:
        raise IndeterminateSplitting(
            f"finite-time spectral gap {gap:.3g} at index {j} is below {gap_threshold:g}"
        )
    F = orthonormalize(u_past[:, :j])
    E = orthonormalize(vt_fut[j:, :].T)
    if abs(np.linalg.det(np.hstack([E, F]))) < 1e-8:
        raise ValueError("finite-time E and F are nearly parallel")
    return SplittingField(y, E, F, {"gap": float(gap), "horizon": n})


def chi(spectrum: LyapunovSpectrum, j: int) -> float:
    """Sum of the j largest exponents."""
    if not 0 <= j <= spectrum.dim:
        raise ValueError(f"j must be in [0, {spectrum.dim}]")
    return float(sum(spectrum.exponents[:j]))


def det_growth_rate(system: SmoothSystem, x, F, n: int) -> float:
    """(1/n) log |det D_x f^n restricted to span(F)|, via re-orthonormalized frames."""
    if n < 10:
        raise ValueError("n must be >= 10")
    frame = np.atleast_2d(np.asarray(F, dtype=float))
    if frame.shape[0] != system.dim:
        frame = frame.T
    if np.max(np.abs(frame.T @ frame - np.eye(frame.shape[1]))) > 1e-10:
        raise ValueError("F must have orthonormal columns")
    y = torus_point(x)
    total = 0.0
    for _ in range(n):
        frame = system.jacobian(y) @ frame
        y = system.forward(y)
        frame, dlog = _qr_step(frame)
        total += float(np.sum(dlog))
    return total / n
