"""
Diffeomorphisms of the flat torus T^d = R^d / Z^d.

Every system is described by a lift R^d -> R^d, the lift of its inverse and
an analytic Jacobian.  Points are plain float arrays of shape ``(d,)`` or
``(m, d)``; wrapping into [0, 1) is ``x - floor(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

TWO_PI = 2.0 * np.pi

CAT_MATRIX = ((2, 1), (1, 1))


class InvalidSystem(ValueError):
    """Raised for invalid system descriptors or failed system checks."""


def wrap(x):
    """Reduce coordinates to [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor(x)
    # x - floor(x) can round up to exactly 1.0 for tiny negative x
    return np.where(y >= 1.0, 0.0, y)


def torus_point(coords) -> np.ndarray:
    coords = np.atleast_1d(np.asarray(coords, dtype=float))
    if coords.ndim != 1 or coords.size < 1:
        raise ValueError("a torus point needs d >= 1 coordinates")
    return wrap(coords)


def wrap_difference(delta):
    """Shortest representative of a coordinate difference, each entry in [-1/2, 1/2]."""
    delta = np.asarray(delta, dtype=float)
    return delta - np.round(delta)


def torus_distance(a, b):
    """Flat torus distance; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.linalg.norm(wrap_difference(a - b), axis=-1)


@dataclass(frozen=True, eq=False)
class SmoothSystem:
    """A diffeomorphism of T^d given through lifts and an analytic Jacobian.

    ``displacement(x, h)`` returns ``lift(x + h) - lift(x)``; systems that can
    evaluate it without cancellation provide their own, otherwise it falls
    back to the plain difference.
    """

    dim: int
    lift: Callable[[np.ndarray], np.ndarray]
    inverse_lift: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Callable[[np.ndarray], np.ndarray]
    descriptor: dict
    volume_preserving: bool = True
    linear: bool = False
    displacement_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None)

    @property
    def name(self) -> str:
        return self.descriptor["name"]

    def forward(self, x):
        return wrap(self.lift(np.asarray(x, dtype=float)))

    def inverse(self, x):
        return wrap(self.inverse_lift(np.asarray(x, dtype=float)))

    def jacobian(self, x):
        return self.jacobian_fn(np.asarray(x, dtype=float))

    def displacement(self, x, h):
        x = np.asarray(x, dtype=float)
        h = np.asarray(h, dtype=float)
        if self.displacement_fn is not None:
            return self.displacement_fn(x, h)
        return self.lift(x + h) - self.lift(x)

    def __repr__(self):
        return f"SmoothSystem({self.descriptor!r})"


# -- built-in families -------------------------------------------------------


def _integer_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidSystem("matrix must be square and non-empty")
    if not np.all(np.isfinite(m)) or not np.array_equal(m, np.round(m)):
        raise InvalidSystem("matrix entries must be integers")
    return m.astype(np.int64)


def linear_automorphism(matrix) -> SmoothSystem:
    m = _integer_matrix(matrix)
    det = int(round(np.linalg.det(m)))
    if abs(det) != 1:
        raise InvalidSystem(f"|det| must be 1 (got det = {det})")
    d = m.shape[0]
    inv = np.round(np.linalg.inv(m)).astype(np.int64)
    if not np.array_equal(m @ inv, np.eye(d, dtype=np.int64)):
        raise InvalidSystem("integer inverse not found")
    mf = m.astype(float)
    invf = inv.astype(float)

    def jac(x):
        return np.broadcast_to(mf, x.shape[:-1] + (d, d)).copy()

    return SmoothSystem(
        dim=d,
        lift=lambda x: x @ mf.T,
        inverse_lift=lambda x: x @ invf.T,
        jacobian_fn=jac,
        descriptor={"name": "linear_automorphism", "matrix": m.tolist()},
        volume_preserving=True,
        linear=True,
        displacement_fn=lambda x, h: h @ mf.T,
    )


def cat_map() -> SmoothSystem:
    return linear_automorphism(CAT_MATRIX)


def _sin_difference(a, b):
    # sin(a + b) - sin(a) without cancellation for small b
    return 2.0 * np.cos(a + 0.5 * b) * np.sin(0.5 * b)


def perturbed_cat(epsilon: float) -> SmoothSystem:
    """Cat map after the shear (x, y) -> (x + epsilon sin(2 pi y), y)."""
    eps = float(epsilon)
    cat = np.array(CAT_MATRIX, dtype=float)
    cat_inv = np.array([[1.0, -1.0], [-1.0, 2.0]])

    def lift(p):
        x, y = p[..., 0], p[..., 1]
        sheared = np.stack([x + eps * np.sin(TWO_PI * y), y], axis=-1)
        return sheared @ cat.T

    def inverse_lift(p):
        q = p @ cat_inv.T
        x, y = q[..., 0], q[..., 1]
        return np.stack([x - eps * np.sin(TWO_PI * y), y], axis=-1)

    def jac(p):
        y = p[..., 1]
        shear = np.zeros(p.shape[:-1] + (2, 2))
        shear[..., 0, 0] = 1.0
        shear[..., 0, 1] = TWO_PI * eps * np.cos(TWO_PI * y)
        shear[..., 1, 1] = 1.0
        return cat @ shear

    def displacement(p, h):
        y = p[..., 1]
        dx = h[..., 0] + eps * _sin_difference(TWO_PI * y, TWO_PI * h[..., 1])
        return np.stack([dx, h[..., 1]], axis=-1) @ cat.T

    return SmoothSystem(
        dim=2,
        lift=lift,
        inverse_lift=inverse_lift,
        jacobian_fn=jac,
        descriptor={"name": "perturbed_cat", "epsilon": eps},
        displacement_fn=displacement,
    )


def rotation(*alphas: float) -> SmoothSystem:
    if len(alphas) == 1 and np.ndim(alphas[0]) == 1:
        alphas = tuple(alphas[0])
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise InvalidSystem("rotation needs at least one angle")
    d = a.size

    def jac(x):
        return np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()

    return SmoothSystem(
        dim=d,
        lift=lambda x: x + a,
        inverse_lift=lambda x: x - a,
        jacobian_fn=jac,
        descriptor={"name": "rotation", "alphas": a.tolist()},
        linear=True,
        displacement_fn=lambda x, h: h.copy(),
    )


def identity(d: int = 2) -> SmoothSystem:
    system = rotation(*([0.0] * int(d)))
    return SmoothSystem(
        dim=system.dim,
        lift=system.lift,
        inverse_lift=system.inverse_lift,
        jacobian_fn=system.jacobian_fn,
        descriptor={"name": "identity", "dim": int(d)},
        linear=True,
        displacement_fn=system.displacement_fn,
    )


def standard_map(K: float) -> SmoothSystem:
    """Chirikov standard map (x, y) -> (x + y', y') with y' = y + K/(2 pi) sin(2 pi x)."""
    k = float(K)
    kick = k / TWO_PI

    def lift(p):
        x, y = p[..., 0], p[..., 1]
        y1 = y + kick * np.sin(TWO_PI * x)
        return np.stack([x + y1, y1], axis=-1)

    def inverse_lift(p):
        x1, y1 = p[..., 0], p[..., 1]
        x = x1 - y1
        return np.stack([x, y1 - kick * np.sin(TWO_PI * x)], axis=-1)

    def jac(p):
        kc = k * np.cos(TWO_PI * p[..., 0])
        out = np.ones(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 + kc
        out[..., 1, 0] = kc
        return out

    def displacement(p, h):
        dy = h[..., 1] + kick * _sin_difference(TWO_PI * p[..., 0], TWO_PI * h[..., 0])
        return np.stack([h[..., 0] + dy, dy], axis=-1)

    return SmoothSystem(
        dim=2,
        lift=lift,
        inverse_lift=inverse_lift,
        jacobian_fn=jac,
        descriptor={"name": "standard_map", "K": k},
        displacement_fn=displacement,
    )


def block(*systems: SmoothSystem) -> SmoothSystem:
    """Direct product of lower-dimensional systems acting on consecutive coordinates."""
    if len(systems) == 1 and isinstance(systems[0], (list, tuple)):
        systems = tuple(systems[0])
    if not systems:
        raise InvalidSystem("block needs at least one component")
    dims = [s.dim for s in systems]
    cuts = np.cumsum([0] + dims)
    d = int(cuts[-1])

    def split_apply(fns, x):
        return np.concatenate([fn(x[..., cuts[i]:cuts[i + 1]]) for i, fn in enumerate(fns)], axis=-1)

    def jac(x):
        out = np.zeros(x.shape[:-1] + (d, d))
        for i, s in enumerate(systems):
            sl = slice(cuts[i], cuts[i + 1])
            out[..., sl, sl] = s.jacobian_fn(x[..., sl])
        return out

    def displacement(x, h):
        return np.concatenate(
            [s.displacement(x[..., cuts[i]:cuts[i + 1]], h[..., cuts[i]:cuts[i + 1]])
             for i, s in enumerate(systems)],
            axis=-1,
        )

    return SmoothSystem(
        dim=d,
        lift=lambda x: split_apply([s.lift for s in systems], x),
        inverse_lift=lambda x: split_apply([s.inverse_lift for s in systems], x),
        jacobian_fn=jac,
        descriptor={"name": "block", "systems": [s.descriptor for s in systems]},
        volume_preserving=all(s.volume_preserving for s in systems),
        linear=all(s.linear for s in systems),
        displacement_fn=displacement,
    )


def _require(desc: dict, keys: set, name: str):
    extra = set(desc) - keys - {"name"}
    if extra:
        raise InvalidSystem(f"{name}: unknown field(s) {sorted(extra)}")
    missing = keys - set(desc)
    if missing:
        raise InvalidSystem(f"{name}: missing field(s) {sorted(missing)}")


def make_system(descriptor: dict | str) -> SmoothSystem:
    """Build a system from a JSON-style descriptor such as
    ``{"name": "perturbed_cat", "epsilon": 0.05}``."""
    if isinstance(descriptor, str):
        descriptor = {"name": descriptor}
    if not isinstance(descriptor, dict) or "name" not in descriptor:
        raise InvalidSystem("descriptor must be an object with a 'name'")
    name = descriptor["name"]
    if name == "cat_map":
        _require(descriptor, set(), name)
        return cat_map()
    if name == "linear_automorphism":
        _require(descriptor, {"matrix"}, name)
        return linear_automorphism(descriptor["matrix"])
    if name == "perturbed_cat":
        _require(descriptor, {"epsilon"}, name)
        return perturbed_cat(_real(descriptor["epsilon"], "epsilon"))
    if name == "rotation":
        _require(descriptor, {"alphas"}, name)
        alphas = descriptor["alphas"]
        if not isinstance(alphas, (list, tuple)) or not alphas:
            raise InvalidSystem("rotation: 'alphas' must be a non-empty list")
        return rotation(*[_real(a, "alphas") for a in alphas])
    if name == "identity":
        d = descriptor.get("dim", 2)
        _require({**descriptor, "dim": d}, {"dim"}, name)
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise InvalidSystem("identity: 'dim' must be a positive integer")
        return identity(d)
    if name == "standard_map":
        _require(descriptor, {"K"}, name)
        return standard_map(_real(descriptor["K"], "K"))
    if name == "block":
        _require(descriptor, {"systems"}, name)
        parts = descriptor["systems"]
        if not isinstance(parts, (list, tuple)) or not parts:
            raise InvalidSystem("block: 'systems' must be a non-empty list")
        return block(*[make_system(p) for p in parts])
    raise InvalidSystem(f"unknown system {name!r}")


def _real(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise InvalidSystem(f"'{field_name}' must be a finite real number")
    return float(value)


# -- orbits, sampling, checks ----------------------------------------------


def apply_map(system: SmoothSystem, x, steps: int):
    """Apply ``system`` ``steps`` times (negative steps use the inverse)."""
    steps = int(steps)
    if abs(steps) > 10**9:
        raise ValueError("|steps| must be at most 1e9")
    y = wrap(x)
    step = system.forward if steps > 0 else system.inverse
    for _ in range(abs(steps)):
        y = step(y)
    return y


def orbit(system: SmoothSystem, x, n: int) -> np.ndarray:
    """Points x, f(x), ..., f^n(x) stacked along a new leading axis."""
    pts = [wrap(x)]
    for _ in range(n):
        pts.append(system.forward(pts[-1]))
    return np.stack(pts)


def sample_lebesgue(seed: int, count: int, d: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be at least 1")
    if d < 1:
        raise ValueError("d must be at least 1")
    rng = np.random.default_rng(seed)
    return rng.random((count, d))


def check_volume_preserving(system: SmoothSystem, samples: int, seed: int = 0) -> float:
    """Worst |log|det J|| over Lebesgue-sampled points."""
    pts = sample_lebesgue(seed, samples, system.dim)
    dets = np.abs(np.linalg.det(system.jacobian(pts)))
    bad = np.flatnonzero(dets <= 1e-12)
    if bad.size:
        raise InvalidSystem(f"singular Jacobian at point {pts[bad[0]].tolist()}")
    return float(np.max(np.abs(np.log(dets))))


def finite_difference_jacobian(system: SmoothSystem, x, steps: int = 1, h: float = 1e-6) -> np.ndarray:
    """Central differences of the lifted ``steps``-fold map.  Test oracle only."""
    x = np.asarray(x, dtype=float)
    d = system.dim

    def lifted(p):
        for _ in range(steps):
            p = system.lift(p)
        return p

    out = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        out[:, i] = (lifted(x + e) - lifted(x - e)) / (2 * h)
    return out


def inverse_system(system: SmoothSystem) -> SmoothSystem:
    """The system f^{-1}, with Jacobian inv(Df(f^{-1} x))."""

    def jac(x):
        return np.linalg.inv(system.jacobian_fn(wrap(system.inverse_lift(x))))

    def displacement(x, h):
        return system.inverse_lift(x + h) - system.inverse_lift(x)

    if system.linear:
        jinv = np.linalg.inv(system.jacobian_fn(np.zeros(system.dim)))

        def displacement(x, h):  # noqa: F811
            return h @ jinv.T

    return SmoothSystem(
        dim=system.dim,
        lift=system.inverse_lift,
        inverse_lift=system.lift,
        jacobian_fn=jac,
        descriptor={"name": "inverse", "base": system.descriptor},
        volume_preserving=system.volume_preserving,
        linear=system.linear,
        displacement_fn=displacement,
    )
