"""Ambient weight functions on R^d and their derivative bounds.

The admissible class for inequality verification is the quadratic weight

    f(x) = c0 + b.x + x.A.x / 2

whose gradient b + A x and constant Hessian A are exact and whose third
derivative vanishes identically. An :class:`ExploratoryWeight` wraps an
arbitrary callable with finite-difference derivatives; it is allowed for
free exploration only and taints every verification report it touches with
a ``third_derivative`` hypothesis violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FrameError

FRAME_TOL = 1e-12


@dataclass(frozen=True)
class WeightField:
    """Quadratic ambient weight with exact derivatives.

    Attributes
    ----------
    c0 : float
        Constant offset.
    b : (d,) array
        Linear coefficient.
    A : (d, d) array
        Quadratic coefficient; must be exactly symmetric (entrywise).
    """

    c0: float
    b: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        A = np.asarray(self.A, dtype=float)
        if b.ndim != 1:
            raise ConfigError("b must be a vector", field="weight.b")
        if A.shape != (b.size, b.size):
            raise ConfigError("A must be a square matrix matching b", field="weight.A")
        if not np.array_equal(A, A.T):
            raise ConfigError("A must be exactly symmetric", field="weight.A")
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.b.size

    @property
    def third_derivative_zero(self) -> bool:
        return True

    @property
    def hypothesis_violations(self) -> tuple[str, ...]:
        return ()

    def value(self, x):
        """f at points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        quad = np.einsum("...i,ij,...j->...", x, self.A, x)
        return self.c0 + x @ self.b + 0.5 * quad

    def gradient(self, x):
        """Exact gradient b + A x at points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        return self.b + x @ self.A

    def hessian_at(self, x=None):
        """Constant Hessian A (x is ignored)."""
        return self.A

    def hessian_quadratic_form(self, x, v):
        """v.H(x).v for per-point vectors v of shape (..., d)."""
        v = np.asarray(v, dtype=float)
        return ((v @ self.A) * v).sum(axis=-1)

    def to_config(self) -> dict:
        return {"c0": self.c0, "b": self.b.tolist(), "A": self.A.tolist()}

    @classmethod
    def from_config(cls, cfg: dict, dim: int = 2) -> "WeightField":
        if not isinstance(cfg, dict):
            raise ConfigError("weight must be an object", field="weight")
        c0 = cfg.get("c0", 0.0)
        b = np.asarray(cfg.get("b", np.zeros(dim)), dtype=float)
        A_raw = cfg.get("A", np.zeros((dim, dim)))
        A = np.asarray(A_raw, dtype=float)
        if A.ndim == 1:
            if A.size != dim * dim:
                raise ConfigError("row-major A has wrong length", field="weight.A")
            A = A.reshape(dim, dim)
        if b.shape != (dim,):
            raise ConfigError(f"b must have length {dim}", field="weight.b")
        if not np.array_equal(A, A.T):
            raise ConfigError("A must be exactly symmetric", field="weight.A")
        return cls(c0=float(c0), b=b, A=A)


def constant_weight(c0: float = 0.0, dim: int = 2) -> WeightField:
    """Constant weight; the flow degenerates to unweighted mean curvature flow."""
    return WeightField(c0=c0, b=np.zeros(dim), A=np.zeros((dim, dim)))


def isotropic_weight(c: float, c0: float = 0.0, dim: int = 2) -> WeightField:
    """Weight c0 + c |x|^2 / 2 (A = c I)."""
    return WeightField(c0=c0, b=np.zeros(dim), A=c * np.eye(dim))


class ExploratoryWeight:
    """Arbitrary smooth weight with finite-difference derivatives.

    Not admissible for inequality verification: the third derivative is
    unknown, so every report built on top of it is flagged.
    """

    def __init__(self, fn, dim: int = 2, fd_step: float = 1e-5):
        self.fn = fn
        self.dim = int(dim)
        self.fd_step = float(fd_step)

    @property
    def third_derivative_zero(self) -> bool:
        return False

    @property
    def hypothesis_violations(self) -> tuple[str, ...]:
        return ("third_derivative",)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.fn(x))
        return np.array([float(self.fn(p)) for p in x])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._gradient_one(x)
        return np.array([self._gradient_one(p) for p in x])

    def _gradient_one(self, p):
        h = self.fd_step
        g = np.zeros(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            g[i] = (self.fn(p + e) - self.fn(p - e)) / (2.0 * h)
        return g

    def hessian_at(self, x):
        p = np.asarray(x, dtype=float)
        h = self.fd_step
        H = np.zeros((self.dim, self.dim))
        f0 = float(self.fn(p))
        for i in range(self.dim):
            ei = np.zeros(self.dim)
            ei[i] = h
            H[i, i] = (self.fn(p + ei) - 2.0 * f0 + self.fn(p - ei)) / h**2
            for j in range(i + 1, self.dim):
                ej = np.zeros(self.dim)
                ej[j] = h
                H[i, j] = H[j, i] = (
                    self.fn(p + ei + ej)
                    - self.fn(p + ei - ej)
                    - self.fn(p - ei + ej)
                    + self.fn(p - ei - ej)
                ) / (4.0 * h**2)
        return H

    def hessian_quadratic_form(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.ndim == 1:
            return float(v @ self.hessian_at(x) @ v)
        return np.array([float(vi @ self.hessian_at(p) @ vi) for p, vi in zip(x, v)])


def eval_f(w, x):
    """Evaluate the weight at a point (or batch of points)."""
    return w.value(x)


def grad_f(w, x):
    """Ambient gradient of the weight at a point (or batch of points)."""
    return w.gradient(x)


def tangential_hessian(w, frame, at=None):
    """Restriction of the ambient Hessian to an orthonormal tangent frame.

    ``frame`` holds the frame vectors as rows, shape (n, d) or (d,) for a
    single vector. Entry (a, b) of the result is t_a . H . t_b. Raises
    :class:`FrameError` if the frame is not orthonormal to 1e-12.
    """
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    gram = frame @ frame.T
    if np.max(np.abs(gram - np.eye(frame.shape[0]))) > FRAME_TOL:
        raise FrameError("tangent frame is not orthonormal to 1e-12")
    H = np.asarray(w.hessian_at(at), dtype=float)
    M = frame @ H @ frame.T
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class HessianBounds:
    """Extrema of the tangential-Hessian eigenvalues over a sampled curve."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.lam < self.mu:
            raise ValueError("lam must be >= mu")


def hessian_bounds(w, curve) -> HessianBounds:
    """Global extrema of t.H.t over all nodes of a curve (unit tangents t).

    For plane curves the tangential Hessian at a node is 1x1, so its only
    eigenvalue is the quadratic form on the unit tangent. The extrema are
    taken globally over the whole curve.
    """
    from .curve import unit_tangents

    T = unit_tangents(curve)
    values = w.hessian_quadratic_form(curve.nodes, T)
    values = np.atleast_1d(values)
    return HessianBounds(lam=float(values.max()), mu=float(values.min()))
