"""Closed-form reference solutions and convergence-order estimation.

Concentric spheres of dimension n (n = 1: circles in the plane, n = 2: round
spheres) under an isotropic quadratic weight c |x|^2 / 2 reduce the flow to
the radial ODE

    dR/dt = -(n/R - c R)   i.e.   d(R^2)/dt = -2 (n - c R^2),

with closed form R(t)^2 = n/c + (R0^2 - n/c) exp(2 c t) for c != 0 and
R(t)^2 = R0^2 - 2 n t for c = 0. These anchor the shrinking/expanding circle
oracle tests; non-isotropic weights have no closed form and are covered by
evolution-equation residuals instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExtinctionError


@dataclass(frozen=True)
class RadialSolution:
    """Closed-form radius evolution of a concentric n-sphere, weight c|x|^2/2."""

    n: int
    R0: float
    c: float = 0.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 (circle) or 2 (sphere)")
        if self.R0 <= 0.0:
            raise ValueError("R0 must be positive")

    @property
    def kind(self) -> str:
        """One of 'stationary', 'shrinking', 'expanding'."""
        hf0 = self.n / self.R0 - self.c * self.R0
        if hf0 == 0.0:
            return "stationary"
        return "shrinking" if hf0 > 0.0 else "expanding"

    def extinction_time(self) -> float:
        """Time at which the radius reaches zero; inf if it never does."""
        n, R0, c = self.n, self.R0, self.c
        if c == 0.0:
            return R0**2 / (2.0 * n)
        if c > 0.0 and R0**2 >= n / c:
            return math.inf  # stationary or expanding
        # shrinking branch: solve R(t)^2 = 0 (log1p form is stable as c -> 0)
        return -math.log1p(-(R0**2) * c / n) / (2.0 * c)

    def radius_squared(self, t: float) -> float:
        n, R0, c = self.n, self.R0, self.c
        if c == 0.0:
            r2 = R0**2 - 2.0 * n * t
        else:
            # n/c + (R0^2 - n/c) e^{2ct}, rearranged so c -> 0 stays well conditioned
            r2 = R0**2 * math.exp(2.0 * c * t) - n * math.expm1(2.0 * c * t) / c
        if r2 <= 0.0:
            raise ExtinctionError(
                f"radius queried at t={t!r}", extinction_time=self.extinction_time()
            )
        return r2

    def radius(self, t: float) -> float:
        return math.sqrt(self.radius_squared(t))

    def h_f(self, t: float) -> float:
        """Weighted mean curvature n/R - cR at time t."""
        R = self.radius(t)
        return self.n / R - self.c * R

    def dt_h_f(self, t: float) -> float:
        """Time derivative of H_f along the flow: (n/R^2 + c)(n/R - cR)."""
        R = self.radius(t)
        return (self.n / R**2 + self.c) * (self.n / R - self.c * R)


def radial_solution(n: int, R0: float, c: float, t: float) -> float:
    """Closed-form radius at time t. Raises :class:`ExtinctionError` past
    extinction (the error carries the extinction time)."""
    return RadialSolution(n=n, R0=R0, c=c).radius(t)


def radial_harnack(n: int, R0: float, c: float, t: float) -> float:
    """dH_f/dt on the concentric sphere at time t (grad H_f = 0 by symmetry),
    i.e. the sphere's Harnack quantity at V = 0."""
    return RadialSolution(n=n, R0=R0, c=c).dt_h_f(t)


def extinction_time(n: int, R0: float, c: float) -> float:
    return RadialSolution(n=n, R0=R0, c=c).extinction_time()


def circle_radius_estimate(curve) -> float:
    """Mean node distance to the node centroid (radius of a simulated circle)."""
    nodes = np.asarray(curve.nodes, dtype=float)
    centroid = nodes.mean(axis=0)
    return float(np.linalg.norm(nodes - centroid, axis=1).mean())


@dataclass(frozen=True)
class OrderEstimate:
    """Least-squares convergence order; ``monotone`` is False when the error
    sequence did not decrease monotonically under refinement."""

    order: float
    monotone: bool


def convergence_order(points) -> OrderEstimate:
    """Estimate the convergence order from (resolution, max-error) pairs.

    ``resolution`` must grow under refinement (pass N, or 1/dt for time
    studies); the estimate is minus the log-log least-squares slope. Needs at
    least three points; non-monotone error decay is reported via the flag
    rather than raised.
    """
    pts = [(float(x), float(e)) for x, e in points]
    if len(pts) < 3:
        raise ValueError("need at least three (resolution, error) points")
    xs = np.array([p[0] for p in pts])
    es = np.array([p[1] for p in pts])
    if np.any(xs <= 0.0) or np.any(es <= 0.0):
        raise ValueError("resolutions and errors must be positive")
    if np.any(np.diff(xs) <= 0.0):
        raise ValueError("resolutions must be strictly increasing")
    monotone = bool(np.all(np.diff(es) < 0.0))
    slope = np.polyfit(np.log(xs), np.log(es), 1)[0]
    return OrderEstimate(order=float(-slope), monotone=monotone)


def oracle_table(n: int, R0: float, c: float, times, sim_radii=None):
    """Rows (t, R_exact, R_sim, abs_err) for CSV export; R_sim/abs_err are
    None when no simulated radii are supplied."""
    sol = RadialSolution(n=n, R0=R0, c=c)
    rows = []
    for k, t in enumerate(times):
        r = sol.radius(float(t))
        if sim_radii is None:
            rows.append((float(t), r, None, None))
        else:
            rs = float(sim_radii[k])
            rows.append((float(t), r, rs, abs(rs - r)))
    return rows
