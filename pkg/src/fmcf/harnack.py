"""Differential and integral Harnack verification on recorded flow traces.

For plane curves a tangent vector is V = v T with scalar v, the second
fundamental form on unit tangents is the curvature H, and the quantity under
test is

    Z(v) = dt_H_f + 2 v (d_s H_f) + v^2 h,    h = H,

whose minimum over v (for h > 0) is dt_H_f - (d_s H_f)^2 / h at
v* = -(d_s H_f)/h. dt_H_f is taken from centered time differences of the
trace, never from the evolution-equation right-hand side, so this check is
independent of the residual checks.

Variants add a per-sample offset: H_f / (2t) (hamilton_2t) or H_f / c(t)
(general_c, c from a positive table). The checked statements assume a
quadratic weight, a weakly convex initial curve, the inequality at the
initial time, and (for the offset variants) H_f >= 0 initially; when a
hypothesis fails the report is marked vacuous rather than failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curve import intrinsic_distance
from .errors import ConfigError, TraceError
from .flow import FlowTrace, PinchReport, pinch_monitor
from .stencils import centered_first_derivative, onesided_first_derivative

VARIANTS = ("plain", "hamilton_2t", "general_c")

_CONVEXITY_FLOOR = 1e-12
_GRID_POINTS = 2001


@dataclass(frozen=True)
class HarnackSample:
    """Minimized Harnack quantity at one (node, time) sample."""

    node_id: int
    t: float
    dt_H_f: float
    grad_H_f: float
    h: float
    z_min: float
    v_star: float | None
    variant_offset: float = 0.0
    strictly_convex: bool = True

    @property
    def value(self) -> float:
        return self.z_min + self.variant_offset

    def to_json_dict(self) -> dict:
        return {
            "node_id": int(self.node_id),
            "t": float(self.t),
            "dt_H_f": float(self.dt_H_f),
            "grad_H_f": float(self.grad_H_f),
            "h": float(self.h),
            "z_min": float(self.z_min),
            "v_star": None if self.v_star is None else float(self.v_star),
            "variant_offset": float(self.variant_offset),
            "strictly_convex": bool(self.strictly_convex),
        }


def harnack_quantity(stack, dt_H_f, node: int, V: float) -> float:
    """Z(V) = dt_H_f + 2 (d_s H_f) V + h V^2 at one node."""
    dt_arr = np.asarray(dt_H_f, dtype=float)
    return float(dt_arr[node] + 2.0 * stack.dH_f_ds[node] * V + stack.H[node] * V**2)


def _grid_scan(dt_hf: float, grad: float, h: float):
    v_max = 10.0 * (1.0 + abs(grad) / max(abs(h), _CONVEXITY_FLOOR))
    grid = np.linspace(-v_max, v_max, _GRID_POINTS)
    z = dt_hf + 2.0 * grad * grid + h * grid**2
    k = int(np.argmin(z))
    return float(z[k]), float(grid[k])


def harnack_min(stack, dt_H_f, node: int, t: float = 0.0, node_id: int | None = None) -> HarnackSample:
    """Minimize Z over V at one node.

    Strictly convex nodes (h > 1e-12) get the closed-form minimum; otherwise
    a bounded grid scan is reported and the sample is flagged."""
    dt_arr = np.asarray(dt_H_f, dtype=float)
    dt_hf = float(dt_arr[node])
    grad = float(stack.dH_f_ds[node])
    h = float(stack.H[node])
    if h > _CONVEXITY_FLOOR:
        v_star = -grad / h
        z_min = dt_hf - grad**2 / h
        strictly_convex = True
    else:
        z_min, v_star = _grid_scan(dt_hf, grad, h)
        strictly_convex = False
    return HarnackSample(
        node_id=int(node if node_id is None else node_id),
        t=float(t),
        dt_H_f=dt_hf,
        grad_H_f=grad,
        h=h,
        z_min=z_min,
        v_star=v_star,
        strictly_convex=strictly_convex,
    )


@dataclass
class HarnackSnapshotValues:
    """Per-node minimized values at one interior snapshot."""

    t: float
    z_min: np.ndarray
    offset: np.ndarray
    dt_H_f: np.ndarray
    grad_H_f: np.ndarray
    h: np.ndarray
    strictly_convex: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.z_min + self.offset


@dataclass
class HarnackReport:
    """Differential-Harnack verification over the interior of a trace."""

    variant: str
    tol: float
    global_min: float
    global_min_sample: HarnackSample | None
    violations: list
    hypothesis_flags: dict
    vacuous: bool
    snapshots: list = field(repr=False)
    n_samples: int = 0

    def per_time_rows(self):
        """(t, min value at t, violations at t) rows for the CSV summary."""
        for snap in self.snapshots:
            vals = snap.values
            yield (float(snap.t), float(vals.min()), int(np.sum(vals < -self.tol)))

    def to_json_dict(self, include_samples: bool = True) -> dict:
        out = {
            "variant": self.variant,
            "tol": float(self.tol),
            "global_min": float(self.global_min),
            "global_min_sample": (
                None if self.global_min_sample is None else self.global_min_sample.to_json_dict()
            ),
            "n_samples": int(self.n_samples),
            "n_violations": len(self.violations),
            "violations": [v.to_json_dict() for v in self.violations],
            "hypothesis_flags": {k: bool(v) for k, v in self.hypothesis_flags.items()},
            "vacuous": bool(self.vacuous),
        }
        if include_samples:
            out["snapshots"] = [
                {
                    "t": float(s.t),
                    "z_min": [float(x) for x in s.z_min],
                    "offset": [float(x) for x in s.offset],
                }
                for s in self.snapshots
            ]
        return out


def _zmin_arrays(dt_hf: np.ndarray, grad: np.ndarray, h: np.ndarray):
    """Vectorized minimized Z with a grid-scan fallback at non-convex nodes."""
    convex = h > _CONVEXITY_FLOOR
    z = np.empty_like(dt_hf)
    with np.errstate(divide="ignore", invalid="ignore"):
        z[convex] = dt_hf[convex] - grad[convex] ** 2 / h[convex]
    for i in np.nonzero(~convex)[0]:
        z[i], _ = _grid_scan(float(dt_hf[i]), float(grad[i]), float(h[i]))
    return z, convex


def _c_table(c_of_t) -> tuple[np.ndarray, np.ndarray]:
    table = np.asarray(c_of_t, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 1:
        raise ConfigError("c_of_t must be a table of [t, c] rows", field="c_of_t")
    if np.any(np.diff(table[:, 0]) <= 0.0):
        raise ConfigError("c_of_t times must be strictly increasing", field="c_of_t")
    if np.any(table[:, 1] <= 0.0):
        raise ConfigError("c_of_t must be positive everywhere", field="c_of_t")
    return table[:, 0], table[:, 1]


def default_harnack_tol(trace: FlowTrace, max_dt_hf: float, tol_scale: float = 1.0) -> float:
    """0.05 * max(1, max|dt_H_f|) * (N^-2 + dt): the inequalities are exact
    only in the continuum, so the tolerance scales with discretization."""
    n = trace.curves[0].n_nodes
    return 0.05 * max(1.0, max_dt_hf) * (n**-2 + trace.dt_max) * tol_scale


def verify_differential_harnack(
    trace: FlowTrace,
    w,
    variant: str = "plain",
    c_of_t=None,
    tol: float | None = None,
    tol_scale: float = 1.0,
) -> HarnackReport:
    """Evaluate the minimized Harnack quantity (plus variant offset) at every
    interior (node, time) sample of the trace and collect violations.

    Hypothesis flags are computed at the first snapshot; a report whose
    hypotheses fail is vacuous: the inequality is not asserted there."""
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}", field="variant")
    if trace.n_snapshots < 3:
        raise TraceError("need at least three snapshots for centered time differences")
    if trace.config.redistribution != "none":
        raise TraceError("differential Harnack needs material nodes (redistribution = none)")
    if variant == "general_c":
        if c_of_t is None:
            raise ConfigError("general_c variant needs a c_of_t table", field="c_of_t")
        c_times, c_vals = _c_table(c_of_t)

    times = trace.times
    stacks = trace.stacks
    node_ids = trace.node_ids
    hf = np.stack([s.H_f for s in stacks])

    snapshots = []
    max_abs_dt_hf = 0.0
    for k in range(1, trace.n_snapshots - 1):
        hm = times[k] - times[k - 1]
        hp = times[k + 1] - times[k]
        dt_hf = centered_first_derivative(hf[k - 1], hf[k], hf[k + 1], hm, hp)
        max_abs_dt_hf = max(max_abs_dt_hf, float(np.abs(dt_hf).max()))
        z, convex = _zmin_arrays(dt_hf, stacks[k].dH_f_ds, stacks[k].H)
        t_k = float(times[k])
        if variant == "plain":
            offset = np.zeros_like(z)
        elif variant == "hamilton_2t":
            if t_k <= 0.0:
                raise TraceError("hamilton_2t needs strictly positive interior times")
            offset = hf[k] / (2.0 * t_k)
        else:
            offset = hf[k] / np.interp(t_k, c_times, c_vals)
        snapshots.append(
            HarnackSnapshotValues(
                t=t_k, z_min=z, offset=offset, dt_H_f=dt_hf,
                grad_H_f=stacks[k].dH_f_ds.copy(), h=stacks[k].H.copy(),
                strictly_convex=convex,
            )
        )

    if tol is None:
        tol = default_harnack_tol(trace, max_abs_dt_hf, tol_scale)

    # initial-time hypotheses (one-sided second-order derivative at t0)
    h1 = times[1] - times[0]
    h2 = times[2] - times[1]
    dt_hf0 = onesided_first_derivative(hf[0], hf[1], hf[2], h1, h2)
    z0, _ = _zmin_arrays(dt_hf0, stacks[0].dH_f_ds, stacks[0].H)
    h0 = stacks[0].H
    hf0 = hf[0]
    flags = {
        "weakly_convex_initial": bool(h0.min() >= -1e-8 * max(1.0, float(np.abs(h0).max()))),
        "initial_Z_nonneg": bool(z0.min() >= -tol),
        "third_derivative_zero": bool(getattr(w, "third_derivative_zero", False)),
        "initial_Hf_nonneg": bool(hf0.min() >= -1e-8 * max(1.0, float(np.abs(hf0).max()))),
    }
    needed = ["weakly_convex_initial", "initial_Z_nonneg", "third_derivative_zero"]
    if variant != "plain":
        needed.append("initial_Hf_nonneg")
    vacuous = not all(flags[k] for k in needed)

    violations = []
    global_min = math.inf
    global_min_sample = None
    n_samples = 0
    for snap in snapshots:
        vals = snap.values
        n_samples += vals.size
        k_min = int(np.argmin(vals))
        if vals[k_min] < global_min:
            global_min = float(vals[k_min])
            global_min_sample = _sample_from_snapshot(snap, k_min, node_ids)
        for i in np.nonzero(vals < -tol)[0]:
            violations.append(_sample_from_snapshot(snap, int(i), node_ids))

    return HarnackReport(
        variant=variant,
        tol=float(tol),
        global_min=global_min,
        global_min_sample=global_min_sample,
        violations=violations,
        hypothesis_flags=flags,
        vacuous=vacuous,
        snapshots=snapshots,
        n_samples=n_samples,
    )


def _sample_from_snapshot(snap: HarnackSnapshotValues, i: int, node_ids) -> HarnackSample:
    h = float(snap.h[i])
    grad = float(snap.grad_H_f[i])
    strictly = bool(snap.strictly_convex[i])
    return HarnackSample(
        node_id=int(node_ids[i]),
        t=float(snap.t),
        dt_H_f=float(snap.dt_H_f[i]),
        grad_H_f=grad,
        h=h,
        z_min=float(snap.z_min[i]),
        v_star=(-grad / h) if strictly else None,
        variant_offset=float(snap.offset[i]),
        strictly_convex=strictly,
    )


# ---------------------------------------------------------------------------
# Integral Harnack
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegralHarnackCheck:
    """One space-time comparison log H_f(x2,t2) - log H_f(x1,t1) >= -(C/4) * d^2/(t2-t1).

    The path-energy bound uses the intrinsic distance at t1 between the first
    node and the material point that later becomes the second sample."""

    node_id: int
    t1: float
    node_id2: int
    t2: float
    distance: float
    delta_bound: float
    lhs: float | None
    rhs: float | None
    margin: float | None
    tol: float
    passes: bool | None
    vacuous: bool
    reason: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "node_id": int(self.node_id),
            "t1": float(self.t1),
            "node_id2": int(self.node_id2),
            "t2": float(self.t2),
            "distance": float(self.distance),
            "delta_bound": float(self.delta_bound),
            "lhs": None if self.lhs is None else float(self.lhs),
            "rhs": None if self.rhs is None else float(self.rhs),
            "margin": None if self.margin is None else float(self.margin),
            "tol": float(self.tol),
            "passes": None if self.passes is None else bool(self.passes),
            "vacuous": bool(self.vacuous),
            "reason": self.reason,
        }


def verify_integral_harnack(
    trace: FlowTrace,
    w,
    pairs,
    C: float | None = None,
    tol_scale: float = 1.0,
) -> list[IntegralHarnackCheck]:
    """Check the integral Harnack bound for each (node_id, t1, node_id2, t2).

    Both times must be recorded snapshot times with 0 < t1 < t2 (no
    interpolation). C defaults to the pinch constant of the trace; when the
    pinch hypotheses fail, every check is vacuous. Checks with a nonpositive
    H_f endpoint are vacuous individually."""
    if trace.config.redistribution != "none":
        raise ConfigError(
            "integral Harnack needs material nodes (redistribution = none)",
            field="flow.redistribution",
        )
    pinch: PinchReport | None = None
    if C is None:
        pinch = pinch_monitor(trace, w, tol_scale=tol_scale)
        hyp_ok = pinch.hypotheses_met
        C_val = pinch.C if hyp_ok else None
    else:
        hyp_ok = True
        C_val = float(C)

    checks = []
    for entry in pairs:
        nid1, t1, nid2, t2 = entry
        t1, t2 = float(t1), float(t2)
        if not t2 > t1:
            raise TraceError(f"need t2 > t1, got t1={t1!r}, t2={t2!r}")
        if not t1 > 0.0:
            raise TraceError(f"need t1 > 0, got t1={t1!r}")
        k1 = trace.snapshot_at(t1)
        k2 = trace.snapshot_at(t2)
        curve1 = trace.curves[k1]
        i1 = curve1.index_of_id(int(nid1))
        i2 = curve1.index_of_id(int(nid2))
        hf1 = float(trace.stacks[k1].H_f[i1])
        hf2 = float(trace.stacks[k2].H_f[i2])

        d = intrinsic_distance(curve1, i1, i2)
        delta_bound = d**2 / (t2 - t1)

        reason = None
        if not hyp_ok:
            reason = "pinch hypotheses not met"
        elif hf1 <= 0.0 or hf2 <= 0.0:
            reason = "nonpositive H_f at an endpoint"
        vacuous = reason is not None

        if vacuous:
            lhs = rhs = margin = None
            tol = 0.0
            passes = None
        else:
            lhs = math.log(hf2) - math.log(hf1)
            rhs = -(C_val / 4.0) * delta_bound
            margin = lhs - rhs
            tol = (0.05 * abs(rhs) + 1e-6) * tol_scale
            passes = margin >= -tol

        checks.append(
            IntegralHarnackCheck(
                node_id=int(nid1), t1=t1, node_id2=int(nid2), t2=t2,
                distance=d, delta_bound=delta_bound,
                lhs=lhs, rhs=rhs, margin=margin, tol=tol,
                passes=passes, vacuous=vacuous, reason=reason,
            )
        )
    return checks


def sample_integral_pairs(
    trace: FlowTrace,
    count: int,
    seed: int = 0,
    same_node_fraction: float = 0.5,
) -> list[tuple[int, float, int, float]]:
    """Deterministically sample (node_id, t1, node_id2, t2) pairs from the
    recorded snapshot times (t > 0 only)."""
    times = [float(t) for t in trace.times if t > 0.0]
    if len(times) < 2:
        raise TraceError("need at least two recorded times with t > 0")
    ids = [int(i) for i in trace.node_ids]
    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(count):
        k1, k2 = sorted(rng.choice(len(times), size=2, replace=False))
        nid1 = ids[int(rng.integers(len(ids)))]
        if k < int(count * same_node_fraction):
            nid2 = nid1
        else:
            nid2 = ids[int(rng.integers(len(ids)))]
        pairs.append((nid1, times[k1], nid2, times[k2]))
    return pairs
