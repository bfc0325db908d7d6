"""Numerical residuals of the four evolution equations along a recorded trace.

At each interior snapshot the material time derivative D_t (centered,
non-uniform-aware) of a per-node quantity is compared against the analytic
right-hand side evaluated from that snapshot's geometry:

    metric:  D_t g      vs  -2 H_f h
    normal:  D_t N      vs  (d_s H_f) T
    hf:      D_t H_f    vs  L H_f + (|h|^2 + Hess f(N,N)) H_f
    sff:     D_t h      vs  Grad_t Grad_t H_f - H_f h^2 / g

where the second covariant derivative in coordinates includes the 1D
Christoffel term: Grad_t Grad_t H_f = d2_theta H_f - (d_theta g / 2g) d_theta H_f.

These use the actual trace, not the integrator's internal right-hand side,
so the check is independent of the stepper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import DiscreteCurve, _dtheta_central, _dtheta_second, curve_from_config
from .errors import TraceError
from .flow import FlowConfig, FlowTrace, run
from .stencils import centered_first_derivative

RESIDUAL_KEYS = ("metric", "normal", "hf", "sff")


@dataclass
class ResidualReport:
    """Per-interior-time max-norms of the four evolution residuals."""

    times: np.ndarray
    per_time: dict
    overall: dict

    def rows(self):
        for k, t in enumerate(self.times):
            yield (float(t),) + tuple(float(self.per_time[key][k]) for key in RESIDUAL_KEYS)


def evolution_residuals(trace: FlowTrace, w) -> ResidualReport:
    """Evaluate all four residual lines on every interior snapshot."""
    if trace.n_snapshots < 3:
        raise TraceError("need at least three snapshots for centered time differences")
    if trace.config.redistribution != "none":
        raise TraceError("evolution residuals need material nodes (redistribution = none)")

    times = trace.times
    per_time = {k: [] for k in RESIDUAL_KEYS}
    interior_times = []

    for k in range(1, trace.n_snapshots - 1):
        sm, s0, sp = trace.stacks[k - 1], trace.stacks[k], trace.stacks[k + 1]
        hm = times[k] - times[k - 1]
        hp = times[k + 1] - times[k]

        d_g = centered_first_derivative(sm.metric_g, s0.metric_g, sp.metric_g, hm, hp)
        d_N = centered_first_derivative(sm.normal, s0.normal, sp.normal, hm, hp)
        d_hf = centered_first_derivative(sm.H_f, s0.H_f, sp.H_f, hm, hp)
        d_h = centered_first_derivative(sm.sff_h, s0.sff_h, sp.sff_h, hm, hp)

        res_g = d_g + 2.0 * s0.H_f * s0.sff_h
        res_N = d_N - s0.dH_f_ds[:, None] * s0.tangent
        res_hf = d_hf - s0.dt_H_f_rhs

        dtheta = s0.dtheta
        dHf_dtheta = _dtheta_central(s0.H_f, dtheta)
        d2Hf_dtheta = _dtheta_second(s0.H_f, dtheta)
        gamma = _dtheta_central(s0.metric_g, dtheta) / (2.0 * s0.metric_g)
        cov_second = d2Hf_dtheta - gamma * dHf_dtheta
        res_h = d_h - (cov_second - s0.H_f * s0.sff_h**2 / s0.metric_g)

        interior_times.append(times[k])
        per_time["metric"].append(float(np.abs(res_g).max()))
        per_time["normal"].append(float(np.linalg.norm(res_N, axis=1).max()))
        per_time["hf"].append(float(np.abs(res_hf).max()))
        per_time["sff"].append(float(np.abs(res_h).max()))

    per_time = {k: np.asarray(v) for k, v in per_time.items()}
    overall = {k: float(v.max()) for k, v in per_time.items()}
    return ResidualReport(times=np.asarray(interior_times), per_time=per_time, overall=overall)


@dataclass
class ResidualConvergence:
    """Residual maxima at two refinement levels and their ratios."""

    levels: list
    ratios: dict

    def within(self, lo: float, hi: float) -> bool:
        return all(lo <= r <= hi for r in self.ratios.values())


def residual_convergence(
    curve_cfg: dict,
    w,
    dt0: float,
    t_end: float,
    scheme: str = "rk4",
    factor: int = 2,
    base_report: ResidualReport | None = None,
) -> ResidualConvergence:
    """Run the flow at (n, dt0) and (factor*n, dt0/factor) and compare the
    overall residual max-norms. ``curve_cfg`` must be a parametric kind so it
    can be resampled at the finer resolution."""
    if curve_cfg.get("kind") == "nodes":
        raise TraceError("residual convergence needs a parametric curve kind")
    levels = []
    for level in range(2):
        n = int(curve_cfg["n"] * factor**level)
        dt = dt0 / factor**level
        if level == 0 and base_report is not None:
            report = base_report
        else:
            init = curve_from_config({**curve_cfg, "n": n})
            cfg = FlowConfig(scheme=scheme, dt=dt, t_end=t_end, record_every=1)
            report = evolution_residuals(run(init, w, cfg), w)
        levels.append({"n": n, "dt": dt, "overall": report.overall})
    ratios = {
        k: levels[0]["overall"][k] / levels[1]["overall"][k] for k in RESIDUAL_KEYS
    }
    return ResidualConvergence(levels=levels, ratios=ratios)
