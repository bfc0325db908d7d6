"""Time integration of the weighted curvature flow with Lagrangian nodes.

Every node moves with velocity -H_f * N. With ``redistribution = "none"``
node ids are material points, which the residual and Harnack checks rely on;
``tangential_uniform`` resamples to uniform arclength every few steps and
gives up material identity.

Throughout, the scalar monitored and reported as "h" is the second
fundamental form evaluated on the unit tangent, i.e. the curvature H; for
plane curves its sign agrees with h_theta_theta.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .curve import DiscreteCurve, GeometryStack, build_geometry
from .errors import ConfigError, FlowError, MeshQualityError, StepRejectedError, TraceError
from .weights import WeightField, hessian_bounds

SCHEMES = ("explicit_euler", "rk4")
REDISTRIBUTION_MODES = ("none", "tangential_uniform")

_T_EPS = 1e-12
_MAX_HALVINGS = 25


@dataclass(frozen=True)
class StopRules:
    """Early-stop triggers; a value enables the rule.

    ``hf_negative`` / ``h_negative`` hold sign tolerances (stop when the
    minimum drops below -tol); ``pinch_exceeds`` holds a threshold on
    max |h|^2 / H_f^2.
    """

    hf_negative: float | None = None
    h_negative: float | None = None
    pinch_exceeds: float | None = None

    @classmethod
    def from_config(cls, cfg: dict) -> "StopRules":
        if not isinstance(cfg, dict):
            raise ConfigError("stop_on must be an object", field="flow.stop_on")
        unknown = set(cfg) - {"hf_negative", "h_negative", "pinch_exceeds"}
        if unknown:
            raise ConfigError(f"unknown stop rule(s) {sorted(unknown)}", field="flow.stop_on")
        return cls(
            hf_negative=_opt_float(cfg, "hf_negative"),
            h_negative=_opt_float(cfg, "h_negative"),
            pinch_exceeds=_opt_float(cfg, "pinch_exceeds"),
        )


def _opt_float(cfg, key):
    return float(cfg[key]) if key in cfg and cfg[key] is not None else None


@dataclass(frozen=True)
class FlowConfig:
    """Integration parameters.

    ``dt`` is a positive step or "auto", in which case each step uses
    cfl * (min spacing)^2 / max(max|H_f|, 1); the floor keeps the step inside
    the parabolic stability limit when the curve is nearly stationary.
    """

    scheme: str = "rk4"
    dt: float | str = "auto"
    cfl: float = 0.2
    t_end: float = 1.0
    record_every: int = 1
    redistribution: str = "none"
    redistribute_every: int = 10
    stop_on: StopRules = field(default_factory=StopRules)
    max_steps: int = 2_000_000

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}", field="flow.scheme")
        if self.dt != "auto":
            try:
                dt = float(self.dt)
            except (TypeError, ValueError):
                raise ConfigError("dt must be a positive number or 'auto'", field="flow.dt") from None
            if dt <= 0.0:
                raise ConfigError("dt must be positive", field="flow.dt")
        if not 0.0 < self.cfl <= 0.5:
            raise ConfigError("cfl must lie in (0, 0.5]", field="flow.cfl")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive", field="flow.t_end")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1", field="flow.record_every")
        if self.redistribution not in REDISTRIBUTION_MODES:
            raise ConfigError(
                f"redistribution must be one of {REDISTRIBUTION_MODES}", field="flow.redistribution"
            )
        if self.redistribute_every < 1:
            raise ConfigError("redistribute_every must be >= 1", field="flow.redistribute_every")

    @classmethod
    def from_config(cls, cfg: dict) -> "FlowConfig":
        if not isinstance(cfg, dict):
            raise ConfigError("flow must be an object", field="flow")
        known = {
            "scheme", "dt", "cfl", "t_end", "record_every",
            "redistribution", "redistribute_every", "stop_on", "max_steps",
        }
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown flow key(s) {sorted(unknown)}", field="flow")
        kwargs = {k: cfg[k] for k in known & set(cfg) if k != "stop_on"}
        if "stop_on" in cfg:
            kwargs["stop_on"] = StopRules.from_config(cfg["stop_on"])
        out = cls(**kwargs)
        out.validate()
        return out


MONITOR_KEYS = ("t", "dt", "min_hf", "argmin_hf", "min_h", "argmin_h", "max_pinch", "lam", "mu")


@dataclass
class FlowTrace:
    """Recorded flow: snapshots at the configured cadence plus per-step monitors."""

    curves: list
    stacks: list
    monitors: dict
    config: FlowConfig
    stop_reason: dict | None = None
    n_steps: int = 0
    dt_max: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([c.time for c in self.curves])

    @property
    def n_snapshots(self) -> int:
        return len(self.curves)

    @property
    def node_ids(self) -> np.ndarray:
        return self.curves[0].node_ids

    def snapshot_at(self, t: float, tol: float = 1e-9) -> int:
        """Index of the snapshot whose time matches t (no interpolation)."""
        times = self.times
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > max(tol, tol * abs(t)):
            raise TraceError(
                f"no snapshot at t={t!r}; nearest recorded time is {times[k]!r}"
            )
        return k


class _MonitorLog:
    def __init__(self):
        self.rows = {k: [] for k in MONITOR_KEYS}

    def append(self, t: float, dt: float, stack: GeometryStack, w):
        H, H_f = stack.H, stack.H_f
        with np.errstate(divide="ignore", invalid="ignore"):
            pinch = np.where(H_f != 0.0, (H / H_f) ** 2, np.inf)
        if isinstance(w, WeightField):
            T = stack.tangent
            vals = ((T @ w.A) * T).sum(axis=1)
            lam, mu = float(vals.max()), float(vals.min())
        else:
            lam = mu = float("nan")
        r = self.rows
        r["t"].append(t)
        r["dt"].append(dt)
        r["min_hf"].append(float(H_f.min()))
        r["argmin_hf"].append(int(np.argmin(H_f)))
        r["min_h"].append(float(H.min()))
        r["argmin_h"].append(int(np.argmin(H)))
        r["max_pinch"].append(float(pinch.max()))
        r["lam"].append(lam)
        r["mu"].append(mu)

    def arrays(self) -> dict:
        return {k: np.asarray(v) for k, v in self.rows.items()}


def _auto_dt(stack: GeometryStack, cfg: FlowConfig) -> float:
    max_hf = float(np.abs(stack.H_f).max())
    return cfg.cfl * stack.min_spacing() ** 2 / max(max_hf, 1.0)


def _velocity(stack: GeometryStack) -> np.ndarray:
    return -stack.H_f[:, None] * stack.normal


def _advance(curve: DiscreteCurve, stack: GeometryStack, w, scheme: str, dt: float):
    """One integrator step; returns (new curve, its geometry stack)."""
    X = curve.nodes
    if scheme == "explicit_euler":
        X_new = X + dt * _velocity(stack)
    else:  # rk4
        k1 = _velocity(stack)
        s2 = build_geometry(curve.with_nodes(X + 0.5 * dt * k1), w)
        k2 = _velocity(s2)
        s3 = build_geometry(curve.with_nodes(X + 0.5 * dt * k2), w)
        k3 = _velocity(s3)
        s4 = build_geometry(curve.with_nodes(X + dt * k3), w)
        k4 = _velocity(s4)
        X_new = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new_curve = curve.with_nodes(X_new, time=curve.time + dt)
    return new_curve, build_geometry(new_curve, w)


def step(curve: DiscreteCurve, w, cfg: FlowConfig) -> DiscreteCurve:
    """Advance one time step. Raises :class:`StepRejectedError` when the step
    would degenerate the mesh or fails the dt * max|H_f| < (min spacing)
    sanity bound; the caller may halve dt and retry."""
    cfg.validate()
    stack = build_geometry(curve, w)
    dt = _auto_dt(stack, cfg) if cfg.dt == "auto" else float(cfg.dt)
    if dt <= 0.0:
        raise ConfigError("dt must be positive", field="flow.dt")
    return _try_step(curve, stack, w, cfg.scheme, dt)[0]


def _try_step(curve, stack, w, scheme, dt):
    max_hf = float(np.abs(stack.H_f).max())
    if dt * max_hf >= stack.min_spacing():
        raise StepRejectedError(
            f"dt*max|H_f| = {dt * max_hf:.3g} exceeds min spacing {stack.min_spacing():.3g}"
        )
    try:
        return _advance(curve, stack, w, scheme, dt)
    except MeshQualityError as exc:
        raise StepRejectedError(str(exc), node_index=exc.node_index) from exc


def redistribute_uniform(curve: DiscreteCurve) -> DiscreteCurve:
    """Resample to uniform arclength along the closed polyline; node 0 is the
    anchor. Purely tangential up to O(spacing^2): the polyline shape is kept."""
    X = curve.nodes
    n = curve.n_nodes
    seg = curve.chord_lengths()
    s = np.concatenate([[0.0], np.cumsum(seg)])  # length n+1, s[-1] = total
    total = s[-1]
    targets = total * np.arange(n) / n
    verts = np.vstack([X, X[:1]])
    xs = np.interp(targets, s, verts[:, 0])
    ys = np.interp(targets, s, verts[:, 1])
    return curve.with_nodes(np.stack([xs, ys], axis=1))


def _stop_trigger(rules: StopRules, mon: _MonitorLog) -> dict | None:
    r = mon.rows
    t = r["t"][-1]
    if rules.hf_negative is not None and r["min_hf"][-1] < -rules.hf_negative:
        return {"rule": "hf_negative", "t": t, "node": r["argmin_hf"][-1]}
    if rules.h_negative is not None and r["min_h"][-1] < -rules.h_negative:
        return {"rule": "h_negative", "t": t, "node": r["argmin_h"][-1]}
    if rules.pinch_exceeds is not None and r["max_pinch"][-1] > rules.pinch_exceeds:
        return {"rule": "pinch_exceeds", "t": t, "node": None}
    return None


def run(initial: DiscreteCurve, w, cfg: FlowConfig) -> FlowTrace:
    """Advance to cfg.t_end (or a stop trigger), recording snapshots and
    per-step monitors. Step rejections halve dt when dt is "auto"; otherwise
    they surface as :class:`FlowError` with the partial trace attached."""
    cfg.validate()
    curve = initial
    stack = build_geometry(curve, w)
    curves = [curve]
    stacks = [stack]
    mon = _MonitorLog()
    mon.append(curve.time, 0.0, stack, w)

    stop_reason = None
    dt_max = 0.0
    steps = 0
    t_goal = cfg.t_end

    def _partial():
        return FlowTrace(
            curves=curves, stacks=stacks, monitors=mon.arrays(), config=cfg,
            stop_reason=stop_reason, n_steps=steps, dt_max=dt_max,
        )

    while curve.time < t_goal - _T_EPS * max(1.0, t_goal):
        if steps >= cfg.max_steps:
            raise FlowError(f"exceeded max_steps={cfg.max_steps}", trace=_partial())
        dt_nominal = _auto_dt(stack, cfg) if cfg.dt == "auto" else float(cfg.dt)
        dt = min(dt_nominal, t_goal - curve.time)
        halvings = 0
        while True:
            try:
                nxt, nxt_stack = _try_step(curve, stack, w, cfg.scheme, dt)
                break
            except StepRejectedError as exc:
                halvings += 1
                if cfg.dt == "auto" and halvings <= _MAX_HALVINGS:
                    dt *= 0.5
                    continue
                raise FlowError(f"step rejected at t={curve.time!r}: {exc}", trace=_partial()) from exc
        curve, stack = nxt, nxt_stack
        steps += 1
        dt_max = max(dt_max, dt)

        if cfg.redistribution == "tangential_uniform" and steps % cfg.redistribute_every == 0:
            curve = redistribute_uniform(curve)
            stack = build_geometry(curve, w)

        mon.append(curve.time, dt, stack, w)
        stop_reason = _stop_trigger(cfg.stop_on, mon)
        at_end = curve.time >= t_goal - _T_EPS * max(1.0, t_goal)
        if steps % cfg.record_every == 0 or stop_reason is not None or at_end:
            curves.append(curve)
            stacks.append(stack)
        if stop_reason is not None:
            break

    if curves[-1] is not curve:
        curves.append(curve)
        stacks.append(stack)
    return _partial()


# ---------------------------------------------------------------------------
# Monitors over a finished trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignReport:
    """Sign preservation of H_f and h along a trace.

    A quantity's test is vacuous when its initial minimum is already below
    -tol (the preservation statement assumes a nonnegative start).
    """

    hf_preserved: bool
    h_preserved: bool
    hf_vacuous: bool
    h_vacuous: bool
    hf_first_violation: tuple | None
    h_first_violation: tuple | None
    tol_hf: float
    tol_h: float

    @property
    def first_violation(self):
        cands = [v for v in (self.hf_first_violation, self.h_first_violation) if v is not None]
        return min(cands, key=lambda v: v[0]) if cands else None

    def to_json_dict(self) -> dict:
        return {
            "hf_preserved": bool(self.hf_preserved),
            "h_preserved": bool(self.h_preserved),
            "hf_vacuous": bool(self.hf_vacuous),
            "h_vacuous": bool(self.h_vacuous),
            "hf_first_violation": _viol_json(self.hf_first_violation),
            "h_first_violation": _viol_json(self.h_first_violation),
            "tol_hf": float(self.tol_hf),
            "tol_h": float(self.tol_h),
        }


def _viol_json(v):
    return None if v is None else {"t": float(v[0]), "node": int(v[1])}


def _first_below(mon: dict, key: str, argkey: str, tol: float):
    below = np.nonzero(np.asarray(mon[key]) < -tol)[0]
    if below.size == 0:
        return None
    k = int(below[0])
    return (float(mon["t"][k]), int(mon[argkey][k]))


def sign_monitors(trace: FlowTrace, tol_scale: float = 1.0) -> SignReport:
    """Check the sign-preservation statements on a recorded trace.

    Tolerances default to 1e-6 times the initial max of the same quantity."""
    stack0 = trace.stacks[0]
    mon = trace.monitors
    tol_hf = 1e-6 * float(np.abs(stack0.H_f).max()) * tol_scale
    tol_h = 1e-6 * float(np.abs(stack0.H).max()) * tol_scale

    hf_vacuous = float(stack0.H_f.min()) < -tol_hf
    h_vacuous = float(stack0.H.min()) < -tol_h
    hf_preserved = bool(np.min(mon["min_hf"]) >= -tol_hf)
    h_preserved = bool(np.min(mon["min_h"]) >= -tol_h)
    return SignReport(
        hf_preserved=hf_preserved,
        h_preserved=h_preserved,
        hf_vacuous=hf_vacuous,
        h_vacuous=h_vacuous,
        hf_first_violation=_first_below(mon, "min_hf", "argmin_hf", tol_hf),
        h_first_violation=_first_below(mon, "min_h", "argmin_h", tol_h),
        tol_hf=tol_hf,
        tol_h=tol_h,
    )


@dataclass(frozen=True)
class PinchReport:
    """Pinching-ratio bound |h|^2 / H_f^2 <= C^2 along a trace.

    C^2 is sup |h|^2 over the initial curve divided by inf H_f^2 there;
    lam/mu are the global extrema of the tangential Hessian over the initial
    curve (the hypotheses treat them as constants). When inf H_f(0) <= 0 the
    report flags the hypothesis failure instead of raising.
    """

    C_squared: float | None
    sup_ratio: float
    hypotheses_met: bool
    lam: float
    mu: float
    inf_hf_initial: float
    sup_h2_initial: float
    flags: dict

    @property
    def C(self) -> float | None:
        return None if self.C_squared is None else float(np.sqrt(self.C_squared))

    def to_json_dict(self) -> dict:
        return {
            "C_squared": None if self.C_squared is None else float(self.C_squared),
            "C": self.C,
            "sup_ratio": _finite_or_none(self.sup_ratio),
            "hypotheses_met": bool(self.hypotheses_met),
            "lam": float(self.lam),
            "mu": float(self.mu),
            "inf_hf_initial": float(self.inf_hf_initial),
            "sup_h2_initial": float(self.sup_h2_initial),
            "flags": {k: bool(v) for k, v in self.flags.items()},
        }


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


def pinch_monitor(trace: FlowTrace, w, tol_scale: float = 1.0) -> PinchReport:
    """Evaluate the pinching bound and its hypotheses on a recorded trace."""
    stack0 = trace.stacks[0]
    curve0 = trace.curves[0]
    inf_hf0 = float(stack0.H_f.min())
    sup_h2_0 = float((stack0.H**2).max())
    hb = hessian_bounds(w, curve0)
    lam, mu = hb.lam, hb.mu

    scale = max(1.0, abs(inf_hf0) + abs(lam) + 2.0 * abs(mu))
    flag_positive = inf_hf0 > 0.0
    flag_combined = (inf_hf0 + lam - 2.0 * mu) <= 1e-9 * scale
    flag_third = bool(getattr(w, "third_derivative_zero", False))
    hypotheses_met = flag_positive and flag_combined and flag_third

    C_squared = sup_h2_0 / inf_hf0**2 if flag_positive else None
    sup_ratio = float(np.max(trace.monitors["max_pinch"]))
    return PinchReport(
        C_squared=C_squared,
        sup_ratio=sup_ratio,
        hypotheses_met=hypotheses_met,
        lam=lam,
        mu=mu,
        inf_hf_initial=inf_hf0,
        sup_h2_initial=sup_h2_0,
        flags={
            "initial_hf_positive": flag_positive,
            "combined_eigenvalue_condition": flag_combined,
            "third_derivative_zero": flag_third,
        },
    )
