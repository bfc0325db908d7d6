"""Scenario configs, check execution, and machine-readable artifacts.

A scenario JSON file looks like:

    {
      "name": "shrinking_circle",
      "description": "optional one-liner",
      "curve":  {"kind": "circle", "radius": 2.0, "n": 256},
      "weight": {"c0": 0.0, "b": [0.0, 0.0], "A": [[0.0, 0.0], [0.0, 0.0]]},
      "flow":   {"scheme": "rk4", "dt": "auto", "cfl": 0.2, "t_end": 1.5,
                 "record_every": 100, "redistribution": "none"},
      "checks": [{"type": "differential_harnack", "variant": "plain"},
                 {"type": "signs"},
                 {"type": "pinch"},
                 {"type": "integral_harnack", "pairs": {"auto": {"count": 24}}},
                 {"type": "evolution_residuals", "refine": true}],
      "seed": 0
    }

Running a scenario writes, under <out>/<name>/: trace/snap_*.csv,
monitors.csv, residuals.csv, harnack_report.json + harnack_summary.csv,
integral_harnack.json, and summary.json. Every check entry in summary.json
carries ``vacuous`` and ``hypothesis_flags`` so a pass is never reported for
an inapplicable statement. Exit code contract: 0 all non-vacuous checks pass,
1 a non-vacuous check failed, 2 configuration/usage error.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .curve import curve_from_config
from .errors import ConfigError, FmcfError
from .flow import FlowConfig, FlowTrace, pinch_monitor, run, sign_monitors
from .harnack import (
    VARIANTS,
    sample_integral_pairs,
    verify_differential_harnack,
    verify_integral_harnack,
)
from .residuals import RESIDUAL_KEYS, evolution_residuals, residual_convergence
from .weights import WeightField

CHECK_TYPES = ("evolution_residuals", "differential_harnack", "integral_harnack", "pinch", "signs")

# checks that read per-node time differences or material paths off the trace
_MATERIAL_CHECKS = {"evolution_residuals", "differential_harnack", "integral_harnack"}


@dataclass
class Scenario:
    name: str
    curve_cfg: dict
    weight: WeightField
    flow: FlowConfig
    checks: list
    seed: int = 0
    description: str = ""
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        if not isinstance(cfg, dict):
            raise ConfigError("scenario must be a JSON object")
        name = cfg.get("name")
        if not name or not isinstance(name, str):
            raise ConfigError("scenario needs a nonempty name", field="name")
        if any(ch in name for ch in "/\\ \t\n"):
            raise ConfigError("name must be filesystem-safe (no spaces or slashes)", field="name")
        if "curve" not in cfg:
            raise ConfigError("missing curve", field="curve")
        if "flow" not in cfg:
            raise ConfigError("missing flow", field="flow")
        weight = WeightField.from_config(cfg.get("weight", {}))
        flow = FlowConfig.from_config(cfg["flow"])
        checks = cfg.get("checks", [])
        if not isinstance(checks, list):
            raise ConfigError("checks must be a list", field="checks")
        for k, chk in enumerate(checks):
            _validate_check(chk, k, flow)
        scenario = cls(
            name=name,
            curve_cfg=cfg["curve"],
            weight=weight,
            flow=flow,
            checks=checks,
            seed=int(cfg.get("seed", 0)),
            description=str(cfg.get("description", "")),
            output_dir=cfg.get("output_dir"),
        )
        # fail fast on bad curve configs (before any flow work)
        curve_from_config(scenario.curve_cfg, rng=np.random.default_rng(scenario.seed))
        return scenario


def _validate_check(chk, index: int, flow: FlowConfig):
    path = f"checks[{index}]"
    if not isinstance(chk, dict) or "type" not in chk:
        raise ConfigError("each check needs a 'type'", field=path)
    ctype = chk["type"]
    if ctype not in CHECK_TYPES:
        raise ConfigError(f"unknown check type {ctype!r}", field=f"{path}.type")
    if ctype in _MATERIAL_CHECKS and flow.redistribution != "none":
        raise ConfigError(
            f"{ctype} requires redistribution = none", field="flow.redistribution"
        )
    if ctype == "differential_harnack":
        variant = chk.get("variant", "plain")
        if variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}", field=f"{path}.variant")
        if variant == "general_c" and "c_of_t" not in chk:
            raise ConfigError("general_c needs a c_of_t table", field=f"{path}.c_of_t")
    if ctype == "integral_harnack" and "pairs" not in chk:
        raise ConfigError("integral_harnack needs 'pairs'", field=f"{path}.pairs")
    if ctype == "evolution_residuals" and chk.get("refine"):
        if flow.dt == "auto":
            raise ConfigError("refined residual check needs an explicit dt", field="flow.dt")
        if flow.record_every != 1:
            raise ConfigError("refined residual check needs record_every = 1", field="flow.record_every")


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return Scenario.from_dict(cfg)


@dataclass
class CheckResult:
    name: str
    passed: bool | None  # None when vacuous
    vacuous: bool
    hypothesis_flags: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": None if self.passed is None else bool(self.passed),
            "vacuous": bool(self.vacuous),
            "hypothesis_flags": {k: bool(v) for k, v in self.hypothesis_flags.items()},
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


@dataclass
class ScenarioOutcome:
    scenario: Scenario
    trace: FlowTrace
    results: list
    summary: dict
    exit_code: int
    out_dir: Path | None


def run_scenario(
    scenario, out_dir=None, tol_scale: float = 1.0, write: bool = True
) -> ScenarioOutcome:
    """Run the flow, execute every requested check, write artifacts.

    ``scenario`` may be a :class:`Scenario`, a dict, or a path to a JSON file.
    """
    if isinstance(scenario, (str, os.PathLike)):
        scenario = load_scenario(scenario)
    elif isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)

    rng = np.random.default_rng(scenario.seed)
    initial = curve_from_config(scenario.curve_cfg, rng=rng)
    trace = run(initial, scenario.weight, scenario.flow)

    results = []
    artifacts = {}
    for chk in scenario.checks:
        result, extra = _run_check(chk, trace, scenario, tol_scale)
        results.append(result)
        artifacts.update(extra)

    summary = {
        "scenario": scenario.name,
        "description": scenario.description,
        "seed": scenario.seed,
        "n_nodes": int(initial.n_nodes),
        "t_end": float(scenario.flow.t_end),
        "n_steps": int(trace.n_steps),
        "n_snapshots": int(trace.n_snapshots),
        "dt_max": float(trace.dt_max),
        "tol_scale": float(tol_scale),
        "stop_reason": _jsonable(trace.stop_reason),
        "checks": [r.to_json_dict() for r in results],
    }
    failed = [r.name for r in results if r.passed is False and not r.vacuous]
    summary["failed"] = failed
    summary["vacuous"] = [r.name for r in results if r.vacuous]
    summary["all_passed"] = not failed
    exit_code = 0 if not failed else 1

    out_path = None
    if write:
        root = Path(out_dir) if out_dir is not None else default_output_root()
        out_path = root / scenario.name
        _write_artifacts(out_path, trace, summary, artifacts)
    return ScenarioOutcome(
        scenario=scenario, trace=trace, results=results, summary=summary,
        exit_code=exit_code, out_dir=out_path,
    )


def default_output_root() -> Path:
    return Path(os.environ.get("FMCF_OUT", "fmcf_out"))


def _run_check(chk: dict, trace: FlowTrace, scenario: Scenario, tol_scale: float):
    ctype = chk["type"]
    w = scenario.weight
    extra = {}

    if ctype == "signs":
        rep = sign_monitors(trace, tol_scale=tol_scale)
        vacuous = rep.hf_vacuous and rep.h_vacuous
        passed = None if vacuous else (
            (rep.hf_vacuous or rep.hf_preserved) and (rep.h_vacuous or rep.h_preserved)
        )
        result = CheckResult(
            name="signs", passed=passed, vacuous=vacuous,
            hypothesis_flags={
                "initial_hf_nonneg": not rep.hf_vacuous,
                "initial_h_nonneg": not rep.h_vacuous,
            },
            details=rep.to_json_dict(),
        )

    elif ctype == "pinch":
        rep = pinch_monitor(trace, w, tol_scale=tol_scale)
        margin = 1.0 + 0.05 * tol_scale
        if rep.hypotheses_met:
            passed = rep.sup_ratio <= rep.C_squared * margin
            vacuous = False
        else:
            passed, vacuous = None, True
        result = CheckResult(
            name="pinch", passed=passed, vacuous=vacuous,
            hypothesis_flags=rep.flags, details=rep.to_json_dict(),
        )

    elif ctype == "differential_harnack":
        rep = verify_differential_harnack(
            trace, w, variant=chk.get("variant", "plain"),
            c_of_t=chk.get("c_of_t"), tol_scale=tol_scale,
        )
        passed = None if rep.vacuous else not rep.violations
        result = CheckResult(
            name="differential_harnack", passed=passed, vacuous=rep.vacuous,
            hypothesis_flags=rep.hypothesis_flags,
            details={
                "variant": rep.variant,
                "tol": rep.tol,
                "global_min": rep.global_min,
                "n_violations": len(rep.violations),
                "n_samples": rep.n_samples,
            },
        )
        extra["harnack_report.json"] = rep.to_json_dict()
        extra["harnack_summary.csv"] = [("t", "global_min_at_t", "violations_at_t")] + [
            row for row in rep.per_time_rows()
        ]

    elif ctype == "integral_harnack":
        pairs = chk["pairs"]
        if isinstance(pairs, dict) and "auto" in pairs:
            auto = pairs["auto"] or {}
            pairs = sample_integral_pairs(
                trace, count=int(auto.get("count", 20)), seed=scenario.seed,
                same_node_fraction=float(auto.get("same_node_fraction", 0.5)),
            )
        checks = verify_integral_harnack(trace, w, pairs, tol_scale=tol_scale)
        non_vac = [c for c in checks if not c.vacuous]
        vacuous = not non_vac
        passed = None if vacuous else all(c.passes for c in non_vac)
        pinch_rep = pinch_monitor(trace, w, tol_scale=tol_scale)
        result = CheckResult(
            name="integral_harnack", passed=passed, vacuous=vacuous,
            hypothesis_flags=pinch_rep.flags,
            details={
                "n_checks": len(checks),
                "n_vacuous": sum(c.vacuous for c in checks),
                "n_failed": sum(c.passes is False for c in checks),
                "C": pinch_rep.C if pinch_rep.hypotheses_met else None,
                "min_margin": min(
                    (c.margin for c in non_vac), default=None
                ),
            },
        )
        extra["integral_harnack.json"] = {
            "C": pinch_rep.C if pinch_rep.hypotheses_met else None,
            "hypotheses_met": bool(pinch_rep.hypotheses_met),
            "checks": [c.to_json_dict() for c in checks],
        }

    elif ctype == "evolution_residuals":
        rep = evolution_residuals(trace, w)
        details = {"overall": rep.overall}
        passed, vacuous = True, False
        if chk.get("refine"):
            lo, hi = chk.get("ratio_bounds", (3.0, 5.0))
            conv = residual_convergence(
                dict(scenario.curve_cfg), w,
                dt0=float(scenario.flow.dt), t_end=scenario.flow.t_end,
                scheme=scenario.flow.scheme, base_report=rep,
            )
            details["levels"] = conv.levels
            details["ratios"] = conv.ratios
            details["ratio_bounds"] = [lo, hi]
            passed = conv.within(float(lo), float(hi))
        elif "max_residual" in chk:
            passed = all(rep.overall[k] <= float(chk["max_residual"]) for k in RESIDUAL_KEYS)
        result = CheckResult(
            name="evolution_residuals", passed=passed, vacuous=vacuous, details=details
        )
        extra["residuals.csv"] = [("t", "res_g", "res_N", "res_Hf", "res_h")] + list(rep.rows())

    else:  # pragma: no cover - guarded by validation
        raise ConfigError(f"unknown check type {ctype!r}")

    return result, extra


# ---------------------------------------------------------------------------
# Artifact writing
# ---------------------------------------------------------------------------


def write_json(path: Path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, rows):
    lines = [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_artifacts(out_path: Path, trace: FlowTrace, summary: dict, artifacts: dict):
    out_path.mkdir(parents=True, exist_ok=True)
    trace_dir = out_path / "trace"
    trace_dir.mkdir(exist_ok=True)
    for k, (curve, stack) in enumerate(zip(trace.curves, trace.stacks)):
        rows = [("node_id", "x", "y", "g", "h", "H", "Hf", "dHf_ds", "dtHf")]
        for i in range(curve.n_nodes):
            rows.append(
                (
                    int(curve.node_ids[i]),
                    curve.nodes[i, 0], curve.nodes[i, 1],
                    stack.metric_g[i], stack.sff_h[i], stack.H[i],
                    stack.H_f[i], stack.dH_f_ds[i], stack.dt_H_f_rhs[i],
                )
            )
        write_csv(trace_dir / f"snap_{k:05d}.csv", rows)

    mon = trace.monitors
    rows = [("t", "min_Hf", "min_h", "max_pinch")]
    for j in range(len(mon["t"])):
        rows.append((mon["t"][j], mon["min_hf"][j], mon["min_h"][j], mon["max_pinch"][j]))
    write_csv(out_path / "monitors.csv", rows)

    for fname, payload in artifacts.items():
        if fname.endswith(".json"):
            write_json(out_path / fname, payload)
        else:
            write_csv(out_path / fname, payload)

    write_json(out_path / "summary.json", summary)


# ---------------------------------------------------------------------------
# Bundled scenarios and check descriptions
# ---------------------------------------------------------------------------


def bundled_scenarios() -> dict:
    """Name -> loaded config dict for every scenario shipped with the package."""
    out = {}
    for entry in sorted(resources.files("fmcf.data").iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            cfg = json.loads(entry.read_text(encoding="utf-8"))
            out[cfg["name"]] = cfg
    return out


_DESCRIPTIONS = {
    "differential_harnack": """\
differential_harnack
  Statement checked: for every tangent vector V and every t in the trace
  interior,
      dt H_f + 2 <grad H_f, V> + h(V, V) >= 0,
  minimized in closed form over V (for h > 0 the minimum is
  dt H_f - |grad H_f|^2 / h at V* = -grad H_f / h).
  Variants add a positive offset to the minimized quantity:
      hamilton_2t : + H_f / (2 t)
      general_c   : + H_f / c(t) with a user-supplied positive c(t).
  Hypotheses: quadratic weight (third ambient derivative identically zero);
  weakly convex initial curve (h >= 0 at t0); the same inequality holds at
  t0; offset variants additionally need H_f >= 0 at t0. If any hypothesis
  fails the report is vacuous: nothing is asserted.""",
    "integral_harnack": """\
integral_harnack
  Statement checked: for material samples (x1, t1), (x2, t2) with
  0 < t1 < t2,
      H_f(x2, t2) / H_f(x1, t1) >= exp(-C/4 * Delta),
      Delta <= d(x1, x_hat_2, t1)^2 / (t2 - t1),
  where d is the intrinsic distance at t1 and x_hat_2 is the material point
  that evolves into x2. C comes from the pinch bound.
  Hypotheses: the pinch hypotheses (below) and H_f > 0 at both samples;
  otherwise the check is vacuous.""",
    "pinch": """\
pinch
  Statement checked: |h|^2 / H_f^2 <= C^2 along the whole trace, with
  C^2 = sup |h|^2 / inf H_f^2 over the initial curve.
  Hypotheses: inf H_f + lambda - 2 mu <= 0 and inf H_f > 0 on the initial
  curve (lambda, mu are the global extrema of the tangential Hessian of the
  weight there), and a quadratic weight.""",
    "signs": """\
signs
  Statements checked: if H_f >= 0 initially it stays >= 0; if h >= 0
  initially (weak convexity) and the weight is quadratic, h stays >= 0.
  Tolerance: 1e-6 times the initial max of the same quantity. A quantity
  whose initial minimum is already negative makes that half of the check
  vacuous.""",
    "evolution_residuals": """\
evolution_residuals
  Statements checked (as discrete residuals, per node, interior times):
      d/dt g   = -2 H_f h
      d/dt N   = grad H_f
      d/dt H_f = L H_f + (|h|^2 + Hess f(N, N)) H_f,
                 L = Laplacian - <grad f, grad .>
      d/dt h   = Grad Grad H_f - H_f h^2 / g
  Time derivatives are centered differences across snapshots (independent of
  the integrator). With refine: true, the run is repeated at doubled
  (N, 1/dt) and the residual max-norms must shrink by a factor in
  ratio_bounds (default [3, 5]).""",
}


def describe_check(name: str) -> str:
    if name not in _DESCRIPTIONS:
        raise ConfigError(
            f"unknown check {name!r}; known: {', '.join(sorted(_DESCRIPTIONS))}"
        )
    return _DESCRIPTIONS[name]
