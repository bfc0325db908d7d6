"""Closed plane curves sampled at Lagrangian nodes, and their discrete geometry.

Nodes are indexed periodically by the uniform parameter theta_i = 2*pi*i/N.
All stencils are periodic three-point stencils of second order. The metric
g = |dF/dtheta|^2 is discretized as the symmetric average of the squared
forward/backward chords, which makes uniformly sampled circles exact discrete
solutions (H = 1/R to rounding) while keeping second-order consistency on
general smooth curves.

Conventions: curves are stored counterclockwise; the outward unit normal is
the unit tangent rotated by -90 degrees; the second fundamental form is
h = -<N, d^2F/dtheta^2> and H = h/g, so convex curves have H > 0 and the flow
shrinks them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MeshQualityError, OrientationError
from .stencils import nonuniform_second_derivative

MIN_NODES = 16
SPACING_RATIO_MIN = 0.05


@dataclass(frozen=True)
class DiscreteCurve:
    """Periodic node sampling of a closed plane curve.

    ``node_ids`` give nodes a stable (Lagrangian) identity across time steps;
    they default to 0..N-1.
    """

    nodes: np.ndarray
    time: float = 0.0
    node_ids: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ConfigError("curve nodes must have shape (N, 2)", field="curve.nodes")
        if not np.all(np.isfinite(nodes)):
            raise MeshQualityError("curve nodes contain non-finite values")
        if nodes.shape[0] < MIN_NODES:
            raise MeshQualityError(f"need at least {MIN_NODES} nodes, got {nodes.shape[0]}")
        ids = self.node_ids
        if ids is None:
            ids = np.arange(nodes.shape[0])
        else:
            ids = np.asarray(ids, dtype=int)
            if ids.shape != (nodes.shape[0],):
                raise ConfigError("node_ids must match the node count", field="curve.node_ids")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "node_ids", ids)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def chord_lengths(self) -> np.ndarray:
        """|X_{i+1} - X_i| for i = 0..N-1 (periodic)."""
        return np.linalg.norm(np.roll(self.nodes, -1, axis=0) - self.nodes, axis=1)

    def validate(self):
        """Mesh-quality guard, run before every geometry build.

        Raises :class:`MeshQualityError` carrying the offending node index if
        any spacing vanishes or the min/max spacing ratio drops below 0.05.
        """
        seg = self.chord_lengths()
        i_min = int(np.argmin(seg))
        if seg[i_min] <= 0.0:
            raise MeshQualityError("coincident adjacent nodes", node_index=i_min)
        ratio = seg[i_min] / seg.max()
        if ratio < SPACING_RATIO_MIN:
            raise MeshQualityError(
                f"mesh spacing ratio {ratio:.3g} below {SPACING_RATIO_MIN}", node_index=i_min
            )

    def with_nodes(self, nodes: np.ndarray, time: float | None = None) -> "DiscreteCurve":
        return DiscreteCurve(
            nodes=nodes,
            time=self.time if time is None else time,
            node_ids=self.node_ids,
        )

    def index_of_id(self, node_id: int) -> int:
        idx = np.nonzero(self.node_ids == node_id)[0]
        if idx.size != 1:
            raise KeyError(f"node id {node_id} not present exactly once")
        return int(idx[0])


def signed_area(nodes: np.ndarray) -> float:
    """Signed polygon area; positive for counterclockwise orientation."""
    x, y = nodes[:, 0], nodes[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def curve_length(curve: DiscreteCurve) -> float:
    return float(curve.chord_lengths().sum())


def circle_curve(radius: float, n: int, center=(0.0, 0.0), time: float = 0.0) -> DiscreteCurve:
    th = 2.0 * np.pi * np.arange(n) / n
    nodes = np.asarray(center, dtype=float) + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    return DiscreteCurve(nodes=nodes, time=time)


def ellipse_curve(a: float, b: float, n: int, time: float = 0.0) -> DiscreteCurve:
    th = 2.0 * np.pi * np.arange(n) / n
    nodes = np.stack([a * np.cos(th), b * np.sin(th)], axis=1)
    return DiscreteCurve(nodes=nodes, time=time)


def rounded_square_curve(scale: float, n: int, time: float = 0.0) -> DiscreteCurve:
    """Quartic oval x^4 + y^4 = scale^4: smooth, weakly convex, square-ish."""
    th = 2.0 * np.pi * np.arange(n) / n
    r = scale / (np.cos(th) ** 4 + np.sin(th) ** 4) ** 0.25
    nodes = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    return DiscreteCurve(nodes=nodes, time=time)


def bean_curve(n: int, dent: float = 0.7, time: float = 0.0) -> DiscreteCurve:
    """Dented (non-convex) limacon r = 1 + dent*cos(theta); simple for dent < 1."""
    if not 0.0 < dent < 1.0:
        raise ConfigError("dent must lie in (0, 1)", field="curve.dent")
    th = 2.0 * np.pi * np.arange(n) / n
    r = 1.0 + dent * np.cos(th)
    nodes = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    return DiscreteCurve(nodes=nodes, time=time)


def curve_from_config(cfg: dict, rng: np.random.Generator | None = None) -> DiscreteCurve:
    """Build an initial curve from a JSON-style dict.

    Supported kinds: circle {radius, n, center?}, ellipse {a, b, n},
    rounded_square {scale?, n}, bean {dent?, n}, nodes {points}. An optional
    ``jitter`` entry displaces nodes by jitter * (min spacing) * N(0,1) using
    the supplied rng (for stress tests).
    """
    if not isinstance(cfg, dict):
        raise ConfigError("curve must be an object", field="curve")
    kind = cfg.get("kind")
    if kind == "circle":
        curve = circle_curve(
            _positive(cfg, "radius", "curve.radius"),
            _node_count(cfg),
            center=cfg.get("center", (0.0, 0.0)),
        )
    elif kind == "ellipse":
        curve = ellipse_curve(
            _positive(cfg, "a", "curve.a"), _positive(cfg, "b", "curve.b"), _node_count(cfg)
        )
    elif kind == "rounded_square":
        curve = rounded_square_curve(float(cfg.get("scale", 1.0)), _node_count(cfg))
    elif kind == "bean":
        curve = bean_curve(_node_count(cfg), dent=float(cfg.get("dent", 0.7)))
    elif kind == "nodes":
        pts = np.asarray(cfg.get("points", ()), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigError("points must be a list of [x, y] pairs", field="curve.points")
        if signed_area(pts) < 0.0:
            pts = pts[::-1].copy()
        curve = DiscreteCurve(nodes=pts)
    else:
        raise ConfigError(f"unknown curve kind {kind!r}", field="curve.kind")

    jitter = float(cfg.get("jitter", 0.0))
    if jitter > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        amp = jitter * curve.chord_lengths().min()
        curve = curve.with_nodes(curve.nodes + amp * rng.standard_normal(curve.nodes.shape))
    return curve


def _node_count(cfg: dict) -> int:
    n = cfg.get("n")
    if not isinstance(n, int) or n < MIN_NODES:
        raise ConfigError(f"n must be an integer >= {MIN_NODES}", field="curve.n")
    return n


def _positive(cfg: dict, key: str, path: str) -> float:
    try:
        v = float(cfg[key])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"missing or non-numeric {key}", field=path) from None
    if v <= 0.0:
        raise ConfigError(f"{key} must be positive", field=path)
    return v


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


@dataclass
class GeometryStack:
    """Per-node geometric quantities of a curve under a given weight.

    ``sff_h`` is the coordinate second fundamental form h_theta_theta; ``H``
    is the curvature h/g (positive for convex curves with the outward
    normal); ``H_f`` subtracts the normal component of the ambient weight
    gradient. ``dt_H_f_rhs`` assembles the right-hand side of the H_f
    evolution equation L H_f + (|h|^2 + Hess f(N,N)) H_f.
    """

    tangent: np.ndarray
    normal: np.ndarray
    metric_g: np.ndarray
    sff_h: np.ndarray
    H: np.ndarray
    H_f: np.ndarray
    dH_f_ds: np.ndarray
    lap_H_f: np.ndarray
    L_H_f: np.ndarray
    dt_H_f_rhs: np.ndarray
    # internals reused by operators and the stepper
    dtheta: float = 0.0
    chord_plus: np.ndarray = field(default=None, repr=False)
    chord_minus: np.ndarray = field(default=None, repr=False)
    sqrt_g: np.ndarray = field(default=None, repr=False)
    grad_f_tangent: np.ndarray = field(default=None, repr=False)
    hess_f_normal: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.H.shape[0]

    def min_spacing(self) -> float:
        return float(min(self.chord_plus.min(), self.chord_minus.min()))


def _shift_next(a: np.ndarray) -> np.ndarray:
    """out[i] = a[i+1] (periodic); cheaper than np.roll on small arrays."""
    out = np.empty_like(a)
    out[:-1] = a[1:]
    out[-1] = a[0]
    return out


def _shift_prev(a: np.ndarray) -> np.ndarray:
    """out[i] = a[i-1] (periodic)."""
    out = np.empty_like(a)
    out[1:] = a[:-1]
    out[0] = a[-1]
    return out


def _dtheta_central(values: np.ndarray, dtheta: float) -> np.ndarray:
    return (_shift_next(values) - _shift_prev(values)) / (2.0 * dtheta)


def _dtheta_second(values: np.ndarray, dtheta: float) -> np.ndarray:
    return (_shift_next(values) - 2.0 * values + _shift_prev(values)) / dtheta**2


def _arclength_laplacian(values: np.ndarray, chord_minus: np.ndarray, chord_plus: np.ndarray):
    fm = _shift_prev(values)
    fp = _shift_next(values)
    return nonuniform_second_derivative(fm, values, fp, chord_minus, chord_plus)


def build_geometry(curve: DiscreteCurve, w) -> GeometryStack:
    """Populate all per-node geometric fields for ``curve`` under weight ``w``.

    The weight only needs ``gradient(x)`` and ``hessian_quadratic_form(x, v)``,
    so both exact quadratic weights and exploratory ones work. This is the hot
    path of the stepper, hence the componentwise arithmetic.
    """
    X = curve.nodes
    n = curve.n_nodes
    dtheta = 2.0 * np.pi / n
    x = np.ascontiguousarray(X[:, 0])
    y = np.ascontiguousarray(X[:, 1])
    xp = _shift_next(x)
    yp = _shift_next(y)
    xm = _shift_prev(x)
    ym = _shift_prev(y)

    dxp = xp - x
    dyp = yp - y
    chord_plus = np.sqrt(dxp * dxp + dyp * dyp)
    chord_minus = _shift_prev(chord_plus)

    # mesh-quality guard (spacing positive, min/max ratio bounded)
    i_min = int(np.argmin(chord_plus))
    c_min = chord_plus[i_min]
    if c_min <= 0.0:
        raise MeshQualityError("coincident adjacent nodes", node_index=i_min)
    ratio = c_min / chord_plus.max()
    if ratio < SPACING_RATIO_MIN:
        raise MeshQualityError(
            f"mesh spacing ratio {ratio:.3g} below {SPACING_RATIO_MIN}", node_index=i_min
        )
    if 0.5 * float(np.sum(x * yp - xp * y)) <= 0.0:
        raise OrientationError("curve must be counterclockwise (positive signed area)")

    inv_2dt = 0.5 / dtheta
    inv_dt2 = 1.0 / dtheta**2
    Fpx = (xp - xm) * inv_2dt
    Fpy = (yp - ym) * inv_2dt
    Fppx = (xp - 2.0 * x + xm) * inv_dt2
    Fppy = (yp - 2.0 * y + ym) * inv_dt2

    # symmetric chord average for g = |dF/dtheta|^2 (exact on circles)
    metric_g = (chord_plus * chord_plus + chord_minus * chord_minus) * (0.5 * inv_dt2)
    sqrt_g = np.sqrt(metric_g)

    speed = np.sqrt(Fpx * Fpx + Fpy * Fpy)
    i_bad = int(np.argmin(speed))
    if speed[i_bad] <= 0.0:
        raise MeshQualityError("vanishing tangent", node_index=i_bad)
    tx = Fpx / speed
    ty = Fpy / speed
    nx = ty
    ny = -tx

    sff_h = -(nx * Fppx + ny * Fppy)
    H = sff_h / metric_g

    gradf = np.asarray(w.gradient(X), dtype=float)
    gfx = gradf[:, 0]
    gfy = gradf[:, 1]
    H_f = H - (gfx * nx + gfy * ny)

    dH_f_ds = (_shift_next(H_f) - _shift_prev(H_f)) * inv_2dt / sqrt_g
    lap_H_f = _arclength_laplacian(H_f, chord_minus, chord_plus)
    grad_f_tangent = gfx * tx + gfy * ty
    L_H_f = lap_H_f - grad_f_tangent * dH_f_ds

    tangent = np.empty_like(X)
    tangent[:, 0] = tx
    tangent[:, 1] = ty
    normal = np.empty_like(X)
    normal[:, 0] = nx
    normal[:, 1] = ny
    hess_f_normal = np.asarray(w.hessian_quadratic_form(X, normal), dtype=float)
    # |h|^2 = H^2 for plane curves
    dt_H_f_rhs = L_H_f + (H * H + hess_f_normal) * H_f

    return GeometryStack(
        tangent=tangent,
        normal=normal,
        metric_g=metric_g,
        sff_h=sff_h,
        H=H,
        H_f=H_f,
        dH_f_ds=dH_f_ds,
        lap_H_f=lap_H_f,
        L_H_f=L_H_f,
        dt_H_f_rhs=dt_H_f_rhs,
        dtheta=dtheta,
        chord_plus=chord_plus,
        chord_minus=chord_minus,
        sqrt_g=sqrt_g,
        grad_f_tangent=grad_f_tangent,
        hess_f_normal=hess_f_normal,
    )


def unit_tangents(curve: DiscreteCurve) -> np.ndarray:
    """Unit tangents by periodic central differences (no full geometry build)."""
    X = curve.nodes
    Fp = np.roll(X, -1, axis=0) - np.roll(X, 1, axis=0)
    speed = np.linalg.norm(Fp, axis=1)
    i_bad = int(np.argmin(speed))
    if speed[i_bad] <= 0.0:
        raise MeshQualityError("vanishing tangent", node_index=i_bad)
    return Fp / speed[:, None]


def weighted_laplacian(field_values, curve: DiscreteCurve, w, stack: GeometryStack | None = None):
    """Weighted operator L phi = Lap_s phi - <grad f, tangent> d_s phi per node.

    Lap_s is the arclength Laplacian on the non-uniform chord spacing; the
    drift term vanishes bitwise for constant weights, so L then equals the
    plain arclength Laplacian exactly.
    """
    phi = np.asarray(field_values, dtype=float)
    if phi.shape != (curve.n_nodes,):
        raise ConfigError("field must be one scalar per node", field="field")
    if stack is None:
        stack = build_geometry(curve, w)
    lap = _arclength_laplacian(phi, stack.chord_minus, stack.chord_plus)
    dphi_ds = _dtheta_central(phi, stack.dtheta) / stack.sqrt_g
    return lap - stack.grad_f_tangent * dphi_ds


def intrinsic_distance(curve: DiscreteCurve, i: int, j: int) -> float:
    """Shorter-arc polyline length between nodes i and j."""
    n = curve.n_nodes
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node indices must lie in [0, {n})")
    if i == j:
        return 0.0
    seg = curve.chord_lengths()
    lo, hi = (i, j) if i < j else (j, i)
    arc = float(seg[lo:hi].sum())
    total = float(seg.sum())
    return min(arc, total - arc)
