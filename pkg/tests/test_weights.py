"""Weight fields: exact derivatives, tangential restriction, eigenvalue bounds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmcf import (
    ConfigError,
    ExploratoryWeight,
    FrameError,
    HessianBounds,
    WeightField,
    bean_curve,
    circle_curve,
    constant_weight,
    ellipse_curve,
    eval_f,
    grad_f,
    hessian_bounds,
    isotropic_weight,
    tangential_hessian,
)


def diag(*vals):
    return np.diag(np.asarray(vals, dtype=float))


def test_eval_examples():
    assert eval_f(isotropic_weight(1.0), [1.0, 0.0]) == pytest.approx(0.5)
    assert eval_f(constant_weight(0.0), [3.7, -1.2]) == 0.0
    w = WeightField(c0=1.0, b=[1.0, 0.0], A=np.zeros((2, 2)))
    assert eval_f(w, [2.0, 3.0]) == pytest.approx(3.0)


def test_grad_examples():
    assert np.allclose(grad_f(isotropic_weight(1.0), [0.0, 1.0]), [0.0, 1.0])
    w = WeightField(c0=0.0, b=[1.0, 0.0], A=np.zeros((2, 2)))
    assert np.allclose(grad_f(w, [5.0, -2.0]), [1.0, 0.0])
    w2 = WeightField(c0=0.0, b=[0.0, 0.0], A=diag(2.0, 1.0))
    assert np.allclose(grad_f(w2, [1.0, 1.0]), [2.0, 1.0])


def test_grad_batched():
    w = WeightField(c0=0.0, b=[0.5, -1.0], A=diag(2.0, 1.0))
    pts = np.array([[1.0, 1.0], [0.0, 2.0]])
    out = grad_f(w, pts)
    assert out.shape == (2, 2)
    assert np.allclose(out[0], [2.5, 0.0])
    assert np.allclose(out[1], [0.5, 1.0])


def test_tangential_hessian_examples():
    assert tangential_hessian(isotropic_weight(1.0), [1.0, 0.0]) == pytest.approx(
        np.array([[1.0]])
    )
    w = WeightField(c0=0.0, b=[0.0, 0.0], A=diag(2.0, 0.0))
    assert tangential_hessian(w, [0.0, 1.0])[0, 0] == pytest.approx(0.0)
    s = 1.0 / np.sqrt(2.0)
    assert tangential_hessian(w, [s, s])[0, 0] == pytest.approx(1.0)


def test_tangential_hessian_full_frame():
    w = WeightField(c0=0.0, b=[0.0, 0.0], A=diag(2.0, 0.0))
    M = tangential_hessian(w, np.eye(2))
    assert np.allclose(M, diag(2.0, 0.0))


def test_tangential_hessian_frame_errors():
    w = isotropic_weight(1.0)
    with pytest.raises(FrameError):
        tangential_hessian(w, [2.0, 0.0])  # not unit
    with pytest.raises(FrameError):
        tangential_hessian(w, [[1.0, 0.0], [1.0, 0.0]])  # not orthogonal


def test_hessian_bounds_isotropic_independent_of_curve():
    for curve in (circle_curve(2.0, 64), ellipse_curve(2.0, 1.0, 64), bean_curve(64)):
        hb = hessian_bounds(isotropic_weight(0.7), curve)
        assert hb.lam == pytest.approx(0.7, abs=1e-12)
        assert hb.mu == pytest.approx(0.7, abs=1e-12)
    hb0 = hessian_bounds(constant_weight(), circle_curve(1.0, 64))
    assert (hb0.lam, hb0.mu) == (0.0, 0.0)


def test_hessian_bounds_anisotropic_circle():
    w = WeightField(c0=0.0, b=[0.0, 0.0], A=diag(2.0, 0.0))
    hb = hessian_bounds(w, circle_curve(1.0, 256))
    assert hb.lam == pytest.approx(2.0, abs=1e-3)
    assert hb.mu == pytest.approx(0.0, abs=1e-3)


def test_hessian_bounds_eigenvalue_bracket():
    # tangential values always lie between the extreme eigenvalues of A
    A = np.array([[1.5, 0.4], [0.4, -0.2]])
    w = WeightField(c0=0.0, b=[0.0, 0.0], A=A)
    eigs = np.linalg.eigvalsh(A)
    hb = hessian_bounds(w, ellipse_curve(2.0, 1.0, 128))
    assert eigs[0] - 1e-12 <= hb.mu <= hb.lam <= eigs[1] + 1e-12


def test_hessian_bounds_ordering_invariant():
    with pytest.raises(ValueError):
        HessianBounds(lam=0.0, mu=1.0)


@settings(max_examples=50, deadline=None)
@given(
    c0=st.floats(-2, 2),
    bx=st.floats(-2, 2),
    by=st.floats(-2, 2),
    a11=st.floats(-2, 2),
    a12=st.floats(-2, 2),
    a22=st.floats(-2, 2),
    px=st.floats(-3, 3),
    py=st.floats(-3, 3),
    dx=st.floats(-1, 1),
    dy=st.floats(-1, 1),
)
def test_third_derivative_vanishes(c0, bx, by, a11, a12, a22, px, py, dx, dy):
    # second difference of the gradient along any direction is zero to rounding
    w = WeightField(c0=c0, b=[bx, by], A=[[a11, a12], [a12, a22]])
    x = np.array([px, py])
    d = np.array([dx, dy])
    h = 0.37
    second = grad_f(w, x + h * d) - 2.0 * grad_f(w, x) + grad_f(w, x - h * d)
    scale = 1.0 + np.abs(grad_f(w, x)).max()
    assert np.abs(second).max() <= 1e-12 * scale


def test_symmetry_validated_exactly():
    with pytest.raises(ConfigError):
        WeightField(c0=0.0, b=[0.0, 0.0], A=[[0.0, 1e-17], [0.0, 0.0]])
    with pytest.raises(ConfigError):
        WeightField.from_config({"A": [[0.0, 1.0], [0.5, 0.0]]})


def test_config_round_trip():
    w = WeightField(c0=0.3, b=[1.0, -2.0], A=[[0.2, 0.1], [0.1, -0.4]])
    w2 = WeightField.from_config(w.to_config())
    assert w2.c0 == w.c0
    assert np.array_equal(w2.b, w.b)
    assert np.array_equal(w2.A, w.A)


def test_config_row_major_and_field_errors():
    w = WeightField.from_config({"c0": 1.0, "b": [0.0, 0.0], "A": [0.5, 0.0, 0.0, 0.5]})
    assert np.allclose(w.A, diag(0.5, 0.5))
    with pytest.raises(ConfigError) as err:
        WeightField.from_config({"b": [1.0, 2.0, 3.0]})
    assert "weight.b" in str(err.value)


def test_exploratory_weight_fd_derivatives():
    w = ExploratoryWeight(lambda p: np.exp(0.3 * p[0]) + np.sin(p[1]), dim=2)
    x = np.array([0.4, -0.7])
    g = w.gradient(x)
    assert g[0] == pytest.approx(0.3 * np.exp(0.3 * 0.4), rel=1e-7)
    assert g[1] == pytest.approx(np.cos(-0.7), rel=1e-7)
    H = w.hessian_at(x)
    assert H[0, 0] == pytest.approx(0.09 * np.exp(0.3 * 0.4), rel=1e-4)
    assert H[1, 1] == pytest.approx(-np.sin(-0.7), rel=1e-4)
    assert H[0, 1] == pytest.approx(0.0, abs=1e-6)
    assert not w.third_derivative_zero
    assert w.hypothesis_violations == ("third_derivative",)
