import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madelung_gauge.grid import (
    PERIODIC,
    Grid,
    curl,
    divergence,
    gradient,
    l2_norm,
    laplacian,
    max_norm,
    partial,
    phase_gradient,
    wrap_angle,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid.line(4, 0.0, 1.0)
    with pytest.raises(ValueError):
        Grid.line(16, 1.0, 0.0)
    with pytest.raises(ValueError):
        Grid.line(16, 0.0, 1.0, "neumann")
    with pytest.raises(ValueError):
        Grid((8, 8, 8), 0.0, 1.0)


def test_spacing_and_axes():
    g = Grid.line(11, 0.0, 1.0)
    assert g.spacing == (0.1,)
    assert g.axes[0][-1] == pytest.approx(1.0)
    p = Grid.line(10, 0.0, 1.0, PERIODIC)
    assert p.spacing == (0.1,)
    assert p.axes[0][-1] == pytest.approx(0.9)


def test_square_shape_and_coords():
    g = Grid.square(9, -1.0, 1.0)
    assert g.shape == (9, 9)
    x, y = g.coords
    assert np.all(x[:, 0] == g.axes[0])
    assert np.all(y[0, :] == g.axes[1])


def test_weights_integrate_polynomials_exactly():
    g = Grid.line(101, 0.0, 2.0)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(2.0, abs=1e-14)
    assert g.integrate(g.x) == pytest.approx(2.0, abs=1e-13)
    p = Grid.line(64, 0.0, 2 * np.pi, PERIODIC)
    assert p.integrate(np.cos(p.x) ** 2) == pytest.approx(np.pi, abs=1e-12)


def test_refined_grid_is_nested():
    g = Grid.line(17, -1.0, 1.0)
    r = g.refined()
    assert r.n == (33,)
    assert np.allclose(r.axes[0][::2], g.axes[0], atol=1e-15)
    p = Grid.line(16, 0.0, 1.0, PERIODIC).refined()
    assert p.n == (32,)


def test_interior_margin():
    g = Grid.square(10, 0.0, 1.0)
    m = g.interior(2)
    assert m.sum() == 6 * 6
    assert Grid.line(10, 0.0, 1.0, PERIODIC).interior(2).all()


def test_nearest_index_clips():
    g = Grid.line(11, 0.0, 1.0)
    assert g.nearest_index(0.31) == (3,)
    assert g.nearest_index(5.0) == (10,)


def test_stencils_exact_on_low_degree_polynomials():
    g = Grid.line(21, -1.0, 2.0)
    x = g.x
    assert np.allclose(gradient(g, x**2)[0], 2 * x, atol=1e-12)
    assert np.allclose(laplacian(g, x**3), 6 * x, atol=1e-9)


def test_gradient_second_order_including_walls():
    errors = []
    for n in (65, 129, 257):
        g = Grid.line(n, 0.0, np.pi)
        errors.append(np.max(np.abs(gradient(g, np.sin(g.x))[0] - np.cos(g.x))))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all(np.abs(np.log2(ratios) - 2.0) < 0.2)


def test_laplacian_second_order():
    errors = []
    for n in (65, 129, 257):
        g = Grid.line(n, 0.0, np.pi)
        errors.append(np.max(np.abs(laplacian(g, np.sin(g.x)) + np.sin(g.x))))
    assert np.log2(errors[0] / errors[1]) == pytest.approx(2.0, abs=0.2)
    assert np.log2(errors[1] / errors[2]) == pytest.approx(2.0, abs=0.2)


def test_periodic_stencils_match_discrete_symbols():
    n, k = 64, 3
    g = Grid.line(n, 0.0, 2 * np.pi, PERIODIC)
    h = g.spacing[0]
    f = np.sin(k * g.x)
    assert np.allclose(gradient(g, f)[0], np.sin(k * h) / h * np.cos(k * g.x), atol=1e-12)
    symbol = -(2 - 2 * np.cos(k * h)) / h**2
    assert np.allclose(laplacian(g, f), symbol * f, atol=1e-11)


def test_laplacian_2d_of_r_squared():
    g = Grid.square(33, -1.0, 1.0)
    x, y = g.coords
    assert np.allclose(laplacian(g, x**2 + y**2), 4.0, atol=1e-10)


def test_div_grad_is_the_wide_stencil():
    g = Grid.line(200, 0.0, 3.0)
    h = g.spacing[0]
    f = np.exp(np.sin(2 * g.x))
    wide = (f[4:] - 2 * f[2:-2] + f[:-4]) / (4 * h * h)
    dg = divergence(g, gradient(g, f))
    assert np.max(np.abs(dg[2:-2] - wide)) < 1e-10


def test_div_grad_and_laplacian_differ_at_second_order():
    diffs = []
    for n in (101, 201, 401):
        g = Grid.line(n, 0.0, 3.0)
        f = np.exp(np.sin(2 * g.x))
        core = (g.x > 0.5) & (g.x < 2.5)
        diffs.append(np.max(np.abs(divergence(g, gradient(g, f)) - laplacian(g, f))[core]))
    assert np.log2(diffs[0] / diffs[1]) == pytest.approx(2.0, abs=0.1)
    assert np.log2(diffs[1] / diffs[2]) == pytest.approx(2.0, abs=0.1)


def test_curl_of_gradient_vanishes():
    g = Grid.square(40, -1.0, 1.0)
    x, y = g.coords
    f = np.sin(x) * np.exp(y) + x**3 * y
    assert np.max(np.abs(curl(g, gradient(g, f)))) < 1e-11


def test_curl_of_rotation():
    g = Grid.square(21, -1.0, 1.0)
    x, y = g.coords
    assert np.allclose(curl(g, np.stack([-y, x])), 2.0)


def test_partial_matches_gradient_component():
    g = Grid.square(16, 0.0, 1.0)
    f = np.random.default_rng(1).normal(size=g.shape)
    assert np.array_equal(partial(g, f, 1), gradient(g, f)[1])


def test_shape_mismatch_rejected():
    g = Grid.line(16, 0.0, 1.0)
    with pytest.raises(ValueError):
        gradient(g, np.zeros(15))
    with pytest.raises(ValueError):
        divergence(g, np.zeros((2, 16)))


def test_phase_gradient_ignores_periodic_seam():
    g = Grid.line(50, 0.0, 2 * np.pi, PERIODIC)
    phase = 2.0 * g.x  # winds twice; jumps by -4 pi across the seam
    assert np.allclose(phase_gradient(g, phase)[0], 2.0, atol=1e-12)


def test_norms():
    g = Grid.line(11, 0.0, 1.0)
    assert l2_norm(g, np.ones(11)) == pytest.approx(1.0)
    assert l2_norm(g, np.ones(11), g.x <= 0.5) == pytest.approx(np.sqrt(0.55))
    assert max_norm(np.array([1.0, -3.0, 2.0])) == 3.0
    assert max_norm(np.ones(3), np.zeros(3, bool)) == 0.0


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_wrap_angle_range(a):
    w = float(wrap_angle(a))
    assert -np.pi <= w < np.pi
    assert np.isclose(np.cos(w), np.cos(a), atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_gradient_and_laplacian_are_linear(a, b, seed):
    g = Grid.line(32, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    f, h = rng.normal(size=32), rng.normal(size=32)
    assert np.allclose(gradient(g, a * f + b * h), a * gradient(g, f) + b * gradient(g, h), atol=1e-8)
    assert np.allclose(laplacian(g, a * f + b * h), a * laplacian(g, f) + b * laplacian(g, h),
                       atol=1e-6)
