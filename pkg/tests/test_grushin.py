"""Bi-radial Grushin operator, the comparison function and its inequality."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grushinlab import grushin as gr
from grushinlab.verify import theta_errors

# mpmath, 30 digits
EXP_MINUS_SQRT2 = 0.243116734434214210805
# c making int Theta = 1 for (N, k) = (1, 1), eps = 1/7, A = 1
THETA_NORMALIZER_11 = 0.0117898377727647061827

DIMS = [(1, 1), (2, 1), (2, 2), (3, 2)]


def test_dims_and_sphere_area():
    assert gr.GrushinDims(2, 3).Q == 8
    assert gr.sphere_area(1) == 2.0
    assert gr.sphere_area(2) == pytest.approx(2 * math.pi)
    assert gr.sphere_area(3) == pytest.approx(4 * math.pi)
    with pytest.raises(ValueError):
        gr.GrushinDims(0, 1)


def test_grid_validation():
    dims = gr.GrushinDims(1, 1)
    with pytest.raises(ValueError):
        gr.BiRadialGrid(dims, 8, 8, 4, 16)
    with pytest.raises(ValueError):
        gr.BiRadialGrid(dims, 2, 8, 16, 16)


def test_cell_centred_nodes_avoid_axes():
    grid = gr.BiRadialGrid(gr.GrushinDims(1, 1), 8, 8, 16, 16)
    assert grid.r[0] == pytest.approx(0.25)
    assert grid.s[-1] == pytest.approx(7.75)
    assert grid.shape == (16, 16)


@pytest.mark.parametrize("N,k", [(1, 1), (2, 1), (3, 2)])
def test_low_degree_polynomials(N, k):
    """``r**2 -> 2N`` and ``s**2 -> 2k r**2`` away from the outer faces."""
    grid = gr.BiRadialGrid(gr.GrushinDims(N, k), 8, 8, 32, 32)
    op = gr.assemble(grid)
    mask = gr.interior_mask(grid)
    R, _ = grid.mesh()
    lr = gr.apply(op, grid.sample(lambda r, s: r**2)).values
    ls = gr.apply(op, grid.sample(lambda r, s: s**2)).values
    np.testing.assert_allclose(lr[mask], 2.0 * N, atol=1e-9)
    np.testing.assert_allclose(ls[mask], 2.0 * k * R[mask] ** 2, rtol=1e-9)


def test_constants_annihilated_except_at_outer_faces():
    grid = gr.BiRadialGrid(gr.GrushinDims(2, 1), 8, 8, 16, 16)
    out = gr.apply(gr.assemble(grid), grid.sample(lambda r, s: np.ones_like(r))).values
    assert np.max(np.abs(out[gr.interior_mask(grid)])) < 1e-10
    assert np.all(out[-1, :] < 0)


def test_operator_vanishes_in_y_on_the_axis_limit():
    # the y-part carries r**2, so on the first r-row it is damped by (h/2)**2
    grid = gr.BiRadialGrid(gr.GrushinDims(1, 1), 8, 8, 64, 16)
    R, S = grid.mesh()
    ls = gr.apply(gr.assemble(grid), grid.sample(lambda r, s: s**2)).values
    assert np.max(np.abs(ls[0, :-1])) == pytest.approx(2 * grid.r[0] ** 2, rel=1e-9)


@pytest.mark.parametrize("N,k", [(1, 1), (2, 1), (3, 2)])
def test_spectrum_real_and_negative(N, k):
    grid = gr.BiRadialGrid(gr.GrushinDims(N, k), 8, 8, 12, 12)
    ev = np.linalg.eigvals(gr.assemble(grid).matrix.toarray())
    assert np.max(np.abs(ev.imag)) < 1e-8
    assert np.max(ev.real) < 0


@given(arrays(np.float64, (10, 10), elements=st.floats(-1e3, 1e3)))
def test_quadratic_form_nonpositive(values):
    grid = gr.BiRadialGrid(gr.GrushinDims(1, 1), 4, 4, 10, 10)
    assert gr.quadratic_form(gr.assemble(grid), gr.Field(grid, values)) <= 1e-9 * (1 + np.sum(values**2))


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_operator_linear(a, b):
    grid = gr.BiRadialGrid(gr.GrushinDims(2, 1), 8, 8, 10, 10)
    op = gr.assemble(grid)
    u = grid.sample(lambda r, s: np.exp(-r**2 - s))
    v = grid.sample(lambda r, s: np.cos(r) * s)
    lhs = gr.apply(op, a * u + b * v).values
    rhs = (a * gr.apply(op, u) + b * gr.apply(op, v)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_field_contracts():
    g1 = gr.BiRadialGrid(gr.GrushinDims(1, 1), 8, 8, 8, 8)
    g2 = gr.BiRadialGrid(gr.GrushinDims(1, 1), 8, 8, 8, 10)
    with pytest.raises(ValueError):
        gr.Field(g1, np.full((8, 8), np.inf))
    with pytest.raises(ValueError):
        gr.Field(g1, np.zeros((8, 8))) + gr.Field(g2, np.zeros((8, 10)))
    with pytest.raises(ValueError):
        gr.apply(gr.assemble(g1), gr.Field(g2, np.zeros((8, 10))))


def test_theta_frozen_values():
    params = gr.ThetaParams(1.0, 1.0, 1.0)
    assert float(gr.theta_eval(params, 1.0, 0.0)) == pytest.approx(EXP_MINUS_SQRT2, rel=1e-15)
    normalized = gr.ThetaParams.default(gr.GrushinDims(1, 1), normalize=True)
    assert normalized.epsilon == pytest.approx(1 / 7)
    assert normalized.c == pytest.approx(THETA_NORMALIZER_11, rel=1e-9)


def test_theta_analytic_matches_finite_differences():
    dims = gr.GrushinDims(2, 1)
    params = gr.ThetaParams.default(dims)
    h = 1e-4

    def th(r, s):
        return float(gr.theta_eval(params, r, s))

    for r, s in ((0.7, 1.3), (2.0, 0.4), (1.1, 3.0)):
        urr = (th(r + h, s) - 2 * th(r, s) + th(r - h, s)) / h**2
        ur = (th(r + h, s) - th(r - h, s)) / (2 * h)
        uss = (th(r, s + h) - 2 * th(r, s) + th(r, s - h)) / h**2
        lap = urr + (dims.N - 1) / r * ur + r**2 * uss
        assert float(gr.grushin_theta_analytic(params, dims, r, s)) == pytest.approx(lap, rel=1e-5)


@pytest.mark.parametrize("N,k", DIMS)
@pytest.mark.parametrize("A", [1.0, 10.0])
def test_theta_inequality_margin(N, k, A):
    dims = gr.GrushinDims(N, k)
    assert gr.theta_inequality_margin(gr.ThetaParams.default(dims, A), dims, 4096) >= -1e-12


@pytest.mark.parametrize("N,k", DIMS)
def test_margin_on_axis_is_the_bound_term(N, k):
    dims = gr.GrushinDims(N, k)
    params = gr.ThetaParams.default(dims)
    s = np.linspace(0, 20, 41)
    assert np.all(gr.grushin_theta_analytic(params, dims, 0.0, s) == 0.0)
    margin = gr.grushin_theta_analytic(params, dims, 0.0, s) + params.bound_constant(dims) * gr.theta_eval(params, 0.0, s)
    np.testing.assert_allclose(margin, gr.theta_eval(params, 0.0, s), rtol=1e-15)


def test_theta_margin_deterministic_and_validated():
    dims = gr.GrushinDims(1, 1)
    params = gr.ThetaParams.default(dims)
    assert gr.theta_inequality_margin(params, dims, 1000) == gr.theta_inequality_margin(params, dims, 1000)
    with pytest.raises(ValueError):
        gr.theta_inequality_margin(params, dims, 0)


def test_theta_convergence_second_order():
    errors = theta_errors(sizes=(32, 64, 128))
    orders = np.log2(errors[:-1] / errors[1:])
    assert np.all(orders >= 1.8)


@pytest.mark.parametrize("N,k", [(1, 1), (2, 1)])
def test_normalized_mass_by_grid_quadrature(N, k):
    dims = gr.GrushinDims(N, k)
    params = gr.ThetaParams.default(dims, normalize=True)
    extent = 40.0 / params.epsilon
    grid = gr.BiRadialGrid(dims, extent, extent, 1024, 1024)
    assert gr.biradial_integral(grid.sample(lambda r, s: gr.theta_eval(params, r, s))) == pytest.approx(1.0, rel=1e-3)


def test_biradial_integral_of_indicator():
    # |x| <= 1, |y| <= 1 in R x R has area 4
    grid = gr.BiRadialGrid(gr.GrushinDims(1, 1), 8, 8, 64, 64)
    assert gr.biradial_integral(grid.sample(lambda r, s: ((r < 1) & (s < 1)).astype(float))) == pytest.approx(4.0)
