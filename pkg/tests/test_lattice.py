"""Radial transform, quadrature grid, lattice sum and discrete-derivative
checks, with closed forms and scipy.integrate as independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from lhylab.errors import (
    BlockMarginError,
    GridResolutionError,
    NonFiniteValueError,
    SpaceMismatchError,
)
from lhylab.lattice import (
    MOMENTUM,
    RadialGrid,
    RadialProfile,
    convolve,
    discrete_derivative,
    evaluate_profile,
    lattice_fourier_eval,
    lattice_sum,
    momentum_lattice,
    oscillatory_moments,
    radial_transform,
    transform_at,
)

GAUSS_NORM = (2.0 * np.pi) ** 1.5


@pytest.fixture(scope="module")
def gauss_grid():
    return RadialGrid.log_spaced(1e-3, 12.0, 96, 12)


@pytest.fixture(scope="module")
def gauss_profile(gauss_grid):
    return RadialProfile.from_function(gauss_grid, lambda r: np.exp(-r**2 / 2))


def test_grid_nodes_increasing_positive(gauss_grid):
    assert gauss_grid.nodes[0] > 0
    assert np.all(np.diff(gauss_grid.nodes) > 0)


@pytest.mark.parametrize("degree", range(6))
def test_weights_reproduce_radial_measure_on_polynomials(degree):
    grid = RadialGrid.log_spaced(1e-2, 1e3, 64, 8)
    got = grid.integrate(grid.nodes**degree)
    exact = (grid.r_max ** (degree + 3) - grid.r_min ** (degree + 3)) / (degree + 3)
    assert got == pytest.approx(exact, rel=1e-12)


def test_gaussian_transform_matches_closed_form(gauss_profile):
    hhat = radial_transform(gauss_profile)
    sel = hhat.grid.nodes < 8.0
    exact = GAUSS_NORM * np.exp(-hhat.grid.nodes[sel] ** 2 / 2)
    assert np.max(np.abs(hhat.values[sel] - exact)) < 1e-10 * GAUSS_NORM


@pytest.mark.parametrize("k", [0.5, 2.0, 5.0])
def test_gaussian_transform_against_quadrature_oracle(gauss_profile, k):
    # independent adaptive quadrature of the defining integral
    oracle, err = quad(lambda r: 4 * np.pi / k * r * np.exp(-r**2 / 2)
                       * np.sin(k * r), 0, 14, limit=300, epsabs=1e-13)
    mine = transform_at(gauss_profile, [k])[0]
    assert mine == pytest.approx(oracle, abs=max(10 * err, 1e-10))


def test_zero_profile_transforms_to_zero(gauss_grid):
    zero = RadialProfile(grid=gauss_grid, values=np.zeros(len(gauss_grid.nodes)))
    hhat = radial_transform(zero)
    assert np.all(hhat.values == 0.0)


def test_shell_limit_reproduces_sine_kernel():
    # narrow Gaussian shell surrogate for 2*delta(r-a)/a
    a, w = 1.0, 1e-3
    grid = RadialGrid.from_edges(np.linspace(a - 8 * w, a + 8 * w, 25), order=12)
    norm = 2.0 / (a * np.sqrt(2 * np.pi) * w)
    shell = RadialProfile.from_function(
        grid, lambda r: norm * np.exp(-((r - a) / w) ** 2 / 2))
    ks = np.array([0.3, 1.0, 2.5, 5.0])
    got = transform_at(shell, ks, extend_origin=False)
    exact = 8 * np.pi * np.sin(ks * a) / ks
    assert np.max(np.abs(got - exact) / np.abs(exact)) < 1e-4


def test_round_trip_identity(gauss_grid, gauss_profile):
    hhat = radial_transform(gauss_profile)
    back = radial_transform(hhat, "inverse", out_grid=gauss_grid)
    num = gauss_grid.integrate((back.values - gauss_profile.values) ** 2)
    den = gauss_grid.integrate(gauss_profile.values**2)
    assert np.sqrt(num / den) < 1e-8


def test_transform_direction_validates_space(gauss_profile):
    hhat = radial_transform(gauss_profile)
    with pytest.raises(SpaceMismatchError):
        radial_transform(gauss_profile, "inverse")
    with pytest.raises(SpaceMismatchError):
        radial_transform(hhat, "forward")


def test_output_grid_covers_conjugate_range(gauss_profile):
    hhat = radial_transform(gauss_profile)
    grid = gauss_profile.grid
    assert hhat.grid.r_min <= 2 * np.pi / grid.r_max
    assert hhat.grid.r_max >= np.pi / np.min(np.diff(grid.nodes))


def test_under_resolved_kink_raises():
    # kink placed mid-panel: coefficient tails cannot decay
    grid = RadialGrid.log_spaced(0.1, 10.0, 16, 8)
    prof = RadialProfile.from_function(grid, lambda r: np.abs(r - 1.37))
    with pytest.raises(GridResolutionError):
        radial_transform(prof, tail_tol=1e-8)


def test_oscillatory_moments_against_closed_form():
    grid = RadialGrid.log_spaced(1.0, 2.0, 64, 8)
    for y in (1e3, 1e6):
        got = oscillatory_moments(grid, grid.nodes, np.array([y]))[0]
        exact = (np.sin(2 * y) - 2 * y * np.cos(2 * y)
                 - np.sin(y) + y * np.cos(y)) / y**2
        assert got == pytest.approx(exact, rel=1e-9)


@settings(max_examples=25, derandomize=True, deadline=None)
@given(st.floats(min_value=0.0, max_value=50.0),
       st.floats(min_value=-2.0, max_value=2.0),
       st.floats(min_value=-2.0, max_value=2.0))
def test_oscillatory_moments_linear_in_integrand(y, c1, c2):
    grid = RadialGrid.log_spaced(0.5, 3.0, 32, 8)
    g1 = np.sin(grid.nodes)
    g2 = grid.nodes**2
    lhs = oscillatory_moments(grid, c1 * g1 + c2 * g2, np.array([y]))[0]
    rhs = c1 * oscillatory_moments(grid, g1, np.array([y]))[0] \
        + c2 * oscillatory_moments(grid, g2, np.array([y]))[0]
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


@settings(max_examples=25, derandomize=True, deadline=None)
@given(st.floats(min_value=1.2e-2, max_value=9.5))
def test_profile_evaluation_interpolates(r):
    grid = RadialGrid.log_spaced(1e-2, 10.0, 96, 12)
    prof = RadialProfile.from_function(grid, lambda x: np.exp(-x))
    assert evaluate_profile(prof, r) == pytest.approx(np.exp(-r), rel=1e-9)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def test_convolve_identity_kernel(gauss_profile):
    hhat = radial_transform(gauss_profile)
    one = RadialProfile(grid=hhat.grid, values=np.ones(len(hhat.grid.nodes)),
                        space=MOMENTUM)
    out = convolve(hhat, one)
    assert np.allclose(out.values, hhat.values, rtol=0, atol=0)


def test_convolve_commutes(gauss_grid):
    f = RadialProfile.from_function(gauss_grid, lambda r: np.exp(-r**2 / 2))
    g = RadialProfile.from_function(gauss_grid, lambda r: np.exp(-r**2 / 1.2))
    fg = convolve(f, g)
    gf = convolve(g, f)
    assert np.max(np.abs(fg.values - gf.values)) < 1e-12 * np.max(np.abs(fg.values))


def test_convolve_rejects_mixed_spaces(gauss_profile):
    hhat = radial_transform(gauss_profile)
    with pytest.raises(SpaceMismatchError):
        convolve(gauss_profile, hhat)


def test_gaussian_convolution_closed_form(gauss_grid):
    al, be = 0.5, 0.8
    f = RadialProfile.from_function(gauss_grid, lambda r: np.exp(-r**2 / (2 * al)))
    g = RadialProfile.from_function(gauss_grid, lambda r: np.exp(-r**2 / (2 * be)))
    out = convolve(f, g)
    exact = (2 * np.pi * al * be / (al + be)) ** 1.5 \
        * np.exp(-gauss_grid.nodes**2 / (2 * (al + be)))
    assert np.max(np.abs(out.values - exact)) < 1e-6 * exact[0]


def test_gaussian_convolution_against_direct_overlap_integral(gauss_grid):
    # direct position-space radial convolution as an independent oracle:
    # (f*g)(r) = (2 pi / r) int s f(s) [ int_{|r-s|}^{r+s} t g(t) dt ] ds
    al, be, r0 = 0.5, 0.8, 0.8
    f = lambda s: np.exp(-s**2 / (2 * al))
    g_inner = lambda lo, hi: quad(lambda t: t * np.exp(-t**2 / (2 * be)),
                                  lo, hi)[0]
    oracle = 2 * np.pi / r0 * quad(
        lambda s: s * f(s) * g_inner(abs(r0 - s), r0 + s), 0, 10, limit=200)[0]
    prof_f = RadialProfile.from_function(gauss_grid, f)
    prof_g = RadialProfile.from_function(gauss_grid,
                                         lambda s: np.exp(-s**2 / (2 * be)))
    out = convolve(prof_f, prof_g)
    assert evaluate_profile(out, r0) == pytest.approx(oracle, rel=1e-6)


def test_ball_indicator_convolution_matches_overlap_volume():
    # the squared indicator transform oscillates on the unit-radius scale,
    # so the momentum panels must stay below half that period in the UV
    ball_grid = RadialGrid.log_spaced(1e-3, 1.0, 128, 8)
    ball = RadialProfile.from_function(ball_grid, lambda r: np.ones_like(r))
    log_part = RadialGrid.log_spaced(1e-2, 3.0, 96, 8)
    lin_part = RadialGrid.from_edges(
        np.arange(3.0, 2e4, np.pi / 2.0), order=8)
    kgrid = RadialGrid.from_edges(
        np.concatenate([log_part.panel_edges, lin_part.panel_edges[1:]]), 8)
    bhat = transform_at(ball, kgrid.nodes)
    prod = RadialProfile(grid=kgrid, values=bhat**2, space=MOMENTUM)
    ds = np.array([1e-6, 0.7, 1.5])
    got = transform_at(prod, ds, extend_origin=False)
    overlap = np.pi / 12 * (4 + ds) * (2 - ds) ** 2  # two unit balls, |d| < 2
    assert got[0] == pytest.approx(4 * np.pi / 3, rel=5e-4)
    assert np.allclose(got, overlap, rtol=5e-4)


# ---------------------------------------------------------------------------
# Momentum lattice
# ---------------------------------------------------------------------------

def test_lattice_modes_symmetric_and_counted():
    lat = momentum_lattice(20.0, 3.0)
    mode_set = {tuple(np.round(m, 12)) for m in lat.modes}
    assert (0.0, 0.0, 0.0) in mode_set
    assert all(tuple(-np.array(m)) in mode_set for m in mode_set)
    dev, surface = lat.ball_count_deviation()
    assert abs(dev) <= 20.0 * surface


def test_lattice_sum_of_ball_indicator_counts_modes():
    K = 2.0
    for L in (20.0, 40.0, 80.0):
        lat = momentum_lattice(L, K)
        got = lattice_sum(lambda k: np.ones_like(k), lat)
        target = (4 * np.pi / 3) * K**3 / (2 * np.pi) ** 3
        assert got == pytest.approx(target, rel=30.0 / L)


def test_lattice_sum_zero_and_exclude_zero():
    lat = momentum_lattice(10.0, 1.5)
    assert lattice_sum(lambda k: np.zeros_like(k), lat) == 0.0
    with_zero = lattice_sum(lambda k: np.ones_like(k), lat)
    without = lattice_sum(lambda k: np.ones_like(k), lat, exclude_zero=True)
    assert with_zero - without == pytest.approx(1.0 / 10.0**3)


def test_lattice_sum_rejects_non_finite():
    lat = momentum_lattice(10.0, 1.5)
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteValueError):
        lattice_sum(lambda k: 1.0 / k, lat)


def test_lattice_parseval_for_sampled_gaussian(gauss_profile):
    hhat = radial_transform(gauss_profile)
    L = 40.0
    lat = momentum_lattice(L, 9.0)
    # the zero mode sits below the sampled momentum grid; its coefficient
    # is the plain integral of the profile
    lhs = lattice_sum(lambda k: evaluate_profile(hhat, k) ** 2, lat,
                      exclude_zero=True) + gauss_profile.integral() ** 2 / L**3
    rhs = np.pi**1.5  # int exp(-r^2) d^3x
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_band_limited_parseval_exact():
    # trapezoid sums over a periodic box are exact for band-limited inputs
    L, nmax = 7.0, 2
    rng_modes = [(i, j, k) for i in range(-nmax, nmax + 1)
                 for j in range(-nmax, nmax + 1) for k in range(-nmax, nmax + 1)]
    coeffs = {m: np.cos(1.7 * m[0] + 0.3 * m[1]) + 0.2 * m[2] for m in rng_modes}
    n_grid = 12
    xs = np.linspace(0, L, n_grid, endpoint=False)
    pts = np.stack(np.meshgrid(xs, xs, xs, indexing="ij"), axis=-1).reshape(-1, 3)
    h = lattice_fourier_eval(coeffs, L, pts)
    position = np.sum(np.abs(h) ** 2) * (L / n_grid) ** 3
    fourier = sum(abs(v) ** 2 for v in coeffs.values()) / L**3
    assert position == pytest.approx(fourier, rel=1e-10)


# ---------------------------------------------------------------------------
# Discrete derivatives
# ---------------------------------------------------------------------------

def _block(nmax, fn):
    return {(i, j, k): fn(i, j, k)
            for i in range(-nmax, nmax + 1)
            for j in range(-nmax, nmax + 1)
            for k in range(-nmax, nmax + 1)}


def test_discrete_derivative_of_constant_vanishes():
    out = discrete_derivative(_block(2, lambda i, j, k: 3.7), axis=1, order=1,
                              L=10.0)
    assert all(v == 0.0 for v in out.values())


def test_discrete_derivative_exact_on_linear():
    L = 10.0
    out = discrete_derivative(_block(2, lambda i, j, k: 2 * np.pi * i / L),
                              axis=1, order=1, L=L)
    assert all(v == pytest.approx(1.0, rel=1e-14) for v in out.values())


def test_discrete_derivative_second_order_exact_on_quadratic():
    L = 10.0
    out = discrete_derivative(_block(3, lambda i, j, k: (2 * np.pi * i / L) ** 2),
                              axis=1, order=2, L=L)
    assert all(v == pytest.approx(2.0, rel=1e-13) for v in out.values())


def test_discrete_derivative_margin_error():
    with pytest.raises(BlockMarginError):
        discrete_derivative(_block(1, lambda i, j, k: float(i)), axis=2,
                            order=4, L=5.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_position_multiplication_inequality_on_band_limited_profile(order):
    # |x_j^m h(x)| <= (pi/2)^m |inverse transform of the m-th difference|;
    # coefficients vanish on the outer layers so the shrunken block captures
    # every nonzero difference exactly
    L, nmax = 9.0, 7
    interior = nmax - order

    def coeff(i, j, k):
        if max(abs(i), abs(j), abs(k)) >= interior:
            return 0.0
        return np.exp(-0.3 * (i * i + j * j + k * k)) * (1 + 0.1 * i)

    coeffs = _block(nmax, coeff)
    shrunk = discrete_derivative(coeffs, axis=1, order=order, L=L)
    xs = np.linspace(-L / 2 * 0.99, L / 2 * 0.99, 17)
    pts = np.stack([xs, 0.4 * np.ones_like(xs), -1.1 * np.ones_like(xs)], axis=1)
    h = lattice_fourier_eval(coeffs, L, pts)
    dh = lattice_fourier_eval(shrunk, L, pts)
    lhs = np.abs(pts[:, 0] ** order * h)
    rhs = (np.pi / 2) ** order * np.abs(dh)
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-30)
