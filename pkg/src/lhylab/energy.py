"""Variational energy density of the trial state and its second-order limit.

The upper-bound energy splits into seven radial integrals (the squared
short-range gradient, its cross terms with the pair kernel sigma, and
the convolution terms), which near the dilute limit collapse to three
clean pieces: the squared gradient of the combined kernel theta, the
potential energy of the pair kernel, and a momentum-space correlation
correction.  The difference between the two evaluations scales like
rho^(5/2+delta) and is one of the measured acceptance quantities.

The closed-form second-order coefficient 128/(15*sqrt(pi)) comes from a
dimensionless dispersion integral; the dispersion combination used here
carries the counterterm B^2/(2k^2) that makes the integrand absolutely
integrable (tail ~ rho^3/k^4).  The variant with half that counterterm
diverges, and `lhy_dimensionless_integral` detects and rejects it.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DiluteRegimeError, LhyLabError, QuadratureError
from .kernels import (
    KernelSettings,
    PhysicalParams,
    correlation_set,
    cutoff_breakpoints,
    effective_potential_hat,
    grad_f_norm_sq,
    solve_rho0,
    theta_values,
)
from .lattice import (
    MOMENTUM,
    RadialGrid,
    RadialProfile,
    linear_panel_grid,
    momentum_lattice,
    transform_at,
)

LHY_COEFFICIENT = 128.0 / (15.0 * np.sqrt(np.pi))


# ---------------------------------------------------------------------------
# Closed-form second-order coefficient
# ---------------------------------------------------------------------------

def _dimensionless_integrand(t, counterterm):
    # t^2*[sqrt(t^4+2t^2) - t^2 - 1 + counterterm/t^2], written without
    # cancellation:  (counterterm - 1/2) + [1/2 - t^2/(sqrt(t^4+2t^2)+t^2+1)]
    core = 0.5 - t**2 / (np.sqrt(t**4 + 2.0 * t**2) + t**2 + 1.0)
    return (counterterm - 0.5) + core


def lhy_dimensionless_integral(counterterm=0.5):
    """int_0^inf t^2 [sqrt(t^4+2t^2) - t^2 - 1 + counterterm/t^2] dt.

    Converges only for counterterm = 1/2 (the integrand then decays like
    1/(2t^2)); any other value leaves a non-decaying tail and raises.
    """
    tail = [abs(_dimensionless_integrand(t, counterterm)) for t in (1e4, 1e6)]
    if max(tail) > 1e-7:
        raise QuadratureError(
            f"dispersion integrand does not decay (tail values {tail}); "
            f"counterterm {counterterm!r} leaves a divergent integral")
    val, err = quad(_dimensionless_integrand, 0.0, np.inf, args=(counterterm,),
                    limit=200)
    if err > 1e-9:
        raise QuadratureError(f"adaptive quadrature error estimate {err:g} too large")
    return val


def lhy_constant(counterterm=0.5):
    """The dimensionless second-order coefficient, assembled from the
    dispersion integral; equals 128/(15*sqrt(pi)) = 4.8144363..."""
    return 8.0 * np.sqrt(2.0 / np.pi) * lhy_dimensionless_integral(counterterm)


def lhy_reference(rho, a):
    """4*pi*a*rho^2*[1 + (128/(15*sqrt(pi)))*(rho*a^3)^(1/2)]."""
    x = rho * a**3
    if not x < 1.0:
        raise DiluteRegimeError(f"gas parameter {x:g} >= 1")
    return 4.0 * np.pi * a * rho**2 * (1.0 + LHY_COEFFICIENT * np.sqrt(x))


def dyson_reference(rho, a, coefficient=1.0):
    """Leading-order curve with a cubic-root correction term,
    4*pi*a*rho^2*(1 + C*(rho*a^3)^(1/3)); C is a display convention."""
    return 4.0 * np.pi * a * rho**2 * (1.0 + coefficient * (rho * a**3) ** (1.0 / 3.0))


# ---------------------------------------------------------------------------
# Dispersion combination
# ---------------------------------------------------------------------------

def dispersion(k, params, kind="F"):
    """Per-mode dispersion energy with convergent counterterm:

        sqrt(k^4 + 2k^2 B) - k^2 - B + B^2/(2k^2),

    B = rho0*V_hat(k) for kind 'F', B = 8*pi*a*rho0 for kind 'G'.
    Evaluated as B^3*(3A+E)/(2A(E+A)(A+B+E)) with A = k^2 and
    E = sqrt(A^2+2AB), which is algebraically identical and free of the
    UV cancellation.  Twice the per-mode Bogoliubov energy density:
    2*[A s^2 + B(s^2 + g*s) + B^2/(4A)] per mode equals this exactly.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0.0):
        raise ValueError("dispersion needs k > 0")
    rho0 = params.require_rho0()
    A = k**2
    if kind == "F":
        B = rho0 * effective_potential_hat(k, params.a)
    elif kind == "G":
        B = np.full_like(A, 8.0 * np.pi * params.a * rho0)
    else:
        raise ValueError("kind must be 'F' or 'G'")
    rad = A + 2.0 * B
    if np.any(rad <= 0.0):
        raise DiluteRegimeError("dispersion radicand k^2 + 2B <= 0")
    E = np.sqrt(A * rad)
    out = B**3 * (3.0 * A + E) / (2.0 * A * (E + A) * (A + B + E))
    return out if out.shape != (1,) else float(out[0])


def dispersion_direct(k, params, kind="F"):
    """Textbook form of the same combination (cancellation-prone in the UV;
    kept as an independent cross-check of `dispersion`)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    rho0 = params.require_rho0()
    A = k**2
    B = rho0 * effective_potential_hat(k, params.a) if kind == "F" \
        else np.full_like(A, 8.0 * np.pi * params.a * rho0)
    return np.sqrt(A**2 + 2.0 * A * B) - A - B + B**2 / (2.0 * A)


# ---------------------------------------------------------------------------
# Momentum-space quadratures for the pair kernel
# ---------------------------------------------------------------------------

def _s_hat_quadrature_grid(params, settings):
    st = settings or KernelSettings()
    a = params.a
    rho0 = params.require_rho0()
    healing = np.sqrt(8.0 * np.pi * a * rho0)
    log_part = RadialGrid.log_spaced(1e-6 * healing, 1.0 / a,
                                     st.points_per_decade, st.order)
    lin_part = linear_panel_grid(1.0 / a, st.s_k_uv / a,
                                 st.uv_half_periods * np.pi / a, st.order)
    edges = np.concatenate([log_part.panel_edges, lin_part.panel_edges[1:]])
    return RadialGrid.from_edges(edges, st.order)


def s_norm_l2_sq(params, settings=None):
    """||s||_2^2 = (1/2 pi^2) int k^2 s_hat(k)^2 dk, with the analytic
    averaged tail beyond the tabulated ultraviolet window added."""
    from .kernels import bogoliubov_s_hat
    st = settings or KernelSettings()
    grid = _s_hat_quadrature_grid(params, st)
    sh = bogoliubov_s_hat(grid.nodes, params)
    main = grid.integrate(sh**2) / (2.0 * np.pi**2)
    kuv = st.s_k_uv / params.a
    rho0 = params.require_rho0()
    tail = 4.0 * rho0**2 / (3.0 * kuv**3)  # sin^2 averaged over periods
    return main + tail


def g_minus_one_star_s_at_zero(params, settings=None):
    """((g-1)*s)(0) = (1/2 pi^2) int k^2 (g_hat-1) s_hat dk (both factors
    smooth and decaying in momentum space)."""
    from .kernels import bogoliubov_s_hat
    grid = _s_hat_quadrature_grid(params, settings or KernelSettings())
    sh = bogoliubov_s_hat(grid.nodes, params)
    g_minus_1 = sh**2 / (1.0 + np.sqrt(1.0 + sh**2))
    return grid.integrate(g_minus_1 * sh) / (2.0 * np.pi**2)


# ---------------------------------------------------------------------------
# Energy breakdown
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    """The seven upper-bound integrals, their sum, and the three-term
    dilute-limit evaluation with the second-order reference."""

    t1: float  # rho0^2 * int |grad f|^2
    t2: float  # 2 rho0 ||sigma||^2 * int |grad f|^2
    t3: float  # int |grad f|^2 sigma^2
    t4: float  # 2 int f grad f . sigma grad sigma
    t5: float  # int f^2 |grad sigma|^2
    t6: float  # 2 rho0 int |grad f|^2 [(gamma*sigma) + (sigma*sigma)]
    t7: float  # 2 rho0 int f grad f . grad sigma
    total: float
    tilde_terms: tuple  # (||grad theta||^2, 16 pi a rho0 ||s||^2,
    #                      8 pi a rho0 ((g-1)*s)(0))
    tilde_total: float
    lhy_ref: float

    def as_dict(self):
        return {
            "t1": self.t1, "t2": self.t2, "t3": self.t3, "t4": self.t4,
            "t5": self.t5, "t6": self.t6, "t7": self.t7, "total": self.total,
            "tilde_terms": list(self.tilde_terms), "tilde_total": self.tilde_total,
            "lhy_ref": self.lhy_ref,
        }


def energy_breakdown(params, cs, settings=None):
    """Evaluate all upper-bound terms by radial quadrature (convolutions
    spectrally) plus the three-term dilute-limit expression."""
    st = settings or KernelSettings()
    rho0 = params.require_rho0()
    a = params.a
    jast = cs.jastrow

    grad_sq = grad_f_norm_sq(jast)
    sigma_l2 = cs.sigma_l2_sq

    grid = cs.sigma.grid
    r = grid.nodes
    f = jast.f(r)
    df = jast.grad_f(r)
    sig = cs.sigma.values
    dsig = cs.sigma_grad.values

    t1 = rho0**2 * grad_sq
    t2 = 2.0 * rho0 * sigma_l2 * grad_sq
    t3 = 4.0 * np.pi * grid.integrate(df**2 * sig**2)
    t4 = 2.0 * 4.0 * np.pi * grid.integrate(f * df * sig * dsig)
    t5 = 4.0 * np.pi * grid.integrate(f**2 * dsig**2)
    t7 = 2.0 * rho0 * 4.0 * np.pi * grid.integrate(f * df * dsig)

    # convolution factor of t6, needed only where grad f lives (r <= 4*ell)
    mask = r <= 4.0 * params.ell
    rj = r[mask]
    gm1_sig = RadialProfile(grid=cs.sigma_hat.grid,
                            values=cs._gm1.values * cs.sigma_hat.values,
                            space=MOMENTUM)
    sig_sig = RadialProfile(grid=cs.sigma_hat.grid,
                            values=cs.sigma_hat.values**2, space=MOMENTUM)
    conv_vals = np.zeros_like(r)
    conv_vals[mask] = (cs.sigma(rj) + transform_at(gm1_sig, rj, extend_origin=False)
                       + transform_at(sig_sig, rj, extend_origin=False))
    t6 = 2.0 * rho0 * 4.0 * np.pi * grid.integrate(df**2 * conv_vals)

    total = t1 + t2 + t3 + t4 + t5 + t6 + t7

    theta_grid = RadialGrid.log_spaced(
        st.grid_inner * a, 4.0 * params.ell0, st.points_per_decade, st.order,
        breakpoints=tuple(b for b in cutoff_breakpoints(params)
                          if b < 4.0 * params.ell0))
    _, dtheta = theta_values(params, cs.skernel, theta_grid.nodes, derivative=True)
    grad_theta_sq = 4.0 * np.pi * theta_grid.integrate(dtheta**2)

    s_l2 = s_norm_l2_sq(params, st)
    g1s0 = g_minus_one_star_s_at_zero(params, st)
    tilde = (grad_theta_sq,
             16.0 * np.pi * a * rho0 * s_l2,
             8.0 * np.pi * a * rho0 * g1s0)

    return EnergyBreakdown(
        t1=t1, t2=t2, t3=t3, t4=t4, t5=t5, t6=t6, t7=t7, total=total,
        tilde_terms=tilde, tilde_total=sum(tilde),
        lhy_ref=lhy_reference(params.rho, a))


def gradient_identity_residual(cs):
    """Relative residual of the spectral identity
    ||grad nu||^2 + sum k^2 nu_hat^2 sigma_hat^2 = ||grad sigma||^2
    (per mode nu_hat^2 gamma_hat^2 = sigma_hat^2)."""
    grid = cs.sigma_hat.grid
    k2 = grid.nodes**2
    nu = cs.nu_hat.values
    sg = cs.sigma_hat.values
    lhs = grid.integrate(k2 * nu**2) + grid.integrate(k2 * nu**2 * sg**2)
    rhs = grid.integrate(k2 * sg**2)
    return abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# Riemann-sum comparison for the dispersion integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiemannReport:
    box_sides: tuple
    mode_counts: tuple
    discrepancies: tuple
    ratios: tuple
    halving_band: tuple
    passed: bool


def _annulus(params):
    y = params.require_rho0() * params.a**3
    k_lo = y ** (0.5 + params.epsilon) / params.a
    k_hi = y ** (0.5 - params.epsilon) / params.a
    return k_lo, k_hi


def g_annulus_integral(params, points_per_decade=256, order=12):
    """(2 pi)^-3 int over the annulus of the constant-potential dispersion
    combination (the authoritative restricted integral)."""
    k_lo, k_hi = _annulus(params)
    grid = RadialGrid.log_spaced(k_lo, k_hi, points_per_decade, order)
    return grid.integrate(dispersion(grid.nodes, params, "G")) / (2.0 * np.pi**2)


def g_sum_vs_integral(params, L, doublings=3, min_modes=1000,
                      halving_band=(0.4, 0.6)):
    """Compare the normalized lattice sum of the dispersion combination over
    the annulus against the continuum integral, across doublings of the box
    side; the discrepancy is dominated by the mode-free infrared gap and
    decays like 1/L."""
    k_lo, k_hi = _annulus(params)
    integral = g_annulus_integral(params)
    sides, counts, discrepancies = [], [], []
    for j in range(doublings + 1):
        side = L * 2**j
        lat = momentum_lattice(side, k_hi)
        norms = lat.norms
        sel = (norms >= k_lo) & (norms <= k_hi) & (norms > 0)
        if j == 0 and int(np.sum(sel)) < min_modes:
            raise DiluteRegimeError(
                f"only {int(np.sum(sel))} modes in the annulus at L={L:g}; "
                f"need >= {min_modes}")
        total = float(np.sum(dispersion(norms[sel], params, "G"))) / side**3
        sides.append(side)
        counts.append(int(np.sum(sel)))
        discrepancies.append(total - integral)
    ratios = tuple(abs(discrepancies[j + 1]) / abs(discrepancies[j])
                   for j in range(doublings))
    passed = all(halving_band[0] <= rt <= halving_band[1] for rt in ratios)
    return RiemannReport(box_sides=tuple(sides), mode_counts=tuple(counts),
                         discrepancies=tuple(discrepancies), ratios=ratios,
                         halving_band=halving_band, passed=passed)


# ---------------------------------------------------------------------------
# Density sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    x: float
    rho: float
    rho0: float
    E_rho: float
    tilde_E_rho: float
    lhy_ref: float
    dyson_ref: float
    c2_hat: float

    def as_dict(self):
        return {"x": self.x, "rho": self.rho, "rho0": self.rho0,
                "E_rho": self.E_rho, "tilde_E_rho": self.tilde_E_rho,
                "lhy_ref": self.lhy_ref, "dyson_ref": self.dyson_ref,
                "c2_hat": self.c2_hat}


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    failures: tuple  # (x, message) pairs

    @property
    def ok(self):
        return not self.failures


def row_from_breakdown(params, eb):
    leading = 4.0 * np.pi * params.a * params.rho**2
    return SweepRow(
        x=params.x, rho=params.rho, rho0=params.require_rho0(), E_rho=eb.total,
        tilde_E_rho=eb.tilde_total, lhy_ref=eb.lhy_ref,
        dyson_ref=dyson_reference(params.rho, params.a),
        c2_hat=(eb.tilde_total / leading - 1.0) / np.sqrt(params.x))


def sweep_point(x, base, settings=None, with_kernels=False):
    """Solve one gas parameter: rho0, kernels, energies, extracted c2."""
    params = PhysicalParams(a=base.a, rho=x / base.a**3, delta=base.delta,
                            epsilon=base.epsilon, rho0_margin=base.rho0_margin)
    rho0 = solve_rho0(params.rho, params, settings)
    params = params.with_rho0(rho0)
    cs = correlation_set(params, settings)
    eb = energy_breakdown(params, cs, settings)
    row = row_from_breakdown(params, eb)
    if with_kernels:
        return row, params, cs, eb
    return row


def density_sweep(x_values, base, settings=None):
    """Rows for a descending sweep of gas parameters in (0, 1e-3]."""
    xs = [float(x) for x in x_values]
    if not xs:
        raise ValueError("x_values must be non-empty")
    if any(not 0.0 < x <= 1e-3 for x in xs):
        raise ValueError("gas parameters must lie in (0, 1e-3]")
    if any(b >= a for a, b in zip(xs[:-1], xs[1:])):
        raise ValueError("gas parameters must be strictly descending")
    rows, failures = [], []
    for x in xs:
        try:
            rows.append(sweep_point(x, base, settings))
        except LhyLabError as exc:
            failures.append((x, str(exc)))
    return SweepResult(rows=tuple(rows), failures=tuple(failures))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "residual": self.residual}


def exponent_fit(xs, ys):
    """Ordinary least squares of log(y) on log(x); requires >= 2 positive
    points (callers aiming at exponent claims should supply >= 4)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ValueError("need at least two points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("exponent fit needs positive values")
    A = np.stack([np.log(xs), np.ones_like(xs)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(ys), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(ys)) ** 2)))
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     residual=resid)


def fit_sweep(rows, x_column, y_column):
    """Exponent fit on two SweepRow columns (y taken in absolute value)."""
    xs = [getattr(r, x_column) for r in rows]
    ys = [abs(getattr(r, y_column)) for r in rows]
    return exponent_fit(xs, ys)
