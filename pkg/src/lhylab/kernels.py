"""Trial-state kernels for the dilute hard-sphere Bose gas.

Everything is built from four ingredients: the hard-core scattering
profile 1 - a/r, a C-infinity plateau cutoff chi (1 below 2, 0 above 4),
the effective potential V_eff with Fourier transform 8*pi*sin(ka)/k, and
the Bogoliubov coefficient s_hat(k) that diagonalizes the quadratic
Hamiltonian for that potential.  From these the short-range Jastrow
profile, the condensate-orthogonal pair kernel sigma, and the hyperbolic
family (eta_hat, gamma_hat, nu_hat, g_hat) are assembled.

Numerical strategy for the position-space kernel s: split off the exact
inverse transform of -rho0*V_hat/(2k^2), which is -rho0*min(1, a/r), and
evaluate only the fast-decaying remainder by quadrature.  The remainder's
Fourier side is computed with a cancellation-free closed form, so the
split is stable at all momenta.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError, DiluteRegimeError
from .lattice import (
    MOMENTUM,
    POSITION,
    RadialGrid,
    RadialProfile,
    linear_panel_grid,
    oscillatory_moments,
    transform_at,
)

# ---------------------------------------------------------------------------
# Smooth transition and cutoffs
# ---------------------------------------------------------------------------

def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[m] = np.exp(-1.0 / t[m])
    return out


def _psi_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = _psi(t[m]) / t[m] ** 2
    return out


def _psi_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = _psi(t[m]) * (1.0 - 2.0 * t[m]) / t[m] ** 4
    return out


def _transition_parts(t):
    u, v = _psi(t), _psi(1.0 - t)
    du, dv = _psi_d1(t), -_psi_d1(1.0 - t)
    d2u, d2v = _psi_d2(t), _psi_d2(1.0 - t)
    return u, v, du, dv, d2u, d2v


def transition(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, symmetric about 1/2."""
    t = np.asarray(t, dtype=float)
    u, v = _psi(t), _psi(1.0 - t)
    with np.errstate(invalid="ignore"):
        out = np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, u / (u + v)))
    return out


def transition_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    u, v, du, dv, _, _ = _transition_parts(t[m])
    out[m] = (du * v - u * dv) / (u + v) ** 2
    return out


def transition_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    u, v, du, dv, d2u, d2v = _transition_parts(t[m])
    n = du * v - u * dv
    out[m] = (d2u * v - u * d2v) / (u + v) ** 2 - 2.0 * n * (du + dv) / (u + v) ** 3
    return out


def chi(y):
    """Unit-scale plateau cutoff: 1 for y <= 2, 0 for y >= 4, smooth between."""
    y = np.asarray(y, dtype=float)
    return np.where(y <= 2.0, 1.0, 1.0 - transition((y - 2.0) / 2.0))


def chi_d1(y):
    return -0.5 * transition_d1((np.asarray(y, dtype=float) - 2.0) / 2.0)


def chi_d2(y):
    return -0.25 * transition_d2((np.asarray(y, dtype=float) - 2.0) / 2.0)


def smooth_cutoff(r, scale):
    """chi(r/scale): 1 up to 2*scale, 0 beyond 4*scale."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return chi(np.asarray(r, dtype=float) / scale)


# ---------------------------------------------------------------------------
# Physical parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    """Scattering length, density, cutoff exponents and derived scales.

    ell = a*(rho*a^3)^(-delta) is the Jastrow range, ell0 the Bogoliubov
    range just beyond the healing length.  rho0 stays None until
    `solve_rho0` fixes the condensate density.
    """

    a: float
    rho: float
    delta: float = 0.1
    epsilon: float = 0.15
    rho0: float | None = None
    rho0_margin: float = 0.0

    def __post_init__(self):
        if self.a <= 0 or self.rho <= 0:
            raise ValueError("need a > 0 and rho > 0")
        if not 0.0 < self.x < 1.0:
            raise DiluteRegimeError(f"gas parameter rho*a^3 = {self.x:g} not in (0, 1)")
        if not self.delta < self.epsilon:
            raise ValueError("need delta < epsilon")
        if not self.a < self.ell < self.ell0:
            raise DiluteRegimeError(
                f"scale hierarchy violated: a={self.a:g}, ell={self.ell:g}, "
                f"ell0={self.ell0:g}")
        if self.rho0 is not None and not 0.0 < self.rho0 <= self.rho:
            raise ValueError("rho0 must lie in (0, rho]")

    @property
    def x(self):
        return self.rho * self.a**3

    @property
    def ell(self):
        return self.a * self.x ** (-self.delta)

    @property
    def ell0(self):
        return (self.rho * self.a) ** (-0.5) * self.x ** (-self.epsilon)

    def with_rho0(self, rho0):
        return replace(self, rho0=rho0)

    def require_rho0(self):
        if self.rho0 is None:
            raise ValueError("rho0 not solved yet; call solve_rho0 first")
        return self.rho0


@dataclass(frozen=True)
class KernelSettings:
    """Quadrature knobs for kernel construction (defaults are measured-good
    for the acceptance regime x in [1e-8, 1e-3])."""

    points_per_decade: int = 96
    order: int = 12
    grid_inner: float = 0.01       # position grid starts at grid_inner*a
    grid_outer: float = 8.0        # ... and ends at grid_outer*ell0
    s_k_ir: float = 1e-6           # remainder tabulated down to s_k_ir/ell0
    s_k_uv: float = 400.0          # ... and up to s_k_uv/a
    uv_half_periods: float = 0.5   # UV panel width in units of pi/a
    sigma_k_ir: float = 1e-3       # sigma_hat grid from sigma_k_ir/(2*ell0)
    sigma_k_uv: float = 60.0       # ... to sigma_k_uv/ell
    tail_tol: float | None = 1e-5


def hard_core_omega(r, a):
    """min(1, a/r): the uncut scattering defect 1 - f."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, a / r)


def hard_core_omega_d1(r, a):
    r = np.asarray(r, dtype=float)
    return np.where(r > a, -a / r**2, 0.0)


# ---------------------------------------------------------------------------
# Condensate-orthogonality profile phi
# ---------------------------------------------------------------------------

class CondensatePhi:
    """Unit-scale profile with integral one, plateau 1/2 on [0, 1], support
    in [0, 2].  Shape: half-plateau bump plus a compensating shell bump on
    (1.5, 2) whose (negative) amplitude is fixed by the normalization."""

    PLATEAU_END = 1.0
    PLATEAU_RAMP = 1.5
    SHELL_LO = 1.5
    SHELL_HI = 2.0

    def __init__(self):
        pts = set()
        for lo, hi in ((1.0, 1.5), (1.5, 1.7), (1.7, 1.8), (1.8, 2.0)):
            pts |= _graded_band(lo, hi, 6)
        grid = RadialGrid.log_spaced(1e-6, 2.0, 256, 16,
                                     breakpoints=tuple(sorted(pts - {2.0})))
        i1 = grid.integrate(self._plateau(grid.nodes))
        i2 = grid.integrate(self._shell(grid.nodes))
        self.shell_amplitude = (1.0 / (4.0 * np.pi) - 0.5 * i1) / i2
        total = 4.0 * np.pi * grid.integrate(self(grid.nodes))
        if abs(total - 1.0) > 1e-9:
            raise CalibrationError(
                f"phi normalization failed: integral {total!r} != 1")

    @staticmethod
    def _plateau(y):
        return 1.0 - transition((np.asarray(y, dtype=float) - 1.0) / 0.5)

    @staticmethod
    def _plateau_d1(y):
        return -transition_d1((np.asarray(y, dtype=float) - 1.0) / 0.5) / 0.5

    @staticmethod
    def _shell(y):
        y = np.asarray(y, dtype=float)
        return transition((y - 1.5) / 0.2) * transition((2.0 - y) / 0.2)

    @staticmethod
    def _shell_d1(y):
        y = np.asarray(y, dtype=float)
        return (transition_d1((y - 1.5) / 0.2) * transition((2.0 - y) / 0.2)
                - transition((y - 1.5) / 0.2) * transition_d1((2.0 - y) / 0.2)) / 0.2

    def __call__(self, y):
        return 0.5 * self._plateau(y) + self.shell_amplitude * self._shell(y)

    def d1(self, y):
        return 0.5 * self._plateau_d1(y) + self.shell_amplitude * self._shell_d1(y)


_PHI = None


def condensate_phi():
    global _PHI
    if _PHI is None:
        _PHI = CondensatePhi()
    return _PHI


def phi_profile(ell0, grid=None):
    """The scaled profile x -> phi(x/ell0)/ell0^3 with unit integral."""
    phi = condensate_phi()
    if grid is None:
        pts = set()
        for lo, hi in ((1.0, 1.5), (1.5, 1.7), (1.7, 1.8), (1.8, 2.0)):
            pts |= _graded_band(lo * ell0, hi * ell0, 6)
        grid = RadialGrid.log_spaced(1e-4 * ell0, 2.0 * ell0, 128, 12,
                                     breakpoints=tuple(sorted(pts - {2.0 * ell0})))
    vals = phi(grid.nodes / ell0) / ell0**3
    return RadialProfile(grid=grid, values=vals, space=POSITION)


# ---------------------------------------------------------------------------
# Short-range Jastrow profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JastrowPair:
    """Hard-core pair correlation f_ell, its defect omega_ell = 1 - f_ell,
    and the analytic radial derivative of f_ell (product rule on a/r and
    the cutoff; never numerical differencing)."""

    a: float
    ell: float
    f_ell: RadialProfile
    omega_ell: RadialProfile
    grad_f_ell: RadialProfile

    def f(self, r):
        return _f_ell(r, self.a, self.ell)

    def omega(self, r):
        return 1.0 - self.f(r)

    def grad_f(self, r):
        return _grad_f_ell(r, self.a, self.ell)


def _f_ell(r, a, ell):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        val = 1.0 - (a / r) * chi(r / ell)
    return np.where(r <= a, 0.0, val)


def _grad_f_ell(r, a, ell):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        val = (a / r**2) * chi(r / ell) - (a / r) * chi_d1(r / ell) / ell
    return np.where(r <= a, 0.0, val)


def jastrow_pair(a, ell, grid=None):
    """JastrowPair at explicit scattering length and cutoff range."""
    if grid is None:
        grid = RadialGrid.log_spaced(a / 100.0, 4.0 * ell, 96, 12,
                                     breakpoints=(a, 2.0 * ell))
    f_vals = _f_ell(grid.nodes, a, ell)
    return JastrowPair(
        a=a, ell=ell,
        f_ell=RadialProfile(grid=grid, values=f_vals),
        omega_ell=RadialProfile(grid=grid, values=1.0 - f_vals),
        grad_f_ell=RadialProfile(grid=grid, values=_grad_f_ell(grid.nodes, a, ell)))


def jastrow_short(params, grid=None):
    return jastrow_pair(params.a, params.ell, grid)


def grad_f_norm_sq(pair, points_per_decade=128, order=12):
    """int |grad f_ell|^2 d^3x by radial quadrature; equals 4*pi*a up to
    O(a^2/ell)."""
    grid = RadialGrid.log_spaced(pair.a, 4.0 * pair.ell, points_per_decade, order,
                                 breakpoints=(2.0 * pair.ell,))
    return 4.0 * np.pi * grid.integrate(pair.grad_f(grid.nodes) ** 2)


# ---------------------------------------------------------------------------
# Effective potential and Bogoliubov coefficient
# ---------------------------------------------------------------------------

def effective_potential_hat(k, a):
    """8*pi*sin(ka)/k, continuous at k = 0 with value 8*pi*a."""
    k = np.asarray(k, dtype=float)
    return 8.0 * np.pi * a * np.sinc(k * a / np.pi)


def _abe(k, params):
    rho0 = params.require_rho0()
    A = np.asarray(k, dtype=float) ** 2
    B = rho0 * effective_potential_hat(k, params.a)
    rad = A + 2.0 * B
    if np.any(rad <= 0.0):
        raise DiluteRegimeError("dispersion radicand k^2 + 2*rho0*V_hat <= 0")
    E = np.sqrt(A * rad)
    if np.any(A + B + E <= 0.0):
        raise DiluteRegimeError("denominator k^2 + rho0*V_hat + E <= 0")
    return A, B, E


def bogoliubov_s_hat(k, params):
    """Bogoliubov pairing coefficient s_hat(k), with s_hat(0) = 0.

    Evaluated as -B/sqrt(2E(A+B+E)) with A = k^2, B = rho0*V_hat(k),
    E = sqrt(A^2+2AB): algebraically equal to the defining expression but
    without subtractions of nearly equal quantities, at every k.
    """
    k = np.asarray(k, dtype=float)
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.zeros_like(k)
    m = k > 0.0
    A, B, E = _abe(k[m], params)
    out[m] = -B / np.sqrt(2.0 * E * (A + B + E))
    return float(out[0]) if scalar else out


def s_hat_uv_remainder(k, params):
    """s_hat(k) + rho0*V_hat(k)/(2k^2), cancellation-free.

    The remainder decays like rho^2 sin^2(ka)/k^6 and carries everything
    of s beyond the exactly invertible -rho0*V_hat/(2k^2) part.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    A, B, E = _abe(k, params)
    R = np.sqrt(2.0 * E * (A + B + E))
    return B**2 * (5.0 * A + 2.0 * B + 3.0 * E) / ((E + A) * R * (R + 2.0 * A))


class SKernel:
    """Pointwise evaluator of the pair kernel s(r) and its derivative.

    Uses s = -rho0*min(1, a/r) + remainder, where the remainder is the
    inverse transform of `s_hat_uv_remainder` tabulated once on log
    panels (infrared) plus oscillation-resolving linear panels
    (ultraviolet); pointwise values then cost one Filon sum each.
    """

    def __init__(self, params, settings=None):
        st = settings or KernelSettings()
        self.params = params
        self.rho0 = params.require_rho0()
        a, ell0 = params.a, params.ell0
        k_ir = st.s_k_ir / ell0
        k_mid = 1.0 / a
        k_uv = st.s_k_uv / a
        log_edges = RadialGrid.log_spaced(k_ir, k_mid, st.points_per_decade,
                                          st.order).panel_edges
        lin = linear_panel_grid(k_mid, k_uv, st.uv_half_periods * np.pi / a,
                                st.order)
        edges = np.concatenate([log_edges, lin.panel_edges[1:]])
        self.kgrid = RadialGrid.from_edges(edges, st.order)
        self.remainder_hat = RadialProfile(
            grid=self.kgrid, values=s_hat_uv_remainder(self.kgrid.nodes, params),
            space=MOMENTUM)
        # analytic [0, k_ir] mass of the inverse integral, an additive constant
        self.ir_constant = 2.0 * a * self.rho0 * k_ir / np.pi

    def remainder(self, r, derivative=False):
        res = transform_at(self.remainder_hat, r, derivative=derivative,
                           extend_origin=False)
        if derivative:
            return res[0] + self.ir_constant, res[1]
        return res + self.ir_constant

    def s(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return -self.rho0 * hard_core_omega(r, self.params.a) + self.remainder(r)

    def s_with_grad(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        rem, drem = self.remainder(r, derivative=True)
        s = -self.rho0 * hard_core_omega(r, self.params.a) + rem
        ds = -self.rho0 * hard_core_omega_d1(r, self.params.a) + drem
        return s, ds

    def s_hat(self, k):
        return bogoliubov_s_hat(k, self.params)


# ---------------------------------------------------------------------------
# Correlation family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationSet:
    """The coherent Bogoliubov kernel family at solved condensate density.

    Momentum members live on a shared k-grid; position members on a shared
    r-grid.  gamma_hat = cosh(eta_hat) = sqrt(1 + sigma_hat^2) and
    nu_hat = sigma_hat/gamma_hat hold per node by construction; the tests
    verify them as hyperbolic identities.
    """

    params: PhysicalParams
    s_hat: RadialProfile
    sigma_tilde: RadialProfile
    sigma: RadialProfile
    sigma_hat: RadialProfile
    eta_hat: RadialProfile
    gamma_hat: RadialProfile
    nu_hat: RadialProfile
    g_hat: RadialProfile
    sigma_tilde_grad: RadialProfile
    sigma_grad: RadialProfile
    sigma_tilde_integral: float
    sigma_zero_mode: float
    sigma_l2_sq: float
    skernel: SKernel
    jastrow: JastrowPair

    def position_kernel(self, name, r, derivative=False):
        """Pointwise values of gamma-1, 1-1/gamma or nu = (1/gamma)*sigma in
        position space (inverse transform of the corresponding momentum
        member)."""
        prof = {"gamma_minus_one": self._gm1,
                "one_minus_inv_gamma": self._img,
                "nu": self.nu_hat}[name]
        return transform_at(prof, r, derivative=derivative, extend_origin=False)

    @property
    def _gm1(self):
        g = self.gamma_hat.values
        s = self.sigma_hat.values
        vals = s**2 / (1.0 + g)  # cosh-1 without cancellation
        return RadialProfile(grid=self.gamma_hat.grid, values=vals, space=MOMENTUM)

    @property
    def _img(self):
        g = self.gamma_hat.values
        s = self.sigma_hat.values
        vals = s**2 / (g * (1.0 + g))
        return RadialProfile(grid=self.gamma_hat.grid, values=vals, space=MOMENTUM)


def _graded_band(lo, hi, levels=4):
    # panels shrinking geometrically toward both ends of a transition band;
    # the exp(-1/t) corners are C-infinity but not analytic, so uniform
    # panels cannot converge there
    w = hi - lo
    pts = {lo, hi}
    for j in range(1, levels + 1):
        pts.add(lo + w * 0.5**j)
        pts.add(hi - w * 0.5**j)
    return pts


def cutoff_breakpoints(params, levels=4):
    """Panel breakpoints at every kink and cutoff-transition band of the
    kernel family (bands graded so the panels resolve the bumps)."""
    a, ell, ell0 = params.a, params.ell, params.ell0
    pts = {a, ell / 2, ell0 / 2}
    for lo, hi in ((ell, 2 * ell), (2 * ell, 4 * ell), (ell0 / 2, ell0),
                   (ell0, 1.5 * ell0), (1.5 * ell0, 1.7 * ell0),
                   (1.7 * ell0, 1.8 * ell0), (1.8 * ell0, 2 * ell0),
                   (2 * ell0, 4 * ell0)):
        pts |= _graded_band(lo, hi, levels)
    return tuple(sorted(pts))


def _standard_grid(params, settings, outer=None):
    hi = (outer or settings.grid_outer) * params.ell0
    breaks = tuple(b for b in cutoff_breakpoints(params) if b < hi)
    return RadialGrid.log_spaced(settings.grid_inner * params.a, hi,
                                 settings.points_per_decade, settings.order,
                                 breakpoints=breaks)


@dataclass(frozen=True)
class _SigmaParts:
    grid: RadialGrid
    skernel: SKernel
    jastrow: JastrowPair
    sigma_tilde: np.ndarray
    sigma_tilde_grad: np.ndarray
    sigma: np.ndarray
    sigma_grad: np.ndarray
    c0: float
    sigma_l2_sq: float


def _sigma_values(params, jast, s_vals, ds_vals, r):
    """sigma_tilde and gradient from sampled s on radii r (support of the
    inner cutoff keeps the division by f_ell away from the core)."""
    ell, ell0, rho0 = params.ell, params.ell0, params.require_rho0()
    cut1 = chi(2.0 * r / ell0)
    cut2 = 1.0 - chi(2.0 * r / ell)
    dcut1 = chi_d1(2.0 * r / ell0) * 2.0 / ell0
    dcut2 = -chi_d1(2.0 * r / ell) * 2.0 / ell
    support = cut1 * cut2 != 0.0
    if np.any(support & (jast.f(r) < 1.0 - 2.0 * params.a / ell)):
        raise DiluteRegimeError("f_ell safeguard violated on sigma support")
    f = jast.f(r)
    df = jast.grad_f(r)
    om = jast.omega(r)
    dom = -df
    w = rho0 * om + s_vals
    dw = rho0 * dom + ds_vals
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.where(support, w / np.where(support, f, 1.0), 0.0)
        dcore = np.where(support, (dw * f - w * df) / np.where(support, f**2, 1.0),
                         0.0)
    st = cut1 * cut2 * core
    dst = (dcut1 * cut2 + cut1 * dcut2) * core + cut1 * cut2 * dcore
    return st, dst


def _build_sigma(params, settings):
    st = settings or KernelSettings()
    grid = _standard_grid(params, st, outer=2.0)  # sigma support ends at 2*ell0
    sk = SKernel(params, st)
    jast = jastrow_short(params)
    s_vals, ds_vals = sk.s_with_grad(grid.nodes)
    sig_t, dsig_t = _sigma_values(params, jast, s_vals, ds_vals, grid.nodes)
    c0 = 4.0 * np.pi * grid.integrate(sig_t)
    phi = condensate_phi()
    ell0 = params.ell0
    sigma = sig_t - c0 * phi(grid.nodes / ell0) / ell0**3
    dsigma = dsig_t - c0 * phi.d1(grid.nodes / ell0) / ell0**4
    l2 = 4.0 * np.pi * grid.integrate(sigma**2)
    return _SigmaParts(grid=grid, skernel=sk, jastrow=jast, sigma_tilde=sig_t,
                       sigma_tilde_grad=dsig_t, sigma=sigma, sigma_grad=dsigma,
                       c0=c0, sigma_l2_sq=l2)


def sigma_l2_sq_at(params, rho0, settings=None):
    """||sigma||_2^2 for a candidate condensate density (used by the
    rho0 fixed point)."""
    return _build_sigma(params.with_rho0(rho0), settings).sigma_l2_sq


def solve_rho0(rho, params, settings=None, sigma_norm_fn=None, tol=1e-10,
               max_iter=25):
    """Fix rho0 so that rho0 + ||sigma(rho0)||_2^2 = rho + margin*band.

    The band exponent is rho^(7/4 - 11*epsilon - delta); the default
    margin 0 solves the equation exactly.  Damped fixed point
    rho0 <- target - ||sigma(rho0)||^2; the derivative of the norm term
    is O((rho*a^3)^(1/2)), so convergence is fast.
    """
    band = rho ** (7.0 / 4.0 - 11.0 * params.epsilon - params.delta)
    target = rho + params.rho0_margin * band
    norm_fn = sigma_norm_fn or (lambda r0: sigma_l2_sq_at(params, r0, settings))
    n_at_rho = norm_fn(rho)
    if not n_at_rho < rho / 2.0:
        raise DiluteRegimeError(
            f"||sigma||^2 = {n_at_rho:g} >= rho/2 at rho0 = rho; gas not dilute "
            f"enough for the rho0 equation")
    rho0 = min(target - n_at_rho, rho)
    for _ in range(max_iter):
        n = norm_fn(rho0)
        residual = rho0 + n - target
        if abs(residual) <= tol * rho:
            return rho0
        rho0 = min(target - n, rho)
    raise CalibrationError(
        f"rho0 iteration did not reach residual {tol:g}*rho in {max_iter} steps "
        f"(rho*a^3 = {params.x:g} too large?)")


def correlation_set(params, settings=None):
    """Build the full kernel family at params.rho0 (which must be solved,
    or supplied as an initial guess)."""
    st = settings or KernelSettings()
    params.require_rho0()
    parts = _build_sigma(params, st)
    grid = parts.grid

    kmin = st.sigma_k_ir / (2.0 * params.ell0)
    kmax = st.sigma_k_uv / params.ell
    kgrid = RadialGrid.log_spaced(kmin, kmax, st.points_per_decade, st.order)
    sigma_prof = RadialProfile(grid=grid, values=parts.sigma, space=POSITION)
    sigma_hat_vals = transform_at(sigma_prof, kgrid.nodes, tail_tol=st.tail_tol)

    s_hat_vals = bogoliubov_s_hat(kgrid.nodes, params)
    gamma_vals = np.sqrt(1.0 + sigma_hat_vals**2)
    cs = CorrelationSet(
        params=params,
        s_hat=RadialProfile(grid=kgrid, values=s_hat_vals, space=MOMENTUM),
        sigma_tilde=RadialProfile(grid=grid, values=parts.sigma_tilde),
        sigma=sigma_prof,
        sigma_hat=RadialProfile(grid=kgrid, values=sigma_hat_vals, space=MOMENTUM),
        eta_hat=RadialProfile(grid=kgrid, values=np.arcsinh(sigma_hat_vals),
                              space=MOMENTUM),
        gamma_hat=RadialProfile(grid=kgrid, values=gamma_vals, space=MOMENTUM),
        nu_hat=RadialProfile(grid=kgrid, values=sigma_hat_vals / gamma_vals,
                             space=MOMENTUM),
        g_hat=RadialProfile(grid=kgrid, values=np.sqrt(1.0 + s_hat_vals**2),
                            space=MOMENTUM),
        sigma_tilde_grad=RadialProfile(grid=grid, values=parts.sigma_tilde_grad),
        sigma_grad=RadialProfile(grid=grid, values=parts.sigma_grad),
        sigma_tilde_integral=parts.c0,
        sigma_zero_mode=sigma_prof.integral(),
        sigma_l2_sq=parts.sigma_l2_sq,
        skernel=parts.skernel,
        jastrow=parts.jastrow,
    )
    return cs


def prepare_params(a, x, delta=0.1, epsilon=0.15, rho0_margin=0.0, settings=None):
    """Convenience: params at gas parameter x with rho0 solved."""
    params = PhysicalParams(a=a, rho=x / a**3, delta=delta, epsilon=epsilon,
                            rho0_margin=rho0_margin)
    rho0 = solve_rho0(params.rho, params, settings)
    return params.with_rho0(rho0)


# ---------------------------------------------------------------------------
# Combined kernels theta and Z
# ---------------------------------------------------------------------------

def theta_values(params, skernel, r, derivative=False):
    """theta = -rho0*chi_ell(2r)*omega_ell(r) + chi_ell0(2r)*(1-chi_ell(2r))*s(r)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a, ell, ell0, rho0 = params.a, params.ell, params.ell0, params.require_rho0()
    cut_l = chi(2.0 * r / ell)
    cut1 = chi(2.0 * r / ell0)
    cut2 = 1.0 - cut_l
    om_l = hard_core_omega(r, a) * chi(r / ell)
    if derivative:
        s_vals, ds_vals = skernel.s_with_grad(r)
    else:
        s_vals = skernel.s(r)
    theta = -rho0 * cut_l * om_l + cut1 * cut2 * s_vals
    if not derivative:
        return theta
    dom_l = hard_core_omega_d1(r, a) * chi(r / ell) \
        + hard_core_omega(r, a) * chi_d1(r / ell) / ell
    dcut_l = chi_d1(2.0 * r / ell) * 2.0 / ell
    dcut1 = chi_d1(2.0 * r / ell0) * 2.0 / ell0
    dtheta = -rho0 * (dcut_l * om_l + cut_l * dom_l) \
        + (dcut1 * cut2 - cut1 * dcut_l) * s_vals + cut1 * cut2 * ds_vals
    return theta, dtheta


def z_values(params, skernel, r, derivative=False):
    """Z = rho0*omega_ell0(r) + s(r) (outer-cutoff defect plus pair kernel)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a, ell0, rho0 = params.a, params.ell0, params.require_rho0()
    om = hard_core_omega(r, a) * chi(r / ell0)
    if derivative:
        s_vals, ds_vals = skernel.s_with_grad(r)
        dom = hard_core_omega_d1(r, a) * chi(r / ell0) \
            + hard_core_omega(r, a) * chi_d1(r / ell0) / ell0
        return rho0 * om + s_vals, rho0 * dom + ds_vals
    return rho0 * om + skernel.s(r)


def theta_and_Z(params, cs):
    """Sampled theta and Z profiles (with analytic radial gradients attached
    as companion profiles on the same grid)."""
    grid = _standard_grid(params, KernelSettings(), outer=4.0)
    th, dth = theta_values(params, cs.skernel, grid.nodes, derivative=True)
    z, dz = z_values(params, cs.skernel, grid.nodes, derivative=True)
    theta = RadialProfile(grid=grid, values=th)
    zprof = RadialProfile(grid=grid, values=z, compact_support=False)
    return (theta, RadialProfile(grid=grid, values=dth)), \
           (zprof, RadialProfile(grid=grid, values=dz, compact_support=False))


# ---------------------------------------------------------------------------
# Boundary kernel z1 and the dispersive identity for omega_ell0
# ---------------------------------------------------------------------------

def z1_values(y, a):
    """z1(y) = 4a*grad chi(y).y/|y|^3 - 2a*laplacian chi(y)/|y| (radial form),
    supported on 2 <= |y| <= 4."""
    y = np.asarray(y, dtype=float)
    lap = chi_d2(y) + 2.0 * chi_d1(y) / y
    return 4.0 * a * chi_d1(y) / y**2 - 2.0 * a * lap / y


def z1_transform(kappa, a, points_per_decade=192, order=16):
    """Fourier transform of z1 at dimensionless momenta kappa."""
    grid = RadialGrid.log_spaced(2.0, 4.0, points_per_decade, order,
                                 breakpoints=tuple(sorted(_graded_band(2.0, 4.0, 6))))
    prof = RadialProfile(grid=grid, values=z1_values(grid.nodes, a))
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    return transform_at(prof, kappa, extend_origin=False)


def omega_ell0_hat(k, params, points_per_decade=192, order=16):
    """Transform of omega_ell0 = min(1, a/r)*chi(r/ell0): closed forms on
    [0, a] and [a, 2*ell0], panel quadrature on the cutoff band."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    a, ell0 = params.a, params.ell0
    ka = k * a
    core = (np.sin(ka) - ka * np.cos(ka)) / k**2  # int_0^a r sin(kr) dr
    mid = a * (np.cos(ka) - np.cos(2.0 * ell0 * k)) / k  # int_a^{2 ell0} a sin(kr) dr
    band_grid = RadialGrid.log_spaced(
        2.0 * ell0, 4.0 * ell0, points_per_decade, order,
        breakpoints=tuple(sorted(_graded_band(2.0 * ell0, 4.0 * ell0, 6))))
    g = a * chi(band_grid.nodes / ell0)
    band = oscillatory_moments(band_grid, g, k, "sin")
    return 4.0 * np.pi * (core + mid + band) / k


@dataclass(frozen=True)
class Z1Report:
    k: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_rel_discrepancy: float
    passed: bool


def z1_check(params, n_k=160, rel_tol=1e-6):
    """Verify 2k^2*omega_ell0_hat(k) - V_hat(k) = z1_hat(k*ell0) on a k-grid
    spanning the cutoff band scale; discrepancy normalized by the sup of
    the right-hand side."""
    ell0 = params.ell0
    k = np.geomspace(1e-2 / ell0, 30.0 / ell0, n_k)
    lhs = 2.0 * k**2 * omega_ell0_hat(k, params) - effective_potential_hat(k, params.a)
    rhs = z1_transform(k * ell0, params.a)
    scale = np.max(np.abs(rhs))
    max_rel = float(np.max(np.abs(lhs - rhs)) / scale)
    return Z1Report(k=k, lhs=lhs, rhs=rhs, max_rel_discrepancy=max_rel,
                    passed=max_rel <= rel_tol)


# ---------------------------------------------------------------------------
# Kernel dumps
# ---------------------------------------------------------------------------

def dump_kernels(cs, out_dir, float_format="%.11e", header_lines=()):
    """One CSV per kernel: commented symbol line (plus any extra comment
    lines, e.g. a config echo), then (r_or_k, value) rows."""
    theta_pair, z_pair = theta_and_Z(cs.params, cs)
    named = {
        "f_ell": cs.jastrow.f_ell,
        "omega_ell": cs.jastrow.omega_ell,
        "s_hat": cs.s_hat,
        "sigma_tilde": cs.sigma_tilde,
        "sigma": cs.sigma,
        "sigma_hat": cs.sigma_hat,
        "eta_hat": cs.eta_hat,
        "gamma_hat": cs.gamma_hat,
        "nu_hat": cs.nu_hat,
        "g_hat": cs.g_hat,
        "theta": theta_pair[0],
        "z_kernel": z_pair[0],
    }
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, prof in named.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# kernel: {name} ({prof.space} space)\n")
            for line in header_lines:
                fh.write(line.rstrip("\n") + "\n")
            fh.write("r_or_k,value\n")
            for rk, v in zip(prof.grid.nodes, prof.values):
                fh.write(f"{float_format % rk},{float_format % v}\n")
        paths[name] = path
    return paths
