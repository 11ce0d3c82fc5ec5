"""Radial and lattice Fourier machinery.

All radially symmetric 3D transforms use the convention

    h_hat(k) = (4*pi/k) * int_0^inf r h(r) sin(kr) dr
    h(r)     = 1/(2*pi^2*r) * int_0^inf k h_hat(k) sin(kr) dk

which is the continuum limit of torus Fourier coefficients with
normalized inverse sum (1/|box|) * sum_k.

The oscillatory integrals are evaluated on composite Gauss-Legendre
panels (log-spaced by default).  On each panel the smooth factor is
expanded in Legendre polynomials and the sine/cosine moments are done
in closed form through spherical Bessel functions, so the cost is
independent of how fast sin(kr) oscillates.  Panels only need to
resolve the smooth factor; a coefficient-tail check guards against
under-resolved panels.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import spherical_jn

from .errors import (
    BlockMarginError,
    GridResolutionError,
    NonFiniteValueError,
    SpaceMismatchError,
)

POSITION = "position"
MOMENTUM = "momentum"


@lru_cache(maxsize=None)
def _gauss_rule(order):
    x, w = npleg.leggauss(order)
    return x, w


@lru_cache(maxsize=None)
def _legendre_vandermonde(order):
    # P[m, j] = P_m(x_j) at the Gauss nodes of the same order.
    x, _ = _gauss_rule(order)
    return np.stack([npleg.legval(x, [0.0] * m + [1.0]) for m in range(order)])


@lru_cache(maxsize=None)
def _legendre_analysis(order):
    # A[m, j] such that c_m = sum_j A[m, j] g(x_j) are the Legendre
    # coefficients of the degree-(order-1) interpolant of g.
    x, w = _gauss_rule(order)
    P = _legendre_vandermonde(order)
    scale = (2.0 * np.arange(order) + 1.0) / 2.0
    return scale[:, None] * P * w[None, :]


def _panel_edges(x_min, x_max, panels_per_decade, breakpoints):
    if not (0.0 < x_min < x_max):
        raise ValueError("need 0 < x_min < x_max")
    anchors = sorted({x_min, x_max, *(b for b in breakpoints if x_min < b < x_max)})
    pieces = []
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        n = max(1, int(np.ceil(np.log10(hi / lo) * panels_per_decade)))
        pieces.append(np.geomspace(lo, hi, n + 1)[:-1])
    return np.append(np.concatenate(pieces), x_max)


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing quadrature nodes on [r_min, r_max].

    ``weights`` carry the r^2 volume measure: ``weights @ values``
    approximates int_{r_min}^{r_max} h(r) r^2 dr.  ``bare_weights``
    omit the measure.
    """

    nodes: np.ndarray
    weights: np.ndarray
    bare_weights: np.ndarray
    panel_edges: np.ndarray
    order: int

    def __post_init__(self):
        if not np.all(np.diff(self.nodes) > 0) or self.nodes[0] <= 0:
            raise ValueError("grid nodes must be positive and strictly increasing")

    @property
    def r_min(self):
        return float(self.panel_edges[0])

    @property
    def r_max(self):
        return float(self.panel_edges[-1])

    @property
    def n_panels(self):
        return len(self.panel_edges) - 1

    @classmethod
    def log_spaced(cls, r_min, r_max, points_per_decade=64, order=8, breakpoints=()):
        """Log-spaced composite Gauss-Legendre grid.

        ``points_per_decade`` is split into panels of ``order`` nodes;
        explicit ``breakpoints`` become panel edges so kinks of the
        integrand never fall inside a panel.
        """
        if points_per_decade < order:
            raise ValueError("points_per_decade must be >= order")
        edges = _panel_edges(r_min, r_max, points_per_decade // order, breakpoints)
        return cls.from_edges(edges, order)

    @classmethod
    def from_edges(cls, edges, order=8):
        edges = np.asarray(edges, dtype=float)
        x, w = _gauss_rule(order)
        half = 0.5 * np.diff(edges)
        center = 0.5 * (edges[:-1] + edges[1:])
        nodes = (center[:, None] + half[:, None] * x[None, :]).ravel()
        bare = (half[:, None] * w[None, :]).ravel()
        return cls(nodes=nodes, weights=bare * nodes**2, bare_weights=bare,
                   panel_edges=edges, order=order)

    def integrate(self, values):
        """int h r^2 dr over the grid span (values sampled at nodes)."""
        return float(self.weights @ np.asarray(values))

    def integrate_bare(self, values):
        """int h dr over the grid span."""
        return float(self.bare_weights @ np.asarray(values))

    def panel_coefficients(self, values):
        """Per-panel Legendre coefficients, shape (n_panels, order)."""
        v = np.asarray(values, dtype=float).reshape(self.n_panels, self.order)
        return v @ _legendre_analysis(self.order).T


@dataclass(frozen=True)
class RadialProfile:
    """Radially symmetric function sampled on a RadialGrid.

    ``space`` tags whether the radial variable is |x| or |k|.  If
    ``compact_support`` is set the profile is treated as identically
    zero outside the grid span.
    """

    grid: RadialGrid
    values: np.ndarray
    space: str = POSITION
    compact_support: bool = True

    def __post_init__(self):
        if self.space not in (POSITION, MOMENTUM):
            raise ValueError(f"unknown space tag {self.space!r}")
        if len(self.values) != len(self.grid.nodes):
            raise ValueError("values/nodes length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteValueError("profile values must be finite at every node")

    @classmethod
    def from_function(cls, grid, fn, space=POSITION, **kw):
        return cls(grid=grid, values=np.asarray(fn(grid.nodes), dtype=float),
                   space=space, **kw)

    def __call__(self, x):
        return evaluate_profile(self, x)

    def norm_l2_sq(self):
        """4*pi*int h^2 r^2 dr (squared L2 norm over R^3)."""
        return 4.0 * np.pi * self.grid.integrate(self.values**2)

    def norm_l1(self):
        """4*pi*int |h| r^2 dr."""
        return 4.0 * np.pi * self.grid.integrate(np.abs(self.values))

    def integral(self):
        """4*pi*int h r^2 dr."""
        return 4.0 * np.pi * self.grid.integrate(self.values)


def _check_panel_tails(grid, coeffs, tail_tol, context):
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        return
    tail = np.max(np.abs(coeffs[:, -2:]), axis=1)
    bad = np.nonzero(tail > tail_tol * scale)[0]
    if len(bad):
        p = int(bad[np.argmax(tail[bad])])
        lo, hi = grid.panel_edges[p], grid.panel_edges[p + 1]
        raise GridResolutionError(
            f"{context}: integrand under-resolved on panel [{lo:.6g}, {hi:.6g}] "
            f"(tail ratio {tail[p] / scale:.2e} > {tail_tol:.0e}); refine the grid "
            f"or add a breakpoint")


def oscillatory_moments(grid, gvalues, freqs, kind="sin", tail_tol=None,
                        context="oscillatory_moments"):
    """int g(x) sin(f x) dx (or cos) over the grid span, for an array of
    frequencies f >= 0.

    The moments are exact for the per-panel Legendre interpolant of g,
    uniformly in f.  With ``tail_tol`` set, panels whose trailing
    Legendre coefficients exceed ``tail_tol`` (relative to the global
    coefficient scale) raise GridResolutionError.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs < 0):
        raise ValueError("frequencies must be >= 0")
    coeffs = grid.panel_coefficients(gvalues)
    if tail_tol is not None:
        _check_panel_tails(grid, coeffs, tail_tol, context)
    half = 0.5 * np.diff(grid.panel_edges)
    center = 0.5 * (grid.panel_edges[:-1] + grid.panel_edges[1:])

    z = freqs[:, None] * half[None, :]
    # spherical_jn misbehaves on subnormal arguments; at that scale the
    # m = 0 value is exactly 1 and all higher orders vanish
    z = np.where(z < 1e-150, 0.0, z)
    acc = np.zeros(z.shape, dtype=complex)
    for m in range(grid.order):
        acc += (1j**m * coeffs[:, m])[None, :] * spherical_jn(m, z)
    phase = np.exp(1j * freqs[:, None] * center[None, :])
    total = np.sum(2.0 * half[None, :] * phase * acc, axis=1)
    return total.imag if kind == "sin" else total.real


def _origin_sine_moment(freqs, x0):
    # int_0^{x0} x sin(f x) dx, series-switched to avoid cancellation at f*x0 << 1
    z = freqs * x0
    out = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    out[small] = freqs[small] * x0**3 / 3.0 * (1.0 - zs**2 / 10.0 + zs**4 / 280.0)
    zb = z[~small]
    out[~small] = (np.sin(zb) - zb * np.cos(zb)) / freqs[~small] ** 2
    return out


def default_conjugate_grid(grid, margin=0.01, points_per_decade=None, order=None):
    """Default output grid for a transform: covers the IR scale 2*pi/r_max
    (times ``margin``) up to the Nyquist-like scale pi/min-spacing."""
    spacing = float(np.min(np.diff(grid.nodes)))
    lo = margin * 2.0 * np.pi / grid.r_max
    hi = np.pi / spacing
    return RadialGrid.log_spaced(lo, hi,
                                 points_per_decade or 8 * grid.order,
                                 order or grid.order)


def radial_transform(h, direction="forward", out_grid=None, margin=0.01,
                     tail_tol=1e-5, extend_origin=True):
    """3D radial Fourier transform of a RadialProfile.

    ``forward`` maps a position profile to momentum space, ``inverse``
    the other way; the round trip is the identity on smooth compactly
    supported profiles.  With ``extend_origin`` the profile is continued
    by its innermost value onto [0, r_min] in closed form, so a grid
    that starts above zero does not bias the transform.
    """
    if direction == "forward":
        if h.space != POSITION:
            raise SpaceMismatchError("forward transform needs a position profile")
        out_space = MOMENTUM
    elif direction == "inverse":
        if h.space != MOMENTUM:
            raise SpaceMismatchError("inverse transform needs a momentum profile")
        out_space = POSITION
    else:
        raise ValueError("direction must be 'forward' or 'inverse'")

    if out_grid is None:
        out_grid = default_conjugate_grid(h.grid, margin=margin)
    mom = _sine_moments_extended(h, out_grid.nodes, extend_origin, tail_tol,
                                 context=f"radial_transform[{direction}]")
    if direction == "forward":
        values = 4.0 * np.pi * mom / out_grid.nodes
    else:
        values = mom / (2.0 * np.pi**2 * out_grid.nodes)
    return RadialProfile(grid=out_grid, values=values, space=out_space)


def _sine_moments_extended(h, freqs, extend_origin, tail_tol, context=""):
    g = h.grid.nodes * h.values
    mom = oscillatory_moments(h.grid, g, freqs, "sin", tail_tol=tail_tol,
                              context=context)
    if extend_origin and h.values[0] != 0.0:
        mom = mom + h.values[0] * _origin_sine_moment(freqs, h.grid.r_min)
    return mom


def transform_at(h, freqs, derivative=False, tail_tol=None, extend_origin=True):
    """Evaluate the transform of ``h`` (per its space tag) at arbitrary
    conjugate radii, optionally together with its radial derivative.

    Uses the same panel moments as `radial_transform` but without
    constructing an output grid.  Derivatives are computed from the
    closed-form cosine moments, never by numerical differencing.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    mom = _sine_moments_extended(h, freqs, extend_origin, tail_tol)
    pref = 4.0 * np.pi if h.space == POSITION else 1.0 / (2.0 * np.pi**2)
    vals = pref * mom / freqs
    if not derivative:
        return vals
    # d/dy [ (1/y) int g sin(yx) dx ] = (1/y) int x^2 h cos(yx) dx - vals/y
    g2 = h.grid.nodes**2 * h.values
    cos_m = oscillatory_moments(h.grid, g2, freqs, "cos", tail_tol=tail_tol)
    if extend_origin and h.values[0] != 0.0:
        cos_m = cos_m + h.values[0] * _origin_x2cos_moment(freqs, h.grid.r_min)
    dvals = pref * cos_m / freqs - vals / freqs
    return vals, dvals


def _origin_x2cos_moment(freqs, x0):
    # int_0^{x0} x^2 cos(f x) dx, series-switched at f*x0 << 1
    z = freqs * x0
    out = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    out[small] = x0**3 / 3.0 * (1.0 - 3.0 * zs**2 / 10.0 + zs**4 / 56.0)
    zb = z[~small]
    fb = freqs[~small]
    out[~small] = ((zb**2 - 2.0) * np.sin(zb) + 2.0 * zb * np.cos(zb)) / fb**3
    return out


def evaluate_profile(profile, x):
    """Evaluate a sampled profile at arbitrary radii via its per-panel
    Legendre interpolant; zero outside the span for compact support."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grid = profile.grid
    coeffs = grid.panel_coefficients(profile.values)
    out = np.zeros_like(x)
    inside = (x >= grid.r_min) & (x <= grid.r_max)
    if not profile.compact_support and not np.all(inside):
        raise ValueError("evaluation outside the grid span")
    idx = np.clip(np.searchsorted(grid.panel_edges, x[inside], side="right") - 1,
                  0, grid.n_panels - 1)
    lo = grid.panel_edges[idx]
    hi = grid.panel_edges[idx + 1]
    t = (2.0 * x[inside] - lo - hi) / (hi - lo)
    vals = np.empty_like(t)
    for p in np.unique(idx):
        sel = idx == p
        vals[sel] = npleg.legval(t[sel], coeffs[p])
    out[inside] = vals
    return out if out.shape != (1,) else float(out[0])


def convolve(f, g):
    """Convolution via pointwise product in momentum space.

    For momentum profiles the result is the product f_hat*g_hat (the
    momentum representation of the position-space convolution).  For
    position profiles both factors are transformed, multiplied, and
    transformed back onto f's grid.
    """
    if f.space != g.space:
        raise SpaceMismatchError(f"cannot convolve {f.space} with {g.space}")
    if f.space == MOMENTUM:
        gv = g.values if _same_grid(f.grid, g.grid) else evaluate_profile(g, f.grid.nodes)
        return RadialProfile(grid=f.grid, values=f.values * gv, space=MOMENTUM)
    fhat = radial_transform(f, "forward")
    ghat_vals = transform_at(g, fhat.grid.nodes)
    prod = RadialProfile(grid=fhat.grid, values=fhat.values * ghat_vals,
                         space=MOMENTUM)
    vals = transform_at(prod, f.grid.nodes)
    return RadialProfile(grid=f.grid, values=vals, space=POSITION)


def _same_grid(g1, g2):
    return g1.nodes.shape == g2.nodes.shape and np.array_equal(g1.nodes, g2.nodes)


def integrate_function(fn, lo, hi, points_per_decade=64, order=8, breakpoints=(),
                       measure="bare"):
    """One-off panel quadrature of ``fn`` on [lo, hi] (log-spaced panels)."""
    grid = RadialGrid.log_spaced(lo, hi, points_per_decade, order, breakpoints)
    vals = fn(grid.nodes)
    return grid.integrate(vals) if measure == "r2" else grid.integrate_bare(vals)


def linear_panel_grid(lo, hi, panel_width, order=8):
    """Uniform-width panels; for integrands with fixed-scale oscillation."""
    n = max(1, int(np.ceil((hi - lo) / panel_width)))
    return RadialGrid.from_edges(np.linspace(lo, hi, n + 1), order)


# ---------------------------------------------------------------------------
# Momentum lattice 2*pi*Z^3/L
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumLattice:
    """All modes p in 2*pi*Z^3/L with |p| <= kmax."""

    L: float
    kmax: float
    modes: np.ndarray

    @property
    def norms(self):
        return np.linalg.norm(self.modes, axis=1)

    def ball_count_deviation(self):
        """(count - analytic ball volume count, expected surface scale R^2)."""
        R = self.kmax * self.L / (2.0 * np.pi)
        return len(self.modes) - 4.0 * np.pi / 3.0 * R**3, R**2


def momentum_lattice(L, kmax):
    if L <= 0 or kmax <= 0:
        raise ValueError("need L > 0 and kmax > 0")
    step = 2.0 * np.pi / L
    nmax = int(np.floor(kmax / step))
    rng = np.arange(-nmax, nmax + 1)
    n1, n2, n3 = np.meshgrid(rng, rng, rng, indexing="ij")
    pts = np.stack([n1.ravel(), n2.ravel(), n3.ravel()], axis=1) * step
    keep = np.einsum("ij,ij->i", pts, pts) <= kmax**2 * (1 + 1e-12)
    return MomentumLattice(L=L, kmax=kmax, modes=pts[keep])


def lattice_sum(fhat, lattice, exclude_zero=False):
    """Normalized lattice sum L^-3 * sum_k fhat(|k|).

    ``fhat`` is a vectorized evaluator of |k|.  With ``exclude_zero``
    the k = 0 mode is dropped (the sum over the punctured lattice).
    """
    norms = lattice.norms
    if exclude_zero:
        norms = norms[norms > 0]
    vals = np.asarray(fhat(norms), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = norms[~np.isfinite(vals)][0]
        raise NonFiniteValueError(f"evaluator returned non-finite value at |k|={bad!r}")
    return float(np.sum(vals) / lattice.L**3)


# ---------------------------------------------------------------------------
# Discrete derivatives of mode sequences (rectangular blocks of 2*pi*Z^3/L)
# ---------------------------------------------------------------------------

def _block_ranges(coeffs):
    keys = np.array(sorted(coeffs.keys()))
    lo = keys.min(axis=0)
    hi = keys.max(axis=0)
    if len(coeffs) != np.prod(hi - lo + 1):
        raise BlockMarginError("coefficients do not fill a rectangular block")
    return lo, hi


def discrete_derivative(coeffs, axis, order, L):
    """Iterated forward difference (L/2*pi)*(f_{k + 2*pi*e_j/L} - f_k).

    ``coeffs`` maps integer mode triples n (momenta 2*pi*n/L) to values;
    they must fill a rectangular block with at least ``order`` layers of
    margin along ``axis``.  Returns the derivative on the shrunken block.
    """
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    lo, hi = _block_ranges(coeffs)
    j = axis - 1
    if hi[j] - lo[j] < order:
        raise BlockMarginError(
            f"block extent {hi[j] - lo[j] + 1} along axis {axis} too small for "
            f"order {order}")
    scale = L / (2.0 * np.pi)
    cur = dict(coeffs)
    step = tuple(int(v) for v in np.eye(3, dtype=int)[j])
    for _ in range(order):
        nxt = {}
        for n, v in cur.items():
            up = (n[0] + step[0], n[1] + step[1], n[2] + step[2])
            if up in cur:
                nxt[n] = scale * (cur[up] - v)
        cur = nxt
    return cur


def lattice_fourier_eval(coeffs, L, points):
    """Periodic function with the given mode coefficients:
    h(x) = L^-3 sum_n c_n exp(i*2*pi*n.x/L), evaluated at ``points`` (m,3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    keys = np.array(list(coeffs.keys()), dtype=float)
    vals = np.array([coeffs[tuple(int(i) for i in k)] for k in keys])
    phases = np.exp(1j * (2.0 * np.pi / L) * pts @ keys.T)
    out = phases @ vals / L**3
    return out if out.shape != (1,) else out[0]
