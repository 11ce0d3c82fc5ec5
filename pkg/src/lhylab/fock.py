"""Exact operator-identity checks on a truncated Fock space.

A small discrete torus (1D chain by default, 2x2x2 for local-number
checks) carries bosonic field operators a_x = c_x / sqrt(cell volume)
with [a_x, a_y*] = delta_xy / cell_volume.  The basis enumerates
occupation tuples with total occupancy up to nmax, so every operator is
an explicit (sparse) matrix and the trial-state algebra can be verified
directly: the coherent shift, the Bogoliubov action on momentum modes,
the multiplication-operator identities of the pair-product factor, and
the closed annihilation identity of the full trial state.

Multiplication-operator identities are exact on the truncated space
(both sides change particle number identically).  Transformation
identities hold up to a truncation defect: residuals are measured on a
fixed low-occupancy sub-basis and must shrink as nmax grows.
"""

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import expm as dense_expm
from scipy.sparse.linalg import expm as sparse_expm
from scipy.stats import poisson

from .errors import BasisCapError, TailBudgetError

DENSE_EXPM_CUTOFF = 6000


# ---------------------------------------------------------------------------
# Space and states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FockSpace:
    """Occupation-number basis on a discrete torus, truncated by total
    occupancy."""

    M_lin: int
    dims: int
    h: float
    nmax: int
    sites: np.ndarray   # (M, dims) integer coordinates
    basis: np.ndarray   # (dimension, M) occupations, lexicographic
    index: dict

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def cell_volume(self):
        return self.h**self.dims

    @property
    def volume(self):
        return (self.M_lin * self.h) ** self.dims

    @property
    def dimension(self):
        return len(self.basis)

    def total_occupation(self):
        return self.basis.sum(axis=1)

    def safe_mask(self, n_safe):
        return self.total_occupation() <= n_safe

    def pair_distances(self):
        """Minimum-image Euclidean distance matrix between sites."""
        d = self.sites[:, None, :] - self.sites[None, :, :]
        d = np.minimum(d % self.M_lin, (-d) % self.M_lin)
        return self.h * np.sqrt((d**2).sum(axis=2))

    def momentum_modes(self):
        """Integer mode labels; momenta are 2*pi*m/(M_lin*h) per axis."""
        return [tuple(s) for s in self.sites]


def _occupation_tuples(n_modes, nmax):
    if n_modes == 0:
        yield ()
        return
    for head in range(nmax + 1):
        for tail in _occupation_tuples(n_modes - 1, nmax - head):
            yield (head,) + tail


def build_space(M_lin, dims=1, h=1.0, nmax=4, basis_cap=2_000_000):
    """Deterministic lexicographic basis of occupations with sum <= nmax."""
    if dims not in (1, 3):
        raise ValueError("dims must be 1 or 3")
    M = M_lin**dims
    dim = math.comb(M + nmax, M)
    if dim > basis_cap:
        raise BasisCapError(f"basis dimension {dim} exceeds cap {basis_cap}")
    coords = np.array(list(itertools.product(range(M_lin), repeat=dims)),
                      dtype=int)
    basis = np.array(list(_occupation_tuples(M, nmax)), dtype=int)
    index = {tuple(row): i for i, row in enumerate(basis)}
    return FockSpace(M_lin=M_lin, dims=dims, h=h, nmax=nmax, sites=coords,
                     basis=basis, index=index)


@dataclass(frozen=True)
class FockState:
    """Amplitude vector with its pre-normalization norm and the amplitude
    mass sitting on the top occupancy shell (the truncation weight)."""

    amplitudes: np.ndarray
    norm: float
    truncation_weight: float

    @classmethod
    def from_vector(cls, space, vec, normalize=True):
        vec = np.asarray(vec, dtype=complex)
        nrm = float(np.linalg.norm(vec))
        if normalize and nrm > 0:
            vec = vec / nrm
        top = space.total_occupation() == space.nmax
        weight = float(np.sum(np.abs(vec[top]) ** 2))
        return cls(amplitudes=vec, norm=nrm, truncation_weight=weight)


def vacuum(space):
    vec = np.zeros(space.dimension, dtype=complex)
    vec[space.index[tuple([0] * space.n_sites)]] = 1.0
    return FockState.from_vector(space, vec)


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse operator over the basis with its declared particle-number
    change (None for mixed); the sparsity pattern is validated against
    the declaration."""

    matrix: object
    hermitian: bool = False
    particle_change: int | None = None

    def validate(self, space):
        if self.particle_change is None:
            return True
        coo = sparse.coo_matrix(self.matrix)
        tot = space.total_occupation()
        return bool(np.all(tot[coo.row] - tot[coo.col] == self.particle_change))

    def dense(self):
        m = self.matrix
        return m.toarray() if sparse.issparse(m) else np.asarray(m)


# ---------------------------------------------------------------------------
# Ladder, number, kinetic operators
# ---------------------------------------------------------------------------

def _raw_annihilator(space, site):
    # c|..n..> = sqrt(n)|..n-1..>; creation never leaves the basis going down
    basis = space.basis
    occ = basis[:, site]
    rows, cols, vals = [], [], []
    for col in np.nonzero(occ > 0)[0]:
        target = basis[col].copy()
        target[site] -= 1
        rows.append(space.index[tuple(target)])
        cols.append(col)
        vals.append(np.sqrt(occ[col]))
    return sparse.csr_matrix((vals, (rows, cols)),
                             shape=(space.dimension, space.dimension))


def ladder(space, site):
    """(annihilator, creator) with field normalization 1/sqrt(cell volume):
    [a_i, a_j*] = delta_ij / cell_volume below the truncation shell."""
    c = _raw_annihilator(space, site) / np.sqrt(space.cell_volume)
    return (OperatorMatrix(matrix=c, particle_change=-1),
            OperatorMatrix(matrix=c.T.copy(), particle_change=+1))


def number_operator(space):
    """N = cell_volume * sum_i a_i* a_i; integer spectrum 0..nmax."""
    return OperatorMatrix(
        matrix=sparse.diags(space.total_occupation().astype(float)),
        hermitian=True, particle_change=0)


def kinetic_operator(space):
    """Second quantization of the (forward-difference) discrete Laplacian."""
    M = space.n_sites
    cs = [_raw_annihilator(space, i) for i in range(M)]
    coords = {tuple(s): i for i, s in enumerate(space.sites)}
    K = sparse.csr_matrix((space.dimension, space.dimension))
    for i, s in enumerate(space.sites):
        for axis in range(space.dims):
            nb = list(s)
            nb[axis] = (nb[axis] + 1) % space.M_lin
            j = coords[tuple(nb)]
            d = cs[j] - cs[i]
            K = K + d.T.conj() @ d / space.h**2
    return OperatorMatrix(matrix=K, hermitian=True, particle_change=0)


def local_number_operator(space, site, radius):
    """Particles within minimum-image distance ``radius`` of ``site``."""
    dist = space.pair_distances()[site]
    sel = dist <= radius
    return OperatorMatrix(
        matrix=sparse.diags(space.basis[:, sel].sum(axis=1).astype(float)),
        hermitian=True, particle_change=0)


def _expm_operator(gen, hermitian_generator=False):
    if gen.shape[0] <= DENSE_EXPM_CUTOFF:
        mat = dense_expm(gen.toarray() if sparse.issparse(gen) else gen)
    else:
        mat = sparse_expm(sparse.csc_matrix(gen))
    return OperatorMatrix(matrix=mat)


# ---------------------------------------------------------------------------
# Weyl and Bogoliubov transformations
# ---------------------------------------------------------------------------

def weyl(space, rho0, tail_fraction=0.25):
    """W = exp(sqrt(rho0) * cell_volume * sum_x (a_x* - a_x)): displaces the
    zero mode by sqrt(rho0 * volume)."""
    n_expected = rho0 * space.volume
    if n_expected > tail_fraction * space.nmax:
        raise TailBudgetError(
            f"expected particle number {n_expected:g} exceeds "
            f"{tail_fraction:g}*nmax = {tail_fraction * space.nmax:g}")
    alpha = np.sqrt(rho0 * space.cell_volume)
    gen = sparse.csr_matrix((space.dimension, space.dimension))
    for i in range(space.n_sites):
        c = _raw_annihilator(space, i)
        gen = gen + alpha * (c.T - c)
    return _expm_operator(gen)


def mode_annihilator(space, mode):
    """a_hat_p = M^{-1/2} sum_x exp(-i p.x) c_x (canonically normalized)."""
    phases = np.exp(-2j * np.pi * (space.sites @ np.asarray(mode))
                    / space.M_lin)
    out = sparse.csr_matrix((space.dimension, space.dimension), dtype=complex)
    for i in range(space.n_sites):
        out = out + phases[i] * _raw_annihilator(space, i).astype(complex)
    return out / np.sqrt(space.n_sites)


def _negate_mode(space, mode):
    return tuple((-m) % space.M_lin for m in mode)


def bogoliubov(space, eta_hat):
    """T = exp(1/2 sum_p eta_p (a_hat_p* a_hat_{-p}* - a_hat_p a_hat_{-p})).

    ``eta_hat`` maps integer mode tuples to real coefficients and must be
    symmetric under mode negation (self-paired modes contribute squeezing
    of a single mode).
    """
    for mode, val in eta_hat.items():
        neg = _negate_mode(space, mode)
        if neg not in eta_hat or abs(eta_hat[neg] - val) > 1e-14:
            raise ValueError(f"eta_hat asymmetric at mode {mode}")
    gen = sparse.csr_matrix((space.dimension, space.dimension), dtype=complex)
    for mode, val in eta_hat.items():
        if val == 0.0:
            continue
        ap = mode_annihilator(space, mode)
        am = mode_annihilator(space, _negate_mode(space, mode))
        gen = gen + 0.5 * val * (ap.conj().T @ am.conj().T - ap @ am)
    return _expm_operator(gen)


# ---------------------------------------------------------------------------
# Pair-product (Jastrow) multiplication operators
# ---------------------------------------------------------------------------

def jastrow_ops(space, f):
    """Diagonal pair-product operator J and the site factors J(x).

    ``f`` maps a distance (minimum-image, including 0 for same-site
    pairs) to a correlation value in [0, 1].  Returns (J, J_at) where
    J_at(site) is the multiplication operator by prod_j f(x - x_j)^{n_j}.
    """
    dist = space.pair_distances()
    fvals = np.asarray(f(dist), dtype=float)
    if np.any(fvals < 0.0) or np.any(fvals > 1.0):
        raise ValueError("pair correlation values must lie in [0, 1]")
    basis = space.basis
    # split the log-product from hard zeros: a state is annihilated exactly
    # when some pair with f = 0 has a positive pair count
    zero = fvals == 0.0
    logf = np.where(zero, 0.0, np.log(np.where(zero, 1.0, fvals)))
    pair_exp = np.einsum("bi,bj->bij", basis, basis).astype(float)
    iu = np.triu_indices(space.n_sites, k=1)
    onsite = (basis * (basis - 1) / 2.0).astype(float)
    expo = pair_exp[:, iu[0], iu[1]] @ logf[iu] + onsite @ np.diag(logf)
    killed = (pair_exp[:, iu[0], iu[1]] @ zero[iu].astype(float)
              + onsite @ np.diag(zero.astype(float))) > 0
    jvals = np.where(killed, 0.0, np.exp(expo))

    def j_at(site):
        e = basis @ logf[site]
        dead = (basis @ zero[site].astype(float)) > 0
        v = np.where(dead, 0.0, np.exp(e))
        return OperatorMatrix(matrix=sparse.diags(v), hermitian=True,
                              particle_change=0)

    J = OperatorMatrix(matrix=sparse.diags(jvals), hermitian=True,
                       particle_change=0)
    return J, j_at


def one_minus_j_bound_gap(space, f, site):
    """Elementwise gap of 0 <= 1 - J(x) <= sum_j omega(x-x_j) n_j (all three
    operators diagonal, so the matrix inequality is per basis state).
    Returns (min gap lower, min gap upper); both must be >= -1e-13."""
    _, j_at = jastrow_ops(space, f)
    jx = j_at(site).matrix.diagonal()
    dist = space.pair_distances()[site]
    omega = 1.0 - np.asarray(f(dist), dtype=float)
    dominating = space.basis @ omega
    return float(np.min(1.0 - jx)), float(np.min(dominating - (1.0 - jx)))


# ---------------------------------------------------------------------------
# Trial state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyParams:
    """Toy-scale ingredients: condensate density, mode-squeezing amplitudes
    (symmetric under negation), and the pair correlation profile."""

    rho0: float
    eta_hat: dict
    f: object  # callable distance -> value

    def hyperbolic(self, space):
        """(gamma_hat, sigma_hat, nu_hat) per mode as dicts."""
        gamma = {m: np.cosh(v) for m, v in self.eta_hat.items()}
        sigma = {m: np.sinh(v) for m, v in self.eta_hat.items()}
        nu = {m: sigma[m] / gamma[m] for m in sigma}
        return gamma, sigma, nu

    def position_kernel(self, space, coeffs):
        """Periodic kernel on site differences from per-mode coefficients:
        kappa(x-y) = volume^-1 sum_p coeffs_p exp(ip.(x-y))."""
        M = space.n_sites
        out = np.zeros((M, M), dtype=complex)
        for mode, val in coeffs.items():
            phases = np.exp(2j * np.pi * (space.sites @ np.asarray(mode))
                            / space.M_lin)
            out += val * np.outer(phases, phases.conj())
        return out / space.volume


def expected_particles(space, toy):
    sinh_sq = sum(np.sinh(v) ** 2 for v in toy.eta_hat.values())
    return toy.rho0 * space.volume + sinh_sq


def trial_state(space, toy, tail_fraction=0.25):
    """Psi = normalized J W T Omega; hard-core configurations carry zero
    amplitude whenever f vanishes at distance zero."""
    if expected_particles(space, toy) > tail_fraction * space.nmax:
        raise TailBudgetError(
            f"combined Weyl/Bogoliubov budget {expected_particles(space, toy):g} "
            f"exceeds {tail_fraction:g}*nmax")
    W = weyl(space, toy.rho0, tail_fraction)
    T = bogoliubov(space, toy.eta_hat)
    J, _ = jastrow_ops(space, toy.f)
    vec = J.matrix @ (W.matrix @ (T.matrix @ vacuum(space).amplitudes))
    return FockState.from_vector(space, vec)


# ---------------------------------------------------------------------------
# Residuals and observables
# ---------------------------------------------------------------------------

def safe_norm(space, matrix, n_safe):
    """Spectral norm of an operator restricted to total occupancy <= n_safe."""
    mask = space.safe_mask(n_safe)
    dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)
    return float(np.linalg.norm(dense[:, mask], 2))


def shift_residual(space, rho0, site=0, n_safe=None):
    """|| W* a_x W - a_x - sqrt(rho0) || on the safe sub-basis."""
    n_safe = space.nmax // 2 if n_safe is None else n_safe
    W = weyl(space, rho0).dense()
    a = ladder(space, site)[0].matrix.toarray()
    R = W.conj().T @ a @ W - a - np.sqrt(rho0) * np.eye(space.dimension)
    return safe_norm(space, R, n_safe)


def bogoliubov_action_residual(space, eta_hat, n_safe=None):
    """max over modes of || T* a_p T - (cosh eta_p a_p + sinh eta_p a_{-p}*) ||
    on the safe sub-basis."""
    n_safe = space.nmax // 2 if n_safe is None else n_safe
    T = bogoliubov(space, eta_hat).dense()
    worst = 0.0
    for mode, val in eta_hat.items():
        ap = mode_annihilator(space, mode).toarray()
        am_dag = mode_annihilator(space, _negate_mode(space, mode)).toarray().conj().T
        R = T.conj().T @ ap @ T - np.cosh(val) * ap - np.sinh(val) * am_dag
        worst = max(worst, safe_norm(space, R, n_safe))
    return worst


def c_field_residual(space, toy, site=0, n_safe=None):
    """|| T W a_x W* T* - (a(gamma_x) - a*(sigma_x) - sqrt(rho0)) || on the
    safe sub-basis: the dressed annihilator against its hyperbolic form."""
    n_safe = space.nmax // 2 if n_safe is None else n_safe
    W = weyl(space, toy.rho0).dense()
    T = bogoliubov(space, toy.eta_hat).dense()
    a_site = [ladder(space, i)[0].matrix.toarray() for i in range(space.n_sites)]
    gamma, sigma, _ = toy.hyperbolic(space)
    gk = toy.position_kernel(space, gamma)
    sk = toy.position_kernel(space, sigma)
    dim = space.dimension
    a_gamma = np.zeros((dim, dim), dtype=complex)
    a_sigma_dag = np.zeros((dim, dim), dtype=complex)
    cell = space.cell_volume
    for j in range(space.n_sites):
        a_gamma += cell * gk[site, j] * a_site[j]
        a_sigma_dag += cell * sk[site, j] * a_site[j].conj().T
    lhs = T @ W @ a_site[site] @ W.conj().T @ T.conj().T
    rhs = a_gamma - a_sigma_dag - np.sqrt(toy.rho0) * np.eye(dim)
    return safe_norm(space, lhs - rhs, n_safe)


def annihilation_identity_residual(space, toy, site=0):
    """|| a_x Psi - sqrt(rho0) J(x) Psi - J(x) cell*sum_y nu(x-y) a_y* J(y) Psi ||
    for the full trial state."""
    psi = trial_state(space, toy).amplitudes
    _, j_at = jastrow_ops(space, toy.f)
    _, _, nu = toy.hyperbolic(space)
    nuk = toy.position_kernel(space, nu)
    a_site = [ladder(space, i)[0].matrix for i in range(space.n_sites)]
    jx = j_at(site).matrix
    lhs = a_site[site] @ psi
    rhs = np.sqrt(toy.rho0) * (jx @ psi)
    cell = space.cell_volume
    for y in range(space.n_sites):
        rhs = rhs + cell * nuk[site, y] * (jx @ (a_site[y].conj().T
                                                @ (j_at(y).matrix @ psi)))
    return float(np.linalg.norm(lhs - rhs))


def diagonal_identity_residuals(space, f, site=0, other=1):
    """Operator-norm residuals of the exact multiplication identities:
    a_x J = J(x) J a_x and a_y J(x) = f(x-y) J(x) a_y (truncation-free)."""
    J, j_at = jastrow_ops(space, f)
    a_x = ladder(space, site)[0].matrix
    a_y = ladder(space, other)[0].matrix
    jx = j_at(site).matrix
    r1 = a_x @ J.matrix - jx @ J.matrix @ a_x
    fxy = float(np.asarray(f(space.pair_distances()[site, other])))
    r2 = a_y @ jx - fxy * jx @ a_y
    norm = lambda m: float(np.abs(m).max()) if m.nnz else 0.0
    return {"annihilator_through_J": norm(sparse.coo_matrix(r1)),
            "annihilator_through_Jx": norm(sparse.coo_matrix(r2))}


def unitarity_defects(space, toy, n_safe=None):
    n_safe = space.nmax // 2 if n_safe is None else n_safe
    W = weyl(space, toy.rho0).dense()
    T = bogoliubov(space, toy.eta_hat).dense()
    eye = np.eye(space.dimension)
    return {"weyl": safe_norm(space, W.conj().T @ W - eye, n_safe),
            "bogoliubov": safe_norm(space, T.conj().T @ T - eye, n_safe)}


def coherent_statistics(space, rho0):
    """Expected particle number and total-variation distance to the Poisson
    law for the truncated coherent state, with the Poisson tail mass beyond
    the truncation as the error budget."""
    W = weyl(space, rho0)
    state = FockState.from_vector(space, W.matrix @ vacuum(space).amplitudes,
                                  normalize=False)
    n0 = rho0 * space.volume
    tot = space.total_occupation()
    probs = np.abs(state.amplitudes) ** 2
    dist = np.array([probs[tot == n].sum() for n in range(space.nmax + 1)])
    pois = poisson.pmf(np.arange(space.nmax + 1), n0)
    tv = 0.5 * (np.sum(np.abs(dist - pois)) + (1.0 - pois.sum()))
    n_expect = float(tot @ probs)
    tail_mass = float(1.0 - poisson.cdf(space.nmax, n0))
    return {"n_expect": n_expect, "n_target": n0, "tv_distance": float(tv),
            "poisson_tail": tail_mass,
            "norm_defect": abs(float(np.linalg.norm(state.amplitudes)) - 1.0)}


def observables(state, space, toy=None):
    """Expectations in a normalized state: total and kinetic numbers, a
    local-number evaluator, and (with toy parameters) excitation moments
    and the dressed-field residual."""
    psi = state.amplitudes
    n_op = number_operator(space).matrix
    k_op = kinetic_operator(space).matrix
    out = {
        "N_expect": float(np.real(psi.conj() @ (n_op @ psi))),
        "K_expect": float(np.real(psi.conj() @ (k_op @ psi))),
        "local_N": lambda site, radius: float(np.real(
            psi.conj() @ (local_number_operator(space, site, radius).matrix
                          @ psi))),
        "truncation_weight": state.truncation_weight,
    }
    if toy is not None:
        cell = space.cell_volume
        b_moment = 0.0
        for i in range(space.n_sites):
            a_i = ladder(space, i)[0].matrix
            b = a_i @ psi - np.sqrt(toy.rho0) * psi
            b_moment += cell * float(np.real(b.conj() @ b))
        out["b_moments"] = {"total_excitations": b_moment}
        out["c_residuals"] = {"site0": c_field_residual(space, toy)}
    return out


# ---------------------------------------------------------------------------
# Aggregate report (CLI `fock`)
# ---------------------------------------------------------------------------

def default_toy(space, rho0=0.2, eta_scale=0.12, core_sites=0.5):
    """Synthetic short-range toy ingredients on the given torus."""
    eta = {}
    for mode in space.momentum_modes():
        m = np.array(mode)
        m_min = np.minimum(m, space.M_lin - m)  # minimum-image momentum
        k = np.linalg.norm(2.0 * np.pi * m_min / (space.M_lin * space.h))
        eta[mode] = -eta_scale / (1.0 + k**2) if k > 0 else 0.0

    def f(dist):
        d = np.asarray(dist, dtype=float)
        return np.where(d <= core_sites * space.h, 0.0,
                        1.0 - np.exp(-(d / space.h) ** 2))

    return ToyParams(rho0=rho0, eta_hat=eta, f=f)


def identity_report(M_lin=4, dims=1, h=1.0, nmax_sequence=(6, 8, 10),
                    rho0=0.2, n_safe=None, include_timings=False):
    """Residuals of every checked identity across a truncation ladder.

    Transformation residuals are measured on a fixed low-occupancy
    sub-basis (default: half the smallest nmax), so they are directly
    comparable and must decrease along ``nmax_sequence``.
    """
    t0 = time.time()
    n_safe = min(nmax_sequence) // 2 if n_safe is None else n_safe
    rows = []
    for nmax in nmax_sequence:
        space = build_space(M_lin, dims=dims, h=h, nmax=nmax)
        toy = default_toy(space, rho0=rho0)
        psi = trial_state(space, toy)
        diag = diagonal_identity_residuals(space, toy.f)
        gap_lo, gap_hi = one_minus_j_bound_gap(space, toy.f, site=0)
        unit = unitarity_defects(space, toy, n_safe=n_safe)
        rows.append({
            "nmax": nmax,
            "dimension": space.dimension,
            "truncation_weight": psi.truncation_weight,
            "diagonal": diag,
            "one_minus_j_gaps": [gap_lo, gap_hi],
            "shift_residual": shift_residual(space, rho0, n_safe=n_safe),
            "bogoliubov_residual": bogoliubov_action_residual(
                space, toy.eta_hat, n_safe=n_safe),
            "c_field_residual": c_field_residual(space, toy, n_safe=n_safe),
            "annihilation_identity_residual":
                annihilation_identity_residual(space, toy),
            "unitarity": unit,
        })
    coh = coherent_statistics(build_space(M_lin, dims=dims, h=h,
                                          nmax=max(nmax_sequence)), rho0)
    report = {"ladder": rows, "coherent": coh}
    if include_timings:
        report["wall_time_s"] = time.time() - t0
    return report
