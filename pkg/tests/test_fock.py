"""Truncated Fock-space checks: ladder algebra, coherent displacement,
mode squeezing against the two-mode closed form, pair-product operator
identities (exact), the trial-state annihilation identity, and the
observable record."""

import numpy as np
import pytest

from lhylab import fock as F
from lhylab.errors import BasisCapError, TailBudgetError


@pytest.mark.parametrize("M_lin,dims,nmax,expected", [
    (1, 1, 3, 4),       # single-mode ladder
    (2, 1, 2, 6),       # stars and bars
    (2, 3, 4, 495),     # C(12, 4)
])
def test_basis_dimensions(M_lin, dims, nmax, expected):
    assert F.build_space(M_lin, dims=dims, nmax=nmax).dimension == expected


def test_basis_lexicographic_and_unique():
    sp = F.build_space(3, nmax=2)
    rows = [tuple(r) for r in sp.basis]
    assert rows == sorted(rows)
    assert len(set(rows)) == len(rows)


def test_basis_cap_enforced():
    with pytest.raises(BasisCapError):
        F.build_space(4, dims=3, nmax=8, basis_cap=10_000)


def test_single_mode_ladder_matrix_elements():
    h = 0.5
    sp = F.build_space(1, nmax=4, h=h)
    a, adag = F.ladder(sp, 0)
    for n in range(4):
        state = np.zeros(sp.dimension)
        state[sp.index[(n,)]] = 1.0
        raised = adag.matrix @ state
        assert raised[sp.index[(n + 1,)]] == pytest.approx(
            np.sqrt(n + 1) / np.sqrt(h))
    assert a.validate(sp) and adag.validate(sp)


def test_commutator_exact_below_cutoff():
    sp = F.build_space(3, nmax=5, h=2.0)
    a0 = F.ladder(sp, 0)[0].matrix
    a1dag = F.ladder(sp, 1)[1].matrix
    a0dag = F.ladder(sp, 0)[1].matrix
    mask = sp.safe_mask(sp.nmax - 1)
    same = (a0 @ a0dag - a0dag @ a0).toarray()
    cross = (a0 @ a1dag - a1dag @ a0).toarray()
    eye = np.eye(sp.dimension) / sp.cell_volume
    assert np.abs((same - eye)[:, mask]).max() < 1e-13
    assert np.abs(cross[:, mask]).max() < 1e-13


def test_vacuum_annihilated():
    sp = F.build_space(3, nmax=4)
    vac = F.vacuum(sp)
    for i in range(sp.n_sites):
        assert np.linalg.norm(F.ladder(sp, i)[0].matrix @ vac.amplitudes) == 0.0


def test_number_operator_spectrum():
    sp = F.build_space(2, nmax=6)
    vals = np.unique(F.number_operator(sp).matrix.diagonal())
    assert np.array_equal(vals, np.arange(7.0))


# ---------------------------------------------------------------------------
# Weyl operator
# ---------------------------------------------------------------------------

def test_weyl_zero_density_is_identity():
    sp = F.build_space(3, nmax=4)
    W = F.weyl(sp, 0.0).dense()
    assert np.abs(W - np.eye(sp.dimension)).max() < 1e-14


def test_weyl_tail_budget():
    sp = F.build_space(2, nmax=4)
    with pytest.raises(TailBudgetError):
        F.weyl(sp, 10.0)


def test_coherent_state_statistics():
    sp = F.build_space(4, nmax=12)
    stats = F.coherent_statistics(sp, rho0=0.3)
    n0 = 0.3 * sp.volume
    assert stats["n_target"] == pytest.approx(n0)
    # expected number within the Poisson tail budget, distribution in total
    # variation within a small multiple of the tail mass
    assert abs(stats["n_expect"] - n0) <= 20 * sp.nmax * stats["poisson_tail"]
    assert stats["tv_distance"] <= 10 * stats["poisson_tail"] + 1e-12
    assert stats["norm_defect"] < 1e-12


def test_weyl_unitary_on_truncated_space():
    sp = F.build_space(3, nmax=6)
    W = F.weyl(sp, 0.2).dense()
    assert np.abs(W.conj().T @ W - np.eye(sp.dimension)).max() < 1e-12


# ---------------------------------------------------------------------------
# Bogoliubov transformation
# ---------------------------------------------------------------------------

def test_bogoliubov_identity_at_zero_squeezing():
    sp = F.build_space(3, nmax=4)
    eta = {m: 0.0 for m in sp.momentum_modes()}
    T = F.bogoliubov(sp, eta).dense()
    assert np.abs(T - np.eye(sp.dimension)).max() < 1e-14


def test_bogoliubov_rejects_asymmetric_amplitudes():
    sp = F.build_space(4, nmax=4)
    eta = {m: 0.0 for m in sp.momentum_modes()}
    eta[(1,)] = 0.1  # negation (3,) stays zero
    with pytest.raises(ValueError):
        F.bogoliubov(sp, eta)


def test_two_mode_squeezed_occupation():
    # exact closed form: <T Omega, n_p T Omega> = sinh^2(eta_p)
    sp = F.build_space(4, nmax=12)
    eta_val = 0.1
    eta = {m: 0.0 for m in sp.momentum_modes()}
    eta[(1,)] = eta_val
    eta[(3,)] = eta_val
    T = F.bogoliubov(sp, eta)
    state = T.matrix @ F.vacuum(sp).amplitudes
    ap = F.mode_annihilator(sp, (1,))
    occ = np.real(np.vdot(ap @ state, ap @ state))
    assert occ == pytest.approx(np.sinh(eta_val) ** 2, rel=1e-8)


def test_bogoliubov_hyperbolic_coefficients_extracted():
    # read gamma and sigma off matrix elements of T* a_p T on low states:
    # sigma from the vacuum column, gamma from the single-excitation column
    sp = F.build_space(4, nmax=10)
    toy = F.default_toy(sp)
    T = F.bogoliubov(sp, toy.eta_hat).dense()
    mode = (1,)
    ap = F.mode_annihilator(sp, mode).toarray()
    am_dag = F.mode_annihilator(sp, (3,)).toarray().conj().T
    action = T.conj().T @ ap @ T
    vac = F.vacuum(sp).amplitudes
    one_p = ap.conj().T @ vac
    one_minus_p = am_dag @ vac
    coef_sigma = np.real(np.vdot(one_minus_p, action @ vac))
    coef_gamma = np.real(np.vdot(vac, action @ one_p))
    eta_val = toy.eta_hat[mode]
    assert coef_gamma == pytest.approx(np.cosh(eta_val), rel=1e-6)
    assert coef_sigma == pytest.approx(np.sinh(eta_val), rel=1e-6)
    assert coef_gamma**2 - coef_sigma**2 == pytest.approx(1.0, abs=1e-6)


def test_bogoliubov_residual_decreases_with_truncation():
    vals = []
    for nmax in (6, 8, 10):
        sp = F.build_space(4, nmax=nmax)
        toy = F.default_toy(sp)
        vals.append(F.bogoliubov_action_residual(sp, toy.eta_hat, n_safe=3))
    assert vals[0] > vals[1] > vals[2]


# ---------------------------------------------------------------------------
# Pair-product operators
# ---------------------------------------------------------------------------

def test_jastrow_identity_for_trivial_profile():
    sp = F.build_space(3, nmax=4)
    J, j_at = F.jastrow_ops(sp, lambda d: np.ones_like(np.asarray(d, float)))
    assert np.abs(J.matrix.diagonal() - 1.0).max() == 0.0
    assert np.abs(j_at(1).matrix.diagonal() - 1.0).max() == 0.0


def test_jastrow_two_site_pair_value():
    sp = F.build_space(2, nmax=3, h=1.0)
    fval = 0.37

    def f(d):
        d = np.asarray(d, dtype=float)
        return np.where(d == 0.0, 1.0, fval)

    J, _ = F.jastrow_ops(sp, f)
    state_index = sp.index[(1, 1)]
    assert J.matrix.diagonal()[state_index] == pytest.approx(fval)


def test_jastrow_rejects_out_of_range_values():
    sp = F.build_space(2, nmax=2)
    with pytest.raises(ValueError):
        F.jastrow_ops(sp, lambda d: 1.0 + np.asarray(d, float))


def test_diagonal_identities_exact():
    sp = F.build_space(4, nmax=10)
    toy = F.default_toy(sp)
    res = F.diagonal_identity_residuals(sp, toy.f)
    assert res["annihilator_through_J"] <= 1e-13
    assert res["annihilator_through_Jx"] <= 1e-13


def test_one_minus_j_domination():
    sp = F.build_space(4, nmax=10)
    toy = F.default_toy(sp)
    gap_lo, gap_hi = F.one_minus_j_bound_gap(sp, toy.f, site=0)
    assert gap_lo >= -1e-13
    assert gap_hi >= -1e-13


# ---------------------------------------------------------------------------
# Trial state
# ---------------------------------------------------------------------------

def test_trial_state_hard_core_amplitudes_vanish():
    sp = F.build_space(4, nmax=8)
    toy = F.default_toy(sp)  # f(0) = 0: on-site pairs forbidden
    psi = F.trial_state(sp, toy)
    doubly = sp.basis.max(axis=1) >= 2
    assert np.abs(psi.amplitudes[doubly]).max() <= 1e-14


def test_trial_state_reduces_to_coherent_state():
    sp = F.build_space(3, nmax=9)
    rho0 = 0.25
    toy = F.ToyParams(rho0=rho0,
                      eta_hat={m: 0.0 for m in sp.momentum_modes()},
                      f=lambda d: np.ones_like(np.asarray(d, float)))
    psi = F.trial_state(sp, toy)
    coherent = F.weyl(sp, rho0).matrix @ F.vacuum(sp).amplitudes
    coherent /= np.linalg.norm(coherent)
    overlap = abs(np.vdot(psi.amplitudes, coherent))
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_trial_state_tail_budget():
    sp = F.build_space(2, nmax=4)
    toy = F.ToyParams(rho0=3.0, eta_hat={m: 0.0 for m in sp.momentum_modes()},
                      f=lambda d: np.ones_like(np.asarray(d, float)))
    with pytest.raises(TailBudgetError):
        F.trial_state(sp, toy)


def test_annihilation_identity_residual_decreases():
    vals = []
    for nmax in (6, 8, 10):
        sp = F.build_space(4, nmax=nmax)
        toy = F.default_toy(sp)
        vals.append(F.annihilation_identity_residual(sp, toy))
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-9


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def test_vacuum_observables():
    sp = F.build_space(3, nmax=4)
    obs = F.observables(F.vacuum(sp), sp)
    assert obs["N_expect"] == 0.0
    assert obs["K_expect"] == 0.0
    assert obs["local_N"](0, 10.0) == 0.0


def test_coherent_local_number_covers_torus():
    sp = F.build_space(4, nmax=12)
    rho0 = 0.25
    W = F.weyl(sp, rho0)
    state = F.FockState.from_vector(sp, W.matrix @ F.vacuum(sp).amplitudes)
    obs = F.observables(state, sp)
    whole = obs["local_N"](0, sp.M_lin * sp.h)  # radius covering every site
    assert whole == pytest.approx(obs["N_expect"], rel=1e-12)
    assert abs(whole - rho0 * sp.volume) <= 1e-3  # Poisson tail budget
    # local numbers are monotone in the radius
    assert obs["local_N"](0, 0.5 * sp.h) <= obs["local_N"](0, 1.5 * sp.h) + 1e-15


def test_trial_state_particle_number_prediction():
    # without the pair-product dressing <N> equals rho0*volume + sum sinh^2
    # exactly; the truncation defect shrinks with nmax
    trivial = lambda d: np.ones_like(np.asarray(d, float))
    devs = []
    for nmax in (6, 8, 10):
        sp = F.build_space(4, nmax=nmax)
        toy = F.ToyParams(rho0=0.2, eta_hat=F.default_toy(sp).eta_hat,
                          f=trivial)
        obs = F.observables(F.trial_state(sp, toy), sp)
        devs.append(abs(obs["N_expect"] - F.expected_particles(sp, toy)))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-5
    # the dressed state deviates by an order-one toy-scale amount; the value
    # itself settles as the truncation grows
    dressed = []
    for nmax in (6, 8, 10):
        sp = F.build_space(4, nmax=nmax)
        toy = F.default_toy(sp)
        obs = F.observables(F.trial_state(sp, toy), sp)
        dressed.append(obs["N_expect"])
    assert abs(dressed[2] - dressed[1]) < abs(dressed[1] - dressed[0])
    assert abs(dressed[2] - F.expected_particles(sp, toy)) < 0.5


def test_c_field_residual_decreases():
    vals = []
    for nmax in (6, 8, 10):
        sp = F.build_space(4, nmax=nmax)
        toy = F.default_toy(sp)
        vals.append(F.c_field_residual(sp, toy, n_safe=3))
    assert vals[0] > vals[1] > vals[2]


def test_three_dimensional_space_observables():
    sp = F.build_space(2, dims=3, nmax=4)
    toy = F.default_toy(sp, rho0=0.1)
    psi = F.trial_state(sp, toy)
    obs = F.observables(psi, sp, toy=toy)
    assert np.isfinite(obs["N_expect"]) and obs["N_expect"] >= 0.0
    assert np.isfinite(obs["K_expect"]) and obs["K_expect"] >= -1e-12
    assert obs["local_N"](0, 2.0 * sp.h) == pytest.approx(obs["N_expect"],
                                                          rel=1e-10)
    assert obs["b_moments"]["total_excitations"] >= -1e-12
    assert np.isfinite(obs["c_residuals"]["site0"])


def test_operator_matrix_validation_catches_wrong_declaration():
    sp = F.build_space(2, nmax=3)
    a = F.ladder(sp, 0)[0]
    wrong = F.OperatorMatrix(matrix=a.matrix, particle_change=+1)
    assert not wrong.validate(sp)
