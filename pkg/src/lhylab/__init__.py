"""Numerical laboratory for the dilute hard-sphere Bose gas.

Builds the variational trial-state kernels (short-range pair
correlation, Bogoliubov family, condensate-orthogonal recentering),
evaluates the resulting ground-state energy-density upper bound against
the universal second-order coefficient 128/(15*sqrt(pi)), verifies the
kernel estimate family across density sweeps, and checks the underlying
operator identities exactly on a truncated Fock space.
"""

from .energy import (
    LHY_COEFFICIENT,
    EnergyBreakdown,
    FitResult,
    SweepRow,
    density_sweep,
    dispersion,
    energy_breakdown,
    exponent_fit,
    g_sum_vs_integral,
    lhy_constant,
    lhy_dimensionless_integral,
    lhy_reference,
)
from .errors import LhyLabError
from .estimates import (
    PAIR_KERNEL_MANIFEST,
    BoundReport,
    prepare_sweep,
    run_all_suites,
    run_appendix_fourier_suite,
    run_pair_kernel_suite,
    run_scattering_suite,
    run_sigma_s_comparison,
)
from .fock import FockSpace, FockState, ToyParams, build_space, trial_state
from .kernels import (
    CorrelationSet,
    JastrowPair,
    KernelSettings,
    PhysicalParams,
    bogoliubov_s_hat,
    correlation_set,
    effective_potential_hat,
    grad_f_norm_sq,
    jastrow_pair,
    jastrow_short,
    prepare_params,
    smooth_cutoff,
    solve_rho0,
    z1_check,
)
from .lattice import (
    MomentumLattice,
    RadialGrid,
    RadialProfile,
    convolve,
    discrete_derivative,
    lattice_sum,
    momentum_lattice,
    radial_transform,
)

__version__ = "0.1.0"
