"""Shared fixtures: the expensive kernel sweeps are built once per session.

``estimate_points`` carries the 3-decade sweep used by the bound suites;
``acceptance_sweep`` reuses its kernels for the overlapping gas
parameters and adds the deepest point.  Build wall times are recorded so
the acceptance module can check its runtime budgets.
"""

import time
from types import SimpleNamespace

import pytest

from lhylab import energy as energy_mod
from lhylab import estimates as estimates_mod
from lhylab.kernels import PhysicalParams

ESTIMATE_XS = (1e-5, 1e-6, 1e-7, 1e-8)
ACCEPTANCE_XS = (1e-6, 1e-7, 1e-8, 1e-9)
CRITERION_XS = (1e-6, 1e-7, 1e-8)  # the stated second-order sweep

BUILD_SECONDS = {}


@pytest.fixture(scope="session")
def estimate_points():
    t0 = time.time()
    points = estimates_mod.prepare_sweep(ESTIMATE_XS)
    BUILD_SECONDS["estimate_points"] = time.time() - t0
    return points


@pytest.fixture(scope="session")
def acceptance_sweep(estimate_points):
    t0 = time.time()
    by_x = {pt.x: pt for pt in estimate_points}
    base = PhysicalParams(a=1.0, rho=1e-6)
    out = []
    for x in ACCEPTANCE_XS:
        if x in by_x:
            pt = by_x[x]
            eb = energy_mod.energy_breakdown(pt.params, pt.cs)
            row = energy_mod.row_from_breakdown(pt.params, eb)
            out.append(SimpleNamespace(x=x, params=pt.params, cs=pt.cs,
                                       eb=eb, row=row))
        else:
            row, params, cs, eb = energy_mod.sweep_point(x, base,
                                                         with_kernels=True)
            out.append(SimpleNamespace(x=x, params=params, cs=cs, eb=eb,
                                       row=row))
    BUILD_SECONDS["acceptance_sweep"] = time.time() - t0
    return out


@pytest.fixture(scope="session")
def build_seconds():
    return BUILD_SECONDS
