import math

import numpy as np
import pytest

from eprnet import (
    build_cost,
    build_measurement_map,
    build_plant,
    build_uncontrolled_subsystems,
    synthesize,
)
from eprnet.quadnet import NetworkParams


def make_ideal_params() -> NetworkParams:
    kappa = 1.8e7
    kappa1 = 1.8e8
    return NetworkParams(
        kappa=kappa,
        gamma=1.5 * kappa,
        kappa1=kappa1,
        epsilon=math.sqrt(kappa * kappa1),
        chi=0.0,
        alpha=1.0,
        T=0.0,
        Tm=0.0,
        rho=1.0e7,
    )


@pytest.fixture(scope="session")
def ideal_params() -> NetworkParams:
    return make_ideal_params()


@pytest.fixture(scope="session")
def ideal_controller(ideal_params):
    plant = build_plant(ideal_params, with_control_inputs=True)
    meas = build_measurement_map(ideal_params)
    return synthesize(plant, meas, build_cost(ideal_params))


@pytest.fixture(scope="session")
def ideal_subsystems(ideal_params):
    return build_uncontrolled_subsystems(ideal_params)


def row_power(sys, omega: float) -> float:
    """Squared Frobenius norm of a single-output transfer row at omega."""
    from eprnet.spectra import freq_response

    row = freq_response(sys, omega)[0]
    return float(np.vdot(row, row).real)
