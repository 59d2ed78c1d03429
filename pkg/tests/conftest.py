import numpy as np
import pytest

from wkbflow.hamiltonian import HamiltonianSpec, require_positive


def capillary_hamiltonian(c_s=1.0, rho_ref=1.0, sigma=0.05):
    """Isothermal energy plus a gradient (Korteweg-type) term sigma/2 |grad rho|^2."""
    c2 = c_s ** 2

    def H(p, rho, g):
        require_positive(rho)
        return (np.sum(p * p, axis=0) / (2 * rho) + c2 * rho * np.log(rho / rho_ref)
                + 0.5 * sigma * np.sum(g * g, axis=0))

    def d_p(p, rho, g):
        return p / rho

    def d_rho(p, rho, g):
        return -np.sum(p * p, axis=0) / (2 * rho ** 2) + c2 * (np.log(rho / rho_ref) + 1)

    def d_g(p, rho, g):
        return sigma * np.asarray(g, dtype=float)

    return HamiltonianSpec(H, d_p, d_rho, d_g, wave_speed=c_s + 2.0, name="capillary")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def capillary():
    return capillary_hamiltonian()
