import numpy as np
import pytest

from ioncavity.config import bundled_config
from ioncavity.crystal import central_spacing, linear_chain_seed
from ioncavity.linearized import drift_matrix, normal_modes
from ioncavity.params import MHZ, SystemParams, g0_for_cooperativity, with_power
from ioncavity.sweep import equilibrium_on_branch


def four_ion_params(C=3.0, offset=0.0, kappa_mhz=1.0, **kw):
    """Four-ion system of the bistability study; offset in units of the central spacing."""
    base = SystemParams(n_ions=4, omega_y=MHZ, omega_x=2.12 * MHZ, kappa=kappa_mhz * MHZ, **kw)
    base = base.with_(waist=central_spacing(base))
    g0 = g0_for_cooperativity(base, linear_chain_seed(base), C)
    return base.with_(g0=g0, mode_center_y=offset * central_spacing(base))


class State:
    """Zigzag equilibrium plus its linearised fluctuation problem."""

    def __init__(self, params, power, start):
        self.power = power
        self.params = with_power(params, power)
        self.eq = equilibrium_on_branch(params, power, "zigzag", start_power=start)
        self.modes = normal_modes(self.params, self.eq)
        self.drift = drift_matrix(self.params, self.eq, self.modes)


_SPECTRA_PANELS = {"a": (0.54, 1.5), "b": (0.074, 0.4), "c": (0.62, 1.5), "d": (0.084, 0.4)}


@pytest.fixture(scope="session")
def panel_states():
    """The four operating points of the spectrum figure, built from the bundled config."""
    cfg = bundled_config("fig7")
    return {name: State(cfg.panels[name].params(), *_SPECTRA_PANELS[name]) for name in _SPECTRA_PANELS}


@pytest.fixture(scope="session")
def symmetric_c3(panel_states):
    return panel_states["b"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
