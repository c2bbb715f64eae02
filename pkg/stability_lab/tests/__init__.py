# stability_lab/tests/__init__.py
import numpy as np

from stability_lab.models import SystemId, SystemParams
from stability_lab.numerics import Grid, coupled_from_spec
from stability_lab.systems import catalog_lookup

# every gain 1, as in the catalog acceptance runs
DEFAULT_PARAMS = {
    SystemId.BEAM_BEAM_2008: SystemParams(c1=1.0, c2=1.0, c3=1.0),
    SystemId.BEAM_BEAM_2017: SystemParams(c1=1.0, c2=1.0, c3=1.0),
    SystemId.WAVE_WAVE_2018: SystemParams(c0=1.0, c1=1.0, c2=1.0),
    SystemId.KRSTIC_WAVE: SystemParams(c0=1.0, c1=1.0, c2=1.0, q=1.0),
}


def coupled_system(system: SystemId, n: int = 8, params: SystemParams = None):
    spec = catalog_lookup(system, params or DEFAULT_PARAMS[system])
    return coupled_from_spec(spec, Grid(n))


def unit_states(generator, count: int, seed: int = 11):
    """Random columns with unit gram norm"""
    states = np.random.default_rng(seed).standard_normal((generator.dim, count))
    return states / np.linalg.norm(generator.to_energy(states), axis=0)
