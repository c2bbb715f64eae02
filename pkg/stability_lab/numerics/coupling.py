# stability_lab/numerics/coupling.py - Block-triangular coupled generator
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple, Dict

import numpy as np
from scipy import linalg

from ..exceptions import DimensionMismatch, UnsupportedSpaceKind
from ..models import (
    CoupledSystemSpec, SpaceKind, SpaceSpec, InjectionKind, InjectionDescriptor,
    ObservationKind, ObservationTerm, Component
)
from .discretize import (
    Grid, DiscreteGenerator, BoundaryInjection, BoundaryObservation, EnergyGenerator,
    build_generator, build_injection, build_observation, free_nodes
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class CoupledGenerator(EnergyGenerator):
    """[[A1, B C], [0, A2]] with block-diagonal Gram"""
    a1: DiscreteGenerator
    a2: DiscreteGenerator
    b: BoundaryInjection
    c: BoundaryObservation
    matrix: np.ndarray
    gram: np.ndarray
    spec: Optional[CoupledSystemSpec] = None
    grid: Optional[Grid] = None

    @cached_property
    def factor(self) -> np.ndarray:
        return linalg.block_diag(self.a1.factor, self.a2.factor)

    @property
    def label(self) -> str:
        return self.spec.system.value if self.spec else 'coupled'

    @property
    def coupling_block(self) -> np.ndarray:
        return self.matrix[:self.a1.dim, self.a1.dim:]

    @property
    def lower_block(self) -> np.ndarray:
        return self.matrix[self.a1.dim:, :self.a1.dim]

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[:self.a1.dim], x[self.a1.dim:]


def assemble_coupled(a1: DiscreteGenerator, a2: DiscreteGenerator,
                     b: BoundaryInjection, c: BoundaryObservation) -> CoupledGenerator:
    if b.columns.shape[0] != a1.dim:
        raise DimensionMismatch('injection/first block', a1.dim, b.columns.shape[0])
    if c.rows.shape[1] != a2.dim:
        raise DimensionMismatch('observation/second block', a2.dim, c.rows.shape[1])
    if b.k != c.k:
        raise DimensionMismatch('injection/observation channels', b.k, c.k)

    matrix = np.block([
        [a1.matrix, b.columns @ c.rows],
        [np.zeros((a2.dim, a1.dim)), a2.matrix],
    ])
    gram = linalg.block_diag(a1.gram, a2.gram)
    return CoupledGenerator(a1=a1, a2=a2, b=b, c=c, matrix=matrix, gram=gram)


def coupled_from_spec(spec: CoupledSystemSpec, grid: Grid) -> CoupledGenerator:
    a1 = build_generator(spec.space1, grid)
    a2 = build_generator(spec.space2, grid)
    coupled = assemble_coupled(a1, a2, build_injection(spec, grid), build_observation(spec, grid))
    coupled.spec = spec
    coupled.grid = grid
    logger.info(
        f"Coupled {spec.system.value} at n={grid.n}: dim={coupled.dim} "
        f"({a1.dim} + {a2.dim}), channels={spec.coupling_channels}"
    )
    return coupled


# --- direct route: ghost-point stencils on full node arrays -------------------

def _input_slot(kind: SpaceKind, descriptor: InjectionDescriptor) -> str:
    if descriptor.kind is InjectionKind.PROFILE:
        return 'forcing'
    if descriptor.kind is InjectionKind.DELTA and kind is SpaceKind.BEAM_CLAMPED_FREE and descriptor.location == 1.0:
        return 'shear_right'
    if descriptor.kind is InjectionKind.DELTA and kind is SpaceKind.WAVE_ROBIN:
        return 'flux_left' if descriptor.location == 0.0 else 'flux_right'
    if descriptor.kind is InjectionKind.DELTA_PRIME and kind is SpaceKind.BEAM_FREE_TIP and descriptor.location == 0.0:
        return 'moment_left'
    raise UnsupportedSpaceKind(
        f"No boundary slot for {descriptor.describe()} on {kind.value}",
        {'kind': kind.value, 'injection': descriptor.kind.value}
    )


def _trace(term: ObservationTerm, grid: Grid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Evaluate one observation term on full node arrays (nodes x batch)"""
    values = f if term.component is Component.DISPLACEMENT else g
    h, n = grid.h, grid.n
    left = term.location == 0.0

    if term.kind is ObservationKind.POINT_VALUE:
        trace = values[grid.node_index(term.location)]
    elif term.kind is ObservationKind.FIRST_DERIVATIVE:
        trace = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * h) if left else \
            (3 * values[n] - 4 * values[n - 1] + values[n - 2]) / (2 * h)
    elif term.kind is ObservationKind.SECOND_DERIVATIVE:
        trace = (2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]) / h**2 if left else \
            (2 * values[n] - 5 * values[n - 1] + 4 * values[n - 2] - values[n - 3]) / h**2
    else:
        raise UnsupportedSpaceKind(f"Unsupported observation term {term.kind}")
    return term.gain * trace


def _wave_rhs(space: SpaceSpec, grid: Grid, f, g, inputs: Dict[str, np.ndarray]) -> np.ndarray:
    h, n = grid.h, grid.n
    zero = np.zeros(f.shape[1:])

    if space.kind is SpaceKind.WAVE_ROBIN:
        # f'(0) = c2 g(0) + u,  f'(1) = -c1 f(1) + u
        flux_left = space.gain('c2') * g[0] + inputs.get('flux_left', zero)
        flux_right = -space.gain('c1') * f[n] + inputs.get('flux_right', zero)
        ghost_left = f[1] - 2 * h * flux_left
    else:
        # f(0) = 0,  f'(1) = -c0 g(1)
        flux_right = -space.gain('c0') * g[n] + inputs.get('flux_right', zero)
        ghost_left = zero
    ghost_right = f[n - 1] + 2 * h * flux_right

    padded = np.concatenate([ghost_left[None], f, ghost_right[None]])
    acceleration = (padded[2:] - 2 * padded[1:-1] + padded[:-2]) / h**2
    return acceleration + inputs.get('forcing', 0.0)


def _beam_rhs(space: SpaceSpec, grid: Grid, f, g, inputs: Dict[str, np.ndarray]) -> np.ndarray:
    h, n = grid.h, grid.n
    zero = np.zeros(f.shape[1:])
    moments = np.zeros((n + 2,) + f.shape[1:])  # M_0 .. M_{n+1}

    interior = slice(1, n)
    moments[interior] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    if space.kind is SpaceKind.BEAM_CLAMPED_FREE:
        # f'(0) = 0 via ghost f_{-1} = f_1;  f''(1) = 0, f'''(1) = c1 g(1) + u
        moments[0] = (2 * f[1] - 2 * f[0]) / h**2
        shear = space.gain('c1') * g[n] + inputs.get('shear_right', zero)
    else:
        # f''(0) = c2 g'(0) + c3 f'(0) + u;  f''(1) = f'''(1) = 0
        moments[0] = (space.gain('c2') * (g[1] - g[0]) / h
                      + space.gain('c3') * (f[1] - f[0]) / h
                      + inputs.get('moment_left', zero))
        shear = zero
    moments[n] = 0.0
    moments[n + 1] = moments[n - 1] + 2 * h * shear

    acceleration = np.zeros_like(f)
    acceleration[1:] = -(moments[2:] - 2 * moments[1:-1] + moments[:-2]) / h**2
    return acceleration + inputs.get('forcing', 0.0)


def _subsystem_rhs(space: SpaceSpec, grid: Grid, f, g, inputs) -> np.ndarray:
    if space.kind.is_beam:
        return _beam_rhs(space, grid, f, g, inputs)
    return _wave_rhs(space, grid, f, g, inputs)


def direct_coupled_matrix(spec: CoupledSystemSpec, grid: Grid) -> np.ndarray:
    """
    Coupled right-hand side discretized directly, without the B*C factorization.

    The coupling trace of subsystem 2 is substituted into subsystem 1's boundary
    condition (or forcing) and the whole stencil is applied to unit states.
    """
    nodes1 = free_nodes(spec.space1.kind, grid)
    nodes2 = free_nodes(spec.space2.kind, grid)
    m1, m2 = len(nodes1), len(nodes2)
    dim = 2 * (m1 + m2)
    basis = np.eye(dim)

    def full(nodes, block):
        values = np.zeros((grid.n + 1, dim))
        values[nodes] = block
        return values

    f1 = full(nodes1, basis[:m1])
    g1 = full(nodes1, basis[m1:2 * m1])
    f2 = full(nodes2, basis[2 * m1:2 * m1 + m2])
    g2 = full(nodes2, basis[2 * m1 + m2:])

    inputs: Dict[str, np.ndarray] = {}
    for descriptor, observation in zip(spec.injection, spec.observation):
        u = sum(_trace(term, grid, f2, g2) for term in observation.terms)
        slot = _input_slot(spec.space1.kind, descriptor)
        if slot == 'forcing':
            profile = descriptor.amplitude * np.exp(descriptor.rate * (1.0 - grid.nodes))
            u = profile[:, None] * u[None, :]
        inputs[slot] = inputs.get(slot, 0.0) + u

    acceleration1 = _subsystem_rhs(spec.space1, grid, f1, g1, inputs)
    acceleration2 = _subsystem_rhs(spec.space2, grid, f2, g2, {})

    return np.vstack([
        g1[nodes1], acceleration1[nodes1],
        g2[nodes2], acceleration2[nodes2],
    ])
