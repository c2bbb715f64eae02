# stability_lab/numerics/discretize.py - Grids, energy spaces and boundary operators
"""
Finite-difference surrogates of the beam and wave subsystems.

States are stacked as (f at free nodes, g at free nodes). Essential conditions
(f(0)=0, f'(0)=0) are eliminated from the state; natural conditions (moments,
shears, Robin and damping fluxes) are closed against the discrete energy, which
coincides with ghost-point elimination of those conditions. Every generator
therefore satisfies G A = [[0, K], [-K, -R]] with R >= 0.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Optional, Dict

import numpy as np
from scipy import linalg

from ..exceptions import (
    GridTooCoarse, UnsupportedSpaceKind, GramNotPositiveDefinite, NonFiniteInput,
    DimensionMismatch, ParameterError
)
from ..models import (
    SpaceKind, SpaceSpec, CoupledSystemSpec, InjectionKind, InjectionDescriptor,
    ObservationKind, ObservationTerm, Component
)

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 4

# Order of accuracy of the one-sided boundary stencils
STENCIL_ORDER = {
    ObservationKind.FIRST_DERIVATIVE: 2,
    ObservationKind.SECOND_DERIVATIVE: 2,
}

# gain name, functional the feedback acts through
DAMPING = {
    SpaceKind.BEAM_CLAMPED_FREE: ('c1', 'f(1)'),
    SpaceKind.BEAM_FREE_TIP: ('c2', "f'(0)"),
    SpaceKind.WAVE_ROBIN: ('c2', 'f(0)'),
    SpaceKind.WAVE_DIRICHLET_LEFT: ('c0', 'f(1)'),
}

REQUIRED_GAINS = {
    SpaceKind.BEAM_CLAMPED_FREE: ('c1',),
    SpaceKind.BEAM_FREE_TIP: ('c2', 'c3'),
    SpaceKind.WAVE_ROBIN: ('c1', 'c2'),
    SpaceKind.WAVE_DIRICHLET_LEFT: ('c0',),
}


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = j*h, j = 0..n, on [0, 1]"""
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_RESOLUTION:
            raise GridTooCoarse(
                f"Grid needs n >= {MIN_RESOLUTION}, got {self.n}",
                {'n': self.n, 'min_n': MIN_RESOLUTION}
            )
        object.__setattr__(self, 'n', int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def node_index(self, x0: float) -> int:
        j = int(round(x0 * self.n))
        if not 0 <= j <= self.n or abs(j / self.n - x0) > 1e-12:
            raise ParameterError(f"x={x0} is not a node of the n={self.n} grid", {'x': x0, 'n': self.n})
        return j


def free_nodes(kind: SpaceKind, grid: Grid) -> np.ndarray:
    """Indices of the nodes kept in the state after eliminating f(0)=0"""
    if kind is SpaceKind.WAVE_ROBIN:
        return np.arange(0, grid.n + 1)
    if kind in (SpaceKind.WAVE_DIRICHLET_LEFT, SpaceKind.BEAM_CLAMPED_FREE, SpaceKind.BEAM_FREE_TIP):
        return np.arange(1, grid.n + 1)
    raise UnsupportedSpaceKind(f"Unsupported space kind {kind}", {'kind': str(kind)})


def expand_nodes(kind: SpaceKind, grid: Grid, values: np.ndarray) -> np.ndarray:
    """Scatter free-node values (first axis) onto all n+1 nodes; constrained nodes are zero"""
    values = np.asarray(values)
    nodes = free_nodes(kind, grid)
    if values.shape[0] != len(nodes):
        raise DimensionMismatch('node values/free nodes', len(nodes), values.shape[0])
    full = np.zeros((grid.n + 1,) + values.shape[1:], dtype=values.dtype)
    full[nodes] = values
    return full


def trapezoid_weights(grid: Grid) -> np.ndarray:
    weights = np.full(grid.n + 1, grid.h)
    weights[0] = weights[-1] = grid.h / 2
    return weights


def functional_vector(grid: Grid, functional: str) -> np.ndarray:
    """Full-node row vector of a boundary functional such as f(1) or f'(0)"""
    n, h = grid.n, grid.h
    vector = np.zeros(n + 1)
    if functional == 'f(0)':
        vector[0] = 1.0
    elif functional == 'f(1)':
        vector[n] = 1.0
    elif functional == "f'(0)":
        vector[0], vector[1] = -1.0 / h, 1.0 / h
    elif functional == "f'(1)":
        vector[n - 1], vector[n] = -1.0 / h, 1.0 / h
    else:
        raise ParameterError(f"Unknown boundary functional {functional}", {'functional': functional})
    return vector


def boundary_stencil(grid: Grid, kind: ObservationKind, x0: float) -> np.ndarray:
    """Full-node one-sided stencil evaluating f, f' or f'' at a node"""
    n, h = grid.n, grid.h
    j = grid.node_index(x0)
    stencil = np.zeros(n + 1)

    if kind is ObservationKind.POINT_VALUE:
        stencil[j] = 1.0
    elif kind is ObservationKind.FIRST_DERIVATIVE and j == 0:
        stencil[:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    elif kind is ObservationKind.FIRST_DERIVATIVE and j == n:
        stencil[-3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    elif kind is ObservationKind.SECOND_DERIVATIVE and j == 0:
        stencil[:4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
    elif kind is ObservationKind.SECOND_DERIVATIVE and j == n:
        stencil[-4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
    else:
        raise UnsupportedSpaceKind(
            f"No boundary stencil for {kind.value} at x={x0}",
            {'kind': kind.value, 'x': x0}
        )
    return stencil


def validate_space(space: SpaceSpec):
    if space.kind not in REQUIRED_GAINS:
        raise UnsupportedSpaceKind(f"Unsupported space kind {space.kind}", {'kind': str(space.kind)})
    gains = dict(space.gains)
    for name in REQUIRED_GAINS[space.kind]:
        value = gains.get(name)
        if value is None or not np.isfinite(value) or value <= 0:
            raise ParameterError(
                f"{space.kind.value} needs {name} > 0",
                {'kind': space.kind.value, 'violations': [f"{name} must be > 0"]}
            )
    for functional, coefficient in space.boundary_weights:
        if not coefficient > 0:
            raise ParameterError(
                f"Boundary weight on {functional} must be > 0",
                {'kind': space.kind.value, 'functional': functional}
            )


def _moment_operator(kind: SpaceKind, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rows of the discrete energy integrand and their quadrature weights.

    Waves: cell slopes (f_{j+1}-f_j)/h. Clamped beam: bending moments M_0..M_{n-1}
    with the ghost f_{-1} = f_1 folded into M_0 (half weight). Hinged beam:
    interior moments M_1..M_{n-1}; M_0 and M_n are fixed by the natural conditions.
    """
    n, h = grid.n, grid.h

    if kind in (SpaceKind.WAVE_ROBIN, SpaceKind.WAVE_DIRICHLET_LEFT):
        rows = np.zeros((n, n + 1))
        cells = np.arange(n)
        rows[cells, cells] = -1.0 / h
        rows[cells, cells + 1] = 1.0 / h
        return rows, np.full(n, h)

    first = 0 if kind is SpaceKind.BEAM_CLAMPED_FREE else 1
    rows = np.zeros((n - first, n + 1))
    for r, j in enumerate(range(first, n)):
        if j == 0:
            rows[r, 0] = -2.0 / h**2
            rows[r, 1] = 2.0 / h**2
        else:
            rows[r, j - 1:j + 2] = np.array([1.0, -2.0, 1.0]) / h**2
    weights = np.full(n - first, h)
    if first == 0:
        weights[0] = h / 2
    return rows, weights


@dataclass
class EnergyBlocks:
    """Second-order form M f'' + R f' + K f = 0 of one subsystem on its free nodes"""
    stiffness: np.ndarray
    mass: np.ndarray
    damping: np.ndarray
    nodes: np.ndarray


def energy_blocks(space: SpaceSpec, grid: Grid) -> EnergyBlocks:
    validate_space(space)
    nodes = free_nodes(space.kind, grid)

    rows, weights = _moment_operator(space.kind, grid)
    rows = rows[:, nodes]
    stiffness = rows.T @ (weights[:, None] * rows)
    for functional, coefficient in space.boundary_weights:
        vector = functional_vector(grid, functional)[nodes]
        stiffness += coefficient * np.outer(vector, vector)
    stiffness = 0.5 * (stiffness + stiffness.T)

    gain_name, functional = DAMPING[space.kind]
    vector = functional_vector(grid, functional)[nodes]
    damping = space.gain(gain_name) * np.outer(vector, vector)

    mass = trapezoid_weights(grid)[nodes]
    return EnergyBlocks(stiffness=stiffness, mass=mass, damping=damping, nodes=nodes)


def cholesky_factor(gram: np.ndarray) -> np.ndarray:
    """Lower factor L of gram = L L^T"""
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionMismatch('gram rows/columns', gram.shape[0], gram.shape[-1])
    if not np.all(np.isfinite(gram)):
        raise NonFiniteInput("Gram matrix has non-finite entries")
    scale = max(np.max(np.abs(gram)), 1.0)
    asymmetry = np.max(np.abs(gram - gram.T))
    if asymmetry > 1e-12 * scale:
        raise GramNotPositiveDefinite(
            f"Gram matrix is not symmetric (asymmetry {asymmetry:.3e})",
            {'asymmetry': float(asymmetry)}
        )
    try:
        return linalg.cholesky(gram, lower=True)
    except linalg.LinAlgError as e:
        raise GramNotPositiveDefinite(f"Gram matrix is not positive definite: {e}")


def _as_square(matrix, name: str) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f'{name} rows/columns', matrix.shape[0], matrix.shape[-1])
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    return matrix


class EnergyGenerator:
    """
    Energy-coordinate view shared by subsystem and coupled generators.

    With gram = L L^T the balanced matrix L^T A L^{-T} acts on z = L^T x, where the
    gram norm is Euclidean. Exponentials, solves, spectra and Gramians all use it.
    """
    matrix: np.ndarray
    gram: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def factor(self) -> np.ndarray:
        return cholesky_factor(self.gram)

    @cached_property
    def balanced(self) -> np.ndarray:
        factor = self.factor
        right = linalg.solve_triangular(factor, self.matrix.T, lower=True).T
        return factor.T @ right

    @cached_property
    def norm_bound(self) -> float:
        """Spectral norm of the balanced matrix"""
        return float(np.linalg.norm(self.balanced, 2))

    def to_energy(self, x: np.ndarray) -> np.ndarray:
        return self.factor.T @ x

    def from_energy(self, z: np.ndarray) -> np.ndarray:
        return linalg.solve_triangular(self.factor.T, z, lower=False)

    def rows_to_energy(self, rows: np.ndarray) -> np.ndarray:
        """Output rows C L^{-T} acting on energy coordinates"""
        return linalg.solve_triangular(self.factor, np.atleast_2d(rows).T, lower=True).T

    def energy_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.to_energy(x)))

    def check_state(self, x, name: str = 'state') -> np.ndarray:
        x = np.asarray(x)
        if not np.iscomplexobj(x):
            x = x.astype(float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f'{name}/generator', self.dim, x.shape[0])
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput(f"{name} has non-finite entries")
        return x


@dataclass(eq=False)
class DiscreteGenerator(EnergyGenerator):
    """Subsystem generator on stacked (f, g) states with its energy Gram matrix"""
    matrix: np.ndarray
    gram: np.ndarray
    space: Optional[SpaceSpec] = None
    grid: Optional[Grid] = None
    label: str = 'matrix'

    def __post_init__(self):
        self.matrix = _as_square(self.matrix, 'generator')
        self.gram = _as_square(self.gram, 'gram')
        if self.gram.shape != self.matrix.shape:
            raise DimensionMismatch('generator/gram', self.matrix.shape[0], self.gram.shape[0])

    @classmethod
    def from_matrix(cls, matrix, gram=None, label: str = 'matrix') -> 'DiscreteGenerator':
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if gram is None:
            gram = np.eye(matrix.shape[0])
        return cls(matrix=matrix, gram=gram, label=label)

    def shifted(self, gamma: float) -> 'DiscreteGenerator':
        """Generator of e^{gamma t} e^{A t}, sharing the Gram factor"""
        result = DiscreteGenerator(
            matrix=self.matrix + gamma * np.eye(self.dim),
            gram=self.gram,
            space=self.space,
            grid=self.grid,
            label=f"{self.label}+{gamma:.6g}I",
        )
        result.__dict__['factor'] = self.factor
        return result


@dataclass(eq=False)
class BoundaryInjection:
    """Columns of B (subsystem-1 state dimension x channels)"""
    columns: np.ndarray
    kinds: Tuple[InjectionDescriptor, ...] = ()

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim == 1:
            self.columns = self.columns[:, None]
        if self.kinds and len(self.kinds) != self.columns.shape[1]:
            raise DimensionMismatch('injection columns/kinds', len(self.kinds), self.columns.shape[1])

    @property
    def k(self) -> int:
        return self.columns.shape[1]


@dataclass(eq=False)
class BoundaryObservation:
    """Rows of C (channels x subsystem-2 state dimension)"""
    rows: np.ndarray
    kinds: Tuple = ()

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim == 1:
            self.rows = self.rows[None, :]
        if self.kinds and len(self.kinds) != self.rows.shape[0]:
            raise DimensionMismatch('observation rows/kinds', len(self.kinds), self.rows.shape[0])

    @property
    def k(self) -> int:
        return self.rows.shape[0]


def build_gram(space: SpaceSpec, grid: Grid) -> np.ndarray:
    blocks = energy_blocks(space, grid)
    return linalg.block_diag(blocks.stiffness, np.diag(blocks.mass))


def build_generator(space: SpaceSpec, grid: Grid) -> DiscreteGenerator:
    blocks = energy_blocks(space, grid)
    m = len(blocks.nodes)
    inverse_mass = (1.0 / blocks.mass)[:, None]

    matrix = np.zeros((2 * m, 2 * m))
    matrix[:m, m:] = np.eye(m)
    matrix[m:, :m] = -inverse_mass * blocks.stiffness
    matrix[m:, m:] = -inverse_mass * blocks.damping

    gram = linalg.block_diag(blocks.stiffness, np.diag(blocks.mass))
    logger.debug(f"Assembled {space.kind.value} generator: n={grid.n}, dim={2 * m}")
    return DiscreteGenerator(matrix=matrix, gram=gram, space=space, grid=grid, label=space.kind.value)


def dissipation_slack(space: SpaceSpec, grid: Grid) -> float:
    """Roundoff allowance for Re<Ax, x>_gram on unit states (tau_diss)"""
    power = 4 if space.kind.is_beam else 2
    return 1e-12 * grid.n ** power


def dissipation_rate(generator: EnergyGenerator, x: np.ndarray) -> float:
    """Re<A x, x>_gram / ||x||^2_gram"""
    z = generator.to_energy(generator.check_state(x))
    return float(np.real(np.vdot(z, generator.balanced @ z)) / np.real(np.vdot(z, z)))


def _velocity_injection(descriptor: InjectionDescriptor, space: SpaceSpec, grid: Grid,
                        nodes: np.ndarray, mass: np.ndarray) -> np.ndarray:
    if descriptor.kind is InjectionKind.PROFILE:
        x = grid.nodes[nodes]
        return descriptor.scale * descriptor.amplitude * np.exp(descriptor.rate * (1.0 - x))

    j = grid.node_index(descriptor.location)
    if descriptor.kind is InjectionKind.DELTA:
        positions = np.flatnonzero(nodes == j)
        if positions.size == 0:
            raise UnsupportedSpaceKind(
                f"Delta at x={descriptor.location} hits a constrained node of {space.kind.value}",
                {'kind': space.kind.value, 'x': descriptor.location}
            )
        column = np.zeros(len(nodes))
        column[positions[0]] = descriptor.scale / mass[positions[0]]
        return column

    if descriptor.kind is InjectionKind.DELTA_PRIME:
        functional = "f'(0)" if j == 0 else "f'(1)"
        if j not in (0, grid.n):
            raise UnsupportedSpaceKind(
                f"DeltaPrime is only supported at the boundary, got x={descriptor.location}",
                {'kind': space.kind.value, 'x': descriptor.location}
            )
        pairing = functional_vector(grid, functional)[nodes]
        # <delta', phi> = -phi'(x0)
        return -descriptor.scale * pairing / mass

    raise UnsupportedSpaceKind(f"Unsupported injection kind {descriptor.kind}")


def build_injection(spec: CoupledSystemSpec, grid: Grid) -> BoundaryInjection:
    space = spec.space1
    validate_space(space)
    nodes = free_nodes(space.kind, grid)
    mass = trapezoid_weights(grid)[nodes]
    m = len(nodes)

    columns = np.zeros((2 * m, len(spec.injection)))
    for col, descriptor in enumerate(spec.injection):
        columns[m:, col] = _velocity_injection(descriptor, space, grid, nodes, mass)
    return BoundaryInjection(columns=columns, kinds=tuple(spec.injection))


def observation_row(term: ObservationTerm, space: SpaceSpec, grid: Grid) -> np.ndarray:
    """Row of one observation term on the stacked (f, g) state of ``space``"""
    nodes = free_nodes(space.kind, grid)
    m = len(nodes)
    row = np.zeros(2 * m)
    # constrained nodes carry zero values, so their stencil weights drop out
    stencil = boundary_stencil(grid, term.kind, term.location)[nodes]
    offset = 0 if term.component is Component.DISPLACEMENT else m
    row[offset:offset + m] = term.gain * stencil
    return row


def build_observation(spec: CoupledSystemSpec, grid: Grid) -> BoundaryObservation:
    space = spec.space2
    validate_space(space)
    m = len(free_nodes(space.kind, grid))

    rows = np.zeros((len(spec.observation), 2 * m))
    for r, descriptor in enumerate(spec.observation):
        for term in descriptor.terms:
            rows[r] += observation_row(term, space, grid)
    return BoundaryObservation(rows=rows, kinds=tuple(spec.observation))


def state_profiles(space: SpaceSpec, grid: Grid, state: np.ndarray) -> Dict[str, np.ndarray]:
    """Full-node displacement and velocity profiles of a stacked state"""
    m = len(free_nodes(space.kind, grid))
    state = np.asarray(state)
    return {
        'displacement': expand_nodes(space.kind, grid, state[:m]),
        'velocity': expand_nodes(space.kind, grid, state[m:2 * m]),
    }
