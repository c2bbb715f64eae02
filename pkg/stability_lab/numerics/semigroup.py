# stability_lab/numerics/semigroup.py - Evolution of e^{At} by two routes, resolvents
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import linalg

from ..exceptions import (
    DimensionMismatch, NonFiniteInput, QuadratureError, SingularOrIllConditioned, ParameterError
)
from ..models import QuadratureRule, QuadratureSpec
from .discretize import DiscreteGenerator, BoundaryInjection, BoundaryObservation, EnergyGenerator
from .coupling import CoupledGenerator, assemble_coupled

logger = logging.getLogger(__name__)

RESOLVENT_TOLERANCE = 1e-10
# Largest accepted condition number of lambda*I - A in energy coordinates
RESOLVENT_CONDITION_LIMIT = 1e12

Generator = Union[DiscreteGenerator, CoupledGenerator]


@dataclass
class Trajectory:
    """Snapshots of e^{Gt} x0 with gram energies"""
    times: np.ndarray
    states: np.ndarray    # (len(times), dim)
    energies: np.ndarray
    block_energies: Optional[np.ndarray] = None  # (len(times), 2) for coupled flows


def _check_time(value: float, name: str, strict: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteInput(f"{name} must be finite", {name: str(value)})
    if value < 0 or (strict and value == 0):
        bound = '> 0' if strict else '>= 0'
        raise ParameterError(f"{name} must be {bound}, got {value}", {name: value})
    return value


def _time_grid(t_end: float, dt: float) -> np.ndarray:
    steps = int(math.floor(t_end / dt + 1e-9))
    times = dt * np.arange(steps + 1)
    if t_end - times[-1] > 1e-12 * max(t_end, 1.0):
        times = np.append(times, t_end)
    return times


def evolve_direct(generator: Generator, x0, t_end: float, dt: float) -> Trajectory:
    """States e^{G t_k} x0 on t_k = 0, dt, 2dt, ..., t_end from one cached step exponential"""
    t_end = _check_time(t_end, 't_end')
    dt = _check_time(dt, 'dt', strict=True)
    x0 = generator.check_state(x0, 'x0')

    times = _time_grid(t_end, dt)
    balanced = generator.balanced
    step = linalg.expm(balanced * dt)

    z = generator.to_energy(x0)
    energy_states = np.empty((len(times), generator.dim))
    energy_states[0] = z
    for k in range(1, len(times)):
        width = times[k] - times[k - 1]
        propagator = step if abs(width - dt) <= 1e-12 * dt else linalg.expm(balanced * width)
        z = propagator @ z
        energy_states[k] = z

    states = generator.from_energy(energy_states.T).T
    energies = np.sum(energy_states**2, axis=1)

    block_energies = None
    if isinstance(generator, CoupledGenerator):
        d1 = generator.a1.dim
        block_energies = np.column_stack([
            np.sum(energy_states[:, :d1]**2, axis=1),
            np.sum(energy_states[:, d1:]**2, axis=1),
        ])

    logger.debug(f"evolve_direct: {len(times)} snapshots, dim={generator.dim}")
    return Trajectory(times=times, states=states, energies=energies, block_energies=block_energies)


def _check_quadrature(quad: QuadratureSpec):
    if not isinstance(quad.rule, QuadratureRule):
        raise QuadratureError(f"Unknown quadrature rule {quad.rule}", {'rule': str(quad.rule)})
    if int(quad.panels) < 1:
        raise QuadratureError(f"Quadrature needs at least one panel, got {quad.panels}", {'panels': quad.panels})
    if quad.rule is QuadratureRule.GAUSS_LEGENDRE and int(quad.nodes) < 1:
        raise QuadratureError(f"Gauss rule needs at least one node, got {quad.nodes}", {'nodes': quad.nodes})


def effective_panels(quad: QuadratureSpec, t: float, rho: float) -> int:
    """Panel count actually used: Gauss panels are refined until width * rho <= 1"""
    panels = int(quad.panels)
    if quad.rule is QuadratureRule.GAUSS_LEGENDRE and t > 0:
        panels = max(panels, int(math.ceil(t * rho)))
    return panels


def _convolution(a1: EnergyGenerator, a2: EnergyGenerator, coupling: np.ndarray,
                 zg: np.ndarray, t: float, quad: QuadratureSpec) -> np.ndarray:
    """Quadrature of int_0^t e^{A1(t-s)} B C e^{A2 s} g ds in energy coordinates"""
    rho = max(a1.norm_bound, a2.norm_bound)
    panels = effective_panels(quad, t, rho)
    width = t / panels
    step1 = linalg.expm(a1.balanced * width)
    step2 = linalg.expm(a2.balanced * width)

    # acc_k = sum_{j<=k} w_j e^{A1(s_k - s_j)} BC e^{A2 s_j} g, accumulated Horner style
    if quad.rule is QuadratureRule.TRAPEZOID:
        y = zg
        accumulated = 0.5 * width * (coupling @ y)
        for k in range(1, panels + 1):
            y = step2 @ y
            weight = 0.5 * width if k == panels else width
            accumulated = step1 @ accumulated + weight * (coupling @ y)
        return accumulated

    points, weights = np.polynomial.legendre.leggauss(int(quad.nodes))
    fractions = 0.5 * (points + 1.0)
    weights = 0.5 * width * weights
    left = [linalg.expm(a1.balanced * (1.0 - theta) * width) for theta in fractions]
    right = [linalg.expm(a2.balanced * theta * width) for theta in fractions]
    logger.debug(f"Gauss convolution: {panels} panels x {len(fractions)} nodes (rho={rho:.3e})")

    y = zg
    accumulated = np.zeros((a1.dim,) + zg.shape[1:])
    for _ in range(panels):
        panel = sum(w * (l @ (coupling @ (r @ y))) for w, l, r in zip(weights, left, right))
        accumulated = step1 @ accumulated + panel
        y = step2 @ y
    return accumulated


def _check_channels(a1: DiscreteGenerator, a2: DiscreteGenerator, b: BoundaryInjection, c: BoundaryObservation):
    if b.columns.shape[0] != a1.dim:
        raise DimensionMismatch('injection/first block', a1.dim, b.columns.shape[0])
    if c.rows.shape[1] != a2.dim:
        raise DimensionMismatch('observation/second block', a2.dim, c.rows.shape[1])
    if b.k != c.k:
        raise DimensionMismatch('injection/observation channels', b.k, c.k)


def _energy_convolution(a1: DiscreteGenerator, a2: DiscreteGenerator, b: BoundaryInjection,
                        c: BoundaryObservation, zg: np.ndarray, t: float, quad: QuadratureSpec) -> np.ndarray:
    if t > 0 and np.any(b.columns) and np.any(c.rows) and np.any(zg):
        # B~ C~ = L1^T B C L2^{-T}
        coupling = a1.to_energy(b.columns) @ a2.rows_to_energy(c.rows)
        return _convolution(a1, a2, coupling, zg, t, quad)
    return np.zeros((a1.dim,) + zg.shape[1:])


def convolution_term(a1: DiscreteGenerator, a2: DiscreteGenerator, b: BoundaryInjection,
                     c: BoundaryObservation, g0, t: float, quad: QuadratureSpec) -> np.ndarray:
    """int_0^t e^{A1(t-s)} B C e^{A2 s} g0 ds, the first-block state driven by g0 alone"""
    _check_quadrature(quad)
    t = _check_time(t, 't')
    _check_channels(a1, a2, b, c)
    g0 = a2.check_state(g0, 'g0')
    return a1.from_energy(_energy_convolution(a1, a2, b, c, a2.to_energy(g0), t, quad))


def evolve_vop(a1: DiscreteGenerator, a2: DiscreteGenerator, b: BoundaryInjection,
               c: BoundaryObservation, f0, g0, t: float, quad: QuadratureSpec) -> np.ndarray:
    """
    (e^{A1 t} f0 + int_0^t e^{A1(t-s)} B C e^{A2 s} g0 ds, e^{A2 t} g0)

    f0, g0 may also be matrices whose columns are independent states.
    """
    _check_quadrature(quad)
    t = _check_time(t, 't')
    _check_channels(a1, a2, b, c)
    f0 = a1.check_state(f0, 'f0')
    g0 = a2.check_state(g0, 'g0')
    if f0.shape[1:] != g0.shape[1:]:
        raise DimensionMismatch('f0/g0 batch', f0.shape[1:], g0.shape[1:])

    zf = a1.to_energy(f0)
    zg = a2.to_energy(g0)
    first = linalg.expm(a1.balanced * t) @ zf + _energy_convolution(a1, a2, b, c, zg, t, quad)
    second = linalg.expm(a2.balanced * t) @ zg

    return np.concatenate([a1.from_energy(first), a2.from_energy(second)])


def resolvent_apply(generator: Generator, lam: complex, x) -> np.ndarray:
    """(lambda I - G)^{-1} x by a dense solve in energy coordinates"""
    x = generator.check_state(x, 'x')
    lam = complex(lam)
    z = generator.to_energy(x)
    shifted = lam * np.eye(generator.dim) - generator.balanced
    if lam.imag == 0:
        shifted = shifted.real
        lam = lam.real

    condition = np.linalg.cond(shifted)
    if not np.isfinite(condition) or condition > RESOLVENT_CONDITION_LIMIT:
        raise SingularOrIllConditioned(lam, float(condition), reason='condition')
    try:
        y = linalg.solve(shifted, z)
    except linalg.LinAlgError:
        raise SingularOrIllConditioned(lam, float('inf'), reason='condition')

    scale = max(np.linalg.norm(z), np.finfo(float).tiny)
    residual = float(np.linalg.norm(shifted @ y - z) / scale)
    if not np.isfinite(residual) or residual > RESOLVENT_TOLERANCE:
        raise SingularOrIllConditioned(lam, residual)
    return generator.from_energy(y)


def resolvent_identity_residual(a1: DiscreteGenerator, a2: DiscreteGenerator, b: BoundaryInjection,
                                c: BoundaryObservation, lam: complex, f, g) -> float:
    """|| R(l, AA)(f, g) - (R(l,A1) f + R(l,A1) B C R(l,A2) g, R(l,A2) g) ||_gram"""
    coupled = assemble_coupled(a1, a2, b, c)
    f = a1.check_state(f, 'f')
    g = a2.check_state(g, 'g')

    combined = resolvent_apply(coupled, lam, np.concatenate([f, g]))
    second = resolvent_apply(a2, lam, g)
    first = resolvent_apply(a1, lam, f + b.columns @ (c.rows @ second))
    return coupled.energy_norm(combined - np.concatenate([first, second]))


def semigroup_property_residual(generator: Generator, t: float, s: float, x) -> float:
    """|| e^{G(t+s)} x - e^{Gt} e^{Gs} x ||_gram"""
    t = _check_time(t, 't')
    s = _check_time(s, 's')
    z = generator.to_energy(generator.check_state(x, 'x'))
    balanced = generator.balanced
    joint = linalg.expm(balanced * (t + s)) @ z
    composed = linalg.expm(balanced * t) @ (linalg.expm(balanced * s) @ z)
    return float(np.linalg.norm(joint - composed))


def strong_continuity_residual(generator: Generator, dt: float, x) -> float:
    """|| e^{G dt} x - x ||_gram"""
    dt = _check_time(dt, 'dt')
    z = generator.to_energy(generator.check_state(x, 'x'))
    return float(np.linalg.norm(linalg.expm(generator.balanced * dt) @ z - z))


def lambda_extension_residual(a2: DiscreteGenerator, c: BoundaryObservation, lam: float, g) -> float:
    """|| lambda C R(lambda, A2) g - C g ||, which vanishes as lambda -> +inf"""
    if c.rows.shape[1] != a2.dim:
        raise DimensionMismatch('observation/second block', a2.dim, c.rows.shape[1])
    g = a2.check_state(g, 'g')
    resolved = resolvent_apply(a2, lam, g)
    return float(np.linalg.norm(lam * (c.rows @ resolved) - c.rows @ g))
