# stability_lab/numerics/stability.py - Spectra, decay fits, admissibility constants, certificates
"""
Exponential-decay certification for block-triangular generators.

For [[A1, B C], [0, A2]] the flow is bounded by
    max(M1 + M2, K1 N1 + M2) e^{-gamma t} (||f|| + ||g||)
with (M_i, omega_i) fitted decay pairs, 0 < gamma < min(omega_1, omega_2) and
K1, N1 the control/observation admissibility constants of the gamma-shifted
blocks. Since ||f|| + ||g|| <= sqrt(2) ||(f, g)||, the product-norm check uses
a factor of 2.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from ..exceptions import (
    EigenSolverFailure, NoDecayDetected, ShiftedBlockUnstable, ParameterError, NonFiniteInput
)
from ..models import AdmissibilityKind, AdmissibilityMethod, QuadratureSpec
from .discretize import DiscreteGenerator, EnergyGenerator, BoundaryInjection, BoundaryObservation
from .coupling import CoupledGenerator
from .semigroup import convolution_term

logger = logging.getLogger(__name__)

# Norms below this are indistinguishable from roundoff of e^{At}
NORM_FLOOR = 1e-12
# Product norm vs ||f|| + ||g|| (sqrt(2) rounded up)
NORM_FACTOR = 2.0
SATURATION_GROWTH = 0.01
# Quadrature headroom when comparing the coupling convolution with K N
PRODUCT_SLACK = 1.02
MAX_DOUBLINGS = 40


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    abscissa: float

    @property
    def gap_to_axis(self) -> float:
        return -self.abscissa


@dataclass
class DecayFit:
    """Certified pair: ||e^{At}|| <= m e^{-omega t} at every grid point"""
    m: float
    omega: float
    t_grid: np.ndarray
    norms: np.ndarray
    fitted_rate: float
    spectral_rate: float

    def __iter__(self):
        return iter((self.m, self.omega))


@dataclass
class AdmissibilityEstimate:
    t0: Optional[float]  # None for the supremum over all horizons
    value: float
    kind: AdmissibilityKind
    method: AdmissibilityMethod
    time_steps: int = 0


@dataclass
class DecayCertificate:
    m_a1: float
    omega_a1: float
    m_a2: float
    omega_a2: float
    k_const: float
    n_const: float
    k1_const: float
    n1_const: float
    gamma: float
    gamma_fraction: float
    bound_const: float
    saturation_horizon_control: float
    saturation_horizon_observation: float
    t_grid: List[float]
    coupled_norms: List[float]
    envelope: List[float]
    verdict: bool
    max_ratio: float
    norm_factor: float = NORM_FACTOR
    system: str = ''


@dataclass
class ProductBoundCheck:
    """Worst ||int_0^t e^{A1(t-s)} B C e^{A2 s} g ds|| / (K N ||g||) over sampled g and t"""
    k_const: float
    n_const: float
    times: List[float]
    samples: int
    max_ratio: float
    slack: float = PRODUCT_SLACK

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.slack


Operator = Union[BoundaryInjection, BoundaryObservation, np.ndarray]


def _as_generator(generator, gram=None) -> EnergyGenerator:
    if isinstance(generator, EnergyGenerator):
        if gram is None:
            return generator
        return DiscreteGenerator.from_matrix(generator.matrix, gram)
    return DiscreteGenerator.from_matrix(generator, gram)


def spectral_abscissa(generator) -> SpectralReport:
    """
    Largest real part of the spectrum.

    The margin to the imaginary axis of a discretized wave or beam block is
    partly a discretization effect and shrinks roughly like h^2 as n grows,
    so the abscissa at a given n is not the continuous decay rate.
    """
    generator = _as_generator(generator)
    try:
        eigenvalues = linalg.eigvals(generator.balanced)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverFailure(f"Eigenvalue solver failed: {e}", {'dim': generator.dim})
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenSolverFailure("Eigenvalue solver returned non-finite values", {'dim': generator.dim})
    return SpectralReport(eigenvalues=eigenvalues, abscissa=float(np.max(eigenvalues.real)))


def operator_norm_at(generator, gram, t: float) -> float:
    """
    Gram-weighted norm of e^{Gt}: largest singular value of L^T e^{Gt} L^{-T}.

    ``gram=None`` keeps the generator's own Gram (identity for a raw matrix).
    """
    generator = _as_generator(generator, gram)
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ParameterError(f"t must be finite and >= 0, got {t}", {'t': t})
    return float(np.linalg.norm(linalg.expm(generator.balanced * t), 2))


def norms_on_grid(generator, t_grid) -> np.ndarray:
    generator = _as_generator(generator)
    return np.array([operator_norm_at(generator, None, t) for t in t_grid])


def _check_grid(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 4:
        raise ParameterError("Time grid needs at least 4 points", {'points': int(t_grid.size)})
    if not np.all(np.isfinite(t_grid)):
        raise NonFiniteInput("Time grid has non-finite entries")
    if t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ParameterError("Time grid must be increasing and nonnegative")
    return t_grid


def fit_decay(generator, gram, t_grid) -> DecayFit:
    generator = _as_generator(generator, gram)
    t_grid = _check_grid(t_grid)
    norms = norms_on_grid(generator, t_grid)

    if norms[-1] >= 1.0:
        raise NoDecayDetected(
            f"||e^(At)|| = {norms[-1]:.6g} >= 1 at t = {t_grid[-1]:g}",
            {'t': float(t_grid[-1]), 'norm': float(norms[-1])}
        )

    spectral_rate = -spectral_abscissa(generator).abscissa

    # least squares on the tail half, above the roundoff floor
    tail = np.arange(len(t_grid)) >= len(t_grid) // 2
    usable = tail & (norms > NORM_FLOOR)
    fitted_rate = math.inf
    if np.count_nonzero(usable) >= 2:
        slope = np.polyfit(t_grid[usable], np.log(norms[usable]), 1)[0]
        fitted_rate = -float(slope)

    rate = fitted_rate
    if spectral_rate > 0:
        rate = min(rate, spectral_rate)
    if not math.isfinite(rate) or rate <= 0:
        # chord through the last point, positive since norms[-1] < 1
        rate = -math.log(norms[-1]) / t_grid[-1]

    resolved = norms > NORM_FLOOR
    if np.any(~resolved):
        envelope = np.max(norms[resolved] * np.exp(rate * t_grid[resolved]))
        for t, value in zip(t_grid[~resolved], norms[~resolved]):
            if t > 0 and value > 0:
                rate = min(rate, math.log(envelope / value) / t)

    if rate <= 0:
        raise NoDecayDetected("No positive decay rate fits the sampled norms", {'rate': rate})

    m = float(np.max(norms * np.exp(rate * t_grid)))
    logger.debug(f"fit_decay: omega={rate:.6g} (fit {fitted_rate:.6g}, spectral {spectral_rate:.6g}), M={m:.6g}")
    return DecayFit(m=m, omega=float(rate), t_grid=t_grid, norms=norms,
                    fitted_rate=float(fitted_rate), spectral_rate=float(spectral_rate))


def composite_bound(m1: float, m2: float, k1: float, n1: float) -> float:
    """max(M1 + M2, K1 N1 + M2)"""
    return max(m1 + m2, k1 * n1 + m2)


def _columns(operator: Operator) -> np.ndarray:
    if isinstance(operator, BoundaryInjection):
        return operator.columns
    return np.atleast_2d(np.asarray(operator, dtype=float))


def _rows(operator: Operator) -> np.ndarray:
    if isinstance(operator, BoundaryObservation):
        return operator.rows
    return np.atleast_2d(np.asarray(operator, dtype=float))


def _energy_operator(generator: EnergyGenerator, operator: Operator, kind: AdmissibilityKind) -> np.ndarray:
    """B~ = L^T B (columns) or C~ = C L^{-T} (rows)"""
    if kind is AdmissibilityKind.CONTROL_W:
        columns = _columns(operator)
        if columns.shape[0] != generator.dim and columns.shape[1] == generator.dim:
            columns = columns.T
        return generator.to_energy(generator.check_state(columns, 'injection'))
    rows = _rows(operator)
    if rows.shape[1] != generator.dim:
        rows = generator.check_state(rows.T, 'observation').T
    return generator.rows_to_energy(rows)


def resolved_steps(t0: float, steps: int, rho: float) -> Tuple[float, int]:
    """
    Midpoint step for a horizon: t0/steps, shrunk to a power-of-two fraction
    of 1/rho when that is too coarse, so equal steps nest across horizons.
    """
    ds = t0 / steps
    count = steps
    if ds * rho > 1.0:
        resolution = 2.0 ** -math.ceil(math.log2(rho))
        count = int(math.ceil(t0 / resolution - 1e-9))
        ds = t0 / count
        logger.debug(f"Admissibility step refined to {ds:.3e} ({count} steps, rho={rho:.3e})")
    return ds, count


def _check_horizon(t0: float, steps: int):
    if not (t0 > 0) or not math.isfinite(t0):
        raise ParameterError(f"Horizon must be positive, got {t0}", {'t0': t0})
    if int(steps) < 8:
        raise ParameterError(f"Admissibility needs at least 8 steps, got {steps}", {'steps': steps})


def _sampled_map(generator: EnergyGenerator, operator: np.ndarray, kind: AdmissibilityKind,
                 ds: float, count: int) -> np.ndarray:
    """Stacked e^{A s_k} B~ (columns) or C~ e^{A s_k} (rows) at midpoints, scaled by sqrt(ds)"""
    balanced = generator.balanced
    half = linalg.expm(balanced * (0.5 * ds))
    step = linalg.expm(balanced * ds)

    blocks = []
    if kind is AdmissibilityKind.CONTROL_W:
        current = half @ operator
        for _ in range(count):
            blocks.append(current)
            current = step @ current
        return np.hstack(blocks) * math.sqrt(ds)

    current = operator @ half
    for _ in range(count):
        blocks.append(current)
        current = current @ step
    return np.vstack(blocks) * math.sqrt(ds)


def _largest_singular_value(stacked: np.ndarray, kind: AdmissibilityKind, method: AdmissibilityMethod) -> float:
    if not np.any(stacked):
        return 0.0
    if method is AdmissibilityMethod.INPUT_MAP_SVD:
        return float(linalg.svdvals(stacked)[0])
    gramian = stacked @ stacked.T if kind is AdmissibilityKind.CONTROL_W else stacked.T @ stacked
    return math.sqrt(max(float(linalg.eigvalsh(gramian)[-1]), 0.0))


def _admissibility(generator, operator: Operator, t0: float, steps: int,
                   kind: AdmissibilityKind, method: AdmissibilityMethod) -> AdmissibilityEstimate:
    generator = _as_generator(generator)
    t0 = float(t0)
    _check_horizon(t0, steps)
    if method is AdmissibilityMethod.LYAPUNOV_LIMIT:
        return admissibility_limit(generator, operator, kind)

    energy_operator = _energy_operator(generator, operator, kind)
    ds, count = resolved_steps(t0, int(steps), generator.norm_bound)
    stacked = _sampled_map(generator, energy_operator, kind, ds, count)
    value = _largest_singular_value(stacked, kind, method)
    return AdmissibilityEstimate(t0=t0, value=value, kind=kind, method=method, time_steps=count)


def admissibility_control(generator, b: Operator, t0: float, steps: int = 256,
                          method: AdmissibilityMethod = AdmissibilityMethod.INPUT_MAP_SVD) -> AdmissibilityEstimate:
    """W(t0): norm of u -> sum_k e^{A(t0 - s_k)} B u(s_k) ds from L2(0, t0) into the state space"""
    return _admissibility(generator, b, t0, steps, AdmissibilityKind.CONTROL_W, method)


def admissibility_observation(generator, c: Operator, t0: float, steps: int = 256,
                              method: AdmissibilityMethod = AdmissibilityMethod.GRAMIAN_EIG) -> AdmissibilityEstimate:
    """V(t0): square root of the largest eigenvalue of sum_k (C e^{A s_k})^T (C e^{A s_k}) ds"""
    return _admissibility(generator, c, t0, steps, AdmissibilityKind.OBSERVATION_V, method)


def admissibility_limit(generator, operator: Operator, kind: AdmissibilityKind) -> AdmissibilityEstimate:
    """Supremum over horizons from the infinite-horizon Lyapunov Gramian"""
    generator = _as_generator(generator)
    energy_operator = _energy_operator(generator, operator, kind)
    if not np.any(energy_operator):
        return AdmissibilityEstimate(t0=None, value=0.0, kind=kind, method=AdmissibilityMethod.LYAPUNOV_LIMIT)

    abscissa = spectral_abscissa(generator).abscissa
    if abscissa >= 0:
        raise NoDecayDetected(
            f"Admissibility limit needs a stable block (abscissa {abscissa:.3e})",
            {'abscissa': abscissa}
        )

    balanced = generator.balanced
    if kind is AdmissibilityKind.CONTROL_W:
        gramian = linalg.solve_continuous_lyapunov(balanced, -energy_operator @ energy_operator.T)
    else:
        gramian = linalg.solve_continuous_lyapunov(balanced.T, -energy_operator.T @ energy_operator)
    gramian = 0.5 * (gramian + gramian.T)
    value = math.sqrt(max(float(linalg.eigvalsh(gramian)[-1]), 0.0))
    return AdmissibilityEstimate(t0=None, value=value, kind=kind, method=AdmissibilityMethod.LYAPUNOV_LIMIT)


def saturated_admissibility(generator, operator: Operator, kind: AdmissibilityKind, t0: float = 1.0,
                            steps: int = 256, growth: float = SATURATION_GROWTH,
                            max_doublings: int = MAX_DOUBLINGS) -> AdmissibilityEstimate:
    """
    First horizon t0* = t0 2^k whose doubling grows the estimate by less than ``growth``.

    Uses the exact recursion P(2t) = e^{At} P(t) e^{A^T t} + P(t) (dually for
    observation) on the sampled Gramian, so every horizon shares one step.
    """
    generator = _as_generator(generator)
    t0 = float(t0)
    _check_horizon(t0, steps)
    energy_operator = _energy_operator(generator, operator, kind)
    ds, count = resolved_steps(t0, int(steps), generator.norm_bound)
    stacked = _sampled_map(generator, energy_operator, kind, ds, count)
    control = kind is AdmissibilityKind.CONTROL_W
    gramian = stacked @ stacked.T if control else stacked.T @ stacked

    def top(matrix):
        return math.sqrt(max(float(linalg.eigvalsh(0.5 * (matrix + matrix.T))[-1]), 0.0))

    horizon = t0
    value = top(gramian)
    propagator = linalg.expm(generator.balanced * t0)
    for doubling in range(max_doublings):
        if control:
            doubled = propagator @ gramian @ propagator.T + gramian
        else:
            doubled = propagator.T @ gramian @ propagator + gramian
        doubled_value = top(doubled)
        if doubled_value <= value * (1.0 + growth):
            logger.debug(f"{kind.value} saturated at t0*={horizon:g} (value {value:.6g})")
            return AdmissibilityEstimate(t0=horizon, value=value, kind=kind,
                                         method=AdmissibilityMethod.GRAMIAN_EIG,
                                         time_steps=count * 2 ** doubling)
        gramian, value = doubled, doubled_value
        propagator = propagator @ propagator
        horizon *= 2.0

    raise NoDecayDetected(
        f"{kind.value} estimate did not saturate within {max_doublings} doublings",
        {'horizon': horizon, 'value': value}
    )


def admissibility_product_check(coupled: CoupledGenerator, g_states, times=(1.0, 5.0),
                                quad: Optional[QuadratureSpec] = None,
                                slack: float = PRODUCT_SLACK) -> ProductBoundCheck:
    """Compare the coupling convolution with K N ||g||, K and N the Lyapunov limits"""
    quad = quad or QuadratureSpec()
    g_states = coupled.a2.check_state(g_states, 'g')
    if g_states.ndim == 1:
        g_states = g_states[:, None]

    k_const = admissibility_limit(coupled.a1, coupled.b, AdmissibilityKind.CONTROL_W).value
    n_const = admissibility_limit(coupled.a2, coupled.c, AdmissibilityKind.OBSERVATION_V).value
    allowed = k_const * n_const * np.linalg.norm(coupled.a2.to_energy(g_states), axis=0)

    max_ratio = 0.0
    for t in times:
        term = convolution_term(coupled.a1, coupled.a2, coupled.b, coupled.c, g_states, t, quad)
        norms = np.linalg.norm(coupled.a1.to_energy(term), axis=0)
        ratios = np.divide(norms, allowed, out=np.where(norms > 0, np.inf, 0.0), where=allowed > 0)
        max_ratio = max(max_ratio, float(np.max(ratios)))

    logger.debug(f"K N check {coupled.label}: K={k_const:.4g}, N={n_const:.4g}, worst ratio {max_ratio:.4g}")
    return ProductBoundCheck(k_const=k_const, n_const=n_const, times=[float(t) for t in times],
                             samples=int(g_states.shape[1]), max_ratio=max_ratio, slack=slack)


def theorem_bound_certificate(coupled: CoupledGenerator, gamma_fraction: float = 0.5, t0: float = 1.0,
                              t_grid=None, steps: int = 256) -> DecayCertificate:
    if not 0 < gamma_fraction < 1:
        raise ParameterError(f"gamma_fraction must lie in (0, 1), got {gamma_fraction}",
                             {'gamma_fraction': gamma_fraction})
    t_grid = _check_grid(np.linspace(0.0, 10.0, 50) if t_grid is None else t_grid)

    for name, block in (('first', coupled.a1), ('second', coupled.a2)):
        abscissa = spectral_abscissa(block).abscissa
        if abscissa >= 0:
            raise NoDecayDetected(f"The {name} free block is not exponentially stable (abscissa {abscissa:.3e})",
                                  {'block': name, 'abscissa': abscissa})

    fit1 = fit_decay(coupled.a1, None, t_grid)
    fit2 = fit_decay(coupled.a2, None, t_grid)
    gamma = gamma_fraction * min(fit1.omega, fit2.omega)

    shifted1 = coupled.a1.shifted(gamma)
    shifted2 = coupled.a2.shifted(gamma)
    for name, block in (('first', shifted1), ('second', shifted2)):
        abscissa = spectral_abscissa(block).abscissa
        if abscissa >= 0:
            raise ShiftedBlockUnstable(
                f"The {name} block shifted by gamma={gamma:.3e} is unstable (abscissa {abscissa:.3e})",
                {'block': name, 'gamma': gamma, 'abscissa': abscissa}
            )

    k_const = admissibility_limit(coupled.a1, coupled.b, AdmissibilityKind.CONTROL_W).value
    n_const = admissibility_limit(coupled.a2, coupled.c, AdmissibilityKind.OBSERVATION_V).value
    k1_const = admissibility_limit(shifted1, coupled.b, AdmissibilityKind.CONTROL_W).value
    n1_const = admissibility_limit(shifted2, coupled.c, AdmissibilityKind.OBSERVATION_V).value
    saturation_k = saturated_admissibility(shifted1, coupled.b, AdmissibilityKind.CONTROL_W, t0, steps)
    saturation_n = saturated_admissibility(shifted2, coupled.c, AdmissibilityKind.OBSERVATION_V, t0, steps)

    bound = composite_bound(fit1.m, fit2.m, k1_const, n1_const)
    norms = norms_on_grid(coupled, t_grid)
    envelope = NORM_FACTOR * bound * np.exp(-gamma * t_grid)
    ratios = norms / envelope
    verdict = bool(np.all(norms <= envelope))

    logger.info(
        f"Certificate {coupled.label}: gamma={gamma:.4g}, bound={bound:.4g}, "
        f"K1*N1={k1_const * n1_const:.4g}, verdict={'holds' if verdict else 'fails'}"
    )
    return DecayCertificate(
        m_a1=fit1.m, omega_a1=fit1.omega, m_a2=fit2.m, omega_a2=fit2.omega,
        k_const=k_const, n_const=n_const, k1_const=k1_const, n1_const=n1_const,
        gamma=gamma, gamma_fraction=gamma_fraction, bound_const=bound,
        saturation_horizon_control=saturation_k.t0,
        saturation_horizon_observation=saturation_n.t0,
        t_grid=t_grid.tolist(), coupled_norms=norms.tolist(), envelope=envelope.tolist(),
        verdict=verdict, max_ratio=float(np.max(ratios)), system=coupled.label,
    )
