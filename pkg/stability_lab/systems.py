# stability_lab/systems.py - Catalog of the four coupled systems and their parameter rules
import logging
from dataclasses import dataclass
from typing import List, Tuple, Dict, Callable, Union

import numpy as np

from .exceptions import ParameterError
from .models import (
    SystemId, SystemParams, SpaceKind, SpaceSpec, CoupledSystemSpec, SystemEntry,
    InjectionKind, InjectionDescriptor, ObservationKind, ObservationTerm,
    ObservationDescriptor, Component, GAIN_NAMES
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    """Static description of one catalog system"""
    system: SystemId
    required: Tuple[str, ...]
    coupling_channels: int
    build: Callable[[SystemParams], CoupledSystemSpec]


def _beam_clamped(params: SystemParams) -> SpaceSpec:
    return SpaceSpec(SpaceKind.BEAM_CLAMPED_FREE, params.subset(('c1',)))


def _beam_free_tip(params: SystemParams) -> SpaceSpec:
    return SpaceSpec(
        SpaceKind.BEAM_FREE_TIP,
        params.subset(('c2', 'c3')),
        boundary_weights=(("f'(0)", float(params.c3)),)
    )


def _wave_robin(params: SystemParams) -> SpaceSpec:
    return SpaceSpec(
        SpaceKind.WAVE_ROBIN,
        params.subset(('c1', 'c2')),
        boundary_weights=(('f(1)', float(params.c1)),)
    )


def _wave_dirichlet(params: SystemParams) -> SpaceSpec:
    return SpaceSpec(SpaceKind.WAVE_DIRICHLET_LEFT, params.subset(('c0',)))


def _beam_beam_2008(params: SystemParams) -> CoupledSystemSpec:
    # w'''(1) = c1 w_t(1) + c1 eps_t(1): shear load at the clamped beam's tip
    observe_tip = ObservationTerm(ObservationKind.POINT_VALUE, Component.VELOCITY, 1.0, float(params.c1))
    return CoupledSystemSpec(
        system=SystemId.BEAM_BEAM_2008,
        params=params,
        space1=_beam_clamped(params),
        space2=_beam_free_tip(params),
        injection=(InjectionDescriptor(InjectionKind.DELTA, location=1.0, scale=-1.0),),
        observation=(ObservationDescriptor(ObservationKind.POINT_VALUE, (observe_tip,)),),
        coupling_channels=1,
        description=SystemCatalog.DESCRIPTIONS[SystemId.BEAM_BEAM_2008],
    )


def _beam_beam_2017(params: SystemParams) -> CoupledSystemSpec:
    # hinged beam receives the clamped beam's root moment f''(0) through delta'
    observe_moment = ObservationTerm(ObservationKind.SECOND_DERIVATIVE, Component.DISPLACEMENT, 0.0)
    return CoupledSystemSpec(
        system=SystemId.BEAM_BEAM_2017,
        params=params,
        space1=_beam_free_tip(params),
        space2=_beam_clamped(params),
        injection=(InjectionDescriptor(InjectionKind.DELTA_PRIME, location=0.0),),
        observation=(ObservationDescriptor(ObservationKind.SECOND_DERIVATIVE, (observe_moment,)),),
        coupling_channels=1,
        description=SystemCatalog.DESCRIPTIONS[SystemId.BEAM_BEAM_2017],
    )


def _wave_wave_2018(params: SystemParams) -> CoupledSystemSpec:
    # eps_x(0) = c2 eps_t(0) + d_x(0)
    observe_slope = ObservationTerm(ObservationKind.FIRST_DERIVATIVE, Component.DISPLACEMENT, 0.0)
    return CoupledSystemSpec(
        system=SystemId.WAVE_WAVE_2018,
        params=params,
        space1=_wave_robin(params),
        space2=_wave_dirichlet(params),
        injection=(InjectionDescriptor(InjectionKind.DELTA, location=0.0, scale=-1.0),),
        observation=(ObservationDescriptor(ObservationKind.FIRST_DERIVATIVE, (observe_slope,)),),
        coupling_channels=1,
        description=SystemCatalog.DESCRIPTIONS[SystemId.WAVE_WAVE_2018],
    )


def _krstic_wave(params: SystemParams) -> CoupledSystemSpec:
    q, c0, c1 = float(params.q), float(params.c0), float(params.c1)
    row = ObservationDescriptor(
        ObservationKind.COMBINATION,
        (
            ObservationTerm(ObservationKind.POINT_VALUE, Component.DISPLACEMENT, 1.0, q),
            ObservationTerm(ObservationKind.POINT_VALUE, Component.VELOCITY, 1.0, c0),
        )
    )
    return CoupledSystemSpec(
        system=SystemId.KRSTIC_WAVE,
        params=params,
        space1=_wave_robin(params),
        space2=_wave_dirichlet(params),
        injection=(
            InjectionDescriptor(InjectionKind.PROFILE, amplitude=c1 + q, rate=q),
            InjectionDescriptor(InjectionKind.DELTA, location=1.0),
        ),
        # both rows are kept even though they coincide
        observation=(row, row),
        coupling_channels=2,
        description=SystemCatalog.DESCRIPTIONS[SystemId.KRSTIC_WAVE],
    )


class SystemCatalog:
    """Static catalog of coupled systems in block-triangular (transformed) form"""

    DESCRIPTIONS = {
        SystemId.BEAM_BEAM_2008: (
            "Clamped Euler-Bernoulli beam with tip damping c1, driven through a point "
            "shear load delta(x-1) by c1 times the tip velocity of a hinged beam with "
            "moment feedback c2, c3 at x=0"
        ),
        SystemId.BEAM_BEAM_2017: (
            "Hinged beam with moment feedback c2, c3 at x=0, driven through a point "
            "moment delta'(x) by the root bending moment delta''(x) of a clamped beam "
            "with tip damping c1"
        ),
        SystemId.WAVE_WAVE_2018: (
            "Wave with Robin term c1 at x=1 and damping c2 at x=0, driven through "
            "delta(x) by the slope delta'(x) at x=0 of a fixed-left wave damped by c0 at x=1"
        ),
        SystemId.KRSTIC_WAVE: (
            "Wave with Robin term c1 and damping c2 driven over 2 coupling channels: "
            "the in-domain profile (c1+q)e^{q(1-x)} and the tip load delta(x-1), both "
            "fed by q d(1)+c0 d_t(1) of a fixed-left wave damped by c0"
        ),
    }

    ENTRIES: Dict[SystemId, CatalogEntry] = {
        SystemId.BEAM_BEAM_2008: CatalogEntry(SystemId.BEAM_BEAM_2008, ('c1', 'c2', 'c3'), 1, _beam_beam_2008),
        SystemId.BEAM_BEAM_2017: CatalogEntry(SystemId.BEAM_BEAM_2017, ('c1', 'c2', 'c3'), 1, _beam_beam_2017),
        SystemId.WAVE_WAVE_2018: CatalogEntry(SystemId.WAVE_WAVE_2018, ('c0', 'c1', 'c2'), 1, _wave_wave_2018),
        SystemId.KRSTIC_WAVE: CatalogEntry(SystemId.KRSTIC_WAVE, ('c0', 'c1', 'c2', 'q'), 2, _krstic_wave),
    }

    @staticmethod
    def validate_params(system: Union[SystemId, str], params: SystemParams) -> List[str]:
        """Return the violated constraints; an empty list means the gains are valid"""
        system = SystemId.parse(system)
        entry = SystemCatalog.ENTRIES[system]
        violations = []

        for name in entry.required:
            if params.get(name) is None:
                violations.append(f"{name} required")

        for name in GAIN_NAMES:
            value = params.get(name)
            if value is None:
                continue
            if not np.isfinite(value):
                violations.append(f"{name} must be finite")
            elif value <= 0:
                violations.append(f"{name} must be > 0")

        if system is not SystemId.KRSTIC_WAVE and params.q is not None:
            violations.append("q is only used by KrsticWave")

        return violations

    @staticmethod
    def catalog_lookup(system: Union[SystemId, str], params: SystemParams) -> CoupledSystemSpec:
        system = SystemId.parse(system)
        violations = SystemCatalog.validate_params(system, params)
        if violations:
            raise ParameterError(
                f"Invalid parameters for {system.value}: {'; '.join(violations)}",
                {'system': system.value, 'violations': violations}
            )
        spec = SystemCatalog.ENTRIES[system].build(params)
        logger.debug(f"Resolved {system.value} with gains {params.present()}")
        return spec

    @staticmethod
    def list_systems() -> List[SystemEntry]:
        return [
            SystemEntry(
                system=entry.system,
                description=SystemCatalog.DESCRIPTIONS[entry.system],
                required_params=list(entry.required),
                coupling_channels=entry.coupling_channels,
            )
            for entry in SystemCatalog.ENTRIES.values()
        ]

    @staticmethod
    def original_fields(spec: CoupledSystemSpec, first: np.ndarray, second: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Map transformed node profiles back to the untransformed systems.

        ``first`` and ``second`` are full node arrays (x_0..x_n, shape (..., n+1)) of
        the first and second subsystem. BeamBeam2008 was transformed by subtracting
        the second beam from the first; BeamBeam2017 and KrsticWave by reflecting
        x -> 1 - x; WaveWave2018 is already in its original coordinates.
        """
        first = np.asarray(first, dtype=float)
        second = np.asarray(second, dtype=float)
        if first.shape != second.shape:
            raise ParameterError(
                "Node profiles of both subsystems must share a grid",
                {'first': list(first.shape), 'second': list(second.shape)}
            )

        if spec.system is SystemId.BEAM_BEAM_2008:
            return first + second, second
        if spec.system in (SystemId.BEAM_BEAM_2017, SystemId.KRSTIC_WAVE):
            return first[..., ::-1].copy(), second[..., ::-1].copy()
        return first.copy(), second.copy()


# Module-level aliases used throughout the package
catalog_lookup = SystemCatalog.catalog_lookup
validate_params = SystemCatalog.validate_params
list_systems = SystemCatalog.list_systems
original_fields = SystemCatalog.original_fields
