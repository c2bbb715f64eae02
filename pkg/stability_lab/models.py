# stability_lab/models.py
from enum import Enum
from typing import List, Tuple, Optional, Dict
from dataclasses import dataclass, field

from .exceptions import UnknownSystem


class SystemId(Enum):
    """Catalog of coupled systems"""
    BEAM_BEAM_2008 = 'BeamBeam2008'  # Clamped beam driven by a hinged beam's tip velocity
    BEAM_BEAM_2017 = 'BeamBeam2017'  # Hinged beam driven by a clamped beam's root moment
    WAVE_WAVE_2018 = 'WaveWave2018'  # Robin wave driven by a Dirichlet wave's left slope
    KRSTIC_WAVE = 'KrsticWave'       # Robin wave with in-domain profile and tip forcing

    @classmethod
    def parse(cls, value) -> 'SystemId':
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value == value or member.name == value:
                return member
        raise UnknownSystem(
            f"Unknown system '{value}'",
            {'system': str(value), 'known': [m.value for m in cls]}
        )


class SpaceKind(Enum):
    """Subsystem function spaces"""
    BEAM_CLAMPED_FREE = 'BeamClampedFree'      # f(0)=f'(0)=0, f''(1)=0, f'''(1)=c1 g(1)
    BEAM_FREE_TIP = 'BeamFreeTip'              # f(0)=0, f''(0)=c2 g'(0)+c3 f'(0), f''(1)=f'''(1)=0
    WAVE_ROBIN = 'WaveRobin'                   # f'(0)=c2 g(0), f'(1)=-c1 f(1)
    WAVE_DIRICHLET_LEFT = 'WaveDirichletLeft'  # f(0)=0, f'(1)=-c0 g(1)

    @property
    def is_beam(self) -> bool:
        return self in (SpaceKind.BEAM_CLAMPED_FREE, SpaceKind.BEAM_FREE_TIP)


class InjectionKind(Enum):
    """Column tags of the boundary injection B"""
    DELTA = 'Delta'             # point load, pairs with test functions as phi(x0)
    DELTA_PRIME = 'DeltaPrime'  # point moment, pairs as -phi'(x0)
    PROFILE = 'Profile'         # distributed amplitude * exp(rate * (1 - x))


class ObservationKind(Enum):
    """Row tags of the boundary observation C"""
    POINT_VALUE = 'PointValue'
    FIRST_DERIVATIVE = 'FirstDerivative'
    SECOND_DERIVATIVE = 'SecondDerivative'
    COMBINATION = 'Combination'


class Component(Enum):
    DISPLACEMENT = 'displacement'  # f block
    VELOCITY = 'velocity'          # g block


class QuadratureRule(Enum):
    TRAPEZOID = 'Trapezoid'
    GAUSS_LEGENDRE = 'GaussLegendre'


class AdmissibilityKind(Enum):
    CONTROL_W = 'ControlW'
    OBSERVATION_V = 'ObservationV'


class AdmissibilityMethod(Enum):
    GRAMIAN_EIG = 'GramianEig'
    INPUT_MAP_SVD = 'InputMapSVD'
    LYAPUNOV_LIMIT = 'LyapunovLimit'  # supremum over all horizons


GAIN_NAMES = ('c0', 'c1', 'c2', 'c3', 'q')


@dataclass(frozen=True)
class SystemParams:
    """Damping/coupling gains; unused gains stay None"""
    c0: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    c3: Optional[float] = None
    q: Optional[float] = None

    def get(self, name: str) -> Optional[float]:
        return getattr(self, name)

    def present(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in GAIN_NAMES if getattr(self, name) is not None}

    def subset(self, names) -> Tuple[Tuple[str, float], ...]:
        return tuple((name, float(getattr(self, name))) for name in names)


@dataclass(frozen=True)
class SpaceSpec:
    """Function space of one subsystem, with the gains it uses"""
    kind: SpaceKind
    gains: Tuple[Tuple[str, float], ...]
    boundary_weights: Tuple[Tuple[str, float], ...] = ()  # (functional, coefficient) energy terms

    def gain(self, name: str) -> float:
        for key, value in self.gains:
            if key == name:
                return value
        raise KeyError(name)


@dataclass(frozen=True)
class InjectionDescriptor:
    """One column of B acting on the velocity rows of subsystem 1"""
    kind: InjectionKind
    location: Optional[float] = None
    scale: float = 1.0
    amplitude: float = 1.0  # profile only
    rate: float = 0.0       # profile only

    def describe(self) -> str:
        if self.kind is InjectionKind.PROFILE:
            return f"{self.scale:g}*{self.amplitude:g}*exp({self.rate:g}*(1-x))"
        return f"{self.scale:g}*{self.kind.value}(x-{self.location:g})"


@dataclass(frozen=True)
class ObservationTerm:
    """gain * (derivative of component) evaluated at a boundary point"""
    kind: ObservationKind
    component: Component
    location: float
    gain: float = 1.0

    def describe(self) -> str:
        symbol = 'f' if self.component is Component.DISPLACEMENT else 'g'
        primes = {
            ObservationKind.POINT_VALUE: '',
            ObservationKind.FIRST_DERIVATIVE: "'",
            ObservationKind.SECOND_DERIVATIVE: "''",
        }[self.kind]
        return f"{self.gain:g}*{symbol}{primes}({self.location:g})"


@dataclass(frozen=True)
class ObservationDescriptor:
    """One row of C acting on the state of subsystem 2"""
    kind: ObservationKind
    terms: Tuple[ObservationTerm, ...]

    def describe(self) -> str:
        return ' + '.join(term.describe() for term in self.terms)


@dataclass(frozen=True)
class CoupledSystemSpec:
    """Fully resolved catalog entry: both spaces, B/C descriptors, channel count"""
    system: SystemId
    params: SystemParams
    space1: SpaceSpec
    space2: SpaceSpec
    injection: Tuple[InjectionDescriptor, ...]
    observation: Tuple[ObservationDescriptor, ...]
    coupling_channels: int
    description: str = ''


@dataclass
class SystemEntry:
    """Row of list_systems()"""
    system: SystemId
    description: str
    required_params: List[str]
    coupling_channels: int


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature of the variation-of-parameters convolution"""
    rule: QuadratureRule = QuadratureRule.GAUSS_LEGENDRE
    panels: int = 64
    nodes: int = 4  # Gauss points per panel


@dataclass
class RunConfig:
    """Resolved run configuration of the stability command"""
    system: SystemId
    params: SystemParams
    n: int = 16
    t_end: float = 5.0
    dt: float = 0.05
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    gamma_fraction: float = 0.5
    output_dir: str = 'runs'
    seed: int = 0
    initial_state: str = 'random'
    horizons: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    admissibility_steps: int = 256
    ladder: List[int] = field(default_factory=lambda: [8, 16, 32])
    decay_t_max: float = 10.0
    decay_t_points: int = 50
    verify_samples: int = 20
    tolerances: Dict[str, float] = field(default_factory=dict)
    export_matrices: bool = False
