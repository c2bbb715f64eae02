# stability_lab/runner.py - Orchestrates stability commands and writes their artifacts
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy import linalg

from .exceptions import StabilityLabError, NoDecayDetected, ShiftedBlockUnstable
from .exporters import (
    write_csv, write_json, write_trajectory_csv, write_matrix_csv, write_matrix_binary,
    validated_payload
)
from .models import RunConfig, AdmissibilityKind
from .numerics import (
    Grid, CoupledGenerator, coupled_from_spec, direct_coupled_matrix, evolve_direct, evolve_vop,
    resolvent_identity_residual, semigroup_property_residual, spectral_abscissa,
    admissibility_control, admissibility_observation, admissibility_limit,
    admissibility_product_check, theorem_bound_certificate, state_profiles, free_nodes
)
from .serializers import (
    RunConfigSerializer, SystemEntrySerializer, SpectrumReportSerializer,
    DecayCertificateSerializer, AdmissibilityReportSerializer, VerifyReportSerializer
)
from .systems import SystemCatalog

logger = logging.getLogger(__name__)

COMMANDS = ('list-systems', 'simulate', 'spectrum', 'decay', 'admissibility', 'verify', 'sweep')

RESOLVENT_POINTS = (1.0, 1.0 + 5.0j, 10.0)
SEMIGROUP_PAIRS = ((0.5, 0.5), (1.0, 2.0))
INVARIANCE_TIMES = (0.1, 1.0, 5.0)
PRODUCT_TIMES = (1.0, 5.0)
VOP_HORIZON = 1.0


class StabilityRunner:
    """Runs one stability command for a validated RunConfig"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)

    # --- shared pieces -----------------------------------------------------

    def provenance(self) -> Dict:
        """Resolved config echoed into artifacts (output location excluded)"""
        echo = dict(RunConfigSerializer(self.config).data)
        echo.pop('output_dir', None)
        return echo

    def build_coupled(self, n: int = None) -> CoupledGenerator:
        spec = SystemCatalog.catalog_lookup(self.config.system, self.config.params)
        return coupled_from_spec(spec, Grid(n or self.config.n))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.seed)

    @staticmethod
    def unit_states(generator, count: int, rng: np.random.Generator) -> np.ndarray:
        """Columns of random states with unit gram norm"""
        states = rng.standard_normal((generator.dim, count))
        norms = np.linalg.norm(generator.to_energy(states), axis=0)
        return states / norms

    def initial_state(self, coupled: CoupledGenerator) -> np.ndarray:
        kind = self.config.initial_state
        if kind == 'zero':
            return np.zeros(coupled.dim)
        if kind == 'random':
            return self.unit_states(coupled, 1, self.rng())[:, 0]

        # smooth: f = x^2, g = x(1 - x) on the free nodes of both blocks
        blocks = []
        for space in (coupled.spec.space1, coupled.spec.space2):
            x = coupled.grid.nodes[free_nodes(space.kind, coupled.grid)]
            blocks.append(np.concatenate([x**2, x * (1.0 - x)]))
        state = np.concatenate(blocks)
        return state / coupled.energy_norm(state)

    def write_run_config(self):
        write_json(self.output_dir / 'run_config.json', RunConfigSerializer(self.config).data)

    def run(self, command: str) -> Tuple[int, Dict]:
        handlers = {
            'list-systems': self.list_systems,
            'simulate': self.simulate,
            'spectrum': self.spectrum,
            'decay': self.decay,
            'admissibility': self.admissibility,
            'verify': self.verify,
            'sweep': self.sweep,
        }
        logger.info(f"Running '{command}' for {self.config.system.value} (n={self.config.n})")
        self.write_run_config()
        return handlers[command]()

    # --- commands ----------------------------------------------------------

    def list_systems(self) -> Tuple[int, Dict]:
        entries = [
            validated_payload(SystemEntrySerializer, asdict(entry) | {'system': entry.system.value})
            for entry in SystemCatalog.list_systems()
        ]
        write_json(self.output_dir / 'systems.json', entries)
        return 0, {'systems': entries}

    def simulate(self) -> Tuple[int, Dict]:
        coupled = self.build_coupled()
        x0 = self.initial_state(coupled)
        trajectory = evolve_direct(coupled, x0, self.config.t_end, self.config.dt)

        write_trajectory_csv(self.output_dir / 'trajectory.csv', trajectory)
        write_csv(
            self.output_dir / 'energy.csv',
            ['t', 'energy', 'energy_first', 'energy_second'],
            ([t, e, *split] for t, e, split in zip(trajectory.times, trajectory.energies, trajectory.block_energies))
        )

        spec, grid = coupled.spec, coupled.grid
        header = ['t'] + [f'first_{j}' for j in range(grid.n + 1)] + [f'second_{j}' for j in range(grid.n + 1)]
        rows = []
        for t, state in zip(trajectory.times, trajectory.states):
            first, second = coupled.split(state)
            first = state_profiles(spec.space1, grid, first)['displacement']
            second = state_profiles(spec.space2, grid, second)['displacement']
            first, second = SystemCatalog.original_fields(spec, first, second)
            rows.append([t, *first, *second])
        write_csv(self.output_dir / 'original_fields.csv', header, rows)

        logger.info(f"Simulated {len(trajectory.times)} snapshots; final energy {trajectory.energies[-1]:.6g}")
        return 0, {'snapshots': len(trajectory.times), 'final_energy': float(trajectory.energies[-1])}

    def spectrum(self) -> Tuple[int, Dict]:
        coupled = self.build_coupled()
        report = spectral_abscissa(coupled)
        eigenvalues = report.eigenvalues
        order = np.lexsort((eigenvalues.imag, -eigenvalues.real))
        write_csv(
            self.output_dir / 'eigenvalues.csv', ['re', 'im'],
            ([value.real, value.imag] for value in eigenvalues[order])
        )

        payload = validated_payload(SpectrumReportSerializer, {
            'system': self.config.system.value,
            'n': self.config.n,
            'dimension': coupled.dim,
            'abscissa': report.abscissa,
            'abscissa_first': spectral_abscissa(coupled.a1).abscissa,
            'abscissa_second': spectral_abscissa(coupled.a2).abscissa,
            'gap_to_axis': report.gap_to_axis,
            'config': self.provenance(),
        })
        write_json(self.output_dir / 'spectrum.json', payload)

        if self.config.export_matrices:
            self.export_matrices(coupled)
        return 0, payload

    def export_matrices(self, coupled: CoupledGenerator):
        target = self.output_dir / 'matrices'
        matrices = {
            'generator': coupled.matrix,
            'gram': coupled.gram,
            'coupling_block': coupled.coupling_block,
            'injection': coupled.b.columns,
            'observation': coupled.c.rows,
        }
        for name, matrix in matrices.items():
            write_matrix_csv(target / f'{name}.csv', matrix)
            write_matrix_binary(target / f'{name}.bin', matrix)
        logger.info(f"Exported {len(matrices)} matrices to {target}")

    def certificate(self, coupled: CoupledGenerator):
        t_grid = np.linspace(0.0, self.config.decay_t_max, self.config.decay_t_points)
        return theorem_bound_certificate(
            coupled,
            gamma_fraction=self.config.gamma_fraction,
            t0=self.config.horizons[0],
            t_grid=t_grid,
            steps=self.config.admissibility_steps,
        )

    def decay(self) -> Tuple[int, Dict]:
        coupled = self.build_coupled()
        certificate = self.certificate(coupled)
        payload = validated_payload(DecayCertificateSerializer, asdict(certificate) | {'config': self.provenance()})
        write_json(self.output_dir / 'certificate.json', payload)
        return (0 if certificate.verdict else 1), payload

    def admissibility(self) -> Tuple[int, Dict]:
        coupled = self.build_coupled()
        # one midpoint step for every horizon so the estimates nest
        base = self.config.horizons[0] / self.config.admissibility_steps

        control, observation = [], []
        for t0 in self.config.horizons:
            steps = max(8, int(round(t0 / base)))
            control.append(admissibility_control(coupled.a1, coupled.b, t0, steps))
            observation.append(admissibility_observation(coupled.a2, coupled.c, t0, steps))
        control_limit = admissibility_limit(coupled.a1, coupled.b, AdmissibilityKind.CONTROL_W)
        observation_limit = admissibility_limit(coupled.a2, coupled.c, AdmissibilityKind.OBSERVATION_V)

        payload = validated_payload(AdmissibilityReportSerializer, {
            'system': self.config.system.value,
            'n': self.config.n,
            'control': [asdict(estimate) for estimate in control],
            'observation': [asdict(estimate) for estimate in observation],
            'control_limit': asdict(control_limit),
            'observation_limit': asdict(observation_limit),
            'config': self.provenance(),
        })
        write_json(self.output_dir / 'admissibility.json', payload)
        return 0, payload

    def verify(self) -> Tuple[int, Dict]:
        coupled = self.build_coupled()
        checks = self.verification_checks(coupled)
        passed = all(check['passed'] for check in checks)

        payload = validated_payload(VerifyReportSerializer, {
            'system': self.config.system.value,
            'n': self.config.n,
            'seed': self.config.seed,
            'passed': passed,
            'checks': checks,
            'config': self.provenance(),
        })
        write_json(self.output_dir / 'verify.json', payload)
        for check in checks:
            level = logging.INFO if check['passed'] else logging.ERROR
            logger.log(level, f"{check['name']}: residual {check['residual']:.3e} (tolerance {check['tolerance']:.1e})")
        return (0 if passed else 1), payload

    def tolerance(self, name: str) -> float:
        return float(self.config.tolerances[name])

    def verification_checks(self, coupled: CoupledGenerator) -> List[Dict]:
        rng = self.rng()
        samples = self.config.verify_samples
        a1, a2, b, c = coupled.a1, coupled.a2, coupled.b, coupled.c
        d1 = a1.dim
        states = self.unit_states(coupled, samples, rng)

        def check(name, residual, count):
            tolerance = self.tolerance(name)
            residual = float(residual)
            return {
                'name': name, 'tolerance': tolerance, 'residual': residual,
                'samples': count, 'passed': bool(np.isfinite(residual) and residual <= tolerance),
            }

        # direct stencil vs B*C factorization
        direct = direct_coupled_matrix(coupled.spec, coupled.grid)
        factored = coupled.coupling_block
        scale = max(1.0, float(np.max(np.abs(factored))))
        factorization = np.max(np.abs(direct[:d1, d1:] - factored)) / scale

        resolvent = 0.0
        for lam in RESOLVENT_POINTS:
            for x in states.T:
                f, g = x[:d1], x[d1:]
                residual = resolvent_identity_residual(a1, a2, b, c, lam, f, g)
                resolvent = max(resolvent, residual / (a1.energy_norm(f) + a2.energy_norm(g)))

        vop = evolve_vop(a1, a2, b, c, states[:d1], states[d1:], VOP_HORIZON, self.config.quad)
        direct_states = coupled.from_energy(linalg.expm(coupled.balanced * VOP_HORIZON) @ coupled.to_energy(states))
        errors = np.linalg.norm(coupled.to_energy(vop - direct_states), axis=0)
        vop_error = float(np.max(errors / np.linalg.norm(coupled.to_energy(direct_states), axis=0)))

        semigroup = max(
            semigroup_property_residual(coupled, t, s, x)
            for t, s in SEMIGROUP_PAIRS for x in states.T
        )

        invariance = 0.0
        z = coupled.to_energy(states)
        for t in INVARIANCE_TIMES:
            coupled_flow = linalg.expm(coupled.balanced * t) @ z
            free_flow = linalg.expm(a2.balanced * t) @ z[d1:]
            invariance = max(invariance, float(np.max(np.linalg.norm(coupled_flow[d1:] - free_flow, axis=0))))

        product = admissibility_product_check(coupled, states[d1:], PRODUCT_TIMES, self.config.quad)

        return [
            check('factorization_exactness', factorization, 1),
            check('resolvent_identity', resolvent, samples * len(RESOLVENT_POINTS)),
            check('vop_vs_direct', vop_error, samples),
            check('semigroup_law', semigroup, samples * len(SEMIGROUP_PAIRS)),
            check('triangular_invariance', invariance, samples * len(INVARIANCE_TIMES)),
            check('admissibility_product', product.max_ratio, samples * len(PRODUCT_TIMES)),
        ]

    def sweep(self) -> Tuple[int, Dict]:
        header = ['n', 'dimension', 'abscissa', 'omega_a1', 'omega_a2', 'gamma',
                  'k1_const', 'n1_const', 'bound_const', 'verdict']
        rows, table = [], []
        for n in self.config.ladder:
            coupled = self.build_coupled(n)
            abscissa = spectral_abscissa(coupled).abscissa
            try:
                cert = self.certificate(coupled)
                values = [cert.omega_a1, cert.omega_a2, cert.gamma, cert.k1_const, cert.n1_const, cert.bound_const]
                verdict = 'holds' if cert.verdict else 'fails'
            except (NoDecayDetected, ShiftedBlockUnstable) as e:
                logger.error(f"Certificate at n={n} failed: {e.message}")
                values = [float('nan')] * 6
                verdict = e.code
            rows.append([str(n), str(coupled.dim), abscissa, *values, verdict])
            table.append({'n': n, 'abscissa': abscissa, 'verdict': verdict})
        write_csv(self.output_dir / 'sweep.csv', header, rows)
        return (0 if all(row['verdict'] == 'holds' for row in table) else 1), {'rows': table}


def run_command(command: str, config: RunConfig) -> Tuple[int, Dict]:
    if command not in COMMANDS:
        raise StabilityLabError(f"Unknown command {command}", {'command': command, 'known': list(COMMANDS)})
    return StabilityRunner(config).run(command)
