# stability_lab/tests/test_stability.py
import math
from dataclasses import asdict

import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import linear_sum_assignment

from stability_lab.exceptions import NoDecayDetected, ParameterError
from stability_lab.models import SystemId, SystemParams, AdmissibilityKind, AdmissibilityMethod
from stability_lab.numerics import (
    DiscreteGenerator, BoundaryInjection, BoundaryObservation, assemble_coupled,
    spectral_abscissa, operator_norm_at, fit_decay, composite_bound, admissibility_control,
    admissibility_observation, admissibility_limit, saturated_admissibility, theorem_bound_certificate,
    admissibility_product_check
)
from stability_lab.numerics.stability import resolved_steps
from stability_lab.serializers import DecayCertificateSerializer

from . import coupled_system, unit_states

SCALAR_W1 = math.sqrt((1.0 - math.exp(-2.0)) / 2.0)
T_GRID = np.linspace(0.0, 10.0, 50)


def scalar(value=-1.0):
    return DiscreteGenerator.from_matrix([[value]])


class SpectrumTests(SimpleTestCase):

    def test_abscissa_of_a_raw_matrix(self):
        report = spectral_abscissa(np.diag([-1.0, -3.0]))
        self.assertAlmostEqual(report.abscissa, -1.0)
        self.assertAlmostEqual(report.gap_to_axis, 1.0)

    def test_catalog_systems_are_stable(self):
        for system in SystemId:
            with self.subTest(system=system.value):
                self.assertLess(spectral_abscissa(coupled_system(system, n=16)).abscissa, 0.0)

    def test_coupled_spectrum_is_the_union_of_block_spectra(self):
        coupled = coupled_system(SystemId.WAVE_WAVE_2018, n=16, params=SystemParams(c0=2.0, c1=1.0, c2=2.0))
        combined = spectral_abscissa(coupled).eigenvalues
        blocks = np.concatenate([
            spectral_abscissa(coupled.a1).eigenvalues,
            spectral_abscissa(coupled.a2).eigenvalues,
        ])
        distance = np.abs(combined[:, None] - blocks[None, :])
        rows, cols = linear_sum_assignment(distance)
        self.assertLessEqual(np.max(distance[rows, cols]), 1e-6 * max(1.0, coupled.norm_bound))

    def test_damped_string_matches_its_continuum_modes(self):
        # w(0) = 0, w_x(1) = -c0 w_t(1): lambda = atanh(-1/c0) + i k pi
        c0 = 2.0
        a2 = coupled_system(SystemId.WAVE_WAVE_2018, n=32, params=SystemParams(c0=c0, c1=1.0, c2=1.0)).a2
        eigenvalues = spectral_abscissa(a2).eigenvalues
        real_part = math.atanh(-1.0 / c0)
        for k in (0, 1):
            with self.subTest(k=k):
                target = complex(real_part, k * math.pi)
                self.assertLess(np.min(np.abs(eigenvalues - target)), 0.05)

    def test_stable_on_refined_grids(self):
        for system in SystemId:
            for n in (32, 64):
                with self.subTest(system=system.value, n=n):
                    self.assertLess(spectral_abscissa(coupled_system(system, n=n)).abscissa, 0.0)

    def test_wave_systems_stay_stable_across_tip_damping(self):
        for system in (SystemId.WAVE_WAVE_2018, SystemId.KRSTIC_WAVE):
            for c0 in (0.25, 0.5, 2.0, 4.0):
                q = 1.0 if system is SystemId.KRSTIC_WAVE else None
                params = SystemParams(c0=c0, c1=1.0, c2=1.0, q=q)
                with self.subTest(system=system.value, c0=c0):
                    self.assertLess(spectral_abscissa(coupled_system(system, n=16, params=params)).abscissa, 0.0)


class DecayFitTests(SimpleTestCase):

    def test_scalar_decay(self):
        m, omega = fit_decay(scalar(-2.0), None, T_GRID)
        self.assertAlmostEqual(omega, 2.0, places=8)
        self.assertAlmostEqual(m, 1.0, places=8)

    def test_fit_bounds_every_sampled_norm(self):
        a2 = coupled_system(SystemId.WAVE_WAVE_2018, n=16, params=SystemParams(c0=2.0, c1=1.0, c2=1.0)).a2
        fit = fit_decay(a2, None, T_GRID)
        self.assertTrue(np.all(fit.norms <= fit.m * np.exp(-fit.omega * T_GRID) * (1 + 1e-12)))
        self.assertLessEqual(fit.omega, fit.spectral_rate * (1 + 1e-12))
        self.assertGreaterEqual(fit.m, 1.0 - 1e-12)

    def test_jordan_block_rate_stays_below_the_spectral_rate(self):
        fit = fit_decay(DiscreteGenerator.from_matrix([[-1.0, 1.0], [0.0, -1.0]]), None, T_GRID)
        self.assertLess(fit.omega, 1.0)
        self.assertGreater(fit.m, 1.0)
        self.assertTrue(np.all(fit.norms <= fit.m * np.exp(-fit.omega * T_GRID) * (1 + 1e-12)))

    def test_no_decay(self):
        with self.assertRaises(NoDecayDetected):
            fit_decay(scalar(0.0), None, T_GRID)
        with self.assertRaises(NoDecayDetected):
            fit_decay(scalar(0.5), None, T_GRID)

    def test_short_grid_is_rejected(self):
        with self.assertRaises(ParameterError):
            fit_decay(scalar(), None, [0.0, 1.0, 2.0])

    def test_operator_norm_with_gram(self):
        matrix = np.diag([-1.0, -2.0])
        self.assertAlmostEqual(operator_norm_at(matrix, None, 1.0), math.exp(-1.0))
        self.assertAlmostEqual(operator_norm_at(matrix, np.diag([1.0, 4.0]), 1.0), math.exp(-1.0))
        self.assertAlmostEqual(operator_norm_at(matrix, None, 0.0), 1.0)

    def test_composite_bound(self):
        self.assertEqual(composite_bound(1.0, 2.0, 3.0, 4.0), 14.0)
        self.assertEqual(composite_bound(5.0, 2.0, 0.5, 0.5), 7.0)


class AdmissibilityTests(SimpleTestCase):

    def test_scalar_closed_forms(self):
        generator = scalar()
        one = np.array([[1.0]])
        for method in (AdmissibilityMethod.INPUT_MAP_SVD, AdmissibilityMethod.GRAMIAN_EIG):
            with self.subTest(method=method.value):
                w = admissibility_control(generator, one, 1.0, steps=512, method=method)
                v = admissibility_observation(generator, one, 1.0, steps=512, method=method)
                self.assertAlmostEqual(w.value, SCALAR_W1, delta=1e-3)
                self.assertAlmostEqual(v.value, SCALAR_W1, delta=1e-3)
                self.assertEqual(w.time_steps, 512)
                self.assertIs(v.kind, AdmissibilityKind.OBSERVATION_V)

    def test_scalar_lyapunov_limit(self):
        limit = admissibility_limit(scalar(), np.array([[1.0]]), AdmissibilityKind.CONTROL_W)
        self.assertAlmostEqual(limit.value, math.sqrt(0.5), places=12)
        self.assertIsNone(limit.t0)
        self.assertIs(limit.method, AdmissibilityMethod.LYAPUNOV_LIMIT)

    def test_zero_operator(self):
        zero = np.zeros((1, 1))
        self.assertEqual(admissibility_limit(scalar(), zero, AdmissibilityKind.OBSERVATION_V).value, 0.0)
        self.assertEqual(admissibility_control(scalar(), zero, 1.0).value, 0.0)

    def test_nondecreasing_in_the_horizon(self):
        coupled = coupled_system(SystemId.WAVE_WAVE_2018, n=16)
        controls = [admissibility_control(coupled.a1, coupled.b, t0, steps=int(128 * t0)).value
                    for t0 in (0.5, 1.0, 2.0)]
        observations = [admissibility_observation(coupled.a2, coupled.c, t0, steps=int(128 * t0)).value
                        for t0 in (0.5, 1.0, 2.0)]
        for values in (controls, observations):
            self.assertTrue(all(later >= earlier * (1 - 1e-12) for earlier, later in zip(values, values[1:])))

    def test_beam_control_constant_saturates(self):
        coupled = coupled_system(SystemId.BEAM_BEAM_2008, n=16)
        values = {t0: admissibility_control(coupled.a1, coupled.b, t0, steps=int(128 * t0)).value
                  for t0 in (0.5, 1.0, 2.0, 4.0)}
        ordered = list(values.values())
        self.assertTrue(all(later >= earlier * (1 - 1e-12) for earlier, later in zip(ordered, ordered[1:])))
        self.assertLessEqual(values[4.0] / values[2.0], 1.05)

    def test_estimation_methods_agree(self):
        coupled = coupled_system(SystemId.KRSTIC_WAVE, n=16)
        svd = admissibility_control(coupled.a1, coupled.b, 1.0, method=AdmissibilityMethod.INPUT_MAP_SVD)
        eig = admissibility_control(coupled.a1, coupled.b, 1.0, method=AdmissibilityMethod.GRAMIAN_EIG)
        self.assertAlmostEqual(svd.value, eig.value, delta=1e-6 * svd.value)
        svd = admissibility_observation(coupled.a2, coupled.c, 1.0, method=AdmissibilityMethod.INPUT_MAP_SVD)
        eig = admissibility_observation(coupled.a2, coupled.c, 1.0, method=AdmissibilityMethod.GRAMIAN_EIG)
        self.assertAlmostEqual(svd.value, eig.value, delta=1e-6 * svd.value)

    def test_saturation_horizon(self):
        estimate = saturated_admissibility(scalar(), np.array([[1.0]]), AdmissibilityKind.CONTROL_W, t0=1.0)
        self.assertEqual(estimate.t0, 2.0)
        self.assertAlmostEqual(estimate.value, math.sqrt((1.0 - math.exp(-4.0)) / 2.0), delta=1e-3)

    def test_steps_refine_for_stiff_generators(self):
        self.assertEqual(resolved_steps(1.0, 256, 10.0), (1.0 / 256, 256))
        ds, count = resolved_steps(1.0, 8, 100.0)
        self.assertEqual(ds, 1.0 / 128)
        self.assertEqual(count, 128)

    def test_limit_needs_a_stable_block(self):
        with self.assertRaises(NoDecayDetected):
            admissibility_limit(scalar(0.5), np.array([[1.0]]), AdmissibilityKind.CONTROL_W)


class CertificateTests(SimpleTestCase):

    def test_catalog_systems_are_certified(self):
        for system in SystemId:
            with self.subTest(system=system.value):
                certificate = theorem_bound_certificate(coupled_system(system, n=16), gamma_fraction=0.5)
                self.assertTrue(certificate.verdict)
                self.assertLess(certificate.max_ratio, 1.0)
                self.assertAlmostEqual(certificate.gamma, 0.5 * min(certificate.omega_a1, certificate.omega_a2))
                self.assertGreaterEqual(certificate.bound_const, certificate.m_a2)
                self.assertEqual(len(certificate.coupled_norms), 50)
                self.assertEqual(certificate.system, system.value)
                self.assertTrue(DecayCertificateSerializer(data=asdict(certificate)).is_valid())

    def test_gamma_fraction_range(self):
        with self.assertRaises(ParameterError):
            theorem_bound_certificate(coupled_system(SystemId.WAVE_WAVE_2018), gamma_fraction=1.0)

    def test_unstable_first_block(self):
        a2 = coupled_system(SystemId.WAVE_WAVE_2018).a2
        a1 = DiscreteGenerator.from_matrix([[0.1, 1.0], [-1.0, 0.1]])
        b = BoundaryInjection(columns=np.array([[0.0], [1.0]]))
        c = BoundaryObservation(rows=np.ones((1, a2.dim)))
        with self.assertRaises(NoDecayDetected):
            theorem_bound_certificate(assemble_coupled(a1, a2, b, c))


class ProductBoundTests(SimpleTestCase):

    def test_coupling_convolution_is_bounded_by_k_times_n(self):
        for system in SystemId:
            with self.subTest(system=system.value):
                coupled = coupled_system(system)
                check = admissibility_product_check(coupled, unit_states(coupled.a2, 50), times=(1.0, 5.0))
                self.assertTrue(check.passed)
                self.assertLessEqual(check.max_ratio, 1.02)
                self.assertGreater(check.k_const * check.n_const, 0.0)
                self.assertEqual(check.samples, 50)
                self.assertEqual(tuple(check.times), (1.0, 5.0))

    def test_zero_observation_gives_zero_ratio(self):
        coupled = coupled_system(SystemId.WAVE_WAVE_2018)
        silent = BoundaryObservation(rows=np.zeros_like(coupled.c.rows))
        coupled = assemble_coupled(coupled.a1, coupled.a2, coupled.b, silent)
        check = admissibility_product_check(coupled, unit_states(coupled.a2, 5))
        self.assertEqual(check.n_const, 0.0)
        self.assertEqual(check.max_ratio, 0.0)
        self.assertTrue(check.passed)
