# stability_lab/tests/test_serializers.py
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from stability_lab.exceptions import DimensionMismatch
from stability_lab.exporters import (
    ArtifactValidationError, atomic_write_bytes, matrix_from_bytes, matrix_to_bytes, render_csv,
    render_json, validated_payload
)
from stability_lab.models import SystemId, SystemParams, QuadratureRule, RunConfig
from stability_lab.serializers import (
    RunConfigSerializer, CoupledSystemSpecSerializer, DecayCertificateSerializer, VerifyReportSerializer
)
from stability_lab.systems import catalog_lookup


def run_config_payload(**overrides):
    payload = {
        'system': 'WaveWave2018',
        'params': {'c0': 1.0, 'c1': 1.0, 'c2': 1.0},
        'n': 16,
        't_end': 5.0,
        'dt': 0.05,
        'quad': {'rule': 'GaussLegendre', 'panels': 64, 'nodes': 4},
        'gamma_fraction': 0.5,
        'output_dir': 'runs',
        'seed': 1,
        'initial_state': 'random',
        'horizons': [2.0, 0.5, 1.0],
        'admissibility_steps': 256,
        'ladder': [8, 16],
        'decay_t_max': 10.0,
        'decay_t_points': 50,
        'verify_samples': 20,
        'tolerances': {'semigroup_law': 1e-9},
    }
    payload.update(overrides)
    return payload


class RunConfigSerializerTests(SimpleTestCase):

    def test_valid_config_builds_run_config(self):
        serializer = RunConfigSerializer(data=run_config_payload())
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertIsInstance(config, RunConfig)
        self.assertIs(config.system, SystemId.WAVE_WAVE_2018)
        self.assertEqual(config.params, SystemParams(c0=1.0, c1=1.0, c2=1.0))
        self.assertIs(config.quad.rule, QuadratureRule.GAUSS_LEGENDRE)
        self.assertEqual(config.horizons, [0.5, 1.0, 2.0])
        self.assertFalse(config.export_matrices)

    def test_range_checks(self):
        for field, value in (('n', 3), ('dt', 0.0), ('t_end', -1.0), ('gamma_fraction', 1.0),
                             ('horizons', [0.0]), ('initial_state', 'warm')):
            with self.subTest(field=field):
                serializer = RunConfigSerializer(data=run_config_payload(**{field: value}))
                self.assertFalse(serializer.is_valid())
                self.assertIn(field, serializer.errors)

    def test_gain_rules_are_enforced(self):
        serializer = RunConfigSerializer(data=run_config_payload(params={'c1': 1.0, 'c2': 1.0}))
        self.assertFalse(serializer.is_valid())
        self.assertEqual(serializer.errors['params'], ['c0 required'])

    def test_representation_uses_enum_values(self):
        config = RunConfigSerializer(data=run_config_payload())
        config.is_valid()
        data = RunConfigSerializer(config.save()).data
        self.assertEqual(data['system'], 'WaveWave2018')
        self.assertEqual(data['quad']['rule'], 'GaussLegendre')
        self.assertIsNone(data['params']['q'])


class CoupledSpecSerializerTests(SimpleTestCase):

    def setUp(self):
        self.spec = catalog_lookup(SystemId.KRSTIC_WAVE, SystemParams(c0=1.0, c1=1.0, c2=1.0, q=0.5))

    def test_catalog_spec_is_accepted(self):
        serializer = CoupledSystemSpecSerializer(data=CoupledSystemSpecSerializer(self.spec).data)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save(), self.spec)

    def test_spec_that_departs_from_the_catalog_is_rejected(self):
        data = CoupledSystemSpecSerializer(replace(self.spec, coupling_channels=1)).data
        self.assertFalse(CoupledSystemSpecSerializer(data=data).is_valid())


class ReportSerializerTests(SimpleTestCase):

    def test_certificate_gamma_must_stay_below_both_rates(self):
        payload = {
            'system': 'WaveWave2018', 'm_a1': 1.5, 'omega_a1': 1.0, 'm_a2': 1.2, 'omega_a2': 2.0,
            'k_const': 0.5, 'n_const': 0.5, 'k1_const': 0.6, 'n1_const': 0.6,
            'gamma': 0.5, 'gamma_fraction': 0.5, 'bound_const': 2.7, 'norm_factor': 2.0,
            'saturation_horizon_control': 4.0, 'saturation_horizon_observation': 2.0,
            'verdict': True, 'max_ratio': 0.4, 't_grid': [0.0, 1.0], 'coupled_norms': [1.0, 0.5],
            'envelope': [5.4, 3.3],
        }
        self.assertTrue(DecayCertificateSerializer(data=payload).is_valid())
        payload['gamma'] = 1.0
        self.assertFalse(DecayCertificateSerializer(data=payload).is_valid())

    def test_verify_report_pass_flag_is_the_conjunction(self):
        checks = [
            {'name': 'semigroup_law', 'tolerance': 1e-9, 'residual': 1e-14, 'samples': 40, 'passed': True},
            {'name': 'vop_vs_direct', 'tolerance': 1e-6, 'residual': 1e-3, 'samples': 20, 'passed': False},
        ]
        payload = {'system': 'WaveWave2018', 'n': 16, 'seed': 1, 'passed': True, 'checks': checks, 'config': {}}
        self.assertFalse(VerifyReportSerializer(data=payload).is_valid())
        payload['passed'] = False
        self.assertTrue(VerifyReportSerializer(data=payload).is_valid())

    def test_validated_payload_raises_on_bad_documents(self):
        with self.assertRaises(ArtifactValidationError) as raised:
            validated_payload(VerifyReportSerializer, {'system': 'Nope'})
        self.assertEqual(raised.exception.code, 'artifact_validation_failed')


class ExporterTests(SimpleTestCase):

    def test_csv_uses_shortest_round_trip_floats(self):
        payload = render_csv(['t', 'energy'], [[0.1, 2], ['x', 1e-20]])
        self.assertEqual(payload, b't,energy\n0.1,2.0\nx,1e-20\n')

    def test_json_keeps_key_order(self):
        self.assertEqual(render_json({'b': 1, 'a': [1.5]}), b'{\n  "b": 1,\n  "a": [\n    1.5\n  ]\n}\n')

    def test_matrix_layout_is_column_major(self):
        matrix = np.arange(6.0).reshape(2, 3)
        payload = matrix_to_bytes(matrix)
        np.testing.assert_array_equal(np.frombuffer(payload[:16], dtype='<u8'), [2, 3])
        np.testing.assert_array_equal(np.frombuffer(payload[16:], dtype='<f8'), [0.0, 3.0, 1.0, 4.0, 2.0, 5.0])
        np.testing.assert_array_equal(matrix_from_bytes(payload), matrix)

    def test_truncated_matrix_is_rejected(self):
        payload = matrix_to_bytes(np.eye(2))
        with self.assertRaises(DimensionMismatch):
            matrix_from_bytes(payload[:-8])
        with self.assertRaises(DimensionMismatch):
            matrix_from_bytes(payload[:10])

    def test_atomic_write_leaves_no_temporary_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / 'nested' / 'out.csv'
            atomic_write_bytes(target, b'a\n')
            atomic_write_bytes(target, b'b\n')
            self.assertEqual(target.read_bytes(), b'b\n')
            self.assertEqual(sorted(p.name for p in target.parent.iterdir()), ['out.csv'])
