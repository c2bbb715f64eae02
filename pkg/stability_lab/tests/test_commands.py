# stability_lab/tests/test_commands.py
import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.test import SimpleTestCase

from stability_lab.exporters import read_matrix_binary


class StabilityCommandTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_command(self, action, out=None, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command('stability', action, out=str(out or self.out), stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue()

    def run_failing(self, action, **options):
        stderr = StringIO()
        with self.assertRaises(SystemExit) as raised:
            call_command('stability', action, out=str(self.out), stdout=StringIO(), stderr=stderr, **options)
        return raised.exception.code, stderr.getvalue()

    def read_json(self, name, root=None):
        return json.loads((root or self.out).joinpath(name).read_text(encoding='utf-8'))

    def read_csv(self, name):
        with (self.out / name).open(newline='') as handle:
            return list(csv.reader(handle))


class VerifyCommandTests(StabilityCommandTestCase):

    def test_wave_wave_verifies_and_is_reproducible(self):
        self.run_command('verify', system='WaveWave2018', n=16)
        report = self.read_json('verify.json')
        self.assertTrue(report['passed'])
        self.assertEqual(
            [check['name'] for check in report['checks']],
            ['factorization_exactness', 'resolvent_identity', 'vop_vs_direct', 'semigroup_law', 'triangular_invariance',
             'admissibility_product'],
        )
        for check in report['checks']:
            self.assertLessEqual(check['residual'], check['tolerance'])
        self.assertNotIn('output_dir', report['config'])

        second = self.out / 'again'
        self.run_command('verify', out=second, system='WaveWave2018', n=16)
        self.assertEqual((self.out / 'verify.json').read_bytes(), (second / 'verify.json').read_bytes())


class ArtifactCommandTests(StabilityCommandTestCase):

    def test_zero_initial_state_keeps_zero_energy(self):
        self.run_command('simulate', system='WaveWave2018', n=8, t_end=1.0, dt=0.1, initial_state='zero')
        rows = self.read_csv('energy.csv')
        self.assertEqual(rows[0], ['t', 'energy', 'energy_first', 'energy_second'])
        self.assertEqual(len(rows), 12)
        self.assertTrue(all(value == '0.0' for row in rows[1:] for value in row[1:]))
        self.assertTrue((self.out / 'trajectory.csv').exists())
        fields = self.read_csv('original_fields.csv')
        self.assertEqual(len(fields[0]), 1 + 2 * 9)

    def test_beam_spectrum_lies_in_the_left_half_plane(self):
        self.run_command('spectrum', system='BeamBeam2008', n=20, export_matrices=True)
        rows = self.read_csv('eigenvalues.csv')
        self.assertEqual(rows[0], ['re', 'im'])
        self.assertTrue(all(float(row[0]) < 0 for row in rows[1:]))
        report = self.read_json('spectrum.json')
        self.assertEqual(report['dimension'], len(rows) - 1)
        generator = read_matrix_binary(self.out / 'matrices' / 'generator.bin')
        self.assertEqual(generator.shape, (report['dimension'], report['dimension']))

    def test_decay_certificate(self):
        self.run_command('decay', system='WaveWave2018', n=16)
        certificate = self.read_json('certificate.json')
        self.assertTrue(certificate['verdict'])
        self.assertEqual(len(certificate['t_grid']), 50)
        self.assertEqual(certificate['config']['gamma_fraction'], 0.5)

    def test_admissibility_report(self):
        self.run_command('admissibility', system='WaveWave2018', n=8)
        report = self.read_json('admissibility.json')
        self.assertEqual([entry['t0'] for entry in report['control']], [0.5, 1.0, 2.0, 4.0])
        for key in ('control', 'observation'):
            values = [entry['value'] for entry in report[key]]
            self.assertTrue(all(later >= earlier * (1 - 1e-12) for earlier, later in zip(values, values[1:])))
        self.assertEqual(report['control_limit']['method'], 'LyapunovLimit')
        self.assertIsNone(report['observation_limit']['t0'])

    def test_sweep_table(self):
        self.run_command('sweep', system='KrsticWave', ladder='8,12')
        rows = self.read_csv('sweep.csv')
        self.assertEqual(rows[0][0], 'n')
        self.assertEqual([row[0] for row in rows[1:]], ['8', '12'])

    def test_list_systems(self):
        output = self.run_command('list-systems')
        systems = self.read_json('systems.json')
        self.assertEqual(len(systems), 4)
        self.assertIn('KrsticWave', output)


class ConfigResolutionTests(StabilityCommandTestCase):

    def test_flags_override_the_config_file(self):
        config = self.out / 'config.json'
        config.write_text(json.dumps({'n': 8, 'seed': 5, 'params': {'c0': 2.0}}), encoding='utf-8')
        self.run_command('list-systems', config=str(config), seed=7)
        resolved = self.read_json('run_config.json')
        self.assertEqual(resolved['n'], 8)
        self.assertEqual(resolved['seed'], 7)
        self.assertEqual(resolved['params']['c0'], 2.0)
        self.assertEqual(resolved['params']['c1'], 1.0)

    def test_required_gains_default_to_one(self):
        self.run_command('list-systems', system='KrsticWave')
        params = self.read_json('run_config.json')['params']
        self.assertEqual(params, {'c0': 1.0, 'c1': 1.0, 'c2': 1.0, 'c3': None, 'q': 1.0})

    def test_invalid_values_exit_with_status_two(self):
        code, stderr = self.run_failing('decay', gamma_fraction=1.5)
        self.assertEqual(code, 2)
        error = json.loads(stderr)
        self.assertEqual(error['error'], 'config_error')
        self.assertIn('gamma_fraction', error['details']['errors'])

    def test_unused_gain_is_a_config_error(self):
        code, stderr = self.run_failing('spectrum', system='WaveWave2018', q=1.0)
        self.assertEqual(code, 2)
        self.assertIn('q is only used by KrsticWave', stderr)

    def test_missing_and_malformed_config_files(self):
        code, _ = self.run_failing('verify', config=str(self.out / 'absent.json'))
        self.assertEqual(code, 2)
        broken = self.out / 'broken.json'
        broken.write_text('{"n": ', encoding='utf-8')
        code, _ = self.run_failing('verify', config=str(broken))
        self.assertEqual(code, 2)
        unknown = self.out / 'unknown.json'
        unknown.write_text('{"resolution": 8}', encoding='utf-8')
        code, stderr = self.run_failing('verify', config=str(unknown))
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(stderr)['details']['unknown'], ['resolution'])
