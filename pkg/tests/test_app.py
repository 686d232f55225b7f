import contextlib
import io
import json
import os
import shutil
import tempfile
import unittest

from main import main
from src.core.app import (EXIT_NO_CERTIFICATE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VERDICT, LabApp,
                          exit_code_for)
from src.utils.config import load_config
from src.utils.errors import (ArchiveError, BoxTruncationError, ConfigError, DomainError, EigenSolveError, LabError,
                              PaddingError, ParameterError, QuadratureError)

REFERENCE_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'settings.json')


class TestExitCodes(unittest.TestCase):

    def test_mapping(self):
        for error in (EigenSolveError('x'), QuadratureError('x'), PaddingError('x'), BoxTruncationError('x')):
            self.assertEqual(exit_code_for(error), EXIT_NUMERICAL)
        for error in (ConfigError('x'), ParameterError('x'), DomainError('x'), ArchiveError('x')):
            self.assertEqual(exit_code_for(error), EXIT_USAGE)
        self.assertEqual(exit_code_for(LabError('x')), EXIT_VERDICT)
        self.assertEqual(EXIT_NO_CERTIFICATE, 4)


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def run_main(self, *argv):
        buffer = io.StringIO()
        with contextlib.redirect_stdout(buffer):
            code = main(list(argv))
        return code, buffer.getvalue()

    def test_exponents(self):
        code, output = self.run_main('exponents', '4', '4', '1.5', '0.8', '0.75')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('sigma = 0.5', output)
        self.assertIn('mu = 0.075 (3/40)', output)
        self.assertIn('beta_max = 0.9', output)

    def test_exponents_with_infinite_p(self):
        code, output = self.run_main('exponents', 'inf', '2', '1.5', '0.8', '0.75')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('excluded endpoint', output)

    def test_exponents_usage_errors(self):
        self.assertEqual(self.run_main('exponents', '3', '3', '1.5', '0.8', '0.75')[0], EXIT_USAGE)
        self.assertEqual(self.run_main('exponents', 'four', '4', '1.5', '0.8', '0.75')[0], EXIT_USAGE)

    def test_bad_config(self):
        path = os.path.join(self.test_dir, 'settings.json')
        with open(REFERENCE_CONFIG) as handle:
            data = json.load(handle)
        data['pair'] = {'p': 3, 'q': 3}
        with open(path, 'w') as handle:
            json.dump(data, handle)
        self.assertEqual(self.run_main('--config', path, 'report')[0], EXIT_USAGE)
        self.assertEqual(self.run_main('--config', os.path.join(self.test_dir, 'missing.json'), 'report')[0],
                         EXIT_USAGE)

    def test_report_on_empty_output(self):
        out = os.path.join(self.test_dir, 'out')
        code, output = self.run_main('--config', REFERENCE_CONFIG, '--out', out, 'report')
        self.assertEqual(code, EXIT_OK)
        self.assertIn('No runs archived yet', output)
        self.assertTrue(os.path.exists(os.path.join(out, 'lab_runs.h5')))

    def test_report_table_without_runs(self):
        out = os.path.join(self.test_dir, 'out')
        code, _ = self.run_main('--config', REFERENCE_CONFIG, '--out', out, 'report', '--table', 'ladder')
        self.assertEqual(code, EXIT_USAGE)


class TestLabApp(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        config, _ = load_config(REFERENCE_CONFIG)
        self.app = LabApp(config.with_overrides(output_directory=self.test_dir), seed=3)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_unknown_command(self):
        self.assertEqual(self.app.run('plot'), EXIT_USAGE)

    def test_config_views(self):
        self.assertEqual(self.app.pair().sigma, 0.5)
        self.assertEqual(self.app.policy().max_points, 160)
        self.assertEqual(self.app.ladder_settings(False).term_diagnostics, False)
        self.assertEqual(self.app.eigen_grid().N, 96)
        self.assertEqual(self.app.config_hash, load_config(REFERENCE_CONFIG)[1])


class TestSmallCampaign(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        with open(REFERENCE_CONFIG) as handle:
            data = json.load(handle)
        data['construction'].update({'R': 4, 'R_list': [4, 5, 6]})
        data['eigen']['N'] = 48
        data['grid'].update({'points_per_mode_scale': 3, 'max_points': 32})
        self.config_path = os.path.join(self.test_dir, 'settings.json')
        with open(self.config_path, 'w') as handle:
            json.dump(data, handle)
        self.out = os.path.join(self.test_dir, 'out')

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_eigen_then_scaling(self):
        self.assertEqual(main(['--config', self.config_path, '--out', self.out, 'eigen']), EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.out, 'eigen', 'eigen_summary.csv')))

        config, digest = load_config(self.config_path)
        app = LabApp(config.with_overrides(output_directory=self.out))
        code = app.run('scaling', free_control=False)
        self.assertTrue(app.modes_reused)
        # three rows cannot fill a blow-up tail of four
        self.assertEqual(code, EXIT_VERDICT)
        with open(os.path.join(self.out, 'scaling', 'ladder.csv')) as handle:
            self.assertEqual(handle.readline().strip(), f'# config_hash={digest}')
        with open(os.path.join(self.out, 'scaling', 'manifest.json')) as handle:
            manifest = json.load(handle)
        self.assertEqual(manifest['blow_up']['verdict'], 'no_blow_up')
        self.assertEqual(manifest['config_hash'], digest)

        runs = app.archive.list_runs()
        self.assertEqual(list(runs['Command']), ['eigen', 'scaling'])
        self.assertEqual(len(app.archive.get_run_table(app.archive.latest_run(), 'ladder')), 3)


if __name__ == '__main__':
    unittest.main()
