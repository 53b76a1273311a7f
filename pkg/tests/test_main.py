"""
Tests for the command-line entry point.
"""
import io
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pandas as pd

from app.main import build_parser, load_config, main


class TestLoadConfig(unittest.TestCase):
    """Test the merge of config file and CLI flags."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.config_path = os.path.join(self.tmp.name, 'run.cfg')
        with open(self.config_path, 'w') as handle:
            handle.write("rounds = 3\nexposure = 10\nseed = 1\n")

    def tearDown(self):
        self.tmp.cleanup()

    def test_cli_overrides_file(self):
        """Test that flags win over file values and file values over defaults."""
        args = build_parser().parse_args(['--seed', '5', 'sweep', '--rounds', '7', '--config', self.config_path])
        config = load_config(args)
        self.assertEqual(config.rounds, 7)
        self.assertEqual(config.exposure, 10.0)
        self.assertEqual(config.seed, 5)
        self.assertFalse(config.exact)

    def test_fresnel_flags(self):
        """Test the Fresnel-specific overrides."""
        args = build_parser().parse_args(['fresnel', '--refractive-index', '1.45', '--step', '1', '--exact'])
        config = load_config(args)
        self.assertEqual(config.refractive_index, 1.45)
        self.assertEqual(config.fresnel_step, 1.0)
        self.assertTrue(config.exact)

    def test_class_list(self):
        """Test parsing of the class list."""
        args = build_parser().parse_args(['bagan', '--classes', 'I,III'])
        self.assertEqual(load_config(args).classes, ('I', 'III'))


class TestMain(unittest.TestCase):
    """Test main()."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.out_dir = Path(self.tmp.name) / 'runs'

    def tearDown(self):
        self.tmp.cleanup()

    def _run(self, argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with patch('sys.stdout', stdout), patch('sys.stderr', stderr):
            code = main(argv)
        return code, stdout.getvalue(), stderr.getvalue()

    def test_fresnel_command(self):
        """Test that the fresnel subcommand writes its CSV and JSON."""
        code, stdout, _ = self._run(['fresnel', '--out-dir', str(self.out_dir), '--step', '1'])
        self.assertEqual(code, 0)
        frame = pd.read_csv(self.out_dir / 'fresnel.csv')
        self.assertEqual(len(frame), 90)
        document = json.loads((self.out_dir / 'fresnel.json').read_text())
        self.assertEqual(document['manifest']['subcommand'], 'fresnel')
        self.assertIn('brewster_angle_deg', document['summary'])
        self.assertIn('fresnel.csv', stdout)

    def test_exact_tomo_command(self):
        """Test an exact single-state tomography run."""
        code, _, _ = self._run(['--exact', 'tomo', '--class', 'II', '--theta', '0.3',
                                '--out-dir', str(self.out_dir)])
        self.assertEqual(code, 0)
        document = json.loads((self.out_dir / 'tomo.json').read_text())
        self.assertTrue(document['manifest']['exact'])
        self.assertAlmostEqual(document['summary']['sum_of_squares'], 0.25, delta=1e-6)

    def test_error_line(self):
        """Test that a failing run exits with 1 and a JSON error line."""
        missing = os.path.join(self.tmp.name, 'absent.csv')
        code, _, stderr = self._run(['tomo', '--counts', missing, '--out-dir', str(self.out_dir)])
        self.assertEqual(code, 1)
        lines = [line for line in stderr.splitlines() if line.startswith('{')]
        error = json.loads(lines[-1])
        self.assertEqual(error['error'], 'TomographyError')
        self.assertIn('absent.csv', error['message'])

    def test_bad_config_value(self):
        """Test that an invalid config file is reported as ConfigError."""
        config_path = os.path.join(self.tmp.name, 'bad.cfg')
        with open(config_path, 'w') as handle:
            handle.write("rounds = lots\n")
        code, _, stderr = self._run(['--config', config_path, 'sweep'])
        self.assertEqual(code, 1)
        lines = [line for line in stderr.splitlines() if line.startswith('{')]
        self.assertEqual(json.loads(lines[-1])['error'], 'ConfigError')

    def test_argument_error(self):
        """Test that unknown classes exit with code 2 and a JSON error line."""
        stderr = io.StringIO()
        with patch('sys.stdout', io.StringIO()), patch('sys.stderr', stderr):
            with self.assertRaises(SystemExit) as context:
                main(['sweep', '--classes', 'IV'])
        self.assertEqual(context.exception.code, 2)
        lines = [line for line in stderr.getvalue().splitlines() if line.startswith('{')]
        error = json.loads(lines[-1])
        self.assertEqual(error['error'], 'ArgumentError')
        self.assertIn('IV', error['message'])

    def test_missing_subcommand(self):
        """Test that a missing subcommand is reported the same way."""
        stderr = io.StringIO()
        with patch('sys.stderr', stderr):
            with self.assertRaises(SystemExit) as context:
                main(['--seed', '3'])
        self.assertEqual(context.exception.code, 2)
        lines = [line for line in stderr.getvalue().splitlines() if line.startswith('{')]
        self.assertEqual(json.loads(lines[-1])['error'], 'ArgumentError')


if __name__ == '__main__':
    unittest.main()
