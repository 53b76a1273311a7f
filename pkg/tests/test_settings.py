"""
Tests for the config-file parsing.
"""
import os
import tempfile
import unittest
from pathlib import Path

from app.config.settings import CONFIG_KEYS, parse_config_value, read_config_file
from app.core.exceptions import ConfigError


class TestConfigValues(unittest.TestCase):
    """Test parse_config_value."""

    def test_typed_values(self):
        """Test the parsers registered per key."""
        self.assertEqual(parse_config_value('rounds', ' 12 '), 12)
        self.assertEqual(parse_config_value('exposure', '1e4'), 1e4)
        self.assertIs(parse_config_value('exact', 'yes'), True)
        self.assertIs(parse_config_value('exact', 'False'), False)
        self.assertEqual(parse_config_value('classes', 'I, III'), ('I', 'III'))
        self.assertEqual(parse_config_value('out_dir', 'runs/a'), Path('runs/a'))

    def test_invalid_values(self):
        """Test unknown keys and unparsable values."""
        with self.assertRaises(ConfigError):
            parse_config_value('colour', 'red')
        with self.assertRaises(ConfigError):
            parse_config_value('rounds', 'many')
        with self.assertRaises(ConfigError):
            parse_config_value('exact', 'maybe')
        with self.assertRaises(ConfigError):
            parse_config_value('classes', ' , ')

    def test_every_key_documented(self):
        """Test that each key has a parser and a description."""
        for key, (parser, description) in CONFIG_KEYS.items():
            self.assertTrue(callable(parser), key)
            self.assertTrue(description, key)


class TestConfigFile(unittest.TestCase):
    """Test read_config_file."""

    def setUp(self):
        """Set up test fixtures."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'run.cfg')

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text):
        with open(self.path, 'w') as handle:
            handle.write(text)

    def test_read(self):
        """Test comments, blank lines and trailing comments."""
        self._write("# duality run\n\nseed = 42\nnoise_weight = 0.03  # measured\nclasses = I,II\n")
        values = read_config_file(self.path)
        self.assertEqual(values, {'seed': 42, 'noise_weight': 0.03, 'classes': ('I', 'II')})

    def test_malformed_line(self):
        """Test that a line without '=' is rejected."""
        self._write("seed 42\n")
        with self.assertRaises(ConfigError):
            read_config_file(self.path)

    def test_unknown_key(self):
        """Test that unknown keys are rejected."""
        self._write("window_glass = bk7\n")
        with self.assertRaises(ConfigError):
            read_config_file(self.path)

    def test_missing_file(self):
        """Test that a missing file raises ConfigError."""
        with self.assertRaises(ConfigError):
            read_config_file(os.path.join(self.tmp.name, 'absent.cfg'))


if __name__ == '__main__':
    unittest.main()
