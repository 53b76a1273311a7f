"""
Tests for the utility functions.
"""
import unittest

import numpy as np

from app.core.utils import (
    STREAM_COUNTS,
    STREAM_MONTE_CARLO,
    format_float,
    get_class_display_name,
    json_safe,
    make_generator,
)


class TestRandomStreams(unittest.TestCase):
    """Test make_generator."""

    def test_reproducible(self):
        """Test that equal seeds and keys give equal draws."""
        first = make_generator(7, STREAM_COUNTS, 1, 2).poisson(100.0, size=5)
        second = make_generator(7, STREAM_COUNTS, 1, 2).poisson(100.0, size=5)
        np.testing.assert_array_equal(first, second)

    def test_streams_differ(self):
        """Test that different keys or seeds give different draws."""
        base = make_generator(7, STREAM_COUNTS, 1).random(4)
        self.assertFalse(np.array_equal(base, make_generator(7, STREAM_MONTE_CARLO, 1).random(4)))
        self.assertFalse(np.array_equal(base, make_generator(8, STREAM_COUNTS, 1).random(4)))

    def test_order_independent(self):
        """Test that drawing one stream does not shift another."""
        untouched = make_generator(3, STREAM_MONTE_CARLO, 0, 5).random(3)
        make_generator(3, STREAM_MONTE_CARLO, 0, 4).random(1000)
        np.testing.assert_array_equal(untouched, make_generator(3, STREAM_MONTE_CARLO, 0, 5).random(3))


class TestFormatting(unittest.TestCase):
    """Test the display and serialization helpers."""

    def test_get_class_display_name(self):
        """Test the get_class_display_name function."""
        self.assertEqual(get_class_display_name('I'), "Class I (4 Brewster windows)")
        self.assertEqual(get_class_display_name('III'), "Class III (PBS)")
        self.assertEqual(get_class_display_name('X'), "Custom channel")

    def test_format_float(self):
        """Test the format_float function."""
        self.assertEqual(format_float(0.5, 3), "0.500")
        self.assertEqual(format_float(float('inf')), "inf")
        self.assertEqual(format_float(None), "n/a")

    def test_json_safe(self):
        """Test numpy values, infinities and complex numbers."""
        value = json_safe({
            'a': np.float64(0.25),
            'b': np.int64(3),
            'c': np.array([1.0, np.inf]),
            'd': float('nan'),
            'e': np.bool_(True),
            'f': 1 + 2j,
        })
        self.assertEqual(value, {'a': 0.25, 'b': 3, 'c': [1.0, 'inf'], 'd': None, 'e': True,
                                 'f': {'re': 1.0, 'im': 2.0}})
        self.assertIsInstance(value['b'], int)


if __name__ == '__main__':
    unittest.main()
