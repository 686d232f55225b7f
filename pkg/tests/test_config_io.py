import copy
import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from src.core.grids import Grid3D, SpinorField3D
from src.utils.config import load_config, parse_config
from src.utils.errors import CacheFormatError, ConfigError
from src.utils.field_io import read_field_file, read_header, read_spinor_field, write_field_file, write_spinor_field

REFERENCE_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'settings.json')


class TestRunConfig(unittest.TestCase):

    def setUp(self):
        with open(REFERENCE_CONFIG) as handle:
            self.data = json.load(handle)

    def test_reference_config(self):
        config, digest = load_config(REFERENCE_CONFIG)
        self.assertEqual(len(digest), 16)
        int(digest, 16)
        self.assertEqual(config.construction.delta, 1.5)
        self.assertIsInstance(config.construction.R, float)
        self.assertEqual(config.construction.R_list, [8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0])
        self.assertEqual(config.pair.p, 4.0)
        self.assertEqual(config.eigen.N, 96)

    def test_output_directory_does_not_change_hash(self):
        config = parse_config(self.data)
        moved = config.with_overrides(output_directory='/tmp/elsewhere')
        self.assertEqual(moved.output.directory, '/tmp/elsewhere')
        self.assertEqual(moved.hash, config.hash)
        changed = copy.deepcopy(self.data)
        changed['construction']['beta'] = 0.8
        self.assertNotEqual(parse_config(changed).hash, config.hash)

    def assertConfigKey(self, data, key):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(data)
        self.assertEqual(ctx.exception.key, key)

    def test_missing_and_unknown_keys(self):
        missing = copy.deepcopy(self.data)
        del missing['eigen']['N']
        self.assertConfigKey(missing, 'eigen.N')
        unknown = copy.deepcopy(self.data)
        unknown['grid']['colour'] = 'blue'
        self.assertConfigKey(unknown, 'grid.colour')
        extra_section = copy.deepcopy(self.data)
        extra_section['plots'] = {}
        self.assertConfigKey(extra_section, 'plots')

    def test_type_errors(self):
        boolean = copy.deepcopy(self.data)
        boolean['eigen']['N'] = True
        self.assertConfigKey(boolean, 'eigen.N')
        fractional = copy.deepcopy(self.data)
        fractional['eigen']['count'] = 6.5
        self.assertConfigKey(fractional, 'eigen.count')
        mode = copy.deepcopy(self.data)
        mode['construction']['mode_index'] = 'best'
        self.assertConfigKey(mode, 'construction.mode_index')

    def test_range_errors(self):
        pair = copy.deepcopy(self.data)
        pair['pair'] = {'p': 3, 'q': 3}
        self.assertConfigKey(pair, 'pair')
        delta = copy.deepcopy(self.data)
        delta['construction']['delta'] = 2.5
        self.assertConfigKey(delta, 'construction')
        ladder = copy.deepcopy(self.data)
        ladder['construction']['R_list'] = [8, 1.5]
        self.assertConfigKey(ladder, 'construction.R_list')
        padding = copy.deepcopy(self.data)
        padding['grid']['padding'] = 1.5
        self.assertConfigKey(padding, 'grid.padding')
        dt = copy.deepcopy(self.data)
        dt['evolve']['dt'] = 0
        self.assertConfigKey(dt, 'evolve.dt')

    def test_unreadable_files(self):
        with self.assertRaises(ConfigError):
            load_config('/nonexistent/settings.json')
        test_dir = tempfile.mkdtemp()
        try:
            path = os.path.join(test_dir, 'broken.json')
            with open(path, 'w') as handle:
                handle.write('{"construction": ')
            with self.assertRaises(ConfigError):
                load_config(path)
        finally:
            shutil.rmtree(test_dir)


class TestFieldFiles(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        rng = np.random.default_rng(21)
        self.array = rng.normal(size=(4, 3, 5)) + 1j * rng.normal(size=(4, 3, 5))

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_header_and_payload(self):
        path = os.path.join(self.test_dir, 'mode.bin')
        digest = write_field_file(path, 'MODE', self.array, L=8.0, N=3, config_hash='abc')
        with open(path, 'rb') as handle:
            first = handle.readline().decode('ascii')
            payload = handle.read()
        self.assertTrue(first.startswith('DIRAC-LAB-MODE 1 L=8.0 N=3 config_hash=abc shape=4x3x5 sha256='))
        self.assertEqual(len(payload), self.array.size * 16)
        self.assertTrue(np.array_equal(np.frombuffer(payload, dtype='<c16').reshape(4, 3, 5), self.array))
        header, array = read_field_file(path, 'MODE')
        self.assertEqual(header['sha256'], digest)
        self.assertEqual(read_header(path)['L'], '8.0')
        self.assertTrue(np.array_equal(array, self.array))

    def test_rejected_files(self):
        path = os.path.join(self.test_dir, 'mode.bin')
        write_field_file(path, 'MODE', self.array)
        with self.assertRaises(CacheFormatError):
            read_field_file(path, 'FIELD')
        with open(path, 'ab') as handle:
            handle.write(b'\x00' * 16)
        with self.assertRaises(CacheFormatError):
            read_field_file(path, 'MODE')
        with open(path, 'wb') as handle:
            handle.write(b'not a cache\n')
        with self.assertRaises(CacheFormatError):
            read_field_file(path, 'MODE')
        with self.assertRaises(CacheFormatError):
            write_field_file(path, 'MODE', self.array, label='two words')

    def test_checksum_mismatch(self):
        path = os.path.join(self.test_dir, 'mode.bin')
        write_field_file(path, 'MODE', self.array)
        with open(path, 'r+b') as handle:
            handle.seek(-1, os.SEEK_END)
            last = handle.read(1)
            handle.seek(-1, os.SEEK_END)
            handle.write(bytes([last[0] ^ 0x01]))
        with self.assertRaises(CacheFormatError):
            read_field_file(path, 'MODE')

    def test_spinor_field(self):
        grid = Grid3D((-1.0, 0.0, 2.5), (0.5, 0.25, 0.125), (2, 4, 2))
        rng = np.random.default_rng(22)
        field = SpinorField3D(grid, rng.normal(size=(4, 2, 4, 2)) + 0j, 1.25, 'f_R')
        path = os.path.join(self.test_dir, 'f.field')
        write_spinor_field(path, field, 'abc')
        loaded = read_spinor_field(path)
        self.assertEqual(loaded.grid, grid)
        self.assertEqual(loaded.time_tag, 1.25)
        self.assertEqual(loaded.label, 'f_R')
        self.assertTrue(np.array_equal(loaded.data, field.data))


if __name__ == '__main__':
    unittest.main()
