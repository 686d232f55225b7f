import os
import shutil
import tempfile
import unittest

import h5py
import pandas as pd

from src.core.run_archive import ARCHIVE_NAME, LabArchive
from src.utils.errors import ArchiveError


class TestLabArchive(unittest.TestCase):

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.archive = LabArchive.in_directory(self.test_dir)
        self.ladder = pd.DataFrame({'R': [8.0, 16.0], 'quot_epo75': [1.5, 1.75], 'valid': [True, False]})

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_create_archive(self):
        self.assertTrue(os.path.exists(os.path.join(self.test_dir, ARCHIVE_NAME)))
        info = self.archive.get_archive_info()
        self.assertEqual(info['total runs'], 0)
        self.assertEqual(info['archive info']['version'], '1.0')
        self.assertTrue(self.archive.list_runs().empty)

    def test_add_and_read_run(self):
        manifest = {'command': 'scaling', 'config_hash': 'abc123', 'exponents': {'mu': 0.075}}
        fits = [{'column': 'norm_fR_L2', 'slope': 1.15, 'verdict': True}]
        run_id = self.archive.add_run('scaling', manifest, {'ladder': self.ladder}, fits, 'blow_up', 0)

        runs = self.archive.list_runs()
        self.assertEqual(len(runs), 1)
        self.assertEqual(runs.iloc[0]['Run ID'], run_id)
        self.assertEqual(runs.iloc[0]['Config Hash'], 'abc123')
        self.assertEqual(runs.iloc[0]['Verdict'], 'blow_up')
        self.assertEqual(self.archive.get_manifest(run_id)['exponents']['mu'], 0.075)
        self.assertEqual(self.archive.get_fits(run_id), fits)

        table = self.archive.get_run_table(run_id, 'ladder')
        self.assertEqual(list(table.columns), ['R', 'quot_epo75', 'valid'])
        self.assertEqual(list(table['R']), [8.0, 16.0])
        self.assertEqual(list(table['valid']), [True, False])

    def test_string_and_empty_tables(self):
        fits = pd.DataFrame({'column': ['norm_fR_L2', 'quot_epo25'], 'slope': [1.1, 0.02]})
        empty = pd.DataFrame({'R': pd.Series([], dtype=float)})
        run_id = self.archive.add_run('scaling', {'config_hash': 'x'}, {'fits': fits, 'free_control': empty})
        table = self.archive.get_run_table(run_id, 'fits')
        self.assertEqual(list(table['column']), ['norm_fR_L2', 'quot_epo25'])
        self.assertEqual(len(self.archive.get_run_table(run_id, 'free_control')), 0)

    def test_latest_and_delete(self):
        first = self.archive.add_run('eigen', {'config_hash': 'a'})
        second = self.archive.add_run('scaling', {'config_hash': 'a'})
        self.assertEqual(self.archive.latest_run(), second)
        self.assertEqual(self.archive.latest_run('eigen'), first)
        self.archive.delete_run(second)
        self.assertEqual(self.archive.latest_run(), first)
        self.assertEqual(self.archive.get_archive_info()['commands'], {'eigen': 1})

    def test_exports(self):
        run_id = self.archive.add_run('scaling', {'config_hash': 'a'}, {'ladder': self.ladder})
        listing = os.path.join(self.test_dir, 'runs.csv')
        self.archive.export_listing(listing)
        self.assertEqual(len(pd.read_csv(listing)), 1)
        exported = os.path.join(self.test_dir, 'ladder.csv')
        self.archive.export_table(run_id, 'ladder', exported)
        self.assertEqual(list(pd.read_csv(exported)['quot_epo75']), [1.5, 1.75])

    def test_errors(self):
        with self.assertRaises(ArchiveError):
            self.archive.latest_run()
        with self.assertRaises(ArchiveError):
            self.archive.get_manifest('missing')
        run_id = self.archive.add_run('eigen', {'config_hash': 'a'})
        with self.assertRaises(ArchiveError):
            self.archive.get_run_table(run_id, 'ladder')
        with self.assertRaises(ArchiveError):
            self.archive.delete_run('missing')

    def test_invalid_structure(self):
        path = os.path.join(self.test_dir, 'other.h5')
        with h5py.File(path, 'w') as f:
            f.create_group('something_else')
        with self.assertRaises(ArchiveError):
            LabArchive(path)
        garbage = os.path.join(self.test_dir, 'garbage.h5')
        with open(garbage, 'w') as handle:
            handle.write('not hdf5')
        with self.assertRaises(ArchiveError):
            LabArchive(garbage)


if __name__ == '__main__':
    unittest.main()
