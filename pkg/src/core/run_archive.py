import json
import os
import uuid
from datetime import datetime

import h5py
import numpy as np
import pandas as pd

from src.utils.errors import ArchiveError
from src.utils.logger import setup_logger

logger = setup_logger('RunArchive')

ARCHIVE_NAME = 'lab_runs.h5'
ARCHIVE_VERSION = '1.0'
LISTING_COLUMNS = ['Run ID', 'Command', 'Created', 'Config Hash', 'Verdict', 'Exit Code', 'Tables']


class LabArchive:
    """
    HDF5 archive of lab runs.

    Archive Structure (HDF5):
    /
    ├── metadata/
    │   ├── archive_info     # Archive metadata (JSON)
    │   └── run_index        # Index of all runs (JSON)
    └── runs/
        └── {run_id}/
            ├── manifest     # Run manifest (JSON)
            ├── fits         # Fit results (JSON)
            └── tables/
                └── {name}   # One compound dataset per table, gzip compressed
    """

    def __init__(self, path):
        self.path = path
        if os.path.exists(path):
            self._check_structure()
        else:
            self.create_archive()

    @classmethod
    def in_directory(cls, directory):
        os.makedirs(directory, exist_ok=True)
        return cls(os.path.join(directory, ARCHIVE_NAME))

    def create_archive(self):
        logger.debug(f"Creating run archive at: {self.path}")
        with h5py.File(self.path, 'w') as f:
            metadata_group = f.create_group('metadata')
            f.create_group('runs')
            archive_info = {
                'created': datetime.now().isoformat(),
                'version': ARCHIVE_VERSION,
                'description': 'Magnetic Dirac lab run archive'
            }
            metadata_group.create_dataset('archive_info', data=json.dumps(archive_info))
            metadata_group.create_dataset('run_index', data=json.dumps({}))
        logger.info(f"Successfully created run archive: {self.path}")

    def _check_structure(self):
        try:
            with h5py.File(self.path, 'r') as f:
                if 'metadata' not in f or 'runs' not in f:
                    raise ArchiveError(f"Invalid run archive structure in {self.path}: missing required groups")
                archive_info = json.loads(f['metadata']['archive_info'][()])
                logger.debug(f"Archive version: {archive_info.get('version', 'unknown')}")
        except OSError as e:
            raise ArchiveError(f"Cannot open run archive {self.path}: {e}")

    def _read_index(self, f):
        return json.loads(f['metadata']['run_index'][()])

    def _write_index(self, f, index):
        del f['metadata']['run_index']
        f['metadata'].create_dataset('run_index', data=json.dumps(index))

    def add_run(self, command, manifest, tables=None, fits=None, verdict='', exit_code=0):
        """Store one run; tables are pandas DataFrames keyed by name. Returns the run id."""
        run_id = str(uuid.uuid4())
        tables = tables or {}
        logger.debug(f"Archiving {command} run {run_id} with tables {sorted(tables)}")
        with h5py.File(self.path, 'a') as f:
            run_group = f['runs'].create_group(run_id)
            run_group.create_dataset('manifest', data=json.dumps(manifest, sort_keys=True, default=str))
            run_group.create_dataset('fits', data=json.dumps(fits or [], default=str))
            table_group = run_group.create_group('tables')
            for name, frame in tables.items():
                self._write_table(table_group, name, frame)

            index = self._read_index(f)
            index[run_id] = {
                'command': command,
                'created': datetime.now().isoformat(),
                'config_hash': manifest.get('config_hash', ''),
                'verdict': verdict,
                'exit_code': int(exit_code),
                'tables': sorted(tables),
            }
            self._write_index(f, index)
        logger.info(f"Successfully archived {command} run with ID: {run_id}")
        return run_id

    @staticmethod
    def _write_table(group, name, frame):
        records = frame.copy()
        for column in records.columns:
            if records[column].dtype == object:
                records[column] = records[column].astype(str)
        array = records.to_records(index=False)
        dtype = [(n, h5py.string_dtype() if array.dtype[n].kind in 'OU' else array.dtype[n])
                 for n in array.dtype.names]
        data = np.array(array.tolist(), dtype=dtype)
        if data.size == 0:
            group.create_dataset(name, data=data)
        else:
            group.create_dataset(name, data=data, compression='gzip', compression_opts=6)

    def list_runs(self):
        """All runs as a DataFrame, oldest first."""
        with h5py.File(self.path, 'r') as f:
            index = self._read_index(f)
        rows = [[run_id, info.get('command', 'unknown'), info.get('created', ''), info.get('config_hash', ''),
                 info.get('verdict', ''), info.get('exit_code', -1), ', '.join(info.get('tables', []))]
                for run_id, info in index.items()]
        frame = pd.DataFrame(rows, columns=LISTING_COLUMNS)
        logger.debug(f"Retrieved {len(frame)} runs from archive")
        return frame.sort_values('Created').reset_index(drop=True)

    def _run_group(self, f, run_id):
        if run_id not in f['runs']:
            raise ArchiveError(f"Run ID '{run_id}' not found in archive")
        return f['runs'][run_id]

    def get_manifest(self, run_id):
        with h5py.File(self.path, 'r') as f:
            return json.loads(self._run_group(f, run_id)['manifest'][()])

    def get_fits(self, run_id):
        with h5py.File(self.path, 'r') as f:
            return json.loads(self._run_group(f, run_id)['fits'][()])

    def get_run_table(self, run_id, name):
        with h5py.File(self.path, 'r') as f:
            tables = self._run_group(f, run_id)['tables']
            if name not in tables:
                raise ArchiveError(f"Run '{run_id}' has no table '{name}'")
            data = tables[name][()]
        frame = pd.DataFrame.from_records(data)
        for column in frame.columns:
            if frame[column].dtype == object:
                frame[column] = frame[column].map(lambda v: v.decode('utf-8') if isinstance(v, bytes) else v)
        return frame

    def latest_run(self, command=None):
        runs = self.list_runs()
        if command is not None:
            runs = runs[runs['Command'] == command]
        if runs.empty:
            raise ArchiveError(f"No runs for command '{command}' in archive" if command else "Archive holds no runs")
        return runs.iloc[-1]['Run ID']

    def delete_run(self, run_id):
        with h5py.File(self.path, 'a') as f:
            self._run_group(f, run_id)
            del f['runs'][run_id]
            index = self._read_index(f)
            index.pop(run_id, None)
            self._write_index(f, index)
        logger.info(f"Successfully deleted run '{run_id}' from archive")

    def export_listing(self, path):
        self.list_runs().to_csv(path, index=False)
        logger.info(f"Successfully exported run listing to {path}")

    def export_table(self, run_id, name, path):
        self.get_run_table(run_id, name).to_csv(path, index=False, float_format='%.12e')
        logger.info(f"Successfully exported table '{name}' of run {run_id} to {path}")

    def get_archive_info(self):
        """Archive metadata and statistics."""
        with h5py.File(self.path, 'r') as f:
            archive_info = json.loads(f['metadata']['archive_info'][()])
            index = self._read_index(f)
        commands = {}
        for info in index.values():
            command = info.get('command', 'unknown')
            commands[command] = commands.get(command, 0) + 1
        size_kb = int(os.path.getsize(self.path) / 1024)
        logger.debug(f"Archive statistics: {len(index)} runs, commands: {commands}")
        return {
            'archive info': archive_info,
            'total runs': len(index),
            'commands': commands,
            'archive path': self.path,
            'file size (KB)': size_kb
        }
