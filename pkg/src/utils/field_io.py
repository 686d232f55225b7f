"""
Header + raw payload format shared by eigenmode caches and sampled 3D fields.

Layout of a file:

    DIRAC-LAB-<KIND> 1 key=value key=value ... sha256=<hex>\n
    <payload>

The payload is the complex128 array in C order written as little-endian
'<c16', i.e. interleaved (re, im) 64-bit floats, component-major. `shape` in
the header gives the array shape as 4xN1xN2[xN3]; the checksum covers the
payload bytes only.
"""
import hashlib
import os

import numpy as np

from src.core.grids import Grid3D, SpinorField3D
from src.utils.errors import CacheFormatError
from src.utils.logger import setup_logger

logger = setup_logger('FieldIO')

FORMAT_VERSION = 1
MAGIC_PREFIX = 'DIRAC-LAB-'
PAYLOAD_DTYPE = np.dtype('<c16')


def _format_value(value):
    if isinstance(value, (list, tuple)):
        return ','.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def payload_checksum(array):
    return hashlib.sha256(np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).tobytes()).hexdigest()


def write_field_file(path, kind, array, **fields):
    """Write `array` with a one-line header of `fields`; returns the payload checksum."""
    array = np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE)
    payload = array.tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    fields = dict(fields)
    fields['shape'] = 'x'.join(str(n) for n in array.shape)
    tokens = [f'{MAGIC_PREFIX}{kind}', str(FORMAT_VERSION)]
    for key, value in fields.items():
        text = _format_value(value)
        if ' ' in text or '=' in text:
            raise CacheFormatError(f"Header value for '{key}' may not contain spaces or '=': {text!r}")
        tokens.append(f'{key}={text}')
    tokens.append(f'sha256={digest}')

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write((' '.join(tokens) + '\n').encode('ascii'))
        handle.write(payload)
    logger.debug(f"Wrote {kind} file {path} ({len(payload)} payload bytes)")
    return digest


def read_header(path):
    with open(path, 'rb') as handle:
        line = handle.readline()
    return _parse_header(line, path)


def _parse_header(line, path):
    try:
        tokens = line.decode('ascii').strip().split(' ')
    except UnicodeDecodeError as e:
        raise CacheFormatError(f"Header of {path} is not ASCII: {e}")
    if len(tokens) < 2 or not tokens[0].startswith(MAGIC_PREFIX):
        raise CacheFormatError(f"{path} does not start with a {MAGIC_PREFIX}* header")
    if tokens[1] != str(FORMAT_VERSION):
        raise CacheFormatError(f"{path} has format version {tokens[1]}, expected {FORMAT_VERSION}")
    header = {'kind': tokens[0][len(MAGIC_PREFIX):]}
    for token in tokens[2:]:
        key, sep, value = token.partition('=')
        if not sep:
            raise CacheFormatError(f"Malformed header token {token!r} in {path}")
        header[key] = value
    for required in ('shape', 'sha256'):
        if required not in header:
            raise CacheFormatError(f"Header of {path} lacks '{required}'")
    return header


def read_field_file(path, kind):
    """Return (header dict of strings, complex array); verifies kind, size and checksum."""
    with open(path, 'rb') as handle:
        header = _parse_header(handle.readline(), path)
        payload = handle.read()
    if header['kind'] != kind:
        raise CacheFormatError(f"{path} holds a {header['kind']} record, expected {kind}")
    shape = tuple(int(n) for n in header['shape'].split('x'))
    expected = int(np.prod(shape)) * PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise CacheFormatError(f"{path} payload has {len(payload)} bytes, header shape needs {expected}")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header['sha256']:
        raise CacheFormatError(f"Checksum mismatch in {path}")
    array = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(shape).astype(np.complex128)
    return header, array


def header_floats(header, key):
    return tuple(float(v) for v in header[key].split(','))


def write_spinor_field(path, field, config_hash=''):
    """Persist a SpinorField3D with its grid metadata and time tag."""
    return write_field_file(path, 'FIELD', field.data,
                            origin=list(field.grid.origin), spacing=list(field.grid.spacing),
                            time=float(field.time_tag), label=field.label or '-',
                            config_hash=config_hash or '-')


def read_spinor_field(path):
    header, data = read_field_file(path, 'FIELD')
    grid = Grid3D(header_floats(header, 'origin'), header_floats(header, 'spacing'), tuple(data.shape[1:]))
    label = '' if header.get('label') == '-' else header.get('label', '')
    return SpinorField3D(grid, data, float(header['time']), label)
