import hashlib
import json
import pathlib
import struct

import numpy as np

from genloop import errors
from genloop.neuralcore import params as params_

MAGIC = b'GLCK'
VERSION = 1
_DIGEST_SIZE = 32
_FIXED = struct.Struct('<4sHI')
"""Magic bytes, format version and header length."""


def dumps(params: params_.ParamSet) -> bytes:
    """Serialize a parameter set.

    Layout: magic, little-endian u16 version, u32 header length, a JSON
    header (architecture descriptor, step counter, array names and shapes),
    the arrays as little-endian float32 in header order, and a trailing
    sha256 digest of everything before it.
    """
    arrays: list[tuple[str, np.ndarray]] = [
        (name, params[name].data) for name in params.names]
    for name in params.names:
        if name in params.moments:
            first, second = params.moments[name]
            arrays.append((f'adam.m/{name}', first))
            arrays.append((f'adam.v/{name}', second))
    header = json.dumps({
        'descriptor': params.descriptor,
        'step': params.step,
        'arrays': [
            {'name': name, 'shape': list(value.shape)}
            for name, value in arrays
        ],
    }, sort_keys=True).encode('utf-8')
    body = bytearray(_FIXED.pack(MAGIC, VERSION, len(header)))
    body += header
    for _, value in arrays:
        body += np.ascontiguousarray(value, dtype='<f4').tobytes()
    body += hashlib.sha256(body).digest()
    return bytes(body)


def loads(blob: bytes) -> params_.ParamSet:
    """Inverse of `dumps`.

    Raises:
        errors.DataError: when the magic bytes or version are wrong.
        errors.IntegrityError: when the trailing digest does not match.
    """
    if len(blob) < _FIXED.size + _DIGEST_SIZE:
        raise errors.DataError('checkpoint is truncated')
    body, digest = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
    magic, version, header_len = _FIXED.unpack_from(body)
    if magic != MAGIC:
        raise errors.DataError('not a genloop checkpoint')
    if version != VERSION:
        raise errors.DataError(f'unsupported checkpoint version {version}')
    if hashlib.sha256(body).digest() != digest:
        raise errors.IntegrityError('checkpoint checksum mismatch')
    offset = _FIXED.size
    header = json.loads(body[offset:offset + header_len].decode('utf-8'))
    offset += header_len
    values: dict[str, np.ndarray] = {}
    for entry in header['arrays']:
        shape = tuple(entry['shape'])
        count = int(np.prod(shape)) if shape else 1
        chunk = np.frombuffer(body, dtype='<f4', count=count, offset=offset)
        values[entry['name']] = chunk.astype(np.float32).reshape(shape)
        offset += count * 4
    names = [n for n in values if not n.startswith('adam.')]
    params = params_.ParamSet(
        {name: values[name] for name in names}, header['descriptor'])
    params.step = int(header['step'])
    for name in names:
        if f'adam.m/{name}' in values:
            params.moments[name] = (
                values[f'adam.m/{name}'], values[f'adam.v/{name}'])
    return params


def save_checkpoint(path: str | pathlib.Path, params: params_.ParamSet) -> str:
    """Write a checkpoint file and return its sha256 hex digest."""
    blob = dumps(params)
    pathlib.Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path: str | pathlib.Path) -> params_.ParamSet:
    try:
        blob = pathlib.Path(path).read_bytes()
    except OSError as ex:
        raise errors.DataError(f'cannot read checkpoint {path}') from ex
    return loads(blob)
