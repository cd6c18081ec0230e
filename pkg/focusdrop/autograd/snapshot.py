"""
Tensor snapshot format

Little-endian binary: magic b"FNT1", u32 rank, u32 dims[rank], f32 payload
(row-major). Checkpoints are several snapshots written back to back; the
names live in a separate manifest.
"""

import struct
from pathlib import Path
from typing import BinaryIO, Iterable, List, Tuple, Union

import numpy as np

from ..exceptions import SnapshotFormatError

MAGIC = b'FNT1'


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    header = MAGIC + struct.pack('<I', array.ndim) + struct.pack(f'<{array.ndim}I', *array.shape)
    return header + np.ascontiguousarray(array, dtype='<f4').tobytes()


def decode_tensor(stream: BinaryIO) -> np.ndarray:
    """Read one snapshot from ``stream``; raises SnapshotFormatError on damage."""
    offset = stream.tell()
    magic = stream.read(4)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r} at byte offset {offset}")
    raw_rank = stream.read(4)
    if len(raw_rank) != 4:
        raise SnapshotFormatError(f"truncated rank at byte offset {offset + 4}")
    (rank,) = struct.unpack('<I', raw_rank)
    raw_dims = stream.read(4 * rank)
    if len(raw_dims) != 4 * rank:
        raise SnapshotFormatError(f"truncated dims at byte offset {offset + 8}")
    dims = struct.unpack(f'<{rank}I', raw_dims)
    count = int(np.prod(dims)) if rank else 1
    payload = stream.read(4 * count)
    if len(payload) != 4 * count:
        raise SnapshotFormatError(
            f"truncated payload at byte offset {offset + 8 + 4 * rank}: "
            f"expected {4 * count} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype='<f4').reshape(dims).astype(np.float32)


def save_tensor(array: np.ndarray, path: Union[str, Path]):
    Path(path).write_bytes(encode_tensor(array))


def load_tensor(path: Union[str, Path]) -> np.ndarray:
    with open(path, 'rb') as f:
        return decode_tensor(f)


def write_snapshots(arrays: Iterable[np.ndarray], path: Union[str, Path]) -> List[Tuple[int, ...]]:
    """Write snapshots back to back; returns the shapes in order."""
    shapes = []
    with open(path, 'wb') as f:
        for array in arrays:
            f.write(encode_tensor(array))
            shapes.append(tuple(np.shape(array)))
    return shapes


def read_snapshots(path: Union[str, Path]) -> List[np.ndarray]:
    arrays = []
    size = Path(path).stat().st_size
    with open(path, 'rb') as f:
        while f.tell() < size:
            arrays.append(decode_tensor(f))
    return arrays
