# stability_lab/exporters.py - Atomic CSV / JSON / binary matrix artifacts
import io
import csv
import os
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np
from rest_framework.renderers import JSONRenderer

from .exceptions import StabilityLabError, DimensionMismatch

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# rows, cols as little-endian uint64, then float64 entries column by column
MATRIX_HEADER = np.dtype('<u8')
MATRIX_ENTRY = np.dtype('<f8')


class ArtifactValidationError(StabilityLabError):
    code = 'artifact_validation_failed'


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    with tmp.open('wb') as handle:
        handle.write(payload)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(str(tmp), str(path))
    logger.debug(f"Wrote {path} ({len(payload)} bytes)")
    return path


def format_float(value) -> str:
    """Shortest round-trip decimal"""
    return repr(float(value))


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else format_float(cell) for cell in row])
    return buffer.getvalue().encode('utf-8')


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write_bytes(path, render_csv(header, rows))


def validated_payload(serializer_class, payload: dict) -> dict:
    """Validate an outgoing document and return its JSON representation"""
    serializer = serializer_class(data=payload)
    if not serializer.is_valid():
        logger.error(f"{serializer_class.__name__} rejected artifact: {serializer.errors}")
        raise ArtifactValidationError(
            f"{serializer_class.__name__} rejected the artifact",
            {'errors': serializer.errors}
        )
    return serializer.data


def render_json(data) -> bytes:
    return JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n'


def write_json(path: PathLike, data) -> Path:
    return atomic_write_bytes(path, render_json(data))


def trajectory_rows(times: np.ndarray, energies: np.ndarray, states: np.ndarray) -> List[List[float]]:
    return [[t, energy, *state] for t, energy, state in zip(times, energies, states)]


def write_trajectory_csv(path: PathLike, trajectory) -> Path:
    dim = trajectory.states.shape[1]
    header = ['t', 'energy'] + [f'state_{i}' for i in range(dim)]
    return write_csv(path, header, trajectory_rows(trajectory.times, trajectory.energies, trajectory.states))


def write_matrix_csv(path: PathLike, matrix: np.ndarray) -> Path:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    buffer = io.StringIO()
    for row in matrix:
        buffer.write(','.join(format_float(value) for value in row))
        buffer.write('\n')
    return atomic_write_bytes(path, buffer.getvalue().encode('utf-8'))


def matrix_to_bytes(matrix: np.ndarray) -> bytes:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    header = np.array(matrix.shape, dtype=MATRIX_HEADER).tobytes()
    return header + matrix.astype(MATRIX_ENTRY).tobytes(order='F')


def matrix_from_bytes(payload: bytes) -> np.ndarray:
    if len(payload) < 2 * MATRIX_HEADER.itemsize:
        raise DimensionMismatch('matrix header bytes', 2 * MATRIX_HEADER.itemsize, len(payload))
    rows, cols = (int(v) for v in np.frombuffer(payload[:16], dtype=MATRIX_HEADER))
    entries = np.frombuffer(payload[16:], dtype=MATRIX_ENTRY)
    if entries.size != rows * cols:
        raise DimensionMismatch('matrix entries', rows * cols, int(entries.size))
    return entries.reshape((rows, cols), order='F').astype(float)


def write_matrix_binary(path: PathLike, matrix: np.ndarray) -> Path:
    return atomic_write_bytes(path, matrix_to_bytes(matrix))


def read_matrix_binary(path: PathLike) -> np.ndarray:
    return matrix_from_bytes(Path(path).read_bytes())
