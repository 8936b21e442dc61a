"""On-disk formats: matrix CSV, the ``GRAM`` binary matrix, embedding and
heatmap CSVs. Reals are written with Python's shortest round-trip repr."""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "format_real",
    "matrix_to_csv",
    "matrix_from_csv",
    "matrix_to_bytes",
    "matrix_from_bytes",
    "table_to_csv",
    "heatmap_to_csv",
    "write_atomic",
]

GRAM_MAGIC = b"GRAM"


def format_real(x: float) -> str:
    return repr(float(x))


def matrix_to_csv(M: np.ndarray) -> str:
    """Row-major, no header."""
    return "".join(",".join(format_real(v) for v in row) + "\n" for row in np.asarray(M))


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    return np.array([[float(v) for v in row] for row in rows])


def matrix_to_bytes(M: np.ndarray) -> bytes:
    """``b"GRAM"``, uint32 N, then N*N little-endian float64 in row-major order."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"GRAM format stores square matrices, got shape {M.shape}")
    return GRAM_MAGIC + struct.pack("<I", M.shape[0]) + M.astype("<f8").tobytes(order="C")


def matrix_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != GRAM_MAGIC:
        raise ValueError("not a GRAM matrix (bad magic)")
    (n,) = struct.unpack("<I", data[4:8])
    if len(data) != 8 + 8 * n * n:
        raise ValueError(f"GRAM payload length {len(data) - 8} does not match N={n}")
    return np.frombuffer(data, dtype="<f8", offset=8).reshape(n, n).astype(np.float64)


def table_to_csv(M: np.ndarray, header: Sequence[str]) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_real(v) for v in row) for row in np.asarray(M)]
    return "\n".join(lines) + "\n"


def _csv_cell(text: str) -> str:
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def heatmap_to_csv(M: np.ndarray, class_names: Sequence[str]) -> str:
    names = [_csv_cell(str(c)) for c in class_names]
    lines = [",".join(["class", *names])]
    for name, row in zip(names, np.asarray(M)):
        lines.append(",".join([name, *(format_real(v) for v in row)]))
    return "\n".join(lines) + "\n"


def write_atomic(outputs: dict[str, bytes | str], directory: Path) -> None:
    """Write every file to a temp name first, then rename them into place.

    A failure while writing leaves no partial artifact behind.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    staged: list[tuple[str, Path]] = []
    try:
        for name, content in outputs.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=directory)
            staged.append((tmp, directory / name))
            with os.fdopen(fd, "wb") as fh:
                fh.write(content.encode() if isinstance(content, str) else content)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
