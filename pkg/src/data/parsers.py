"""
XYZ point files and OFF meshes.

Both parsers only ever raise ParseError, carrying the line (and, for bad
numbers, the column) of the problem.
"""

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ParseError
from ..geometry import PointCloud

_TOKEN = re.compile(r"\S+")


@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]


def _tokens(line: str) -> List[Tuple[int, str]]:
    """(1-based column, token) pairs of a line with any `#` comment removed."""
    body = line.split("#", 1)[0]
    return [(m.start() + 1, m.group()) for m in _TOKEN.finditer(body)]


def _number(token: str, line: int, column: int, source) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"'{token}' is not a number", line, column, source) from None
    if not math.isfinite(value):
        raise ParseError(f"'{token}' is not a finite number", line, column, source)
    return value


def _integer(token: str, line: int, column: int, source) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"'{token}' is not an integer", line, column, source) from None


def parse_xyz(text: str, source: Optional[str] = None) -> PointCloud:
    """
    Parse whitespace-separated point rows; columns past the third become attrs.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        PointCloud in file order
    """
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = _tokens(raw)
        if not tokens:
            continue
        if len(tokens) < 3:
            raise ParseError(f"expected at least 3 numbers, found {len(tokens)}", lineno, None, source)
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(f"expected {width} columns, found {len(tokens)}", lineno, None, source)
        rows.append([_number(tok, lineno, col, source) for col, tok in tokens])
    if not rows:
        raise ParseError("no points", source=source)
    data = np.asarray(rows, dtype=np.float64)
    attrs = data[:, 3:] if width > 3 else None
    return PointCloud(data[:, :3].copy(), attrs=None if attrs is None else attrs.copy())


def format_xyz(cloud: PointCloud) -> str:
    """Inverse of parse_xyz; floats use repr so values survive a round trip exactly."""
    table = cloud.coords if cloud.attrs is None else np.hstack([cloud.coords, cloud.attrs])
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in table)


def write_xyz(path, cloud: PointCloud) -> Path:
    path = Path(path)
    path.write_text(format_xyz(cloud), encoding="utf-8")
    return path


def _read_text(path) -> str:
    try:
        return Path(path).read_bytes().decode("utf-8")
    except OSError as e:
        raise ParseError(f"cannot read file: {e}", source=str(path)) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text (byte {e.start})", source=str(path)) from e


def load_xyz(path) -> PointCloud:
    return parse_xyz(_read_text(path), source=str(path))


def parse_off(text: str, source: Optional[str] = None) -> Mesh:
    """
    Parse an OFF mesh into vertices and fan-triangulated faces.

    The header may be on its own line or fused with the counts ("OFF8 6 0").
    """
    lines = [(lineno, toks) for lineno, raw in enumerate(text.splitlines(), 1)
             if (toks := _tokens(raw))]
    if not lines:
        raise ParseError("empty file", source=source)

    cursor = iter(lines)
    lineno, header = next(cursor)
    col, first = header[0]
    if not first.startswith("OFF"):
        raise ParseError("missing OFF header", lineno, col, source)
    counts = header[1:]
    if len(first) > 3:
        counts = [(col + 3, first[3:])] + counts
    if not counts:
        try:
            lineno, counts = next(cursor)
        except StopIteration:
            raise ParseError("truncated file: missing counts line", lineno, None, source) from None
    if len(counts) < 2:
        raise ParseError("counts line needs vertex and face counts", lineno, None, source)
    n_vertices = _integer(counts[0][1], lineno, counts[0][0], source)
    n_faces = _integer(counts[1][1], lineno, counts[1][0], source)
    if n_vertices < 0 or n_faces < 0:
        raise ParseError("negative element count", lineno, None, source)

    vertices = []
    for i in range(n_vertices):
        try:
            lineno, toks = next(cursor)
        except StopIteration:
            raise ParseError(
                f"truncated file: expected {n_vertices} vertices, found {i}", lineno, None, source
            ) from None
        if len(toks) < 3:
            raise ParseError("vertex needs 3 coordinates", lineno, None, source)
        vertices.append([_number(tok, lineno, c, source) for c, tok in toks[:3]])

    triangles = []
    for i in range(n_faces):
        try:
            lineno, toks = next(cursor)
        except StopIteration:
            raise ParseError(
                f"truncated file: expected {n_faces} faces, found {i}", lineno, None, source
            ) from None
        size = _integer(toks[0][1], lineno, toks[0][0], source)
        if size < 3:
            raise ParseError(f"face with {size} vertices is not a polygon", lineno, toks[0][0], source)
        if len(toks) < size + 1:
            raise ParseError(f"face lists {len(toks) - 1} of {size} vertex indices", lineno, None, source)
        ids = []
        for c, tok in toks[1:size + 1]:
            index = _integer(tok, lineno, c, source)
            if not 0 <= index < n_vertices:
                raise ParseError(f"vertex index {index} out of range [0, {n_vertices})", lineno, c, source)
            ids.append(index)
        for j in range(1, size - 1):
            triangles.append((ids[0], ids[j], ids[j + 1]))

    return Mesh(
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
    )


def load_off(path) -> Mesh:
    return parse_off(_read_text(path), source=str(path))
