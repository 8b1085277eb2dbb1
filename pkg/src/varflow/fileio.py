"""Plain-text field file format shared with the CLI.

Layout: one header line

    FIELD v1 dim=<d> components=<k> counts=<n1,..> lo=<l1,..> hi=<h1,..>

followed by one line per grid point in row-major order carrying k decimal
values.  Values are written with 17 significant digits so a read/write round
trip reproduces them exactly.
"""

from __future__ import annotations

import numpy as np

from .fields import Grid, ScalarField, VectorField


class FieldFormatError(ValueError):
    """Raised on malformed field files; message carries the line number."""


def _header(grid: Grid, components: int) -> str:
    fmt = lambda xs: ",".join(f"{x:.17g}" for x in xs)
    lo = [e[0] for e in grid.extents]
    hi = [e[1] for e in grid.extents]
    return (
        f"FIELD v1 dim={grid.ndim} components={components} "
        f"counts={','.join(str(n) for n in grid.counts)} lo={fmt(lo)} hi={fmt(hi)}"
    )


def write_field(path, grid: Grid, values: np.ndarray) -> None:
    """Write sampled values; trailing axis (if any) holds the components."""
    values = np.asarray(values, dtype=float)
    if values.shape == grid.shape:
        flat = values.reshape(-1, 1)
    elif values.shape[: grid.ndim] == grid.shape and values.ndim == grid.ndim + 1:
        flat = values.reshape(-1, values.shape[-1])
    else:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    with open(path, "w") as fh:
        fh.write(_header(grid, flat.shape[1]) + "\n")
        for row in flat:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def write_scalar(path, s: ScalarField) -> None:
    write_field(path, s.grid, s.values)


def write_vector(path, v: VectorField) -> None:
    write_field(path, v.grid, v.values)


def _parse_header(line: str) -> tuple[Grid, int]:
    tokens = line.split()
    if len(tokens) != 7 or tokens[0] != "FIELD" or tokens[1] != "v1":
        raise FieldFormatError("line 1: expected 'FIELD v1 dim=.. components=.. counts=.. lo=.. hi=..'")
    kv = {}
    for tok in tokens[2:]:
        if "=" not in tok:
            raise FieldFormatError(f"line 1: malformed token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        dim = int(kv["dim"])
        components = int(kv["components"])
        counts = tuple(int(x) for x in kv["counts"].split(","))
        lo = [float(x) for x in kv["lo"].split(",")]
        hi = [float(x) for x in kv["hi"].split(",")]
    except (KeyError, ValueError) as err:
        raise FieldFormatError(f"line 1: bad header field ({err})") from err
    if len(counts) != dim or len(lo) != dim or len(hi) != dim:
        raise FieldFormatError("line 1: dim does not match counts/lo/hi lengths")
    try:
        grid = Grid(tuple(zip(lo, hi)), counts)
    except ValueError as err:
        raise FieldFormatError(f"line 1: invalid grid ({err})") from err
    if components < 1:
        raise FieldFormatError("line 1: components must be >= 1")
    return grid, components


def read_field(path) -> tuple[Grid, np.ndarray]:
    """Read a field file; returns (grid, values) with a trailing component
    axis when the file has more than one component."""
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise FieldFormatError("line 1: empty file")
        grid, components = _parse_header(header.strip())
        n = grid.num_points
        data = np.empty((n, components))
        for i in range(n):
            line = fh.readline()
            if not line:
                raise FieldFormatError(f"line {i + 2}: expected {n} data lines, found {i}")
            parts = line.split()
            if len(parts) != components:
                raise FieldFormatError(f"line {i + 2}: expected {components} values, got {len(parts)}")
            try:
                data[i] = [float(p) for p in parts]
            except ValueError as err:
                raise FieldFormatError(f"line {i + 2}: {err}") from err
        extra = fh.readline()
        if extra.strip():
            raise FieldFormatError(f"line {n + 2}: trailing content after {n} data lines")
    if components == 1:
        return grid, data.reshape(grid.shape)
    return grid, data.reshape(grid.shape + (components,))


def read_scalar(path) -> ScalarField:
    grid, values = read_field(path)
    if values.shape != grid.shape:
        raise FieldFormatError("expected a single-component field")
    return ScalarField(grid, values)


def read_vector(path) -> VectorField:
    grid, values = read_field(path)
    if values.ndim != grid.ndim + 1 or values.shape[-1] != grid.ndim:
        raise FieldFormatError(f"expected a {grid.ndim}-component field on a {grid.ndim}D grid")
    return VectorField(grid, values)
