"""Sampling, finite differences and the point-set CSV format.

Normal draws use a frozen recipe so a seed gives the same stream on every
platform and numpy release: Philox4x64-10 keyed with the seed (counter
starting at 0) produces raw 64-bit words, the top 53 bits of each word map
to a uniform on the open interval (0, 1), and consecutive uniform pairs go
through the Box-Muller transform (cosine branch first, then sine). The
output matrix is filled in row-major order.
"""

import csv
import math
import os
from pathlib import Path

import numpy as np

_TWO_M53 = 2.0**-53


class PointFileError(ValueError):
    """A point CSV is missing, ragged or holds non-numeric entries."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line else self.path
        super().__init__(f"{where}: {reason}")


def as_matrix(X, name="matrix"):
    """Return ``X`` as a finite float64 2-D array, raising ValueError otherwise."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def _uniforms(seed, count):
    bitgen = np.random.Philox(counter=0, key=int(seed) & 0xFFFFFFFFFFFFFFFF)
    raw = bitgen.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def gaussian_sample(n, d, seed):
    """Draw an ``n x d`` matrix of i.i.d. standard normals from ``seed``."""
    n, d = int(n), int(d)
    if n < 1 or d < 1:
        raise ValueError(f"gaussian_sample needs n >= 1 and d >= 1, got n={n}, d={d}")
    total = n * d
    pairs = (total + 1) // 2
    u = _uniforms(seed, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:total].reshape(n, d)


def finite_diff(f, x, step=1e-5):
    """Central-difference gradient of the scalar function ``f`` at ``x``.

    ``x`` may have any shape; the result has the same shape.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = float(f(x))
        flat[i] = orig - step
        fm = float(f(x))
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * step)
    return grad.reshape(x.shape)


def format_points(X):
    X = as_matrix(X)
    lines = [",".join(f"x{k}" for k in range(X.shape[1]))]
    lines.extend(",".join(format(v, ".17g") for v in row) for row in X)
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text):
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_points(path, X):
    """Write ``X`` in the canonical point CSV layout (header ``x0,...``)."""
    atomic_write_text(path, format_points(X))


def _is_header(row):
    try:
        [float(v) for v in row]
    except ValueError:
        return True
    return False


def read_points(path):
    """Parse a point CSV; the header line is optional.

    Raises PointFileError naming the file and 1-based line on any defect.
    """
    path = Path(path)
    if not path.is_file():
        raise PointFileError(path, None, "file not found")
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not v.strip() for v in row):
                continue
            if lineno == 1 and _is_header(row):
                width = len(row)
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise PointFileError(path, lineno, f"expected {width} columns, found {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise PointFileError(path, lineno, "non-numeric entry") from None
            if not all(math.isfinite(v) for v in vals):
                raise PointFileError(path, lineno, "non-finite entry")
            rows.append(vals)
    if not rows:
        raise PointFileError(path, None, "no data rows")
    return np.array(rows, dtype=np.float64)
