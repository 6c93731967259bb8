"""Data model and I/O for scalar and matrix-valued frequency responses.

A response is a set of complex samples on a shared grid of positive
frequencies.  Everything is immutable after construction; resampling and
grid intersection return new objects.  Interpolation is entrywise linear
on (log10 f, Re) and (log10 f, Im) separately, and never extrapolates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    DimensionError,
    ExtrapolationError,
    GridError,
    ParseError,
    SpanOverlapError,
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing grid of positive, finite frequencies in Hz."""

    freqs_hz: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=float)
        if f.ndim != 1 or f.size < 2:
            raise GridError(f"grid must be 1-D with at least 2 points, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise GridError("grid contains non-finite frequencies")
        if f[0] <= 0.0:
            raise GridError(f"grid frequencies must be positive, got {f[0]}")
        if not np.all(np.diff(f) > 0.0):
            raise GridError("grid frequencies must be strictly increasing")
        object.__setattr__(self, "freqs_hz", _readonly(f))

    def __len__(self) -> int:
        return self.freqs_hz.size

    def __eq__(self, other) -> bool:
        return isinstance(other, FrequencyGrid) and np.array_equal(self.freqs_hz, other.freqs_hz)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.freqs_hz[0]), float(self.freqs_hz[-1])

    @property
    def log10(self) -> np.ndarray:
        return np.log10(self.freqs_hz)

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies 2*pi*f in rad/s."""
        return 2.0 * np.pi * self.freqs_hz

    def index_range(self, f_lo: float, f_hi: float) -> np.ndarray:
        """Indices of grid points inside [f_lo, f_hi]."""
        return np.nonzero((self.freqs_hz >= f_lo) & (self.freqs_hz <= f_hi))[0]


def log_grid(f_lo: float, f_hi: float, points_per_decade: int) -> FrequencyGrid:
    """Log-uniform grid covering [f_lo, f_hi] at the given density."""
    if f_lo <= 0 or f_hi <= f_lo:
        raise GridError(f"invalid span [{f_lo}, {f_hi}]")
    decades = math.log10(f_hi / f_lo)
    n = max(2, int(math.ceil(points_per_decade * decades)) + 1)
    return FrequencyGrid(np.logspace(math.log10(f_lo), math.log10(f_hi), n))


@dataclass(frozen=True, eq=False)
class ScalarResponse:
    """One complex sample per grid point.

    ``unit`` is carried through I/O only ("ohm" for impedances, "siemens"
    for admittances, "1" for dimensionless quantities).
    """

    grid: FrequencyGrid
    values: np.ndarray
    unit: str = "ohm"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size != len(self.grid):
            raise DimensionError(
                f"expected {len(self.grid)} samples, got array of shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ParseError("scalar response contains non-finite samples")
        object.__setattr__(self, "values", _readonly(v))

    def __len__(self) -> int:
        return len(self.grid)

    def __add__(self, other: "ScalarResponse") -> "ScalarResponse":
        if not isinstance(other, ScalarResponse):
            return NotImplemented
        if self.grid != other.grid:
            raise GridError("responses must share a grid to be added")
        return ScalarResponse(self.grid, self.values + other.values, self.unit)

    def __mul__(self, scale) -> "ScalarResponse":
        return ScalarResponse(self.grid, self.values * complex(scale), self.unit)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MatrixResponse:
    """One n-by-n complex matrix per grid point, stored as (n_freq, n, n)."""

    grid: FrequencyGrid
    samples: np.ndarray
    unit: str = "siemens"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise DimensionError(f"expected (n_freq, n, n) samples, got shape {s.shape}")
        if s.shape[0] != len(self.grid):
            raise DimensionError(
                f"expected {len(self.grid)} matrices, got {s.shape[0]}"
            )
        if not np.all(np.isfinite(s)):
            raise ParseError("matrix response contains non-finite samples")
        object.__setattr__(self, "samples", _readonly(s))

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return len(self.grid)

    def __add__(self, other: "MatrixResponse") -> "MatrixResponse":
        if not isinstance(other, MatrixResponse):
            return NotImplemented
        if self.grid != other.grid or self.dim != other.dim:
            raise GridError("responses must share grid and dimension to be added")
        return MatrixResponse(self.grid, self.samples + other.samples, self.unit)

    def __mul__(self, scale) -> "MatrixResponse":
        return MatrixResponse(self.grid, self.samples * complex(scale), self.unit)

    __rmul__ = __mul__


Response = Union[ScalarResponse, MatrixResponse]


# ---------------------------------------------------------------------------
# resampling


def _interp_weights(src_log: np.ndarray, tgt_log: np.ndarray):
    """Lower indices and fractional weights for linear interpolation.

    Coincident points get weight exactly 0.0 so source samples are
    reproduced bit-for-bit.
    """
    lo = np.searchsorted(src_log, tgt_log, side="right") - 1
    lo = np.clip(lo, 0, src_log.size - 2)
    hi = lo + 1
    w = (tgt_log - src_log[lo]) / (src_log[hi] - src_log[lo])
    exact = tgt_log == src_log[lo]
    w[exact] = 0.0
    return lo, hi, w


def resample(r: Response, target: FrequencyGrid) -> Response:
    """Resample a response onto ``target`` by entrywise linear interpolation
    of real and imaginary parts against log10(frequency).

    Raises
    ------
    ExtrapolationError
        If ``target`` extends beyond the measured span of ``r``.
    """
    src = r.grid
    if r.grid == target:
        return r
    s_lo, s_hi = src.span
    t_lo, t_hi = target.span
    if t_lo < s_lo or t_hi > s_hi:
        raise ExtrapolationError(
            f"target span [{t_lo}, {t_hi}] Hz exceeds source span [{s_lo}, {s_hi}] Hz"
        )
    lo, hi, w = _interp_weights(src.log10, target.log10)
    if isinstance(r, ScalarResponse):
        re = (1.0 - w) * r.values.real[lo] + w * r.values.real[hi]
        im = (1.0 - w) * r.values.imag[lo] + w * r.values.imag[hi]
        return ScalarResponse(target, re + 1j * im, r.unit)
    if isinstance(r, MatrixResponse):
        w3 = w[:, None, None]
        re = (1.0 - w3) * r.samples.real[lo] + w3 * r.samples.real[hi]
        im = (1.0 - w3) * r.samples.imag[lo] + w3 * r.samples.imag[hi]
        return MatrixResponse(target, re + 1j * im, r.unit)
    raise TypeError(f"cannot resample object of type {type(r).__name__}")


def common_grid(responses: Sequence[Response], policy: str = "finest") -> FrequencyGrid:
    """Grid spanning the intersection of all response spans.

    ``policy`` selects the density: "finest" (default) keeps the densest
    source sampling inside the overlap, "coarsest" the sparsest.  The
    result is log-uniform unless every source restricted to the overlap is
    the same grid, which is then returned unchanged.
    """
    if not responses:
        raise SpanOverlapError("no responses given")
    if policy not in ("finest", "coarsest"):
        raise ValueError(f"unknown grid policy {policy!r}")
    lo = max(r.grid.span[0] for r in responses)
    hi = min(r.grid.span[1] for r in responses)
    if hi <= lo:
        raise SpanOverlapError(f"response spans do not overlap (intersection [{lo}, {hi}] Hz)")

    subgrids = []
    for r in responses:
        f = r.grid.freqs_hz
        subgrids.append(f[(f >= lo) & (f <= hi)])
    first = subgrids[0]
    if all(np.array_equal(g, first) for g in subgrids) and first.size >= 2:
        return FrequencyGrid(first)

    decades = math.log10(hi / lo)
    densities = [max(g.size - 1, 1) / decades for g in subgrids]
    per_decade = max(densities) if policy == "finest" else min(densities)
    n = max(2, int(math.ceil(per_decade * decades)) + 1)
    return FrequencyGrid(np.logspace(math.log10(lo), math.log10(hi), n))


# ---------------------------------------------------------------------------
# file I/O
#
# Scalar schema (JSON):
#   {"kind": "scalar", "unit": "ohm"|"siemens", "freq_hz": [...],
#    "values": [[re, im], ...]}
# Matrix schema (JSON):
#   {"kind": "matrix", "unit": "siemens", "dim": n, "freq_hz": [...],
#    "values": [[[re, im] * n^2 row-major], ...]}
# CSV alternative for scalars: header "freq_hz,re,im".


def _grid_from_list(freqs) -> FrequencyGrid:
    try:
        arr = np.asarray(freqs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise GridError(f"unreadable frequency list: {exc}") from exc
    return FrequencyGrid(arr)


def _complex_pairs(pairs, what: str) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParseError(f"{what}: expected [re, im] pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what}: non-finite sample")
    return arr[:, 0] + 1j * arr[:, 1]


def load_scalar_response(path) -> ScalarResponse:
    """Load a scalar response from a JSON or CSV file (by extension)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_scalar_csv(path)
    try:
        doc = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "scalar":
        raise ParseError(f"{path}: missing or wrong 'kind' (expected 'scalar')")
    for key in ("freq_hz", "values"):
        if key not in doc:
            raise ParseError(f"{path}: missing key {key!r}")
    grid = _grid_from_list(doc["freq_hz"])
    try:
        values = _complex_pairs(doc["values"], str(path))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if values.size != len(grid):
        raise ParseError(
            f"{path}: {values.size} samples for {len(grid)} grid points"
        )
    return ScalarResponse(grid, values, doc.get("unit", "ohm"))


def _load_scalar_csv(path: Path) -> ScalarResponse:
    freqs, re, im = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["freq_hz", "re", "im"]:
            raise ParseError(f"{path}: expected CSV header 'freq_hz,re,im'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                freqs.append(float(row[0]))
                re.append(float(row[1]))
                im.append(float(row[2]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    grid = _grid_from_list(freqs)
    values = np.asarray(re) + 1j * np.asarray(im)
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{path}: non-finite sample")
    return ScalarResponse(grid, values, "ohm")


def load_matrix_response(path) -> MatrixResponse:
    """Load a matrix response from a JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "matrix":
        raise ParseError(f"{path}: missing or wrong 'kind' (expected 'matrix')")
    for key in ("dim", "freq_hz", "values"):
        if key not in doc:
            raise ParseError(f"{path}: missing key {key!r}")
    dim = int(doc["dim"])
    if dim < 1:
        raise ParseError(f"{path}: dim must be positive, got {dim}")
    grid = _grid_from_list(doc["freq_hz"])
    rows = doc["values"]
    if len(rows) != len(grid):
        raise ParseError(f"{path}: {len(rows)} matrices for {len(grid)} grid points")
    samples = np.empty((len(grid), dim, dim), dtype=complex)
    for k, row in enumerate(rows):
        if len(row) != dim * dim:
            raise DimensionError(
                f"{path}: matrix {k} has {len(row)} entries, expected {dim * dim}"
            )
        try:
            flat = _complex_pairs(row, f"{path} matrix {k}")
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        samples[k] = flat.reshape(dim, dim)
    return MatrixResponse(grid, samples, doc.get("unit", "siemens"))


def load_response(path) -> Response:
    """Load either kind of response, dispatching on the file's 'kind' field."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_scalar_csv(path)
    try:
        doc = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "scalar":
        return load_scalar_response(path)
    if kind == "matrix":
        return load_matrix_response(path)
    raise ParseError(f"{path}: unknown response kind {kind!r}")


def _pairs(values: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in values]


def save_scalar_response(r: ScalarResponse, path) -> None:
    doc = {
        "kind": "scalar",
        "unit": r.unit,
        "freq_hz": [float(f) for f in r.grid.freqs_hz],
        "values": _pairs(r.values),
    }
    Path(path).write_text(json.dumps(doc))


def save_matrix_response(r: MatrixResponse, path) -> None:
    doc = {
        "kind": "matrix",
        "unit": r.unit,
        "dim": r.dim,
        "freq_hz": [float(f) for f in r.grid.freqs_hz],
        "values": [_pairs(m.reshape(-1)) for m in r.samples],
    }
    Path(path).write_text(json.dumps(doc))
