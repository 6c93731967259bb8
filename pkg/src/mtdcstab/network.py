"""Assembly of the partitioned system admittances.

Stations are pole-pair one-ports seen from three points of connection
(positive, middle, negative); each contributes a rank-2 3x3 admittance
block on the diagonal of the station matrix.  Cables are six-port blocks
stamped additively into the network matrix at the ports of their two end
stations.  The network matrix is inverted per frequency to give the
network impedance.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import freqdata
from ._parallel import map_chunks
from .errors import (
    ConditioningWarning,
    DimensionError,
    GridError,
    ManifestError,
    SingularMatrixError,
    ZeroImpedanceError,
)
from .freqdata import FrequencyGrid, MatrixResponse, ScalarResponse
from .options import AnalysisOptions

#: Impedance magnitudes below this are treated as an exact zero (ohm).
ZERO_IMPEDANCE_TOL = 1e-12

_POS_PATTERN = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
_NEG_PATTERN = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0]])


def station_block(zp: complex, zn: complex) -> np.ndarray:
    """3x3 admittance block of one station from its pole impedances.

    The block couples the (positive, middle, negative) ports of the
    station; it is symmetric, has zero row and column sums, and rank 2.

    Raises
    ------
    ZeroImpedanceError
        If either impedance magnitude is below ZERO_IMPEDANCE_TOL.
    """
    zp = complex(zp)
    zn = complex(zn)
    if abs(zp) < ZERO_IMPEDANCE_TOL or abs(zn) < ZERO_IMPEDANCE_TOL:
        raise ZeroImpedanceError(f"pole impedance too close to zero (zp={zp}, zn={zn})")
    yp = 1.0 / zp
    yn = 1.0 / zn
    return np.array(
        [
            [yp, -yp, 0.0],
            [-yp, yp + yn, -yn],
            [0.0, -yn, yn],
        ]
    )


def _station_blocks(zp: np.ndarray, zn: np.ndarray) -> np.ndarray:
    """Vectorized station_block over a frequency sweep: (nf,) -> (nf, 3, 3)."""
    yp = 1.0 / zp
    yn = 1.0 / zn
    out = np.zeros((zp.size, 3, 3), dtype=complex)
    out[:, 0, 0] = yp
    out[:, 0, 1] = -yp
    out[:, 1, 0] = -yp
    out[:, 1, 1] = yp + yn
    out[:, 1, 2] = -yn
    out[:, 2, 1] = -yn
    out[:, 2, 2] = yn
    return out


@dataclass(frozen=True)
class StationModel:
    """A station's pole impedance responses and its position in port order."""

    name: str
    z_pos: ScalarResponse
    z_neg: ScalarResponse
    index: int  # 1-based station ordinal

    def __post_init__(self):
        if self.index < 1:
            raise ManifestError(f"station {self.name!r}: index must be 1-based, got {self.index}")

    def with_grid(self, grid: FrequencyGrid) -> "StationModel":
        return StationModel(
            self.name,
            freqdata.resample(self.z_pos, grid),
            freqdata.resample(self.z_neg, grid),
            self.index,
        )

    def _check_nonzero(self, grid: FrequencyGrid):
        for label, resp in (("positive", self.z_pos), ("negative", self.z_neg)):
            bad = np.nonzero(np.abs(resp.values) < ZERO_IMPEDANCE_TOL)[0]
            if bad.size:
                f = grid.freqs_hz[bad[0]]
                raise ZeroImpedanceError(
                    f"station {self.name!r} {label}-pole impedance is zero at {f:g} Hz"
                )


@dataclass(frozen=True)
class CableModel:
    """A cable's six-port admittance block and its two end stations."""

    name: str
    from_station: str
    to_station: str
    y6: MatrixResponse

    def __post_init__(self):
        if self.y6.dim != 6:
            raise DimensionError(
                f"cable {self.name!r}: admittance block must be 6x6, got dim {self.y6.dim}"
            )
        if self.from_station == self.to_station:
            raise ManifestError(f"cable {self.name!r}: endpoints must differ")

    def with_grid(self, grid: FrequencyGrid) -> "CableModel":
        return CableModel(self.name, self.from_station, self.to_station,
                          freqdata.resample(self.y6, grid))


class PortMap:
    """Mapping from station order to global port numbers.

    Station m (1-based) owns ports 3m-2, 3m-1, 3m in (positive, middle,
    negative) order; the same mapping as 0-based numpy slices is exposed
    through :meth:`block_slice`.
    """

    def __init__(self, station_names: Sequence[str]):
        names = list(station_names)
        if len(names) != len(set(names)):
            raise ManifestError("station names must be unique")
        self._names = names

    @property
    def n_stations(self) -> int:
        return len(self._names)

    @property
    def n_ports(self) -> int:
        return 3 * len(self._names)

    @property
    def station_names(self) -> list[str]:
        return list(self._names)

    def index_of(self, name: str) -> int:
        """1-based station index for a station name."""
        try:
            return self._names.index(name) + 1
        except ValueError:
            raise ManifestError(f"unknown station {name!r}") from None

    def ports(self, m: int) -> tuple[int, int, int]:
        """1-based global port numbers of station m (1-based)."""
        if not 1 <= m <= self.n_stations:
            raise ManifestError(f"station index {m} out of range 1..{self.n_stations}")
        return (3 * m - 2, 3 * m - 1, 3 * m)

    def block_slice(self, m: int) -> slice:
        """0-based slice of station m's ports for indexing matrices."""
        if not 1 <= m <= self.n_stations:
            raise ManifestError(f"station index {m} out of range 1..{self.n_stations}")
        return slice(3 * (m - 1), 3 * m)

    def station_of_port(self, port: int) -> str:
        """Station name owning a 1-based global port number."""
        if not 1 <= port <= self.n_ports:
            raise ManifestError(f"port {port} out of range 1..{self.n_ports}")
        return self._names[(port - 1) // 3]


@dataclass(frozen=True)
class SystemManifest:
    """A complete system description: stations in port order, cables, options.

    ``sources`` maps input labels to SHA-256 digests when the manifest was
    loaded from files; in-memory systems leave it empty.
    """

    stations: tuple[StationModel, ...]
    cables: tuple[CableModel, ...]
    options: AnalysisOptions = AnalysisOptions()
    sources: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "cables", tuple(self.cables))
        if len(self.stations) < 2:
            raise ManifestError("a system needs at least 2 stations")
        names = [s.name for s in self.stations]
        if len(names) != len(set(names)):
            raise ManifestError("station names must be unique")
        for k, s in enumerate(self.stations, start=1):
            if s.index != k:
                raise ManifestError(
                    f"station {s.name!r} has index {s.index}, expected {k} from manifest order"
                )
        for c in self.cables:
            for end in (c.from_station, c.to_station):
                if end not in names:
                    raise ManifestError(f"cable {c.name!r}: unknown endpoint {end!r}")

    @property
    def port_map(self) -> PortMap:
        return PortMap([s.name for s in self.stations])


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_manifest(path) -> SystemManifest:
    """Load a manifest JSON file and every response file it references.

    Schema: {"stations": [{"name", "z_pos": path, "z_neg": path}, ...],
    "cables": [{"name", "from", "to", "y6": path}, ...], "options": {...}}.
    Paths are resolved relative to the manifest's directory.  Station
    order in the manifest defines port numbering.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "stations" not in doc or "cables" not in doc:
        raise ManifestError(f"{path}: manifest must declare 'stations' and 'cables'")
    base = path.parent
    sources = {str(path.name): _digest(path)}

    stations = []
    for k, entry in enumerate(doc["stations"], start=1):
        for key in ("name", "z_pos", "z_neg"):
            if key not in entry:
                raise ManifestError(f"{path}: station entry missing {key!r}")
        zp_path = base / entry["z_pos"]
        zn_path = base / entry["z_neg"]
        stations.append(
            StationModel(
                entry["name"],
                freqdata.load_scalar_response(zp_path),
                freqdata.load_scalar_response(zn_path),
                k,
            )
        )
        sources[entry["z_pos"]] = _digest(zp_path)
        sources[entry["z_neg"]] = _digest(zn_path)

    cables = []
    for entry in doc["cables"]:
        for key in ("name", "from", "to", "y6"):
            if key not in entry:
                raise ManifestError(f"{path}: cable entry missing {key!r}")
        y6_path = base / entry["y6"]
        cables.append(
            CableModel(entry["name"], entry["from"], entry["to"],
                       freqdata.load_matrix_response(y6_path))
        )
        sources[entry["y6"]] = _digest(y6_path)

    options = AnalysisOptions.from_dict(doc.get("options", {}))
    return SystemManifest(tuple(stations), tuple(cables), options, sources)


def assemble_station_admittance(
    stations: Sequence[StationModel], grid: FrequencyGrid
) -> MatrixResponse:
    """Block-diagonal station admittance matrix, one 3x3 block per station.

    All stations must already be resampled onto ``grid``.
    """
    for s in stations:
        if s.z_pos.grid != grid or s.z_neg.grid != grid:
            raise GridError(f"station {s.name!r} is not sampled on the analysis grid")
        s._check_nonzero(grid)
    n = 3 * len(stations)
    nf = len(grid)
    out = np.zeros((nf, n, n), dtype=complex)
    for k, s in enumerate(stations):
        sl = slice(3 * k, 3 * k + 3)
        out[:, sl, sl] = _station_blocks(s.z_pos.values, s.z_neg.values)
    return MatrixResponse(grid, out, "siemens")


def assemble_network_admittance(
    cables: Sequence[CableModel], port_map: PortMap, grid: FrequencyGrid
) -> MatrixResponse:
    """Network admittance from additive stamping of cable six-port blocks.

    Cable ports 1-3 attach to the from-station's (positive, middle,
    negative) ports and 4-6 to the to-station's; blocks of cables sharing
    ports sum.
    """
    n = port_map.n_ports
    out = np.zeros((len(grid), n, n), dtype=complex)
    for c in cables:
        if c.y6.grid != grid:
            raise GridError(f"cable {c.name!r} is not sampled on the analysis grid")
        a = port_map.index_of(c.from_station)
        b = port_map.index_of(c.to_station)
        idx = np.r_[
            np.arange(3 * (a - 1), 3 * a),
            np.arange(3 * (b - 1), 3 * b),
        ]
        out[:, idx[:, None], idx[None, :]] += c.y6.samples
    return MatrixResponse(grid, out, "siemens")


def condition_numbers(m: MatrixResponse) -> np.ndarray:
    """Per-frequency 2-norm condition estimates."""
    return np.linalg.cond(m.samples)


def invert_network(ynet: MatrixResponse, cond_limit: float = 1e12) -> MatrixResponse:
    """Per-frequency inverse of the network admittance.

    Warns with ConditioningWarning when the condition estimate exceeds
    ``cond_limit`` anywhere; raises SingularMatrixError naming the first
    offending frequency if a sample is exactly singular.
    """
    nf = len(ynet.grid)
    out = np.empty_like(ynet.samples)

    def kernel(lo, hi):
        out[lo:hi] = np.linalg.inv(ynet.samples[lo:hi])

    try:
        map_chunks(kernel, nf)
    except np.linalg.LinAlgError:
        for k in range(nf):
            try:
                np.linalg.inv(ynet.samples[k])
            except np.linalg.LinAlgError:
                f = ynet.grid.freqs_hz[k]
                raise SingularMatrixError(
                    f"network admittance is singular at {f:g} Hz", freq_hz=float(f)
                ) from None
        raise
    cond = condition_numbers(ynet)
    worst = int(np.argmax(cond))
    if cond[worst] > cond_limit:
        warnings.warn(
            f"network admittance condition estimate {cond[worst]:.3g} at "
            f"{ynet.grid.freqs_hz[worst]:g} Hz exceeds limit {cond_limit:.3g}",
            ConditioningWarning,
            stacklevel=2,
        )
    return MatrixResponse(ynet.grid, out, "ohm")
