"""Analytic multi-terminal test systems with an exact pole oracle.

Stations get rational pole impedances, cables get lumped pi-section
ladders; both can be sampled into the regular response files, and the
interconnected circuit can be assembled into a descriptor pencil
(Ed, Ad) whose finite generalized eigenvalues are the exact closed-loop
poles.  The pencil is built from the circuit elements directly, so it is
independent of the frequency-sampled analysis pipeline it validates.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.signal

from . import freqdata
from .errors import PoleOnGridError, SingularPencilError
from .freqdata import FrequencyGrid, MatrixResponse, ScalarResponse
from .network import CableModel, StationModel, SystemManifest
from .options import AnalysisOptions

_MAX_DEGREE = 6


@dataclass(frozen=True)
class RationalImpedance:
    """Rational impedance num(s)/den(s), real coefficients in descending powers."""

    num: tuple[float, ...]
    den: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        num = np.trim_zeros(np.asarray(self.num, dtype=float), "f")
        den = np.trim_zeros(np.asarray(self.den, dtype=float), "f")
        if den.size == 0:
            raise ValueError(f"impedance {self.name!r}: denominator is zero")
        if num.size == 0:
            num = np.array([0.0])
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError(f"impedance {self.name!r}: non-finite coefficients")
        if num.size - 1 > _MAX_DEGREE or den.size - 1 > _MAX_DEGREE:
            raise ValueError(f"impedance {self.name!r}: degree above {_MAX_DEGREE}")
        object.__setattr__(self, "num", tuple(num))
        object.__setattr__(self, "den", tuple(den))

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)

    def realization(self):
        """Split into (q1, q0, A, B, C): Z(s) = q1 s + q0 + C (sI - A)^-1 B.

        Requires deg num <= deg den + 1 (any impedance of a finite
        circuit satisfies this).
        """
        num = np.asarray(self.num, dtype=float)
        den = np.asarray(self.den, dtype=float)
        if num.size - 1 > den.size:
            raise ValueError(
                f"impedance {self.name!r}: relative degree above one, not realizable"
            )
        num = num / den[0]
        den = den / den[0]
        q, r = np.polydiv(num, den) if num.size >= den.size else (np.zeros(1), num)
        q = np.atleast_1d(q)
        q1 = float(q[-2]) if q.size >= 2 else 0.0
        q0 = float(q[-1])
        r = np.atleast_1d(np.trim_zeros(np.atleast_1d(r), "f"))
        if den.size < 2 or r.size == 0 or not np.any(r):
            return q1, q0, np.zeros((0, 0)), np.zeros((0,)), np.zeros((0,))
        a, b, c, d = scipy.signal.tf2ss(r, den)
        assert np.allclose(d, 0.0)
        return q1, q0, a, b[:, 0], c[0, :]


def series_rl(r: float, l: float, name: str = "") -> RationalImpedance:
    """Impedance r + s*l."""
    return RationalImpedance((l, r), (1.0,), name)


def damped_rl(r: float, l: float, r_damp: float, name: str = "") -> RationalImpedance:
    """Series r + s*l in parallel with a damping resistor.

    The parallel resistor makes the impedance resistive above
    (r + r_damp)/l rad/s, so the return-ratio eigenloci roll off at -90
    degrees instead of sliding along the 180-degree ray through (-1, 0).
    """
    return RationalImpedance((r_damp * l, r_damp * r), (l, r + r_damp), name)


def biquad_impedance(
    gain_hf: float,
    f_num: float,
    zeta_num: float,
    f_den: float,
    zeta_den: float,
    name: str = "",
) -> RationalImpedance:
    """Second-order-over-second-order impedance with stable poles and zeros.

    With f_num well below f_den the phase passes +-90 degrees between the
    two corner frequencies, so the real part is negative in that band
    while the impedance itself stays stable and minimum-phase.  This is
    the classic converter-control behaviour that destabilizes an
    otherwise passive network without introducing open-loop RHP poles.
    """
    wz = 2.0 * math.pi * f_num
    wp = 2.0 * math.pi * f_den
    num = (gain_hf, gain_hf * 2.0 * zeta_num * wz, gain_hf * wz * wz)
    den = (1.0, 2.0 * zeta_den * wp, wp * wp)
    return RationalImpedance(num, den, name)


@dataclass(frozen=True)
class LumpedCable:
    """Per-conductor series R-L with shunt C (and leakage G) pi-section ladder.

    r_series, l_series, c_shunt, g_shunt are totals per conductor,
    divided equally over ``sections`` cascaded pi sections.  The cable has
    three conductors (positive, middle, negative); ``middle_open`` leaves
    the middle conductor unconnected.
    """

    r_series: float
    l_series: float
    c_shunt: float
    g_shunt: float = 0.0
    sections: int = 1
    middle_open: bool = False

    def __post_init__(self):
        if self.r_series < 0 or self.g_shunt < 0:
            raise ValueError("cable resistance and leakage must be non-negative")
        if self.l_series <= 0 or self.c_shunt <= 0:
            raise ValueError("cable inductance and capacitance must be positive")
        if self.sections < 1:
            raise ValueError("cable needs at least one pi section")

    def _conductor_two_port(self, s: np.ndarray) -> np.ndarray:
        """(nf, 2, 2) admittance of one conductor between its two ends."""
        k = self.sections
        ys = 1.0 / (self.r_series / k + s * self.l_series / k)
        ysh = self.g_shunt + s * self.c_shunt  # total; split below
        nf = s.size
        n = k + 1
        lad = np.zeros((nf, n, n), dtype=complex)
        for j in range(k):
            lad[:, j, j] += ys
            lad[:, j + 1, j + 1] += ys
            lad[:, j, j + 1] -= ys
            lad[:, j + 1, j] -= ys
        for j in range(n):
            weight = 0.5 / k if j in (0, k) else 1.0 / k
            lad[:, j, j] += ysh * weight
        if n == 2:
            return lad
        ext = [0, k]
        inner = list(range(1, k))
        y_ee = lad[:, ext][:, :, ext]
        y_ei = lad[:, ext][:, :, inner]
        y_ie = lad[:, inner][:, :, ext]
        y_ii = lad[:, inner][:, :, inner]
        return y_ee - y_ei @ np.linalg.solve(y_ii, y_ie)

    def six_port(self, freqs_hz: np.ndarray) -> np.ndarray:
        """(nf, 6, 6) admittance; ports 1-3 one end, 4-6 the other,
        (positive, middle, negative) conductor order at both ends."""
        s = 2j * np.pi * np.asarray(freqs_hz, dtype=float)
        y2 = self._conductor_two_port(s)
        nf = s.size
        out = np.zeros((nf, 6, 6), dtype=complex)
        for c in range(3):
            if c == 1 and self.middle_open:
                continue
            out[:, c, c] = y2[:, 0, 0]
            out[:, c, c + 3] = y2[:, 0, 1]
            out[:, c + 3, c] = y2[:, 1, 0]
            out[:, c + 3, c + 3] = y2[:, 1, 1]
        return out


@dataclass(frozen=True)
class SynthStation:
    name: str
    z_pos: RationalImpedance
    z_neg: RationalImpedance


@dataclass(frozen=True)
class SynthCableRun:
    name: str
    from_station: str
    to_station: str
    cable: LumpedCable


@dataclass(frozen=True)
class SyntheticSystem:
    stations: tuple[SynthStation, ...]
    cables: tuple[SynthCableRun, ...]

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "cables", tuple(self.cables))
        names = [s.name for s in self.stations]
        if len(names) != len(set(names)):
            raise ValueError("station names must be unique")
        for c in self.cables:
            for end in (c.from_station, c.to_station):
                if end not in names:
                    raise ValueError(f"cable {c.name!r}: unknown endpoint {end!r}")

    def station_index(self, name: str) -> int:
        return [s.name for s in self.stations].index(name)


# ---------------------------------------------------------------------------
# descriptor assembly


class DescriptorCircuit:
    """Incremental builder for the network DAE  Ed x' = Ad x.

    Variables are node voltages (ground excluded), inductor-branch
    currents, impedance-branch currents and impedance internal states;
    equations are nodal current balances plus the branch and state laws.
    """

    def __init__(self):
        self.n_nodes = 0
        self._caps = []         # (a, b_or_None, C)
        self._conductances = []  # (a, b_or_None, G)
        self._inductors = []    # (a, b_or_None, R, L)
        self._impedances = []   # (a, b_or_None, RationalImpedance)

    def node(self) -> int:
        idx = self.n_nodes
        self.n_nodes += 1
        return idx

    def capacitor(self, a, b, c: float):
        self._caps.append((a, b, float(c)))

    def conductance(self, a, b, g: float):
        if g:
            self._conductances.append((a, b, float(g)))

    def inductor_branch(self, a, b, r: float, l: float):
        self._inductors.append((a, b, float(r), float(l)))

    def impedance_branch(self, a, b, z: RationalImpedance):
        self._impedances.append((a, b, z))

    def build(self) -> tuple[np.ndarray, np.ndarray]:
        realizations = [z.realization() for (_, _, z) in self._impedances]
        n_states = sum(r[2].shape[0] for r in realizations)
        nv = self.n_nodes
        nl = len(self._inductors)
        nz = len(self._impedances)
        dim = nv + nl + nz + n_states
        ed = np.zeros((dim, dim))
        ad = np.zeros((dim, dim))

        def v(idx):
            return idx  # node voltages first

        i_l0 = nv
        i_z0 = nv + nl
        x0 = nv + nl + nz

        for a, b, c in self._caps:
            for n1, n2 in ((a, b), (b, a)):
                if n1 is None:
                    continue
                ed[v(n1), v(n1)] += c
                if n2 is not None:
                    ed[v(n1), v(n2)] -= c
        for a, b, g in self._conductances:
            for n1, n2 in ((a, b), (b, a)):
                if n1 is None:
                    continue
                ad[v(n1), v(n1)] -= g
                if n2 is not None:
                    ad[v(n1), v(n2)] += g

        for idx, (a, b, r, l) in enumerate(self._inductors):
            row = i_l0 + idx
            ed[row, row] = l
            ad[row, row] = -r
            if a is not None:
                ad[row, v(a)] = 1.0
                ad[v(a), row] -= 1.0  # current leaves a
            if b is not None:
                ad[row, v(b)] = -1.0
                ad[v(b), row] += 1.0

        xs = x0
        for idx, ((a, b, _), (q1, q0, am, bm, cm)) in enumerate(
            zip(self._impedances, realizations)
        ):
            row = i_z0 + idx
            nd = am.shape[0]
            ed[row, row] = q1
            ad[row, row] = -q0
            if a is not None:
                ad[row, v(a)] = 1.0
                ad[v(a), row] -= 1.0
            if b is not None:
                ad[row, v(b)] = -1.0
                ad[v(b), row] += 1.0
            if nd:
                sl = slice(xs, xs + nd)
                ad[row, sl] = -cm
                ed[sl, sl] = np.eye(nd)
                ad[sl, sl] = am
                ad[sl, row] = bm
                xs += nd
        return ed, ad


def descriptor_pencil(sys: SyntheticSystem) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the interconnected circuit (stations attached to cable ends)."""
    circ = DescriptorCircuit()
    ports = {}  # (station, conductor 0..2) -> node
    for st in sys.stations:
        for c in range(3):
            ports[(st.name, c)] = circ.node()
        circ.impedance_branch(ports[(st.name, 0)], ports[(st.name, 1)], st.z_pos)
        circ.impedance_branch(ports[(st.name, 1)], ports[(st.name, 2)], st.z_neg)
    for run in sys.cables:
        cab = run.cable
        k = cab.sections
        for c in range(3):
            if c == 1 and cab.middle_open:
                continue
            chain = [ports[(run.from_station, c)]]
            chain += [circ.node() for _ in range(k - 1)]
            chain.append(ports[(run.to_station, c)])
            for j in range(k):
                circ.inductor_branch(chain[j], chain[j + 1], cab.r_series / k, cab.l_series / k)
            for j, node in enumerate(chain):
                weight = 0.5 / k if j in (0, k) else 1.0 / k
                circ.capacitor(node, None, cab.c_shunt * weight)
                circ.conductance(node, None, cab.g_shunt * weight)
    return circ.build()


def _balance_pencil(ed: np.ndarray, ad: np.ndarray, sweeps: int = 12):
    """Two-sided diagonal scaling D1 (s Ed - Ad) D2 with powers of two.

    Circuit pencils mix element magnitudes across ~17 orders (shunt
    capacitances vs squared corner frequencies), which costs unbalanced QZ
    several digits in the eigenvalue real parts.  Equilibrating row and
    column magnitudes to their geometric mean restores accuracy; powers of
    two keep the scaling exact and the eigenvalues are invariant.
    """
    combined = np.abs(ad) + np.abs(ed)
    nz = combined > 0
    d1 = np.ones(ed.shape[0])
    d2 = np.ones(ed.shape[0])

    def mean_log2(scaled, axis):
        logs = np.zeros_like(scaled)
        np.log2(scaled, where=nz, out=logs)
        return logs.sum(axis=axis) / np.maximum(nz.sum(axis=axis), 1)

    for _ in range(sweeps):
        d1 *= 2.0 ** (-np.round(mean_log2(combined * d1[:, None] * d2[None, :], axis=1)))
        d2 *= 2.0 ** (-np.round(mean_log2(combined * d1[:, None] * d2[None, :], axis=0)))
    return ed * d1[:, None] * d2[None, :], ad * d1[:, None] * d2[None, :]


def pencil_eigenvalues(ed: np.ndarray, ad: np.ndarray) -> np.ndarray:
    """Finite generalized eigenvalues of the pencil (Ad, Ed), sorted.

    Raises SingularPencilError if det(s Ed - Ad) vanishes identically.
    """
    scale = max(np.abs(ad).max(), np.abs(ed).max(), 1.0)
    probes = (0.731 + 1.618j, -1.493 + 0.577j)
    if all(abs(np.linalg.det(s * ed - ad)) < 1e-300 * scale for s in probes):
        raise SingularPencilError("descriptor pencil is singular")
    ed_b, ad_b = _balance_pencil(ed, ad)
    vals = scipy.linalg.eigvals(ad_b, ed_b)
    finite = vals[np.isfinite(vals)]
    finite = finite[np.abs(finite) < 1e10]
    order = np.lexsort((finite.imag, finite.real))
    return finite[order]


def closed_loop_poles(sys: SyntheticSystem) -> np.ndarray:
    """Exact closed-loop poles of the interconnected synthetic circuit."""
    return pencil_eigenvalues(*descriptor_pencil(sys))


def rhp_poles(poles: np.ndarray, margin: float = 1e-6) -> np.ndarray:
    """Poles with real part above ``margin`` (rad/s)."""
    poles = np.asarray(poles)
    return poles[poles.real > margin]


def is_stable(poles: np.ndarray, margin: float = 1e-6) -> bool:
    return rhp_poles(poles, margin).size == 0


def dominant_rhp_pair(poles: np.ndarray, margin: float = 1e-6) -> complex:
    """The RHP pole with the largest real part (positive-imag representative)."""
    rhp = rhp_poles(poles, margin)
    if rhp.size == 0:
        raise ValueError("system has no RHP poles")
    rhp = rhp[np.argsort(-rhp.real)]
    top = rhp[0]
    if top.imag < 0:
        top = np.conj(top)
    return complex(top)


# ---------------------------------------------------------------------------
# sampling into the analysis formats


def _sample_impedance(z: RationalImpedance, grid: FrequencyGrid) -> ScalarResponse:
    s = 2j * np.pi * grid.freqs_hz
    den = np.polyval(np.asarray(z.den, dtype=float), s)
    if np.any(np.abs(den) < 1e-9 * np.max(np.abs(den))):
        k = int(np.argmin(np.abs(den)))
        raise PoleOnGridError(
            f"impedance {z.name!r} has a pole at or near grid point "
            f"{grid.freqs_hz[k]:g} Hz"
        )
    return ScalarResponse(grid, np.polyval(np.asarray(z.num, dtype=float), s) / den, "ohm")


def system_manifest(
    sys: SyntheticSystem,
    grid: FrequencyGrid,
    options: AnalysisOptions | None = None,
) -> SystemManifest:
    """Sample a synthetic system straight into an in-memory manifest."""
    stations = tuple(
        StationModel(
            st.name,
            _sample_impedance(st.z_pos, grid),
            _sample_impedance(st.z_neg, grid),
            k,
        )
        for k, st in enumerate(sys.stations, start=1)
    )
    cables = tuple(
        CableModel(
            run.name,
            run.from_station,
            run.to_station,
            MatrixResponse(grid, run.cable.six_port(grid.freqs_hz), "siemens"),
        )
        for run in sys.cables
    )
    return SystemManifest(stations, cables, options or AnalysisOptions())


def sample_system(sys: SyntheticSystem, grid: FrequencyGrid, out_dir) -> Path:
    """Write station, cable and manifest files for a synthetic system.

    Returns the path of the manifest file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"stations": [], "cables": [], "options": {}}
    for st in sys.stations:
        zp = _sample_impedance(st.z_pos, grid)
        zn = _sample_impedance(st.z_neg, grid)
        zp_name = f"{st.name}_zpos.json"
        zn_name = f"{st.name}_zneg.json"
        freqdata.save_scalar_response(zp, out / zp_name)
        freqdata.save_scalar_response(zn, out / zn_name)
        manifest["stations"].append({"name": st.name, "z_pos": zp_name, "z_neg": zn_name})
    for run in sys.cables:
        y6 = MatrixResponse(grid, run.cable.six_port(grid.freqs_hz), "siemens")
        y6_name = f"{run.name}_y6.json"
        freqdata.save_matrix_response(y6, out / y6_name)
        manifest["cables"].append(
            {"name": run.name, "from": run.from_station, "to": run.to_station, "y6": y6_name}
        )
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


# ---------------------------------------------------------------------------
# frozen fixtures
#
# Parameter sets are committed constants; their stable/unstable labels are
# re-certified by the pole oracle in the test suite rather than trusted.


@dataclass(frozen=True)
class TwoTerminalParams:
    r_s1: float = 2.0
    l_s1: float = 2e-3
    r_s2: float = 2.5
    l_s2: float = 1.5e-3
    r_damp: float = 60.0
    bad_gain: float = 112.0
    bad_f_num: float = 100.0
    bad_zeta_num: float = 0.7
    bad_f_den: float = 4000.0
    bad_zeta_den: float = 0.7
    cable_r: float = 0.5
    cable_l: float = 10e-3
    cable_c: float = 2e-6
    cable_g: float = 1e-3
    cable_sections: int = 2


def _bad_impedance(p, name: str) -> RationalImpedance:
    return biquad_impedance(
        p.bad_gain, p.bad_f_num, p.bad_zeta_num, p.bad_f_den, p.bad_zeta_den, name
    )


def build_two_terminal(p: TwoTerminalParams, unstable_station2: bool) -> SyntheticSystem:
    z1 = damped_rl(p.r_s1, p.l_s1, p.r_damp, "st1")
    if unstable_station2:
        z2p = _bad_impedance(p, "st2_zpos")
        z2n = _bad_impedance(p, "st2_zneg")
    else:
        z2p = damped_rl(p.r_s2, p.l_s2, p.r_damp, "st2_zpos")
        z2n = damped_rl(p.r_s2, p.l_s2, p.r_damp, "st2_zneg")
    cable = LumpedCable(p.cable_r, p.cable_l, p.cable_c, p.cable_g, p.cable_sections)
    return SyntheticSystem(
        stations=(
            SynthStation("station1", z1, z1),
            SynthStation("station2", z2p, z2n),
        ),
        cables=(SynthCableRun("cable12", "station1", "station2", cable),),
    )


def make_two_terminal(stable: bool) -> SyntheticSystem:
    """Deterministic two-terminal fixture; the flag is certified by the
    pole oracle in the test suite."""
    return build_two_terminal(TwoTerminalParams(), unstable_station2=not stable)


def perturbed_two_terminal_params(rng: np.random.Generator, rel: float = 0.10) -> TwoTerminalParams:
    """Randomized parameter set around the frozen two-terminal fixture."""
    base = TwoTerminalParams()
    kwargs = {}
    for f in dataclasses.fields(TwoTerminalParams):
        value = getattr(base, f.name)
        if isinstance(value, float):
            kwargs[f.name] = value * (1.0 + rel * rng.uniform(-1.0, 1.0))
        else:
            kwargs[f.name] = value
    return TwoTerminalParams(**kwargs)


@dataclass(frozen=True)
class FourTerminalParams:
    r_s: float = 2.0
    l_s: float = 2e-3
    r_damp: float = 60.0
    bad_gain: float = 136.0
    bad_f_num: float = 100.0
    bad_zeta_num: float = 0.7
    bad_f_den: float = 4000.0
    bad_zeta_den: float = 0.7
    cable_r: float = 0.5
    cable_l: float = 10e-3
    cable_c: float = 2e-6
    cable_g: float = 1e-3
    cable_sections: int = 2
    # symmetric string; the middle length sits where end and middle
    # destabilizers have (nearly) equal instability thresholds
    cable_lengths: tuple[float, float, float] = (1.0, 0.69, 1.0)


def build_four_terminal(p: FourTerminalParams, destabilizer: int | None) -> SyntheticSystem:
    if destabilizer is not None and destabilizer not in (1, 2, 3, 4):
        raise ValueError(f"destabilizer must be in 1..4 or None, got {destabilizer}")
    stations = []
    for m in range(1, 5):
        name = f"station{m}"
        if destabilizer == m:
            bad = _bad_impedance(p, name)
            stations.append(SynthStation(name, bad, bad))
        else:
            healthy = damped_rl(p.r_s, p.l_s, p.r_damp, name)
            stations.append(SynthStation(name, healthy, healthy))
    cables = []
    for j, length in enumerate(p.cable_lengths, start=1):
        cables.append(
            SynthCableRun(
                f"cable{j}{j + 1}",
                f"station{j}",
                f"station{j + 1}",
                LumpedCable(
                    p.cable_r * length,
                    p.cable_l * length,
                    p.cable_c * length,
                    p.cable_g * length,
                    p.cable_sections,
                ),
            )
        )
    return SyntheticSystem(tuple(stations), tuple(cables))


def make_four_terminal(destabilizer: int | None = None) -> SyntheticSystem:
    """Four stations in a string (1-2, 2-3, 3-4); station ``destabilizer``
    (if given) gets the certified-unstable impedance variant."""
    return build_four_terminal(FourTerminalParams(), destabilizer)


def frozen_fixtures() -> list[tuple[str, SyntheticSystem]]:
    """All committed fixtures, labels certified by the oracle in tests."""
    out = [
        ("two_terminal_stable", make_two_terminal(True)),
        ("two_terminal_unstable", make_two_terminal(False)),
        ("four_terminal_stable", make_four_terminal(None)),
    ]
    out += [(f"four_terminal_destab{m}", make_four_terminal(m)) for m in (1, 2, 3, 4)]
    return out
