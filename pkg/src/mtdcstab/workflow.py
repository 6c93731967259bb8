"""Two-step root-cause workflow on top of the stability verdict.

Step 1 finds the critical eigenloci (close to (-1, 0)) and their critical
frequency ranges.  Step 2 ranks ports by participation magnitude and
stations by normalized impedance-sensitivity magnitude over those ranges.
Sensitivity work is skipped entirely when the verdict is stable and no
locus is critical.
"""

from __future__ import annotations

import datetime
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import __version__, freqdata, gnsc, network, sensitivity
from .errors import EmptyRangeError, StageError
from .freqdata import FrequencyGrid, MatrixResponse
from .gnsc import EigenLocusSet, StabilityVerdict
from .network import SystemManifest
from .sensitivity import ImpedanceSensitivity


@dataclass(frozen=True)
class CriticalLocus:
    """A locus that approaches (-1, 0), with the band where it does so.

    The range is the hull of the connected sublevel set |lambda + 1| <
    delta, widened by one grid point on each side; crossover frequencies
    (|lambda| = 1 and arg lambda = +-180 degrees) inside the range are
    interpolated on the log-frequency axis.
    """

    index: int  # 0-based locus index in the EigenLocusSet
    min_distance: float
    f_lo: float
    f_hi: float
    magnitude_crossovers_hz: tuple[float, ...]
    phase_crossovers_hz: tuple[float, ...]


def _log_interp_zero(f: np.ndarray, y: np.ndarray, k: int) -> float:
    """Frequency where y crosses zero between samples k and k+1 (log-f linear)."""
    t = y[k] / (y[k] - y[k + 1])
    logf = np.log10(f[k]) + t * (np.log10(f[k + 1]) - np.log10(f[k]))
    return float(10.0**logf)


def _crossovers(lam: np.ndarray, freqs: np.ndarray, lo: int, hi: int):
    mag, phase = [], []
    seg = slice(lo, hi + 1)
    lam_seg = lam[seg]
    f_seg = freqs[seg]
    dmag = np.abs(lam_seg) - 1.0
    for k in range(len(lam_seg) - 1):
        if dmag[k] == 0.0:
            mag.append(float(f_seg[k]))
        elif dmag[k] * dmag[k + 1] < 0.0:
            mag.append(_log_interp_zero(f_seg, dmag, k))
        im0, im1 = lam_seg.imag[k], lam_seg.imag[k + 1]
        crosses = (im0 == 0.0 and lam_seg.real[k] < 0.0) or (im0 * im1 < 0.0)
        if crosses and im0 != im1:
            t = im0 / (im0 - im1)
            re_at = lam_seg.real[k] + t * (lam_seg.real[k + 1] - lam_seg.real[k])
            if re_at < 0.0:
                f_cross = _log_interp_zero(f_seg, lam_seg.imag, k) if im0 * im1 < 0 else float(f_seg[k])
                phase.append(f_cross)
    return tuple(mag), tuple(phase)


def find_critical_loci(loci: EigenLocusSet, delta: float = 0.5) -> list[CriticalLocus]:
    """Loci whose minimum distance to (-1, 0) is below ``delta``, most
    critical first."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    freqs = loci.grid.freqs_hz
    out = []
    for i in range(loci.n_loci):
        dist = np.abs(loci.loci[i] + 1.0)
        dmin = float(dist.min())
        if dmin >= delta:
            continue
        inside = np.nonzero(dist < delta)[0]
        lo = max(int(inside[0]) - 1, 0)
        hi = min(int(inside[-1]) + 1, len(freqs) - 1)
        mag_x, phase_x = _crossovers(loci.loci[i], freqs, lo, hi)
        out.append(
            CriticalLocus(
                index=i,
                min_distance=dmin,
                f_lo=float(freqs[lo]),
                f_hi=float(freqs[hi]),
                magnitude_crossovers_hz=mag_x,
                phase_crossovers_hz=phase_x,
            )
        )
    out.sort(key=lambda c: (c.min_distance, c.index))
    return out


def rank_ports(
    pm: MatrixResponse,
    critical: CriticalLocus,
    unreliable: np.ndarray | None = None,
) -> list[tuple[int, float]]:
    """Ports ranked by peak participation magnitude in the critical range.

    Returns (1-based port, score) pairs, descending score, ties broken by
    the lower port number.  ``unreliable`` optionally masks grid points to
    exclude (e.g. degenerate eigenvalues).
    """
    idx = pm.grid.index_range(critical.f_lo, critical.f_hi)
    if unreliable is not None:
        idx = idx[~np.asarray(unreliable, dtype=bool)[idx]]
    if idx.size == 0:
        raise EmptyRangeError(
            f"critical range [{critical.f_lo:g}, {critical.f_hi:g}] Hz selects no usable grid points"
        )
    scores = np.max(np.abs(pm.samples[idx, critical.index, :]), axis=0)
    order = sorted(range(scores.size), key=lambda j: (-scores[j], j))
    return [(j + 1, float(scores[j])) for j in order]


def rank_stations(
    sens: list[ImpedanceSensitivity],
    critical: CriticalLocus,
) -> list[tuple[int, str, float]]:
    """Stations ranked by peak normalized sensitivity magnitude in the
    critical range: (1-based station index, pole, score), descending."""
    rows = []
    for s in sens:
        if s.locus_index != critical.index:
            continue
        idx = s.normalized.grid.index_range(critical.f_lo, critical.f_hi)
        idx = idx[s.reliable[idx]]
        if idx.size == 0:
            raise EmptyRangeError(
                f"critical range [{critical.f_lo:g}, {critical.f_hi:g}] Hz selects no "
                f"usable points for station {s.station_index} ({s.pole})"
            )
        rows.append(
            (s.station_index, s.pole, float(np.max(np.abs(s.normalized.values[idx]))))
        )
    rows.sort(key=lambda r: (-r[2], r[0], r[1]))
    return rows


@dataclass
class AnalysisArtifacts:
    """Intermediate responses kept for plotting and inspection."""

    grid: FrequencyGrid
    yst: MatrixResponse
    znet: MatrixResponse
    detf: freqdata.ScalarResponse
    locus_set: EigenLocusSet
    participation: MatrixResponse | None = None
    sensitivities: list[ImpedanceSensitivity] = field(default_factory=list)


@dataclass
class AnalysisReport:
    """Final analysis output; ``to_dict`` gives the JSON document."""

    verdict: StabilityVerdict
    critical_loci: list[CriticalLocus]
    port_ranking: list[dict]
    station_ranking: list[dict]
    provenance: dict
    artifacts: AnalysisArtifacts | None = None
    has_sensitivity: bool = False

    def to_dict(self) -> dict:
        doc = {
            "verdict": {
                "P": int(self.verdict.p),
                "N": int(self.verdict.n),
                "stable": bool(self.verdict.stable),
                "windings": [int(w) for w in self.verdict.per_locus_windings],
                "peaks": [
                    {
                        "freq_hz": pk.freq_hz,
                        "magnitude_db": pk.magnitude_db,
                        "phase_slope": pk.phase_slope,
                    }
                    for pk in self.verdict.peaks
                ],
            },
            "critical_loci": [
                {
                    "index": c.index + 1,
                    "min_distance": c.min_distance,
                    "range_hz": [c.f_lo, c.f_hi],
                    "crossovers": [
                        {"kind": "magnitude", "freq_hz": f}
                        for f in c.magnitude_crossovers_hz
                    ]
                    + [{"kind": "phase", "freq_hz": f} for f in c.phase_crossovers_hz],
                }
                for c in self.critical_loci
            ],
            "provenance": self.provenance,
        }
        if self.has_sensitivity:
            doc["port_ranking"] = self.port_ranking
            doc["station_ranking"] = self.station_ranking
        return doc


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc


def _merge_rankings(per_locus: list[list[tuple]], key_len: int) -> list[tuple]:
    """Aggregate rankings over several critical loci: max score per key."""
    best: dict[tuple, float] = {}
    for ranking in per_locus:
        for row in ranking:
            key, score = tuple(row[:key_len]), row[key_len]
            if score > best.get(key, -1.0):
                best[key] = score
    rows = [key + (score,) for key, score in best.items()]
    rows.sort(key=lambda r: (-r[key_len],) + r[:key_len])
    return rows


def run_full_analysis(manifest) -> AnalysisReport:
    """Execute the full pipeline on a manifest (loaded, or a file path).

    Responses are resampled onto a common grid, the station and network
    admittances assembled and the network inverted, the generalized
    Nyquist verdict rendered, and, when the system is unstable or any
    locus is critical, participation and station-sensitivity rankings
    computed over the critical range(s).  Deterministic for identical
    inputs and options.
    """
    if not isinstance(manifest, SystemManifest):
        with _stage("load"):
            manifest = network.load_manifest(manifest)
    opt = manifest.options
    port_map = manifest.port_map

    with _stage("grid"):
        all_responses = []
        for s in manifest.stations:
            all_responses += [s.z_pos, s.z_neg]
        all_responses += [c.y6 for c in manifest.cables]
        grid = freqdata.common_grid(all_responses, opt.grid_policy)
        stations = [s.with_grid(grid) for s in manifest.stations]
        cables = [c.with_grid(grid) for c in manifest.cables]

    with _stage("network"):
        yst = network.assemble_station_admittance(stations, grid)
        ynet = network.assemble_network_admittance(cables, port_map, grid)
        znet = network.invert_network(ynet, opt.cond_limit)

    with _stage("gnsc"):
        lratio = gnsc.return_ratio(yst, znet, opt.basis)
        detf = gnsc.det_response(gnsc.return_difference(lratio))
        locus_set = gnsc.eigenloci(lratio)
        verdict = gnsc.assess_stability(
            locus_set,
            detf,
            peak_prominence_db=opt.peak_prominence_db,
            phase_window=opt.phase_window,
            winding_tol=opt.winding_tol,
        )
        critical = find_critical_loci(locus_set, opt.delta)

    artifacts = AnalysisArtifacts(grid, yst, znet, detf, locus_set)
    port_ranking: list[dict] = []
    station_ranking: list[dict] = []
    run_sensitivity = (not verdict.stable) or bool(critical)

    if run_sensitivity and critical:
        with _stage("sensitivity"):
            participation = sensitivity.participation_response(locus_set)
            artifacts.participation = participation
            sens: list[ImpedanceSensitivity] = []
            for st in stations:
                for pole, resp in (("positive", st.z_pos), ("negative", st.z_neg)):
                    for c in critical:
                        sens.append(
                            sensitivity.station_sensitivity_sweep(
                                locus_set,
                                znet,
                                resp.values,
                                st.index,
                                pole,
                                port_map,
                                c.index,
                                basis=opt.basis,
                            )
                        )
            artifacts.sensitivities = sens

            port_rankings = []
            station_rankings = []
            for c in critical:
                unreliable = locus_set.degenerate[c.index]
                port_rankings.append(rank_ports(participation, c, unreliable))
                station_rankings.append(rank_stations(sens, c))
            merged_ports = _merge_rankings(port_rankings, 1)
            port_ranking = [
                {
                    "port": int(p),
                    "station": port_map.station_of_port(int(p)),
                    "score": float(score),
                }
                for p, score in merged_ports
            ]
            merged_st = _merge_rankings(station_rankings, 2)
            if opt.merge_poles:
                by_station: dict[int, float] = {}
                for m, _pole, score in merged_st:
                    by_station[m] = by_station.get(m, 0.0) + score
                rows = sorted(by_station.items(), key=lambda r: (-r[1], r[0]))
                station_ranking = [
                    {
                        "station": port_map.station_names[m - 1],
                        "pole": "both",
                        "score": float(score),
                    }
                    for m, score in rows
                ]
            else:
                station_ranking = [
                    {
                        "station": port_map.station_names[m - 1],
                        "pole": pole,
                        "score": float(score),
                    }
                    for m, pole, score in merged_st
                ]

    provenance = {
        "inputs": dict(sorted(manifest.sources.items())),
        "options": opt.to_dict(),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return AnalysisReport(
        verdict=verdict,
        critical_loci=critical,
        port_ranking=port_ranking,
        station_ranking=station_ranking,
        provenance=provenance,
        artifacts=artifacts,
        has_sensitivity=run_sensitivity and bool(critical),
    )
