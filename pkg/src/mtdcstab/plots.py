"""SVG diagnostic plots: Bode of det(F) and eigenloci, Nyquist of
eigenloci, participation and station-sensitivity overlays.

Plots are best-effort result displays; failures here never change the
analysis outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .gnsc import EigenLocusSet, PeakDiagnostic
from .freqdata import MatrixResponse, ScalarResponse
from .network import PortMap
from .sensitivity import ImpedanceSensitivity
from .workflow import CriticalLocus

PLOT_KINDS = ("bode-det", "bode-loci", "nyquist-loci", "participation", "station-sensitivity")


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: plot kind, frequency range, highlighted critical band."""

    kind: str
    f_lo: float
    f_hi: float
    critical_band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}")
        if not 0 < self.f_lo < self.f_hi:
            raise ValueError(f"invalid frequency range [{self.f_lo}, {self.f_hi}]")


def _shade_band(axes, band):
    if band is None:
        return
    for ax in np.atleast_1d(axes):
        ax.axvspan(band[0], band[1], color="red", alpha=0.12, lw=0)


def _db(values):
    return 20.0 * np.log10(np.maximum(np.abs(values), 1e-300))


def bode_det_plot(detf: ScalarResponse, peaks: tuple[PeakDiagnostic, ...], spec: PlotSpec, path):
    f = detf.grid.freqs_hz
    fig, (ax_m, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax_m.semilogx(f, _db(detf.values), lw=1.0)
    for pk in peaks:
        marker = "v" if pk.phase_slope < 0 else "^"
        color = "tab:green" if pk.phase_slope < 0 else "tab:red"
        ax_m.plot(pk.freq_hz, pk.magnitude_db, marker, color=color, ms=7)
    ax_p.semilogx(f, np.degrees(np.unwrap(np.angle(detf.values))), lw=1.0)
    ax_m.set_ylabel("|det F| (dB)")
    ax_p.set_ylabel("phase (deg)")
    ax_p.set_xlabel("frequency (Hz)")
    ax_m.set_title("Return difference determinant")
    _shade_band((ax_m, ax_p), spec.critical_band)
    for ax in (ax_m, ax_p):
        ax.grid(True, which="both", alpha=0.3)
        ax.set_xlim(spec.f_lo, spec.f_hi)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def nyquist_loci_plot(loci: EigenLocusSet, critical: list[CriticalLocus], spec: PlotSpec, path):
    fig, ax = plt.subplots(figsize=(6, 6))
    critical_idx = {c.index for c in critical}
    for i in range(loci.n_loci):
        lam = loci.loci[i]
        kwargs = {"lw": 1.4, "zorder": 3} if i in critical_idx else {"lw": 0.7, "alpha": 0.6}
        ax.plot(lam.real, lam.imag, label=f"locus {i + 1}", **kwargs)
    ax.plot([-1], [0], "k+", ms=12, mew=2)
    theta = np.linspace(0, 2 * np.pi, 181)
    ax.plot(-1 + 0.5 * np.cos(theta), 0.5 * np.sin(theta), "k--", lw=0.6, alpha=0.5)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title("Eigenloci of the return ratio (positive frequencies)")
    ax.set_aspect("equal")
    lim = 3.0
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.grid(True, alpha=0.3)
    if loci.n_loci <= 12:
        ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def bode_loci_plot(loci: EigenLocusSet, spec: PlotSpec, path):
    f = loci.grid.freqs_hz
    fig, (ax_m, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for i in range(loci.n_loci):
        lam = loci.loci[i]
        ax_m.semilogx(f, _db(lam), lw=0.8)
        ax_p.semilogx(f, np.degrees(np.unwrap(np.angle(lam))), lw=0.8)
    ax_m.axhline(0.0, color="k", lw=0.5, ls=":")
    ax_p.axhline(180.0, color="k", lw=0.5, ls=":")
    ax_p.axhline(-180.0, color="k", lw=0.5, ls=":")
    ax_m.set_ylabel("|lambda| (dB)")
    ax_p.set_ylabel("phase (deg)")
    ax_p.set_xlabel("frequency (Hz)")
    ax_m.set_title("Eigenlocus magnitude and phase")
    _shade_band((ax_m, ax_p), spec.critical_band)
    for ax in (ax_m, ax_p):
        ax.grid(True, which="both", alpha=0.3)
        ax.set_xlim(spec.f_lo, spec.f_hi)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def participation_plot(
    pm: MatrixResponse,
    critical: list[CriticalLocus],
    port_map: PortMap,
    spec: PlotSpec,
    path,
):
    f = pm.grid.freqs_hz
    n = pm.dim
    fig, axes = plt.subplots(len(critical), 1, sharex=True,
                             figsize=(7, 3.2 * len(critical)), squeeze=False)
    for row, c in enumerate(critical):
        ax = axes[row, 0]
        for j in range(n):
            label = f"port {j + 1} ({port_map.station_of_port(j + 1)})"
            ax.semilogx(f, np.abs(pm.samples[:, c.index, j]), lw=0.8, label=label)
        ax.axvspan(c.f_lo, c.f_hi, color="red", alpha=0.12, lw=0)
        ax.set_ylabel(f"|participation| locus {c.index + 1}")
        ax.grid(True, which="both", alpha=0.3)
        ax.set_xlim(spec.f_lo, spec.f_hi)
        if n <= 12:
            ax.legend(fontsize=6, ncol=3)
    axes[-1, 0].set_xlabel("frequency (Hz)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def station_sensitivity_plot(
    sens: list[ImpedanceSensitivity],
    critical: list[CriticalLocus],
    station_names: list[str],
    spec: PlotSpec,
    path,
):
    fig, axes = plt.subplots(len(critical), 1, sharex=True,
                             figsize=(7, 3.2 * len(critical)), squeeze=False)
    for row, c in enumerate(critical):
        ax = axes[row, 0]
        for s in sens:
            if s.locus_index != c.index:
                continue
            f = s.normalized.grid.freqs_hz
            name = station_names[s.station_index - 1]
            ax.semilogx(f, np.abs(s.normalized.values), lw=0.8,
                        label=f"{name} ({s.pole})")
        ax.axvspan(c.f_lo, c.f_hi, color="red", alpha=0.12, lw=0)
        ax.set_ylabel(f"|normalized sensitivity| locus {c.index + 1}")
        ax.grid(True, which="both", alpha=0.3)
        ax.set_xlim(spec.f_lo, spec.f_hi)
        ax.legend(fontsize=6, ncol=2)
    axes[-1, 0].set_xlabel("frequency (Hz)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
