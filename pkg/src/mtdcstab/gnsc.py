"""Generalized Nyquist stability assessment from frequency-sampled data.

The return ratio of the partitioned system is decomposed per frequency,
its eigenvalues are tracked into continuous loci across the sweep, and
the verdict follows from comparing the open-loop RHP pole count (read off
the phase behaviour at resonant peaks of det(F)) with the net
anticlockwise encirclements of (-1, 0) by all eigenloci.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.signal import find_peaks

from ._parallel import map_chunks
from .errors import (
    ConsistencyError,
    DegenerateEigenvalueWarning,
    DimensionError,
    EigendecompositionError,
    GridError,
    LocusThroughPointError,
    ResolutionWarning,
)
from .freqdata import FrequencyGrid, MatrixResponse, ScalarResponse

#: Condition estimate above which eigenvector overlap is distrusted and
#: locus tracking falls back to nearest-eigenvalue assignment.
TRACKING_COND_LIMIT = 1e8

#: Relative gap below which two eigenvalues at one frequency count as
#: degenerate; sensitivities of the affected loci are flagged unreliable.
DEGENERACY_RTOL = 1e-8


@dataclass(frozen=True)
class ReturnRatio:
    """Open-loop gain matrix of the partitioned feedback system.

    In the "current" basis the samples are Y_st * Z_net (port currents
    around the loop); in the "voltage" basis Z_net * Y_st.
    """

    basis: str
    l: MatrixResponse

    def __post_init__(self):
        if self.basis not in ("current", "voltage"):
            raise ValueError(f"basis must be 'current' or 'voltage', got {self.basis!r}")


def return_ratio(yst: MatrixResponse, znet: MatrixResponse, basis: str = "current") -> ReturnRatio:
    """Per-frequency product of station admittance and network impedance."""
    if yst.dim != znet.dim:
        raise DimensionError(f"dimension mismatch: {yst.dim} vs {znet.dim}")
    if yst.grid != znet.grid:
        raise GridError("station and network responses are on different grids")
    if basis not in ("current", "voltage"):
        raise ValueError(f"basis must be 'current' or 'voltage', got {basis!r}")
    a, b = (yst, znet) if basis == "current" else (znet, yst)
    out = np.empty_like(yst.samples)

    def kernel(lo, hi):
        np.matmul(a.samples[lo:hi], b.samples[lo:hi], out=out[lo:hi])

    map_chunks(kernel, len(yst.grid))
    return ReturnRatio(basis, MatrixResponse(yst.grid, out, "1"))


def return_difference(l: ReturnRatio) -> MatrixResponse:
    """Identity plus the return ratio, per frequency."""
    eye = np.eye(l.l.dim)
    return MatrixResponse(l.l.grid, l.l.samples + eye, "1")


def det_response(f: MatrixResponse) -> ScalarResponse:
    """Per-frequency determinant of a square matrix response."""
    return ScalarResponse(f.grid, np.linalg.det(f.samples), "1")


@dataclass(frozen=True, eq=False)
class EigenLocusSet:
    """Frequency-tracked eigenvalues of the return ratio with matched
    left/right eigenvectors.

    loci[i, k] is locus i at grid point k.  right[k][:, i] and left[k][i, :]
    are the matched right/left eigenvectors, normalized so that
    left @ right = identity at every frequency.  ``degenerate[i, k]`` flags
    loci that are too close to another eigenvalue for sensitivity use.
    """

    grid: FrequencyGrid
    loci: np.ndarray          # (n, nf) complex
    right: np.ndarray         # (nf, n, n) complex
    left: np.ndarray          # (nf, n, n) complex
    conditioning: np.ndarray  # (nf,) float
    degenerate: np.ndarray    # (n, nf) bool

    @property
    def n_loci(self) -> int:
        return self.loci.shape[0]

    def eigenvalues_at(self, k: int) -> np.ndarray:
        return self.loci[:, k]

    def decomposition_at(self, k: int):
        from .sensitivity import EigenDecomposition

        return EigenDecomposition(
            eigvals=self.loci[:, k],
            v=self.right[k],
            w=self.left[k],
            cond=float(self.conditioning[k]),
        )


def _degeneracy_flags(lam: np.ndarray, rtol: float) -> np.ndarray:
    """Per-eigenvalue flag: nearest other eigenvalue closer than rtol*scale."""
    n = lam.size
    if n < 2:
        return np.zeros(n, dtype=bool)
    dist = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(dist, np.inf)
    scale = max(np.max(np.abs(lam)), 1e-300)
    return dist.min(axis=1) <= rtol * scale


def eigenloci(l: ReturnRatio) -> EigenLocusSet:
    """Eigendecompose the return ratio per frequency and track loci.

    Adjacent frequency points are matched by maximal left/right
    eigenvector overlap (optimal assignment); where the eigenvector matrix
    is ill-conditioned the matching falls back to nearest-eigenvalue
    assignment.  Left eigenvectors are the exact inverse of the right
    eigenvector matrix.

    Warns once with DegenerateEigenvalueWarning if eigenvalues closer than
    DEGENERACY_RTOL (relative) occur anywhere; the affected loci are
    flagged in ``degenerate``.
    """
    samples = l.l.samples
    nf, n, _ = samples.shape
    vals = np.empty((nf, n), dtype=complex)
    vecs = np.empty((nf, n, n), dtype=complex)
    invs = np.empty((nf, n, n), dtype=complex)
    conds = np.empty(nf, dtype=float)

    def kernel(lo, hi):
        w, v = np.linalg.eig(samples[lo:hi])
        vals[lo:hi] = w
        vecs[lo:hi] = v
        invs[lo:hi] = np.linalg.inv(v)
        conds[lo:hi] = np.linalg.cond(v)

    try:
        map_chunks(kernel, nf)
    except np.linalg.LinAlgError:
        for k in range(nf):
            try:
                _, v = np.linalg.eig(samples[k])
                np.linalg.inv(v)
            except np.linalg.LinAlgError:
                raise EigendecompositionError(
                    f"eigendecomposition failed at {l.l.grid.freqs_hz[k]:g} Hz",
                    freq_hz=float(l.l.grid.freqs_hz[k]),
                ) from None
        raise

    # Track: permute point k+1 to continue the loci of point k.
    perm = np.arange(n)
    loci = np.empty((n, nf), dtype=complex)
    right = np.empty_like(vecs)
    left = np.empty_like(invs)
    loci[:, 0] = vals[0]
    right[0] = vecs[0]
    left[0] = invs[0]
    for k in range(nf - 1):
        if conds[k] <= TRACKING_COND_LIMIT and conds[k + 1] <= TRACKING_COND_LIMIT:
            overlap = np.abs(invs[k][perm] @ vecs[k + 1])
            row, col = linear_sum_assignment(-overlap)
        else:
            dist = np.abs(vals[k][perm][:, None] - vals[k + 1][None, :])
            row, col = linear_sum_assignment(dist)
        nxt = perm.copy()
        nxt[row] = col
        perm = nxt
        loci[:, k + 1] = vals[k + 1][perm]
        right[k + 1] = vecs[k + 1][:, perm]
        left[k + 1] = invs[k + 1][perm, :]

    degenerate = np.empty((n, nf), dtype=bool)
    for k in range(nf):
        degenerate[:, k] = _degeneracy_flags(loci[:, k], DEGENERACY_RTOL)
    if degenerate.any():
        k_first = int(np.nonzero(degenerate.any(axis=0))[0][0])
        warnings.warn(
            f"nearly coincident eigenvalues at {int(degenerate.any(axis=0).sum())} of "
            f"{nf} frequency points (first at {l.l.grid.freqs_hz[k_first]:g} Hz); "
            "sensitivities of the affected loci are excluded from rankings",
            DegenerateEigenvalueWarning,
            stacklevel=2,
        )
    return EigenLocusSet(l.l.grid, loci, right, left, conds, degenerate)


def winding_number(locus: np.ndarray, point: complex) -> float:
    """Winding of a sampled locus around ``point``.

    Sum of principal-value angle increments between consecutive samples,
    divided by 2*pi; anticlockwise positive.  The locus is used as given
    (not closed), so an open arc yields a fractional winding.
    """
    z = np.asarray(locus, dtype=complex) - complex(point)
    if z.size < 2:
        raise ValueError("locus needs at least 2 samples")
    if np.min(np.abs(z)) < 1e-12:
        raise LocusThroughPointError(
            f"locus passes through the reference point {point}"
        )
    increments = np.angle(z[1:] / z[:-1])
    return float(np.sum(increments) / (2.0 * np.pi))


@dataclass(frozen=True)
class PeakDiagnostic:
    """One resonant peak of |det F|: frequency, height, local phase slope sign."""

    freq_hz: float
    magnitude_db: float
    phase_slope: int  # +1 rising (RHP pole pair), -1 falling (stable resonance)


def count_rhp_poles(
    detf: ScalarResponse,
    peak_prominence_db: float = 6.0,
    window: int = 3,
) -> tuple[int, list[PeakDiagnostic]]:
    """Open-loop RHP pole count from the phase behaviour of det(F).

    Resonant peaks of the magnitude (prominence >= peak_prominence_db)
    mark lightly damped pole pairs of det(F); a falling phase through the
    peak means a left-half-plane pair (contributes 0), a rising phase a
    right-half-plane pair (contributes 2).  The slope is fitted over
    +/- ``window`` points around each peak.
    """
    mag_db = 20.0 * np.log10(np.maximum(np.abs(detf.values), 1e-300))
    phase = np.unwrap(np.angle(detf.values))
    logf = detf.grid.log10
    peaks, _ = find_peaks(mag_db, prominence=peak_prominence_db)
    diagnostics = []
    total = 0
    for pk in peaks:
        lo = max(0, pk - window)
        hi = min(len(mag_db) - 1, pk + window)
        if hi - lo < 2 * window:
            warnings.warn(
                f"peak at {detf.grid.freqs_hz[pk]:g} Hz spans fewer than "
                f"{2 * window + 1} grid points; phase-slope fit may be unreliable",
                ResolutionWarning,
                stacklevel=2,
            )
        slope = np.polyfit(logf[lo : hi + 1], phase[lo : hi + 1], 1)[0]
        sign = 1 if slope > 0 else -1
        if sign > 0:
            total += 2
        diagnostics.append(
            PeakDiagnostic(float(detf.grid.freqs_hz[pk]), float(mag_db[pk]), sign)
        )
    return total, diagnostics


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of the generalized Nyquist criterion.

    ``n`` is the net anticlockwise encirclement count of (-1, 0) over the
    full frequency axis, obtained by doubling the positive-frequency
    windings (conjugate symmetry); ``per_locus_windings`` holds the
    rounded full-axis contribution of each locus.  Stability holds iff
    p == n.
    """

    p: int
    n: int
    stable: bool
    per_locus_windings: tuple[int, ...]
    half_axis_windings: tuple[float, ...]
    peaks: tuple[PeakDiagnostic, ...]


def assess_stability(
    loci: EigenLocusSet,
    detf: ScalarResponse,
    *,
    peak_prominence_db: float = 6.0,
    phase_window: int = 3,
    winding_tol: float = 0.25,
) -> StabilityVerdict:
    """Render the stability verdict from tracked loci and det(F).

    Raises
    ------
    ConsistencyError
        If a per-locus full-axis winding is farther than ``winding_tol``
        from an integer, or if the summed locus windings disagree with the
        winding of det(F) around the origin by ``winding_tol`` or more.
        Both signal an under-resolved or span-truncated sweep.
    """
    if loci.grid != detf.grid:
        raise GridError("eigenloci and det(F) are on different grids")
    p, diagnostics = count_rhp_poles(detf, peak_prominence_db, phase_window)

    half = [winding_number(loci.loci[i], -1.0 + 0.0j) for i in range(loci.n_loci)]
    rounded = []
    for i, w in enumerate(half):
        full = 2.0 * w
        nearest = round(full)
        if abs(full - nearest) >= winding_tol:
            raise ConsistencyError(
                f"locus {i + 1} full-axis winding {full:.3f} is not within "
                f"{winding_tol} of an integer; refine the grid or widen the span"
            )
        rounded.append(int(nearest))

    det_wind = winding_number(detf.values, 0.0 + 0.0j)
    if abs(sum(half) - det_wind) >= winding_tol:
        raise ConsistencyError(
            f"sum of locus windings {sum(half):.3f} disagrees with det(F) winding "
            f"{det_wind:.3f}; refine the grid"
        )

    n = int(sum(rounded))
    return StabilityVerdict(
        p=p,
        n=n,
        stable=(p == n),
        per_locus_windings=tuple(rounded),
        half_axis_windings=tuple(float(w) for w in half),
        peaks=tuple(diagnostics),
    )
