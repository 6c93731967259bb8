"""Frequency-domain sensitivity engine.

For a diagonalizable return ratio L = V diag(lambda) W with W = V^-1, the
derivative of eigenvalue i with respect to entry (j, k) of L is
w_ij * v_ki.  Everything else is chain rule on top of that: the port
participation matrix is the j == k case, station-impedance sensitivities
contract the entry sensitivities with dL/dZ, and control-level
sensitivities multiply by an externally supplied dZ/dp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import EigendecompositionError, ZeroEigenvalueError, ZeroImpedanceError
from .freqdata import MatrixResponse, ScalarResponse
from .gnsc import EigenLocusSet
from .network import _NEG_PATTERN, _POS_PATTERN, ZERO_IMPEDANCE_TOL, PortMap

PoleSide = Literal["positive", "negative"]

#: Eigenvector condition above which sensitivity samples are excluded
#: from rankings.
TRUSTED_SENSITIVITY_COND = 1e8


@dataclass(frozen=True)
class EigenDecomposition:
    """One frequency point: right eigenvectors (columns of v), eigenvalues,
    left eigenvectors (rows of w), normalized so that w @ v = identity."""

    eigvals: np.ndarray  # (n,)
    v: np.ndarray        # (n, n)
    w: np.ndarray        # (n, n)
    cond: float

    @property
    def n(self) -> int:
        return self.eigvals.size


def eigendecompose(
    l_at_omega: np.ndarray,
    *,
    order: Sequence[int] | None = None,
    cond_limit: float = 1e12,
) -> EigenDecomposition:
    """Eigendecomposition with exactly inverse left eigenvectors.

    ``order`` optionally permutes the eigenvalues (e.g. to match a
    tracking permutation from a frequency sweep).

    Raises
    ------
    EigendecompositionError
        If the matrix is defective to working precision, i.e. the
        eigenvector condition estimate exceeds ``cond_limit``.
    """
    l_at_omega = np.asarray(l_at_omega, dtype=complex)
    if l_at_omega.ndim != 2 or l_at_omega.shape[0] != l_at_omega.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {l_at_omega.shape}")
    eigvals, v = np.linalg.eig(l_at_omega)
    cond = float(np.linalg.cond(v))
    if not np.isfinite(cond) or cond > cond_limit:
        raise EigendecompositionError(
            f"eigenvector matrix condition {cond:.3g} exceeds limit {cond_limit:.3g}; "
            "matrix is defective to working precision",
            cond=cond,
        )
    w = np.linalg.inv(v)
    if order is not None:
        order = np.asarray(order, dtype=int)
        eigvals = eigvals[order]
        v = v[:, order]
        w = w[order, :]
    return EigenDecomposition(eigvals=eigvals, v=v, w=w, cond=cond)


def entry_sensitivity(d: EigenDecomposition, i: int, j: int, k: int) -> complex:
    """Derivative of eigenvalue i with respect to entry (j, k) of L.

    Indices are 0-based.
    """
    n = d.n
    for name, idx in (("i", i), ("j", j), ("k", k)):
        if not 0 <= idx < n:
            raise IndexError(f"index {name}={idx} out of range for dimension {n}")
    return complex(d.w[i, j] * d.v[k, i])


def participation_matrix(d: EigenDecomposition) -> np.ndarray:
    """Port participation p_ij = w_ij * v_ji (row i: eigenvalue, column j: port).

    Rows and columns each sum to one because w @ v = v @ w = identity.
    """
    return d.w * d.v.T


def participation_response(loci: EigenLocusSet) -> MatrixResponse:
    """Participation matrices over the whole sweep as a MatrixResponse."""
    samples = loci.left * np.transpose(loci.right, (0, 2, 1))
    return MatrixResponse(loci.grid, samples, "1")


def return_ratio_derivative(
    m: int,
    pole: PoleSide,
    z_value: complex,
    znet_at_omega: np.ndarray,
    port_map: PortMap,
    *,
    basis: str = "current",
) -> np.ndarray:
    """Derivative of the return ratio with respect to one station pole
    impedance, at one frequency.

    Differentiating the station block gives a 3x3 pattern scaled by
    -1/z^2, placed at station m's ports and multiplied by the network
    impedance (current basis: dYst/dZ @ Znet; voltage basis the reversed
    product).
    """
    z_value = complex(z_value)
    if abs(z_value) < ZERO_IMPEDANCE_TOL:
        raise ZeroImpedanceError(f"pole impedance too close to zero ({z_value})")
    if pole not in ("positive", "negative"):
        raise ValueError(f"pole must be 'positive' or 'negative', got {pole!r}")
    znet_at_omega = np.asarray(znet_at_omega, dtype=complex)
    n = port_map.n_ports
    if znet_at_omega.shape != (n, n):
        raise ValueError(f"expected Z_net of shape {(n, n)}, got {znet_at_omega.shape}")
    pattern = _POS_PATTERN if pole == "positive" else _NEG_PATTERN
    block = (-1.0 / z_value**2) * pattern
    sl = port_map.block_slice(m)
    out = np.zeros((n, n), dtype=complex)
    if basis == "current":
        out[sl, :] = block @ znet_at_omega[sl, :]
    elif basis == "voltage":
        out[:, sl] = znet_at_omega[:, sl] @ block
    else:
        raise ValueError(f"basis must be 'current' or 'voltage', got {basis!r}")
    return out


def impedance_sensitivity(d: EigenDecomposition, dldz: np.ndarray, i: int) -> complex:
    """Chain-rule sensitivity of eigenvalue i to a station impedance:
    contraction of the entry sensitivities with dL/dZ, evaluated as the
    quadratic form (row i of w) @ dL/dZ @ (column i of v)."""
    if not 0 <= i < d.n:
        raise IndexError(f"locus index {i} out of range for dimension {d.n}")
    dldz = np.asarray(dldz, dtype=complex)
    return complex(d.w[i, :] @ dldz @ d.v[:, i])


def normalized_sensitivity(raw: complex, z_value: complex, lambda_value: complex) -> complex:
    """Dimensionless sensitivity (z / lambda) * raw, comparable across stations."""
    if lambda_value == 0:
        raise ZeroEigenvalueError("cannot normalize a sensitivity at a zero eigenvalue")
    return complex(z_value) / complex(lambda_value) * complex(raw)


def control_level_sensitivity(eig_sens: complex, dz_dp: complex) -> complex:
    """Sensitivity of an eigenvalue to a control parameter, given the
    externally supplied derivative of the impedance with respect to it."""
    return complex(eig_sens) * complex(dz_dp)


@dataclass(frozen=True)
class ImpedanceSensitivity:
    """Sensitivity of one locus to one station pole impedance, over the sweep.

    ``raw`` holds d(lambda_i)/dZ and ``normalized`` the dimensionless
    (Z / lambda_i)-scaled variant.  ``reliable`` masks out frequency
    points where the locus is degenerate or the decomposition is badly
    conditioned.
    """

    station_index: int  # 1-based
    pole: PoleSide
    locus_index: int    # 0-based locus in the EigenLocusSet
    raw: ScalarResponse
    normalized: ScalarResponse
    reliable: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "reliable", np.asarray(self.reliable, dtype=bool))


def station_sensitivity_sweep(
    loci: EigenLocusSet,
    znet: MatrixResponse,
    z_samples: np.ndarray,
    m: int,
    pole: PoleSide,
    port_map: PortMap,
    locus_index: int,
    *,
    basis: str = "current",
) -> ImpedanceSensitivity:
    """Station-impedance sensitivity of one tracked locus over the sweep.

    ``z_samples`` are the station's pole impedance samples on the analysis
    grid.  Exploits the sparsity of dYst/dZ: only the three rows (or
    columns, voltage basis) of Z_net at station m's ports enter.
    """
    if loci.grid != znet.grid:
        raise ValueError("loci and network impedance are on different grids")
    z_samples = np.asarray(z_samples, dtype=complex)
    if np.any(np.abs(z_samples) < ZERO_IMPEDANCE_TOL):
        raise ZeroImpedanceError(f"station {m} {pole}-pole impedance is zero on the grid")
    pattern = _POS_PATTERN if pole == "positive" else _NEG_PATTERN
    sl = port_map.block_slice(m)
    scale = -1.0 / z_samples**2
    i = locus_index
    w_rows = loci.left[:, i, :]   # (nf, n)
    v_cols = loci.right[:, :, i]  # (nf, n)
    if basis == "current":
        # w_i[sl] @ pattern @ (Znet[sl, :] @ v_i)
        lhs = w_rows[:, sl] @ pattern                                  # (nf, 3)
        rhs = np.einsum("fpj,fj->fp", znet.samples[:, sl, :], v_cols)  # (nf, 3)
    elif basis == "voltage":
        lhs = np.einsum("fj,fjp->fp", w_rows, znet.samples[:, :, sl]) @ pattern
        rhs = v_cols[:, sl]
    else:
        raise ValueError(f"basis must be 'current' or 'voltage', got {basis!r}")
    raw = scale * np.einsum("fp,fp->f", lhs, rhs)

    lam = loci.loci[i]
    nonzero = np.abs(lam) > 0
    norm = np.zeros_like(raw)
    norm[nonzero] = z_samples[nonzero] / lam[nonzero] * raw[nonzero]
    reliable = (
        ~loci.degenerate[i]
        & (loci.conditioning <= TRUSTED_SENSITIVITY_COND)
        & nonzero
    )
    return ImpedanceSensitivity(
        station_index=m,
        pole=pole,
        locus_index=i,
        raw=ScalarResponse(loci.grid, raw, "1"),
        normalized=ScalarResponse(loci.grid, norm, "1"),
        reliable=reliable,
    )
