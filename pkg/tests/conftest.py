import warnings

import numpy as np
import pytest

from mtdcstab import freqdata, gnsc, network, synth
from mtdcstab.errors import ConditioningWarning, DegenerateEigenvalueWarning

#: Grid used for the heavier end-to-end tests (acceptance uses its own).
FIXTURE_GRID = freqdata.log_grid(1.0, 100_000.0, 400)


def analysis_chain(system, grid=None):
    """Sample a synthetic system and run it through network + gnsc."""
    grid = grid or FIXTURE_GRID
    manifest = synth.system_manifest(system, grid)
    stations = [s.with_grid(grid) for s in manifest.stations]
    cables = [c.with_grid(grid) for c in manifest.cables]
    yst = network.assemble_station_admittance(stations, grid)
    ynet = network.assemble_network_admittance(cables, manifest.port_map, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditioningWarning)
        warnings.simplefilter("ignore", DegenerateEigenvalueWarning)
        znet = network.invert_network(ynet)
        lratio = gnsc.return_ratio(yst, znet)
        loci = gnsc.eigenloci(lratio)
    detf = gnsc.det_response(gnsc.return_difference(lratio))
    return manifest, znet, lratio, loci, detf


@pytest.fixture(scope="session")
def two_terminal_stable_chain():
    return analysis_chain(synth.make_two_terminal(True))


@pytest.fixture(scope="session")
def two_terminal_unstable_chain():
    return analysis_chain(synth.make_two_terminal(False))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_diagonalizable(rng, n, min_gap=0.1, cond_max=50.0):
    """Matrix with well-separated spectrum and well-conditioned eigenvectors."""
    while True:
        lam = rng.uniform(-2, 2, n) + 1j * rng.uniform(-2, 2, n)
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(n) * 1e9
        if gaps.min() >= min_gap:
            break
    while True:
        v = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if np.linalg.cond(v) <= cond_max:
            break
    return v @ np.diag(lam) @ np.linalg.inv(v)
