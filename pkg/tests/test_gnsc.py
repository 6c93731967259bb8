import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import random_diagonalizable
from mtdcstab import freqdata, gnsc
from mtdcstab.errors import (
    ConsistencyError,
    DegenerateEigenvalueWarning,
    DimensionError,
    GridError,
    LocusThroughPointError,
    ResolutionWarning,
)
from mtdcstab.freqdata import FrequencyGrid, MatrixResponse, ScalarResponse
from mtdcstab.gnsc import (
    EigenLocusSet,
    ReturnRatio,
    assess_stability,
    count_rhp_poles,
    det_response,
    eigenloci,
    return_difference,
    return_ratio,
    winding_number,
)

GRID3 = FrequencyGrid([1.0, 10.0, 100.0])


def const_matrix_response(m, grid=GRID3):
    m = np.asarray(m, dtype=complex)
    return MatrixResponse(grid, np.broadcast_to(m, (len(grid),) + m.shape).copy(), "1")


def matched_multiset_distance(a, b):
    """Max pairing distance between two eigenvalue multisets."""
    cost = np.abs(a[:, None] - b[None, :])
    row, col = linear_sum_assignment(cost)
    return cost[row, col].max()


class TestReturnRatio:
    def test_identity(self):
        eye = const_matrix_response(np.eye(3))
        l = return_ratio(eye, const_matrix_response(np.eye(3)))
        np.testing.assert_array_equal(l.l.samples[0], np.eye(3))
        assert l.basis == "current"

    def test_basis_spectra_agree(self, rng):
        n, nf = 6, 5
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        a = rng.normal(size=(nf, n, n)) + 1j * rng.normal(size=(nf, n, n))
        b = rng.normal(size=(nf, n, n)) + 1j * rng.normal(size=(nf, n, n))
        yst = MatrixResponse(grid, a)
        znet = MatrixResponse(grid, b)
        cur = return_ratio(yst, znet, "current")
        vol = return_ratio(yst, znet, "voltage")
        for k in range(nf):
            lam_c = np.linalg.eigvals(cur.l.samples[k])
            lam_v = np.linalg.eigvals(vol.l.samples[k])
            scale = np.abs(lam_c).max()
            keep_c = lam_c[np.abs(lam_c) > 1e-9 * scale]
            keep_v = lam_v[np.abs(lam_v) > 1e-9 * scale]
            assert keep_c.size == keep_v.size
            assert matched_multiset_distance(keep_c, keep_v) < 1e-9 * scale

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            return_ratio(const_matrix_response(np.eye(3)), const_matrix_response(np.eye(2)))

    def test_grid_mismatch(self):
        a = const_matrix_response(np.eye(2))
        b = const_matrix_response(np.eye(2), FrequencyGrid([1.0, 2.0, 3.0]))
        with pytest.raises(GridError):
            return_ratio(a, b)

    def test_bad_basis(self):
        eye = const_matrix_response(np.eye(2))
        with pytest.raises(ValueError):
            return_ratio(eye, eye, basis="mixed")


class TestReturnDifference:
    def test_zero_gives_identity(self):
        l = ReturnRatio("current", const_matrix_response(np.zeros((3, 3))))
        f = return_difference(l)
        np.testing.assert_array_equal(f.samples[0], np.eye(3))

    def test_minus_identity_gives_zero(self):
        l = ReturnRatio("current", const_matrix_response(-np.eye(3)))
        f = return_difference(l)
        np.testing.assert_array_equal(f.samples[1], np.zeros((3, 3)))

    def test_spectral_shift(self, rng):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        l = ReturnRatio("current", const_matrix_response(m))
        f = return_difference(l)
        lam_l = np.sort_complex(np.linalg.eigvals(m))
        lam_f = np.sort_complex(np.linalg.eigvals(f.samples[0]))
        assert matched_multiset_distance(lam_f, 1 + lam_l) < 1e-10


class TestDetResponse:
    def test_identity(self):
        f = const_matrix_response(np.eye(4))
        np.testing.assert_allclose(det_response(f).values, 1.0)

    def test_diag(self):
        f = const_matrix_response(np.diag([2.0 + 0j, 3.0]))
        np.testing.assert_allclose(det_response(f).values, 6.0)

    def test_det_equals_product_of_shifted_eigenvalues(self, rng):
        nf = 7
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        samples = np.stack([random_diagonalizable(rng, 5) for _ in range(nf)])
        l = ReturnRatio("current", MatrixResponse(grid, samples))
        detf = det_response(return_difference(l))
        prod = np.array([np.prod(1 + np.linalg.eigvals(samples[k])) for k in range(nf)])
        np.testing.assert_allclose(detf.values, prod, rtol=1e-8)


class TestEigenloci:
    def test_constant_diagonal(self):
        loci = eigenloci(ReturnRatio("current", const_matrix_response(np.diag([2.0, 3j]))))
        values = {complex(loci.loci[i, 0]) for i in range(2)}
        assert values == {2.0 + 0j, 3j}
        for i in range(2):
            assert np.all(loci.loci[i] == loci.loci[i, 0])

    def test_one_by_one(self):
        samples = np.array([[[1.0 + 1j]], [[2.0 + 0j]], [[3.0 - 1j]]])
        loci = eigenloci(ReturnRatio("current", MatrixResponse(GRID3, samples)))
        np.testing.assert_array_equal(loci.loci[0], samples[:, 0, 0])

    def test_tracking_preserves_multisets(self, two_terminal_unstable_chain):
        _, _, lratio, loci, _ = two_terminal_unstable_chain
        for k in range(0, len(loci.grid), 137):
            direct = np.linalg.eigvals(lratio.l.samples[k])
            scale = max(np.abs(direct).max(), 1.0)
            assert matched_multiset_distance(loci.loci[:, k], direct) < 1e-9 * scale

    def test_left_right_normalization(self, two_terminal_unstable_chain):
        _, _, _, loci, _ = two_terminal_unstable_chain
        ok = loci.conditioning <= 1e8
        prod = loci.left[ok] @ loci.right[ok]
        eye = np.eye(prod.shape[1])
        assert np.max(np.abs(prod - eye)) < 1e-8

    def test_loci_are_continuous(self, two_terminal_unstable_chain):
        # tracked steps should be far smaller than the spacing to other loci
        _, _, _, loci, _ = two_terminal_unstable_chain
        lam = loci.loci
        step = np.abs(np.diff(lam, axis=1))
        scale = np.abs(lam).max(axis=0)
        assert np.median(step / scale[None, 1:]) < 1e-2

    def test_degenerate_warning_for_multistation(self):
        # two stations make the return ratio rank-deficient: a repeated
        # zero eigenvalue at every frequency
        from conftest import analysis_chain
        from mtdcstab import synth

        with pytest.warns(DegenerateEigenvalueWarning):
            grid = freqdata.log_grid(10, 100, 4)
            manifest = synth.system_manifest(synth.make_two_terminal(True), grid)
            from mtdcstab import network

            stations = [s.with_grid(grid) for s in manifest.stations]
            cables = [c.with_grid(grid) for c in manifest.cables]
            yst = network.assemble_station_admittance(stations, grid)
            ynet = network.assemble_network_admittance(cables, manifest.port_map, grid)
            znet = network.invert_network(ynet)
            eigenloci(return_ratio(yst, znet))


class TestWindingNumber:
    @pytest.mark.parametrize("direction", [+1, -1])
    def test_unit_circle_around_point(self, direction):
        theta = direction * np.linspace(0.0, 2 * np.pi, 721)
        locus = -1 + np.exp(1j * theta)
        w = winding_number(locus, -1 + 0j)
        assert w == pytest.approx(direction * 1.0, abs=1e-12)

    def test_point_outside(self):
        theta = np.linspace(0.0, 2 * np.pi, 361)
        locus = 0.5 * np.exp(1j * theta)
        assert winding_number(locus, -1 + 0j) == pytest.approx(0.0, abs=1e-12)

    def test_open_arc_fraction(self):
        theta = np.linspace(0.0, np.pi, 181)
        locus = -1 + np.exp(1j * theta)
        assert winding_number(locus, -1 + 0j) == pytest.approx(0.5, abs=1e-12)

    def test_locus_through_point(self):
        with pytest.raises(LocusThroughPointError):
            winding_number(np.array([1.0, -1.0 + 1e-15j, 1.0]), -1 + 0j)

    def test_translation_invariance(self, rng):
        locus = rng.normal(size=30) + 1j * rng.normal(size=30) + 5.0
        shift = 0.3 - 0.2j
        w1 = winding_number(locus, 1.0 + 0j)
        w2 = winding_number(locus + shift, 1.0 + shift)
        assert w1 == pytest.approx(w2, abs=1e-12)


def rational_biquad_response(grid, resonances, zero_zeta=0.5):
    """Scalar response with a resonant peak per (freq, pole_zeta) entry."""
    s = 2j * np.pi * grid.freqs_hz
    vals = np.ones_like(s)
    for f0, zeta_p in resonances:
        w0 = 2 * np.pi * f0
        vals *= (s**2 + 2 * zero_zeta * w0 * s + w0**2) / (
            s**2 + 2 * zeta_p * w0 * s + w0**2
        )
    return ScalarResponse(grid, vals, "1")


class TestCountRhpPoles:
    GRID = freqdata.log_grid(10.0, 10_000.0, 250)

    def test_all_lhp_resonances(self):
        detf = rational_biquad_response(self.GRID, [(300.0, 0.02), (1500.0, 0.015)])
        p, peaks = count_rhp_poles(detf)
        assert p == 0
        assert len(peaks) == 2
        assert all(pk.phase_slope == -1 for pk in peaks)

    def test_one_rhp_pair(self):
        detf = rational_biquad_response(self.GRID, [(300.0, 0.02), (1500.0, -0.015)])
        p, peaks = count_rhp_poles(detf)
        assert p == 2
        rising = [pk for pk in peaks if pk.phase_slope == +1]
        assert len(rising) == 1
        assert rising[0].freq_hz == pytest.approx(1500.0, rel=0.02)

    def test_flat_response(self):
        detf = ScalarResponse(self.GRID, np.full(len(self.GRID), 2.0 + 0j), "1")
        p, peaks = count_rhp_poles(detf)
        assert p == 0
        assert peaks == []

    def test_resolution_warning_when_window_clipped(self):
        grid = freqdata.log_grid(290.0, 310.0, 2000)
        detf = rational_biquad_response(grid, [(300.0, 0.001)])
        with pytest.warns(ResolutionWarning):
            count_rhp_poles(detf, window=len(grid))


def synthetic_locus_set(loci_rows, grid):
    """EigenLocusSet wrapper around explicit locus trajectories."""
    loci = np.asarray(loci_rows, dtype=complex)
    n, nf = loci.shape
    right = np.broadcast_to(np.eye(n, dtype=complex), (nf, n, n)).copy()
    left = right.copy()
    return EigenLocusSet(
        grid=grid,
        loci=loci,
        right=right,
        left=left,
        conditioning=np.ones(nf),
        degenerate=np.zeros((n, nf), dtype=bool),
    )


class TestAssessStability:
    def test_far_loci_stable(self):
        nf = 101
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        lam = np.full((1, nf), 0.2 + 0.05j)
        loci = synthetic_locus_set(lam, grid)
        detf = ScalarResponse(grid, 1 + lam[0], "1")
        verdict = assess_stability(loci, detf)
        assert verdict.p == 0 and verdict.n == 0 and verdict.stable

    def test_encircling_locus_unstable(self):
        nf = 721
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        theta = np.linspace(0, 2 * np.pi, nf)
        lam = (-1 + 0.4 * np.exp(-1j * theta))[None, :]  # one clockwise turn
        loci = synthetic_locus_set(lam, grid)
        detf = ScalarResponse(grid, 1 + lam[0], "1")
        verdict = assess_stability(loci, detf)
        assert verdict.p == 0
        assert verdict.n == -2
        assert not verdict.stable
        assert verdict.per_locus_windings == (-2,)

    def test_truncated_encirclement_raises(self):
        nf = 400
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        theta = np.linspace(0, 0.7 * 2 * np.pi, nf)  # open arc: 70% of a turn
        lam = (-1 + 0.4 * np.exp(-1j * theta))[None, :]
        loci = synthetic_locus_set(lam, grid)
        detf = ScalarResponse(grid, 1 + lam[0], "1")
        with pytest.raises(ConsistencyError):
            assess_stability(loci, detf)

    def test_det_cross_check_raises(self):
        nf = 101
        grid = FrequencyGrid(np.logspace(0, 2, nf))
        lam = np.full((1, nf), 0.5 + 0j)
        loci = synthetic_locus_set(lam, grid)
        theta = np.linspace(0, 2 * np.pi, nf)
        detf = ScalarResponse(grid, np.exp(1j * theta), "1")  # winds once; loci do not
        with pytest.raises(ConsistencyError):
            assess_stability(loci, detf)

    def test_grid_mismatch(self):
        grid = FrequencyGrid(np.logspace(0, 2, 5))
        other = FrequencyGrid(np.logspace(0, 2, 7))
        loci = synthetic_locus_set(np.full((1, 5), 0.1 + 0j), grid)
        detf = ScalarResponse(other, np.ones(7), "1")
        with pytest.raises(GridError):
            assess_stability(loci, detf)


class TestFixtureLevelChecks:
    def test_stable_fixture_has_no_rhp_poles(self, two_terminal_stable_chain):
        _, _, _, _, detf = two_terminal_stable_chain
        p, peaks = count_rhp_poles(detf)
        assert p == 0
        assert peaks  # resonances exist, all with falling phase
        assert all(pk.phase_slope == -1 for pk in peaks)

    def test_twelve_port_tracking_matches_direct_solve(self):
        from conftest import analysis_chain
        from mtdcstab import synth

        grid = freqdata.log_grid(1.0, 100_000.0, 120)
        _, _, lratio, loci, _ = analysis_chain(synth.make_four_terminal(4), grid)
        assert loci.n_loci == 12
        for k in range(0, len(grid), 61):
            direct = np.linalg.eigvals(lratio.l.samples[k])
            scale = max(np.abs(direct).max(), 1.0)
            assert matched_multiset_distance(loci.loci[:, k], direct) < 1e-9 * scale

    def test_winding_additivity_against_det(self, two_terminal_unstable_chain):
        _, _, _, loci, detf = two_terminal_unstable_chain
        total = sum(
            winding_number(loci.loci[i], -1 + 0j) for i in range(loci.n_loci)
        )
        det_wind = winding_number(detf.values, 0j)
        assert abs(total - det_wind) < 0.25


class TestSpectralConsistency:
    def test_det_equals_product_on_fixture(self, two_terminal_stable_chain):
        _, _, lratio, loci, detf = two_terminal_stable_chain
        ok = loci.conditioning <= 1e6
        prod = np.prod(1 + loci.loci[:, ok], axis=0)
        np.testing.assert_allclose(prod, detf.values[ok], rtol=1e-8)

    def test_conjugate_symmetry_of_sampled_systems(self):
        # rational models evaluated at -jw are the conjugate of +jw, so the
        # full-axis encirclement count is twice the positive-axis winding
        from mtdcstab import synth

        sys_ = synth.make_two_terminal(False)
        freqs = np.logspace(0, 4, 50)
        for st in sys_.stations:
            plus = st.z_pos(2j * np.pi * freqs)
            minus = st.z_pos(-2j * np.pi * freqs)
            np.testing.assert_allclose(minus, np.conj(plus), rtol=1e-12)
        cab = sys_.cables[0].cable
        np.testing.assert_allclose(
            cab.six_port(-freqs), np.conj(cab.six_port(freqs)), rtol=1e-12
        )
