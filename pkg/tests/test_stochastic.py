"""Stochastic objects: the mode recursion, Wick centering, Duhamel accumulation."""

import numpy as np
import pytest

from wsnl.grid import CutoffRho, Field, SpectralGrid, bump_profile, l2_norm, truncation_mask
from wsnl.noise import NoiseStream, increment_values
from wsnl.reference import PaperParams, covariance_oracle, renorm_constant
from wsnl.snapshots import read_snapshot, write_snapshot
from wsnl.stochastic import (
    PathEnsemble,
    duhamel_accumulate,
    evolve_psi,
    sample_path,
    uniform_times,
    wick_mean_identity_gap,
    wick_square,
    zero_path,
)

GRID = SpectralGrid(1, 2 * np.pi, 64)
PARAMS = PaperParams(d=1, alpha=0.3, eps=0.01, n=8)


def test_psi_starts_at_zero_and_stays_in_ball():
    path = sample_path(PARAMS, GRID, seed=1, T=0.5, K=8)
    assert np.all(path.psi[0].values == 0)
    outside = truncation_mask(GRID, PARAMS.n) == 0.0
    for snap in path.psi:
        assert np.all(snap.values[outside] == 0)


def test_mild_form_recursion_against_independent_multipliers():
    # recompute each step with multipliers built from scratch in this test
    T, K = 0.5, 8
    path = sample_path(PARAMS, GRID, seed=2, T=T, K=K)
    dt = T / K
    k_int = np.fft.fftfreq(GRID.N, d=GRID.L / GRID.N) * 2 * np.pi
    phase = np.exp(1j * dt * k_int**2)
    gain = (1 + k_int**2) ** (-PARAMS.alpha / 2) * (np.abs(k_int) <= PARAMS.n)
    for k in range(K):
        inc = increment_values(GRID, dt, seed=2, stream_id=0, step=k)
        g_hat = GRID.forward_values(inc.astype(complex))
        predicted = phase * path.psi[k].values + (-1j) * gain * g_hat
        gap = np.max(np.abs(path.psi[k + 1].values - predicted))
        assert gap < 1e-12 * max(1.0, np.max(np.abs(predicted)))


def test_single_mode_variance_matches_ito_isometry():
    # Var[psi_K(xi)] -> T * L^d * (1+|xi|^2)^{-alpha} within 5% at M = 1e4
    T = 0.5
    times = np.array([0.0, 0.2, T])  # exactness holds for any step layout
    ens = PathEnsemble(GRID, PARAMS.alpha, [PARAMS.n], times, seed=3, size=10_000)
    ens.run()
    idx = 4
    xi = GRID.xi_axis[idx]
    est = float(np.mean(np.abs(ens.psi[:, idx]) ** 2))
    target = T * GRID.L * (1 + xi**2) ** (-PARAMS.alpha)
    assert est == pytest.approx(target, rel=0.05)


def test_truncation_zero_keeps_only_dc():
    params0 = PaperParams(d=1, alpha=0.3, eps=0.01, n=0.0)
    path = sample_path(params0, GRID, seed=4, T=0.25, K=4)
    for snap in path.psi[1:]:
        assert np.all(snap.values[1:] == 0)
        assert snap.values[0] != 0


def test_two_time_covariance_against_oracle():
    T, K, M = 0.5, 64, 4000
    times = uniform_times(T, K)
    ens = PathEnsemble(GRID, PARAMS.alpha, [PARAMS.n], times, seed=5, size=M)
    snap_half = None
    while ens.k + 1 < len(times):
        ens.advance()
        if ens.k == K // 2:
            snap_half = GRID.inverse_values(ens.psi_values(PARAMS.n)).copy()
    snap_full = GRID.inverse_values(ens.psi_values(PARAMS.n))
    xi_idx, yi_idx = 10, 20
    a, b = snap_half[:, xi_idx], snap_full[:, yi_idx]
    oc, op = covariance_oracle(
        GRID, PARAMS.n, PARAMS.alpha, T / 2, T, [GRID.x[xi_idx]], [GRID.x[yi_idx]]
    )
    for emp, oracle in ((a * np.conj(b), oc), (a * b, op)):
        for part in ("real", "imag"):
            vals = getattr(emp, part)
            se = vals.std(ddof=1) / np.sqrt(M)
            assert abs(vals.mean() - getattr(oracle, part)) < 5 * se


class TestWickSquare:
    def test_zero_input_zero_time(self):
        psi = Field(GRID, np.zeros(GRID.N), "frequency")
        out = wick_square(psi, PARAMS, 0.0)
        assert np.all(out.values == 0)

    def test_single_mode_dc_cancellation(self):
        # one mode of modulus r: |Psi|^2 == (r / L^d)^2 everywhere; choosing t with
        # c_n(t) = r^2 / L^{2d} centers the output to exactly zero
        r = 2.0
        vals = np.zeros(GRID.N, dtype=complex)
        vals[3] = r
        psi = Field(GRID, vals, "frequency")
        target = (r / GRID.L) ** 2
        t = target / renorm_constant(GRID, PARAMS.n, PARAMS.alpha, 1.0)
        out = wick_square(psi, PARAMS, t)
        assert np.max(np.abs(out.values)) < 1e-12 * target

    def test_per_realization_centering_identity(self):
        path = sample_path(PARAMS, GRID, seed=6, T=0.5, K=8)
        for k in (0, 3, 8):
            assert wick_mean_identity_gap(path, k) < 1e-10

    def test_ensemble_mean_is_statistically_zero(self):
        times = np.array([0.0, 0.25, 0.5])
        M = 4000
        ens = PathEnsemble(GRID, PARAMS.alpha, [PARAMS.n], times, seed=7, size=M)
        while ens.k + 1 < len(times):
            ens.advance()
            w = ens.wick_values(PARAMS.n)
            se = w.std(axis=0, ddof=1) / np.sqrt(M)
            z = np.abs(w.mean(axis=0)) / se
            assert float(z.max()) < 4.5


class TestDuhamel:
    def test_zero_wick_gives_zero(self):
        path = zero_path(PARAMS, GRID, T=0.5, K=8)
        for snap in path.ipsi2:
            assert np.all(snap.values == 0)

    def test_constant_wick_dc_mode_linear_in_t(self):
        # wick == c: the DC mode of <I Psi^2> is exactly -i c L^d t (zero phase)
        c = 0.7
        w_hat = np.zeros(GRID.N, dtype=complex)
        w_hat[0] = c * GRID.L  # transform of the constant field c
        ipsi2 = Field(GRID, np.zeros(GRID.N), "frequency")
        dt, K = 0.03125, 16
        for k in range(K):
            ipsi2 = duhamel_accumulate(ipsi2, w_hat, w_hat, dt)
        expected = -1j * c * GRID.L * (K * dt)
        assert ipsi2.values[0] == pytest.approx(expected, rel=1e-12)

    def test_oscillatory_wick_second_order_in_dt(self):
        # w_hat(tau, xi*) = e^{i omega tau}: closed-form Duhamel integral oracle
        idx, omega, T = 5, 3.7, 0.5
        xi2 = GRID.xi_axis[idx] ** 2

        def exact(t):
            # -i * e^{i t xi2} * (e^{i(omega - xi2) t} - 1) / (i (omega - xi2))
            return (
                -1j
                * np.exp(1j * t * xi2)
                * (np.exp(1j * (omega - xi2) * t) - 1.0)
                / (1j * (omega - xi2))
            )

        def run(K):
            dt = T / K
            ipsi2 = Field(GRID, np.zeros(GRID.N), "frequency")
            for k in range(K):
                w_prev = np.zeros(GRID.N, dtype=complex)
                w_next = np.zeros(GRID.N, dtype=complex)
                w_prev[idx] = np.exp(1j * omega * (k * dt))
                w_next[idx] = np.exp(1j * omega * ((k + 1) * dt))
                ipsi2 = duhamel_accumulate(ipsi2, w_prev, w_next, dt)
            return abs(ipsi2.values[idx] - exact(T))

        e1, e2 = run(64), run(128)
        assert e1 / e2 == pytest.approx(4.0, rel=0.25)


def test_truncation_coupling_is_exact_masking():
    times = uniform_times(0.5, 8)
    ens = PathEnsemble(GRID, 0.3, [4.0, 8.0, 16.0], times, seed=8, size=3)
    ens.run()
    for small in (4.0, 8.0):
        masked = truncation_mask(GRID, small) * ens.psi_values(16.0)
        assert np.array_equal(ens.psi_values(small), masked)


class TestLocalize:
    def test_zero_cutoff_gives_zero_fields(self):
        zero_profile = lambda u: np.zeros_like(u)  # noqa: E731
        rho = CutoffRho(radii=(np.pi / 4,), centers=(np.pi,), profiles=(zero_profile,))
        path = sample_path(PARAMS, GRID, seed=9, T=0.25, K=4)
        loc = path.localize(rho)
        for snap in loc.rho_psi + loc.rho2_wick + loc.rho2_ipsi2:
            assert np.all(snap.values == 0)

    def test_localization_is_an_l2_contraction_up_to_sup(self):
        rho = CutoffRho.for_grid(GRID)
        sup = float(rho.evaluate(GRID).max())
        path = sample_path(PARAMS, GRID, seed=10, T=0.25, K=4)
        loc = path.localize(rho)
        psi_phys = GRID.inverse_values(path.psi[-1].values)
        assert l2_norm(GRID, loc.rho_psi[-1].values) <= sup * l2_norm(GRID, psi_phys) * (
            1 + 1e-10
        )

    def test_masked_region_leaves_norm_unchanged(self):
        rho = CutoffRho(radii=(np.pi / 4,), centers=(np.pi,), profiles=(bump_profile,))
        path = sample_path(PARAMS, GRID, seed=11, T=0.25, K=4)
        psi_phys = GRID.inverse_values(path.psi[-1].values)
        support = np.abs(GRID.x - np.pi) < np.pi / 4
        zeroed = np.where(support, psi_phys, 0.0)
        r = rho.evaluate(GRID)
        assert l2_norm(GRID, r * psi_phys) == pytest.approx(
            l2_norm(GRID, r * zeroed), rel=1e-12
        )


def test_snapshot_round_trip_bitwise():
    path = sample_path(PARAMS, GRID, seed=12, T=0.25, K=4)
    import tempfile, pathlib

    with tempfile.TemporaryDirectory() as tmp:
        target = pathlib.Path(tmp) / "path.wsnl"
        write_snapshot(path, target)
        back = read_snapshot(target)
        assert back.grid == path.grid
        assert back.params.alpha == path.params.alpha
        assert np.array_equal(back.times, path.times)
        for a, b in zip(path.psi + path.wick + path.ipsi2, back.psi + back.wick + back.ipsi2):
            assert np.array_equal(a.values, b.values)
        # writing the reloaded path reproduces the bytes
        target2 = pathlib.Path(tmp) / "path2.wsnl"
        write_snapshot(back, target2)
        assert target.read_bytes() == target2.read_bytes()


def test_evolve_psi_public_single_step():
    stream = NoiseStream(seed=13, stream_id=0, grid=GRID, dt=0.1)
    psi0 = Field(GRID, np.zeros(GRID.N), "frequency")
    psi1 = evolve_psi(psi0, stream, PARAMS, dt=0.1)
    assert stream.step == 1
    outside = truncation_mask(GRID, PARAMS.n) == 0.0
    assert np.all(psi1.values[outside] == 0)
    assert np.any(psi1.values != 0)
