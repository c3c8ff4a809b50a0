"""Estimator tests: subproblem oracles, recovery behavior, weight selection."""

import math

import numpy as np
import pytest

from irsccm.channel import ArrayGeometry, true_ccm
from irsccm.estimator import (
    AdmmConfig,
    AdmmState,
    IllPosedSubproblemError,
    estimate_ccm,
    init_state,
    prepare_workspace,
    select_lambda,
    update_a,
    update_b,
    update_duals,
    update_v,
)
from irsccm.toeplitz import lag_index_sets, toeplitz_d
from irsccm.training import build_sensing_matrix, ideal_received_cov

from test_channel import make_paths


DIMS = (2, 2, 2)
GEOM = ArrayGeometry(*DIMS)


def random_state(ws, rng):
    side = ws.sets.side
    gshape = ws.sets.generator_shape

    def herm(m):
        return (m + m.conj().T) / 2

    def herm_gen():
        g = rng.standard_normal(gshape) + 1j * rng.standard_normal(gshape)
        return (g + np.conj(g[::-1, ::-1, ::-1])) / 2

    def hmat():
        m = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
        return herm(m)

    v = herm_gen()
    return AdmmState(a=hmat(), v=v, b=hmat(), upsilon=hmat(), lam_dual=hmat())


def make_workspace(seed=0, lam=0.05, eta=2.0, rho=1.0, j_slots=6):
    rng = np.random.default_rng(seed)
    paths = make_paths(rng, n_l=2, n_p=1)
    truth = true_ccm(paths, GEOM)
    s = build_sensing_matrix(GEOM, j_slots, np.random.default_rng(seed + 100))
    rhat = ideal_received_cov(s, truth.rh, 0.1)
    scale = float(np.max(np.abs(np.linalg.eigvalsh(rhat))))
    ws = prepare_workspace(rhat / scale, s.w, DIMS, lam=lam, eta=eta, rho=rho)
    return ws, s, truth


class TestUpdateA:
    def test_linear_system_residual_and_dense_solve(self):
        ws, s, _ = make_workspace(seed=1)
        rng = np.random.default_rng(2)
        state = random_state(ws, rng)
        a = update_a(state, ws)

        side = ws.sets.side
        xi = (ws.evecs * ws.evals) @ ws.evecs.conj().T
        kappa = ws.eta + ws.rho
        c_mat = (
            ws.eta * state.t3v + ws.rho * state.b + ws.wt_rw
            - ws.lam * np.eye(side) - state.upsilon + state.lam_dual
        )
        resid = xi @ a @ xi + kappa * a - c_mat
        rel = np.linalg.norm(resid) / np.linalg.norm(c_mat)
        assert rel < 1e-8

        # dense Kronecker oracle on the column-major vectorization
        big = np.kron(xi.T, xi) + kappa * np.eye(side * side)
        x = np.linalg.solve(big, c_mat.ravel(order="F"))
        dense = x.reshape((side, side), order="F")
        assert np.linalg.norm(a - dense) / np.linalg.norm(dense) < 1e-8

    def test_hermitian_output(self):
        ws, _, _ = make_workspace(seed=3)
        state = random_state(ws, np.random.default_rng(4))
        a = update_a(state, ws)
        assert np.array_equal(a, a.conj().T)


class TestUpdateV:
    def test_least_squares_oracle(self):
        # the V block minimizes ||(A + Upsilon/eta) - T3(g)||_F over g;
        # compare against lstsq on the explicit selection map
        ws, _, _ = make_workspace(seed=5)
        state = random_state(ws, np.random.default_rng(6))
        v = update_v(state, ws)

        sets = ws.sets
        side, n = sets.side, sets.n_lags
        target = state.a + state.upsilon / ws.eta
        sel = np.zeros((side * side, n))
        for l in range(n):
            for i, j in sets.positions(l):
                sel[i * side + j, l] = 1.0
        g_star, *_ = np.linalg.lstsq(sel, target.ravel(), rcond=None)
        assert np.linalg.norm(v.ravel() - g_star) / np.linalg.norm(g_star) < 1e-9

    def test_conjugate_symmetry_preserved(self):
        ws, _, _ = make_workspace(seed=7)
        state = random_state(ws, np.random.default_rng(8))
        v = update_v(state, ws)
        assert np.allclose(v, np.conj(v[::-1, ::-1, ::-1]), atol=1e-13)


class TestUpdateB:
    def test_eigen_clip_oracle(self):
        ws, _, _ = make_workspace(seed=9)
        state = random_state(ws, np.random.default_rng(10))
        b = update_b(state, ws)

        btil = state.a - state.lam_dual / ws.rho
        btil = (btil + btil.conj().T) / 2
        evals, evecs = np.linalg.eigh(btil)
        oracle = evecs @ np.diag(np.clip(evals, 0, None)) @ evecs.conj().T
        assert np.linalg.norm(b - oracle) / max(np.linalg.norm(oracle), 1e-300) < 1e-9

    def test_output_psd(self):
        ws, _, _ = make_workspace(seed=11)
        state = random_state(ws, np.random.default_rng(12))
        b = update_b(state, ws)
        assert np.linalg.eigvalsh(b).min() >= -1e-12 * np.linalg.norm(b)

    def test_psd_input_fixed_point(self):
        ws, _, _ = make_workspace(seed=13)
        state = random_state(ws, np.random.default_rng(14))
        rng = np.random.default_rng(15)
        f = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        psd = f @ f.conj().T
        state.a = psd
        state.lam_dual = np.zeros_like(psd)
        b = update_b(state, ws)
        assert np.linalg.norm(b - psd) / np.linalg.norm(psd) < 1e-10


class TestUpdateDuals:
    def test_gradient_steps(self):
        ws, _, _ = make_workspace(seed=16)
        state = random_state(ws, np.random.default_rng(17))
        ups, lamd = update_duals(state, ws)
        ref_u = state.upsilon + ws.eta * (state.a - state.t3v)
        ref_l = state.lam_dual + ws.rho * (state.b - state.a)
        assert np.allclose(ups, (ref_u + ref_u.conj().T) / 2, atol=1e-13)
        assert np.allclose(lamd, (ref_l + ref_l.conj().T) / 2, atol=1e-13)


class TestSelectLambda:
    def make_inputs(self, seed=0):
        rng = np.random.default_rng(seed)
        paths = make_paths(rng, n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, rng)
        return ideal_received_cov(s, truth.rh, 0.05), s.w

    def test_infinite_frames_gives_zero(self):
        rhat, w = self.make_inputs()
        assert select_lambda(rhat, w, math.inf) == 0.0

    def test_zero_matrix_gives_zero(self):
        _, w = self.make_inputs()
        assert select_lambda(np.zeros((6, 6)), w, 100) == 0.0

    def test_scale_linearity(self):
        rhat, w = self.make_inputs()
        a = select_lambda(rhat, w, 50)
        b = select_lambda(3.0 * rhat, w, 50)
        assert b == pytest.approx(3.0 * a, rel=1e-12)

    def test_decreasing_in_frames(self):
        rhat, w = self.make_inputs()
        lams = [select_lambda(rhat, w, t) for t in (25, 100, 400, 10000)]
        assert all(x > y for x, y in zip(lams, lams[1:]))

    def test_formula(self):
        rhat, w = self.make_inputs()
        t = 80
        evals = np.linalg.eigvalsh((rhat + rhat.conj().T) / 2)
        spec = np.abs(evals).max()
        delta = (np.trace(rhat).real / spec) * math.log(t * rhat.shape[0]) / t
        expect = 0.01 * np.sum(np.abs(w) ** 2) * spec * max(math.sqrt(delta), delta)
        assert select_lambda(rhat, w, t, c=0.01) == pytest.approx(expect, rel=1e-12)

    def test_invalid_frames(self):
        rhat, w = self.make_inputs()
        with pytest.raises(ValueError):
            select_lambda(rhat, w, 0.5)


class TestEstimateCcm:
    def test_noise_free_recovery_three_seeds(self):
        ok = 0
        for seed in range(3):
            paths = make_paths(np.random.default_rng(seed), n_l=2, n_p=1)
            truth = true_ccm(paths, GEOM)
            s = build_sensing_matrix(GEOM, 6, np.random.default_rng(100 + seed))
            rhat = ideal_received_cov(s, truth.rh, 0.0)
            est = estimate_ccm(
                rhat, s.w, DIMS, AdmmConfig(max_iters=4000), t_frames=math.inf
            )
            rel = np.linalg.norm(est.rh_hat - truth.rh) / np.linalg.norm(truth.rh)
            ok += rel <= 0.05
        assert ok == 3

    def test_output_psd_and_generator_consistent(self):
        paths = make_paths(np.random.default_rng(20), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 8, np.random.default_rng(21))
        rhat = ideal_received_cov(s, truth.rh, 0.02)
        est = estimate_ccm(rhat, s.w, DIMS, AdmmConfig(max_iters=1500), t_frames=200)
        evals = np.linalg.eigvalsh(est.rh_hat)
        assert evals.min() >= -1e-10 * max(evals.max(), 1e-300)
        dense = toeplitz_d(est.v_hat.data)
        clip_evals, clip_vecs = np.linalg.eigh((dense + dense.conj().T) / 2)
        ref = (clip_vecs * np.clip(clip_evals, 0, None)) @ clip_vecs.conj().T
        assert np.allclose(est.rh_hat, ref, atol=1e-10 * np.abs(ref).max())

    def test_objective_descent_from_zero(self):
        paths = make_paths(np.random.default_rng(22), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, np.random.default_rng(23))
        rhat = ideal_received_cov(s, truth.rh, 0.05)
        est = estimate_ccm(rhat, s.w, DIMS, AdmmConfig(max_iters=1000), t_frames=50)
        d = est.diagnostics
        assert d.objective_final <= d.objective_zero

    def test_scale_equivariance(self):
        # solving on alpha * rhat with alpha * lam must scale the estimate
        paths = make_paths(np.random.default_rng(24), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, np.random.default_rng(25))
        rhat = ideal_received_cov(s, truth.rh, 0.05)
        cfg = AdmmConfig(lam=1e-3, max_iters=400)
        cfg2 = AdmmConfig(lam=1e-3 * 7.5, max_iters=400)
        a = estimate_ccm(rhat, s.w, DIMS, cfg)
        b = estimate_ccm(7.5 * rhat, s.w, DIMS, cfg2)
        assert np.allclose(b.rh_hat, 7.5 * a.rh_hat, rtol=1e-10, atol=0)

    def test_zero_input(self):
        w = build_sensing_matrix(GEOM, 5, np.random.default_rng(26)).w
        est = estimate_ccm(np.zeros((5, 5)), w, DIMS, AdmmConfig(lam=0.0))
        assert np.all(est.rh_hat == 0)
        assert np.all(est.v_hat.data == 0)
        assert est.diagnostics.converged

    def test_non_hermitian_warns(self):
        paths = make_paths(np.random.default_rng(27), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, np.random.default_rng(28))
        rhat = ideal_received_cov(s, truth.rh, 0.05)
        rhat = rhat + 0.05 * np.linalg.norm(rhat) * np.triu(np.ones_like(rhat), 1)
        with pytest.warns(UserWarning):
            estimate_ccm(rhat, s.w, DIMS, AdmmConfig(lam=0.0, max_iters=5))

    def test_auto_lambda_requires_frames(self):
        w = build_sensing_matrix(GEOM, 5, np.random.default_rng(29)).w
        with pytest.raises(ValueError):
            estimate_ccm(np.eye(5), w, DIMS, AdmmConfig())

    def test_residual_curves_exposed(self):
        paths = make_paths(np.random.default_rng(30), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, np.random.default_rng(31))
        rhat = ideal_received_cov(s, truth.rh, 0.05)
        est = estimate_ccm(rhat, s.w, DIMS, AdmmConfig(lam=0.0, max_iters=50))
        d = est.diagnostics
        assert len(d.r_struct) == d.iterations
        assert len(d.r_split) == d.iterations
        assert len(d.a_change) == d.iterations

    def test_deterministic(self):
        paths = make_paths(np.random.default_rng(32), n_l=2, n_p=1)
        truth = true_ccm(paths, GEOM)
        s = build_sensing_matrix(GEOM, 6, np.random.default_rng(33))
        rhat = ideal_received_cov(s, truth.rh, 0.05)
        cfg = AdmmConfig(lam=1e-4, max_iters=200)
        a = estimate_ccm(rhat, s.w, DIMS, cfg)
        b = estimate_ccm(rhat, s.w, DIMS, cfg)
        assert np.array_equal(a.rh_hat, b.rh_hat)


class TestWorkspaceValidation:
    def test_ill_posed_penalties(self):
        s = build_sensing_matrix(GEOM, 4, np.random.default_rng(34))
        with pytest.raises(IllPosedSubproblemError):
            prepare_workspace(
                np.eye(4), s.w * 0.0, DIMS, lam=0.0, eta=1e-14, rho=1e-14
            )

    def test_shape_checks(self):
        s = build_sensing_matrix(GEOM, 4, np.random.default_rng(35))
        with pytest.raises(ValueError):
            prepare_workspace(np.eye(5), s.w, DIMS, lam=0.0)
        with pytest.raises(ValueError):
            prepare_workspace(np.eye(4), s.w[:, :5], DIMS, lam=0.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AdmmConfig(rho=-1.0)
        with pytest.raises(ValueError):
            AdmmConfig(lam=-0.5)
        with pytest.raises(ValueError):
            AdmmConfig(max_iters=0)
        with pytest.raises(ValueError):
            AdmmConfig(tol=0.0)

    def test_init_state_shapes(self):
        ws, _, _ = make_workspace(seed=36)
        st = init_state(ws)
        assert st.a.shape == (8, 8)
        assert st.v.shape == (3, 3, 3)
        assert np.all(st.upsilon == 0) and np.all(st.lam_dual == 0)
        assert np.array_equal(st.t3v, toeplitz_d(st.v))
