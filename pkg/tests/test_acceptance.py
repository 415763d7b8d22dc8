"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line with its runtime (run with ``pytest tests/test_acceptance.py -v -s``).
"""

import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from npdblur import bench, metrics, regularizers, solvers, spectral
from npdblur.grids import norm2
from npdblur.metrics import SsimParams
from npdblur.solvers import Problem, Scheduler, SolverConfig


@contextmanager
def criterion(cid, desc, budget_s):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {cid:02d} FAIL  {desc}")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {cid:02d} PASS  {desc}  [{elapsed:.2f}s / {budget_s:.0f}s]")
    assert elapsed < budget_s, f"criterion {cid} exceeded {budget_s}s ({elapsed:.1f}s)"


def random_psf(rng, support=7):
    k = rng.uniform(0.0, 1.0, (support, support))
    return k / k.sum()


def random_poly(rng, max_degree=4):
    degree = int(rng.integers(0, max_degree + 1))
    coeffs = (float(rng.uniform(0.05, 1.0)),) + tuple(rng.uniform(0.0, 1.0, degree))
    return spectral.Polynomial(coeffs)


@pytest.fixture(scope="module")
def deblur_problem():
    """64x64 phantom, Gaussian blur (sigma 2, support 21), 1% noise."""
    x = bench.make_phantom(64, 64)
    psf = bench.gen_psf(bench.PsfSpec("gaussian", sigma=2.0, support=21))
    spec = spectral.psf_to_spectrum(psf, 64, 64)
    b = spectral.conv_apply(spec, x)
    b_delta, _, _ = bench.add_noise(b, bench.NoiseSpec(0.01, 1234))
    return x, spec, b_delta


def test_01_commutation_identity():
    with criterion(1, "preconditioner commutes with the blur transpose", 5.0):
        rng = np.random.default_rng(101)
        for _ in range(200):
            spec = spectral.psf_to_spectrum(random_psf(rng), 32, 32)
            pspec = spectral.build_precond(random_poly(rng), spec)
            y = rng.standard_normal((32, 32))
            lhs = spectral.precond_solve(pspec, spectral.conv_adjoint_apply(spec, y))
            rhs = spectral.conv_adjoint_apply(spec, spectral.precond_solve(pspec, y))
            assert np.abs(lhs - rhs).max() <= 1e-10 * norm2(y)


def test_02_norm_bound():
    with criterion(2, "||P^-1 A^T A|| <= (c1 + c0 ||A||^-2)^-1", 1.0):
        rng = np.random.default_rng(202)
        for _ in range(200):
            spec = spectral.psf_to_spectrum(random_psf(rng), 32, 32)
            p = random_poly(rng)
            norms = spectral.operator_norms(spec, p)
            c0 = p.coeffs[0]
            c1 = p.coeffs[1] if len(p.coeffs) > 1 else 0.0
            bound = 1.0 / (c1 + c0 / norms.norm_a**2)
            assert norms.norm_pinv_ata <= bound + 1e-12


def _l1_problem(seed=5, n=16, lam=1e-3):
    rng = np.random.default_rng(seed)
    psf = random_psf(rng, 5)
    spec = spectral.psf_to_spectrum(psf, n, n)
    x = np.clip(bench.make_phantom(n, n) + 0.05 * rng.standard_normal((n, n)), 0, 1)
    b = spectral.conv_apply(spec, x)
    b_delta, _, _ = bench.add_noise(b, bench.NoiseSpec(0.01, 3))
    return Problem(spec, b_delta, regularizers.Regularizer("l1", lam))


def test_03_fista_and_ista_reduction():
    with criterion(3, "identity preconditioner reproduces fista/ista exactly", 1.0):
        lam = 1e-3
        prob = _l1_problem(lam=lam)
        spec, b_delta = prob.spec, prob.b_delta

        def blur(u):
            return np.fft.ifft2(spec * np.fft.fft2(u)).real

        def blur_t(u):
            return np.fft.ifft2(np.conj(spec) * np.fft.fft2(u)).real

        def soft(u, t):
            return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)

        # accelerated variant against a from-scratch textbook loop
        cfg = replace(solvers.make_preset("fista"), max_iter=50)
        state = solvers.initial_state(prob, cfg)
        x_ref = b_delta.copy()
        x_prev, y, t = x_ref.copy(), x_ref.copy(), 1.0
        for _ in range(50):
            state = solvers.step(prob, cfg, state)
            x_new = soft(y - blur_t(blur(y) - b_delta), lam)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x_prev)
            x_prev, t = x_new, t_new
            assert norm2(state.u_curr - x_new) <= 1e-12 * norm2(x_new)

        # plain variant: no inertia
        cfg_i = replace(solvers.make_preset("ista"), max_iter=50)
        state = solvers.initial_state(prob, cfg_i)
        x_it = b_delta.copy()
        for _ in range(50):
            state = solvers.step(prob, cfg_i, state)
            x_it = soft(x_it - blur_t(blur(x_it) - b_delta), lam)
            assert norm2(state.u_curr - x_it) <= 1e-12 * norm2(x_it)


def test_04_itta_reduction():
    with criterion(4, "shifted preconditioner reproduces the iterated "
                      "Tikhonov thresholding update", 1.0):
        lam, nu, n = 1e-3, 0.1, 16
        prob = _l1_problem(lam=lam, n=n)
        spec, b_delta = prob.spec, prob.b_delta
        d = n * n
        a_dense = np.zeros((d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            a_dense[:, j] = np.fft.ifft2(spec * np.fft.fft2(e.reshape(n, n))).real.ravel()
        gram = a_dense @ a_dense.T + nu * np.eye(d)

        cfg = replace(solvers.make_preset("itta"), max_iter=50)
        state = solvers.initial_state(prob, cfg)
        x_ref = b_delta.copy()
        for _ in range(50):
            state = solvers.step(prob, cfg, state)
            r = (a_dense @ x_ref.ravel()) - b_delta.ravel()
            step_vec = a_dense.T @ np.linalg.solve(gram, r)
            x_ref = regularizers.soft_threshold(
                x_ref - step_vec.reshape(n, n), lam
            )
            assert norm2(state.u_curr - x_ref) <= 1e-10 * norm2(x_ref)


def test_05_inner_loop_prox_fidelity():
    with criterion(5, "nested dual loop converges to the proximal point", 30.0):
        # TV: moderate horizon against a 100x longer reference
        for seed in (11, 12):
            rng = np.random.default_rng(seed)
            a = rng.standard_normal((8, 8))
            reg = regularizers.Regularizer("tv_iso", 0.03)
            v0 = np.zeros((2, 8, 8))
            u_4, _, _ = solvers.inner_dual_loop(a, v0, 1.0, 0.99 / 8, 10**4, reg)
            u_6, _, _ = solvers.inner_dual_loop(a, v0, 1.0, 0.99 / 8, 10**6, reg)
            assert norm2(u_4 - u_6) <= 1e-5 * norm2(u_6)
        # identity analysis operator: closed form is the soft threshold
        for seed in (13, 14, 15):
            rng = np.random.default_rng(seed)
            a = rng.standard_normal((8, 8))
            lam = 0.3
            reg = regularizers.Regularizer("l1", lam)
            u_avg, _, _ = solvers.inner_dual_loop(
                a, np.zeros((8, 8)), 1.0, 0.99, 10**4, reg
            )
            ref = regularizers.soft_threshold(a, lam)
            assert norm2(u_avg - ref) <= 1e-6 * norm2(ref)


def test_06_right_preconditioning_equivalence():
    with criterion(6, "metric prox equals rescaled prox of the transformed "
                      "operator (quadratic penalty)", 2.0):
        rng = np.random.default_rng(606)
        n, d = 8, 64
        w_dense = np.zeros((2 * d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            w_dense[:, j] = spectral.grad_apply(e.reshape(n, n)).ravel()
        eye = np.eye(d)

        def dense_from_multiplier(rvals):
            out = np.zeros((d, d))
            for j in range(d):
                e = np.zeros(d)
                e[j] = 1.0
                out[:, j] = np.fft.ifft2(
                    rvals * np.fft.fft2(e.reshape(n, n))
                ).real.ravel()
            return out

        for _ in range(50):
            g = rng.standard_normal((n, n))
            rvals = np.abs(np.fft.fft2(g)) ** 2 + rng.uniform(0.5, 2.0)
            r_dense = dense_from_multiplier(rvals)
            mu = rng.uniform(0.2, 3.0)
            alpha = rng.uniform(0.3, 2.0)
            z = rng.standard_normal(d)
            w_tilde = w_dense @ np.linalg.inv(r_dense)
            lhs = np.linalg.solve(alpha * mu * (w_tilde.T @ w_tilde) + eye, z)
            rhs = r_dense @ np.linalg.solve(
                alpha * mu * (w_dense.T @ w_dense) + r_dense.T @ r_dense,
                r_dense.T @ z,
            )
            assert norm2(lhs - rhs) <= 1e-10 * norm2(rhs)


def _first_within(rres, factor=1.05):
    floor = min(rres) * factor
    return next(i + 1 for i, v in enumerate(rres) if v <= floor)


def test_07_convergence_ordering(deblur_problem):
    with criterion(7, "preconditioned variants reach their error floor "
                      "before the plain method", 60.0):
        x, spec, b_delta = deblur_problem
        runs = {
            "npd": (solvers.make_preset("npd"), 2e-4),
            "npdit": (solvers.make_preset("npdit"), 2e-4),
            "pnpd": (solvers.make_preset("pnpd"), 2e-3),
        }
        hit, final = {}, {}
        for name, (cfg, lam) in runs.items():
            prob = Problem(spec, b_delta, regularizers.Regularizer("tv_iso", lam), x)
            _, trace = solvers.run_solver(prob, replace(cfg, max_iter=100))
            rres = [row.rre for row in trace]
            hit[name] = _first_within(rres)
            final[name] = rres[-1]
        rre_data = metrics.rre(b_delta, x)
        assert hit["pnpd"] < hit["npd"]
        assert hit["npdit"] < hit["npd"]
        for name in runs:
            assert final[name] < rre_data


def test_08_scheduler_formulas(deblur_problem):
    with criterion(8, "shift schedules match their closed forms; bootstrap "
                      "degenerates to the plain method", 1.0):
        nu_inf, nu0, n_bt = 0.01, 0.01, 20
        dec = Scheduler(solvers.DECAY_085, nu_inf=nu_inf)
        sqr = Scheduler(solvers.SQRT_INCREASE, nu0=nu0)
        boo = Scheduler(solvers.BOOTSTRAP, nu0=nu0, n_bt=n_bt)
        c = nu0 ** (-1.0 / n_bt)
        for n in (0, 1, n_bt, 10 * n_bt):
            assert abs(
                solvers.nu_at(dec, n) - (0.85**n / 2.0 + nu_inf)
            ) <= 1e-15
            assert abs(
                solvers.nu_at(sqr, n)
                - ((1.0 - 1.0 / np.sqrt(n + 1.0)) * (1.0 - nu0) + nu0)
            ) <= 1e-15
            assert abs(
                solvers.nu_at(boo, n) - min(c ** (n - n_bt), 1.0)
            ) <= 1e-15
        assert solvers.nu_at(boo, 0) == nu0
        assert solvers.nu_at(boo, n_bt) == 1.0

        # past n_bt a preconditioned step is the plain step, operator level
        x, spec, b_delta = deblur_problem
        prob = Problem(spec, b_delta, regularizers.Regularizer("tv_iso", 2e-4), x)
        cfg_p = SolverConfig(
            solvers.PNPD, beta=0.99 / 8, k_max=3, scheduler=boo,
            rescale_lambda=True,
        )
        cfg_n = SolverConfig(solvers.NPD, beta=0.99 / 8, k_max=3)
        rng = np.random.default_rng(808)
        state = solvers.SolverState(
            n=n_bt,
            u_curr=b_delta + 0.01 * rng.standard_normal(b_delta.shape),
            u_prev=b_delta.copy(),
            v_warm=0.0001 * rng.standard_normal((2,) + b_delta.shape),
            l_curr=1.0,
            t_curr=4.0,
        )
        out_p = solvers.pnpd_step(prob, cfg_p, state)
        out_n = solvers.npd_step(prob, cfg_n, state)
        assert out_p.u_curr.tobytes() == out_n.u_curr.tobytes()
        assert out_p.v_warm.tobytes() == out_n.v_warm.tobytes()


def test_09_backtracking(deblur_problem):
    with criterion(9, "step-size backtracking: immediate pass for large L, "
                      "finite termination from tiny L", 5.0):
        x, spec, b_delta = deblur_problem
        nu = 0.1
        prob = Problem(spec, b_delta, regularizers.Regularizer("tv_iso", 2e-4), x)
        norms = spectral.operator_norms(
            spec, spectral.shifted_preconditioner_poly(nu)
        )
        l_safe = norms.norm_a**2 / nu
        cfg = SolverConfig(
            solvers.NPDIT, k_max=2, gamma_rule=solvers.GAMMA_NONE,
            l_init=l_safe, scheduler=Scheduler(solvers.CONSTANT, nu_const=nu),
        )
        state = solvers.initial_state(prob, cfg)
        for _ in range(3):
            state = solvers.npdit_step(prob, cfg, state)
            assert state.bt_trials == 0

        cfg_tiny = replace(cfg, l_init=1e-6)
        state = solvers.initial_state(prob, cfg_tiny)
        out = solvers.npdit_step(prob, cfg_tiny, state)
        assert 0 < out.bt_trials <= 60
        # accepted step satisfies the quadratic upper bound
        poly = spectral.shifted_preconditioner_poly(nu)
        pspec = spectral.build_precond(poly, spec)
        beta_n = cfg.epsilon / (spectral.operator_norms(spec, poly).norm_pinv * 8.0)
        alpha_n = cfg.epsilon / out.l_curr
        u_bar = state.u_curr
        gf = solvers.grad_f(prob, u_bar)
        a_half = u_bar - alpha_n * spectral.precond_solve(pspec, gf)
        u_tilde, _, _ = solvers.inner_dual_loop(
            a_half, state.v_warm, alpha_n, beta_n, cfg.k_max, prob.reg, metric=pspec
        )
        d = u_tilde - u_bar
        bound = (
            solvers.fidelity(prob, u_bar)
            + float(np.dot(gf.ravel(), d.ravel()))
            + 0.5 * out.l_curr * solvers.metric_norm_sq(pspec, d)
        )
        assert solvers.fidelity(prob, u_tilde) <= bound + 1e-12


def test_10_metric_properties():
    with criterion(10, "error metrics: exact special cases", 1.0):
        rng = np.random.default_rng(1010)
        x = rng.uniform(0.1, 0.9, (12, 12))
        assert metrics.rre(x, x) == 0.0
        assert metrics.rre(np.zeros_like(x), x) == pytest.approx(1.0, rel=1e-14)
        assert metrics.rre(2.0 * x, x) == pytest.approx(1.0, rel=1e-14)
        assert metrics.ssim(x, x) == pytest.approx(1.0, abs=1e-13)
        c1 = 0.01**2
        got = metrics.ssim(np.zeros((9, 9)), np.ones((9, 9)))
        assert got == pytest.approx(c1 / (1.0 + c1), rel=1e-12)
        y = rng.uniform(0.1, 0.9, (12, 12))
        assert metrics.ssim(x, y) == pytest.approx(metrics.ssim(y, x), abs=1e-15)


def test_11_stability_phenomenon(deblur_problem):
    with criterion(11, "small shift with one inner iteration destabilizes; "
                       "more inner work or no inertia restores stability", 60.0):
        x, spec, b_delta = deblur_problem
        lam = 4e-3
        prob = Problem(spec, b_delta, regularizers.Regularizer("tv_iso", lam), x)
        sched = Scheduler(solvers.CONSTANT, nu_const=1e-2)

        def max_rise(cfg):
            _, trace = solvers.run_solver(prob, cfg)
            rres = [row.rre for row in trace]
            floor = np.minimum.accumulate(rres)
            return max((r - f) / f for r, f in zip(rres, floor))

        unstable = replace(
            solvers.make_preset("pnpd"), scheduler=sched, k_max=1, max_iter=50
        )
        more_inner = replace(unstable, k_max=10)
        no_inertia = replace(
            solvers.make_preset("pnpd_ne"), scheduler=sched, k_max=1, max_iter=50
        )
        assert max_rise(unstable) >= 0.05
        assert max_rise(more_inner) < 0.05
        assert max_rise(no_inertia) < 0.05
