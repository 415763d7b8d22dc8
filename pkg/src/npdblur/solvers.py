"""Nested primal-dual deblurring solvers.

Four outer iterations share one skeleton: extrapolate, take a
(possibly preconditioned) gradient step on the quadratic fidelity, then
approximate the proximal map of the non-smooth penalty with a nested
dual loop warm-started from the previous outer iteration.

* ``npd``     - plain proximal gradient with the nested dual loop;
* ``npdit``   - variable metric: the preconditioner enters both the
  primal update and the dual loop, with step-size backtracking;
* ``pnpd``    - the preconditioner only rescales the gradient, so each
  extra inner iteration costs the same as in ``npd``;
* ``pnpd_ne`` - ``pnpd`` without extrapolation.

Preconditioners are polynomials of the blur normal operator evaluated
on its eigenvalue grid; the shift sequence ``nu_n`` comes from a
scheduler (constant, geometric decay, square-root increase, or a
bootstrap that reaches the identity after ``n_bt`` steps).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels, metrics, regularizers, spectral
from .grids import MetricsRow, NumericalError, check_finite, norm2

NPD = "npd"
NPDIT = "npdit"
PNPD = "pnpd"
PNPD_NE = "pnpd_ne"
ALGORITHMS = (NPD, NPDIT, PNPD, PNPD_NE)

GAMMA_NONE = "none"
GAMMA_FISTA = "fista_t"
GAMMA_RULES = (GAMMA_NONE, GAMMA_FISTA)

CONSTANT = "constant"
DECAY_085 = "decay085"
SQRT_INCREASE = "sqrt_increase"
BOOTSTRAP = "bootstrap"
SCHEDULER_KINDS = (CONSTANT, DECAY_085, SQRT_INCREASE, BOOTSTRAP)

MAX_BACKTRACK = 60


@dataclass(frozen=True)
class Scheduler:
    """Shift sequence nu_n for the preconditioner polynomial."""

    kind: str = CONSTANT
    nu_const: float = 0.1
    nu_inf: float = 0.01
    nu0: float = 0.01
    n_bt: int = 20

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler kind {self.kind!r}")
        if self.kind == CONSTANT and not 0.0 < self.nu_const <= 1.0:
            raise ValueError(f"nu_const must be in (0, 1], got {self.nu_const}")
        if self.kind == DECAY_085 and not 0.0 < self.nu_inf < 0.5:
            raise ValueError(f"nu_inf must be in (0, 0.5), got {self.nu_inf}")
        if self.kind in (SQRT_INCREASE, BOOTSTRAP) and not 0.0 < self.nu0 < 1.0:
            raise ValueError(f"nu0 must be in (0, 1), got {self.nu0}")
        if self.kind == BOOTSTRAP and self.n_bt < 1:
            raise ValueError(f"n_bt must be positive, got {self.n_bt}")


def nu_at(s: Scheduler, n: int) -> float:
    """Evaluate the shift sequence at outer iteration ``n``.

    decay:     nu_n = 0.85^n / 2 + nu_inf
    sqrt rise: nu_n = (1 - 1/sqrt(n+1)) (1 - nu0) + nu0
    bootstrap: nu_n = min(c^(n - n_bt), 1) with c = nu0^(-1/n_bt),
               written as nu0^((n_bt - n)/n_bt) so both endpoints
               (nu0 at n = 0, exactly 1 for n >= n_bt) are exact.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if s.kind == CONSTANT:
        return s.nu_const
    if s.kind == DECAY_085:
        return 0.85**n / 2.0 + s.nu_inf
    if s.kind == SQRT_INCREASE:
        return (1.0 - 1.0 / math.sqrt(n + 1.0)) * (1.0 - s.nu0) + s.nu0
    if n >= s.n_bt:
        return 1.0
    return s.nu0 ** ((s.n_bt - n) / s.n_bt)


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    alpha: float = 1.0
    beta: float = 0.99 / 8.0
    k_max: int = 1
    gamma_rule: str = GAMMA_FISTA
    epsilon: float = 0.99
    delta_bt: float = 0.5
    l_init: float = 1.0
    scheduler: Scheduler = Scheduler()
    poly: spectral.Polynomial | None = None
    rescale_lambda: bool = False
    exact_prox: bool = False
    max_iter: int = 100

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.gamma_rule not in GAMMA_RULES:
            raise ValueError(f"unknown gamma rule {self.gamma_rule!r}")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if not 0.0 < self.delta_bt < 1.0:
            raise ValueError("delta_bt must be in (0, 1)")
        if not self.l_init > 0.0:
            raise ValueError("l_init must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True)
class SolverState:
    n: int
    u_curr: np.ndarray
    u_prev: np.ndarray
    v_warm: np.ndarray
    l_curr: float
    t_curr: float
    bt_trials: int = 0


@dataclass(frozen=True)
class Problem:
    """Blur spectrum, observed data, penalty, optional ground truth."""

    spec: np.ndarray
    b_delta: np.ndarray
    reg: regularizers.Regularizer
    x_true: np.ndarray | None = None

    def __post_init__(self):
        if self.spec.shape != self.b_delta.shape:
            raise ValueError(
                f"spectrum grid {self.spec.shape} != data grid {self.b_delta.shape}"
            )
        if self.x_true is not None and self.x_true.shape != self.b_delta.shape:
            raise ValueError("ground truth shape mismatch")


def initial_state(problem: Problem, cfg: SolverConfig, u0=None) -> SolverState:
    u0 = problem.b_delta if u0 is None else u0
    return SolverState(
        n=0,
        u_curr=u0.copy(),
        u_prev=u0.copy(),
        v_warm=regularizers.dual_zero(problem.reg, u0.shape),
        l_curr=cfg.l_init,
        t_curr=1.0,
    )


def grad_f(problem: Problem, u: np.ndarray) -> np.ndarray:
    """Gradient of the fidelity 0.5 ||A u - b||^2: A^T (A u - b)."""
    r = spectral.conv_apply(problem.spec, u) - problem.b_delta
    return spectral.conv_adjoint_apply(problem.spec, r)


def fidelity(problem: Problem, u: np.ndarray) -> float:
    return 0.5 * norm2(spectral.conv_apply(problem.spec, u) - problem.b_delta) ** 2


def extrapolation_gamma(
    state: SolverState, rule: str, c_bound: float
) -> tuple[float, float]:
    """Inertial weight for the current step and the advanced t value.

    The accelerated rule follows t_n = (1 + sqrt(1 + 4 t_{n-1}^2)) / 2
    with gamma_n = (t_{n-1} - 1)/t_n, damped by
    min(1, c_bound / (n^2 ||u_n - u_{n-1}|| + eps)) so that the series
    sum gamma_n ||u_n - u_{n-1}|| stays finite.
    """
    if rule not in GAMMA_RULES:
        raise ValueError(f"unknown gamma rule {rule!r}")
    if rule == GAMMA_NONE or state.n == 0:
        return 0.0, state.t_curr
    t_prev = state.t_curr
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_prev * t_prev))
    gamma = (t_prev - 1.0) / t_next
    du = norm2(state.u_curr - state.u_prev)
    eps_m = float(np.finfo(np.float64).eps)
    gamma *= min(1.0, c_bound / (state.n**2 * du + eps_m))
    return gamma, t_next


def _gamma_bound(problem: Problem) -> float:
    return 1e4 * norm2(problem.b_delta)


# ---------------------------------------------------------------------------
# Nested dual loop
# ---------------------------------------------------------------------------


def inner_dual_loop(
    a_half: np.ndarray,
    v0: np.ndarray,
    alpha: float,
    beta: float,
    k_max: int,
    reg: regularizers.Regularizer,
    metric: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Approximate the proximal map of the penalty at ``a_half``.

    Iterates the dual ascent
        u^k = a - alpha P^{-1} W^T v^k
        v^{k+1} = prox of conjugate (v^k + (beta/alpha) W u^k)
    (P absent when ``metric`` is None; for the metric variant ``a_half``
    must already contain the preconditioned gradient step).  Returns the
    ergodic average of u^1..u^{k_max}, the last primal point, and the
    final dual variable for warm starting.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    boa = beta / alpha
    if (
        metric is None
        and reg.kind == regularizers.TV_ISO
        and _kernels.HAVE_NUMBA
    ):
        return _kernels.tv_dual_loop(a_half, v0, alpha, boa, reg.lam, k_max)

    def primal(v):
        wt = regularizers.w_adjoint(reg, v)
        if metric is not None:
            wt = spectral.precond_solve(metric, wt)
        return a_half - alpha * wt

    v = v0
    acc = np.zeros_like(a_half)
    for k in range(k_max):
        u = primal(v)
        if k > 0:
            acc += u
        v = regularizers.prox_conj(reg, v + boa * regularizers.w_apply(reg, u))
    u_last = primal(v)
    acc += u_last
    return acc / k_max, u_last, v


# ---------------------------------------------------------------------------
# Outer steps
# ---------------------------------------------------------------------------


def _effective_reg(problem: Problem, lam_eff: float) -> regularizers.Regularizer:
    if lam_eff == problem.reg.lam:
        return problem.reg
    return replace(problem.reg, lam=lam_eff)


def _outer_step(problem, cfg, state, pspec, lam_eff, gamma_rule) -> SolverState:
    gamma, t_next = extrapolation_gamma(state, gamma_rule, _gamma_bound(problem))
    if gamma == 0.0:
        u_bar = state.u_curr
    else:
        u_bar = state.u_curr + gamma * (state.u_curr - state.u_prev)
    gf = grad_f(problem, u_bar)
    if pspec is not None:
        gf = spectral.precond_solve(pspec, gf)
    a_half = u_bar - cfg.alpha * gf
    if cfg.exact_prox:
        if problem.reg.kind != regularizers.L1:
            raise ValueError("exact_prox is only available for the l1 penalty")
        u_next = regularizers.soft_threshold(a_half, cfg.alpha * lam_eff)
        u_last, v_out = u_next, state.v_warm
    else:
        u_next, u_last, v_out = inner_dual_loop(
            a_half, state.v_warm, cfg.alpha, cfg.beta, cfg.k_max,
            _effective_reg(problem, lam_eff),
        )
    return SolverState(
        n=state.n + 1,
        u_curr=u_next,
        u_prev=state.u_curr,
        v_warm=v_out,
        l_curr=state.l_curr,
        t_curr=t_next,
        bt_trials=0,
    )


def npd_step(problem: Problem, cfg: SolverConfig, state: SolverState) -> SolverState:
    """One plain nested primal-dual step."""
    if cfg.algorithm != NPD:
        raise ValueError(f"npd_step got algorithm {cfg.algorithm!r}")
    return _outer_step(problem, cfg, state, None, problem.reg.lam, cfg.gamma_rule)


def pnpd_poly_at(cfg: SolverConfig, n: int) -> spectral.Polynomial:
    """Preconditioner polynomial for the gradient-rescaling variants.

    An explicit ``cfg.poly`` wins; a constant scheduler yields the
    shifted form x + nu; the non-stationary schedulers blend the normal
    operator with the identity, (1 - nu_n) x + nu_n.
    """
    if cfg.poly is not None:
        return cfg.poly
    if cfg.scheduler.kind == CONSTANT:
        return spectral.shifted_preconditioner_poly(cfg.scheduler.nu_const)
    return spectral.blended_preconditioner_poly(nu_at(cfg.scheduler, n))


def pnpd_step(problem: Problem, cfg: SolverConfig, state: SolverState) -> SolverState:
    """One left-preconditioned step; the dual loop never sees P.

    When the polynomial degenerates to the identity the spectral solve
    is skipped entirely, so the step becomes operator-identical to
    ``npd_step`` (this is what the bootstrap scheduler relies on after
    n_bt iterations).
    """
    if cfg.algorithm not in (PNPD, PNPD_NE):
        raise ValueError(f"pnpd_step got algorithm {cfg.algorithm!r}")
    poly = pnpd_poly_at(cfg, state.n)
    lam_eff = problem.reg.lam
    if poly.is_identity:
        pspec = None
        if cfg.rescale_lambda:
            lam_eff = problem.reg.lam * 1.0
    else:
        pspec = spectral.build_precond(poly, problem.spec)
        norms = spectral.operator_norms(problem.spec, poly)
        if cfg.alpha > 1.0 / norms.norm_pinv_ata + 1e-12:
            raise NumericalError(
                f"alpha = {cfg.alpha} exceeds 1/||P^-1 A^T A|| = "
                f"{1.0 / norms.norm_pinv_ata:.6g}"
            )
        if cfg.rescale_lambda:
            lam_eff = problem.reg.lam * norms.norm_sinv
    rule = GAMMA_NONE if cfg.algorithm == PNPD_NE else cfg.gamma_rule
    return _outer_step(problem, cfg, state, pspec, lam_eff, rule)


def metric_norm_sq(pspec: np.ndarray, d: np.ndarray) -> float:
    """||d||_P^2 = <d, P d> evaluated spectrally (Parseval)."""
    dhat2 = np.abs(np.fft.fft2(d)) ** 2
    return float((pspec * dhat2).sum()) / d.size


def npdit_step(problem: Problem, cfg: SolverConfig, state: SolverState) -> SolverState:
    """One variable-metric step with step-size backtracking.

    The metric is P_n = A^T A + nu_n I.  The dual step is
    beta_n = epsilon / (||P_n^{-1}|| ||W||^2); the primal step
    alpha_n = epsilon / L_n grows the local Lipschitz estimate by
    1/delta_bt until the quadratic upper bound in the P_n norm holds,
    re-entering the inner loop from the same warm start each trial.
    """
    if cfg.algorithm != NPDIT:
        raise ValueError(f"npdit_step got algorithm {cfg.algorithm!r}")
    nu = nu_at(cfg.scheduler, state.n)
    poly = cfg.poly if cfg.poly is not None else spectral.shifted_preconditioner_poly(nu)
    pspec = spectral.build_precond(poly, problem.spec)
    norms = spectral.operator_norms(problem.spec, poly)
    beta_n = cfg.epsilon / (
        norms.norm_pinv * regularizers.w_norm_sq_bound(problem.reg)
    )

    gamma, t_next = extrapolation_gamma(state, cfg.gamma_rule, _gamma_bound(problem))
    if gamma == 0.0:
        u_bar = state.u_curr
    else:
        u_bar = state.u_curr + gamma * (state.u_curr - state.u_prev)
    r_bar = spectral.conv_apply(problem.spec, u_bar) - problem.b_delta
    f_bar = 0.5 * norm2(r_bar) ** 2
    gf = spectral.conv_adjoint_apply(problem.spec, r_bar)
    pg = spectral.precond_solve(pspec, gf)

    l_entry = state.l_curr
    for trial in range(MAX_BACKTRACK + 1):
        l_n = l_entry / cfg.delta_bt**trial
        alpha_n = cfg.epsilon / l_n
        a_half = u_bar - alpha_n * pg
        u_tilde, _, v_out = inner_dual_loop(
            a_half, state.v_warm, alpha_n, beta_n, cfg.k_max, problem.reg, metric=pspec
        )
        d = u_tilde - u_bar
        bound = (
            f_bar
            + float(np.dot(gf.ravel(), d.ravel()))
            + 0.5 * l_n * metric_norm_sq(pspec, d)
        )
        if fidelity(problem, u_tilde) <= bound:
            return SolverState(
                n=state.n + 1,
                u_curr=u_tilde,
                u_prev=state.u_curr,
                v_warm=v_out,
                l_curr=l_n,
                t_curr=t_next,
                bt_trials=trial,
            )
    raise NumericalError(
        f"backtracking did not terminate within {MAX_BACKTRACK} trials "
        f"(delta_bt = {cfg.delta_bt}, L start = {l_entry})"
    )


_STEP = {NPD: npd_step, NPDIT: npdit_step, PNPD: pnpd_step, PNPD_NE: pnpd_step}


def step(problem: Problem, cfg: SolverConfig, state: SolverState) -> SolverState:
    return _STEP[cfg.algorithm](problem, cfg, state)


def _validate_run(problem: Problem, cfg: SolverConfig) -> None:
    if cfg.exact_prox:
        if problem.reg.kind != regularizers.L1:
            raise ValueError("exact_prox is only available for the l1 penalty")
        return
    if cfg.algorithm in (NPD, PNPD, PNPD_NE):
        if not cfg.beta * regularizers.w_norm_sq_bound(problem.reg) < 1.0:
            raise ValueError(
                f"beta = {cfg.beta} violates beta ||W||^2 < 1 for this penalty"
            )


def run_solver(
    problem: Problem,
    cfg: SolverConfig,
    trace_sink=None,
    u0: np.ndarray | None = None,
    ssim_params: metrics.SsimParams = metrics.SsimParams(),
) -> tuple[np.ndarray, list[MetricsRow]]:
    """Run ``cfg.max_iter`` outer iterations from u0 (default: the data).

    After every step a metrics row is appended (and passed to
    ``trace_sink`` when given): iteration counter, wall time excluding
    initialization, objective value, and error metrics against the
    ground truth when the problem carries one.
    """
    _validate_run(problem, cfg)
    state = initial_state(problem, cfg, u0)
    stepper = _STEP[cfg.algorithm]
    trace: list[MetricsRow] = []
    nan = float("nan")
    clock0 = time.perf_counter()
    for _ in range(cfg.max_iter):
        state = stepper(problem, cfg, state)
        check_finite(state.u_curr, "solver iterate")
        elapsed = time.perf_counter() - clock0
        if problem.x_true is not None:
            err = metrics.rre(state.u_curr, problem.x_true)
            sim = metrics.ssim(state.u_curr, problem.x_true, ssim_params)
        else:
            err, sim = nan, nan
        row = MetricsRow(
            iteration=state.n,
            elapsed_s=elapsed,
            objective=metrics.objective(problem, state.u_curr),
            rre=err,
            ssim=sim,
        )
        trace.append(row)
        if trace_sink is not None:
            trace_sink(row)
    return state.u_curr, trace


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESETS = ("ista", "fista", "itta", "npd", "npdit", "pnpd", "pnpd_ne", "pnpd_bt")


def make_preset(name: str) -> SolverConfig:
    """Reference configurations for the standard comparisons.

    ista / fista / itta use the closed-form l1 prox (pair them with an
    l1 problem); the others are the TV deblurring defaults: alpha = 1,
    beta = 0.99/8 (0.99 nu / 8 for the variable-metric run), nu = 0.1,
    k_max = 3 for the preconditioned variants and 1 for plain npd.
    """
    key = name.lower()
    if key == "ista":
        return SolverConfig(
            PNPD, alpha=1.0, beta=0.99, k_max=1, gamma_rule=GAMMA_NONE,
            poly=spectral.IDENTITY_POLY, exact_prox=True,
        )
    if key == "fista":
        return SolverConfig(
            PNPD, alpha=1.0, beta=0.99, k_max=1, gamma_rule=GAMMA_FISTA,
            poly=spectral.IDENTITY_POLY, exact_prox=True,
        )
    if key == "itta":
        return SolverConfig(
            PNPD_NE, alpha=1.0, beta=0.99, k_max=1, gamma_rule=GAMMA_NONE,
            scheduler=Scheduler(CONSTANT, nu_const=0.1), exact_prox=True,
        )
    if key == "npd":
        return SolverConfig(
            NPD, alpha=1.0, beta=0.99 / 8.0, k_max=1, gamma_rule=GAMMA_FISTA,
        )
    if key == "npdit":
        return SolverConfig(
            NPDIT, alpha=1.0, beta=0.99 * 0.1 / 8.0, k_max=3,
            gamma_rule=GAMMA_FISTA, epsilon=0.99, delta_bt=0.5, l_init=1.0,
            scheduler=Scheduler(CONSTANT, nu_const=0.1),
        )
    if key == "pnpd":
        return SolverConfig(
            PNPD, alpha=1.0, beta=0.99 / 8.0, k_max=3, gamma_rule=GAMMA_FISTA,
            scheduler=Scheduler(CONSTANT, nu_const=0.1),
        )
    if key == "pnpd_ne":
        return SolverConfig(
            PNPD_NE, alpha=1.0, beta=0.99 / 8.0, k_max=1, gamma_rule=GAMMA_NONE,
            scheduler=Scheduler(CONSTANT, nu_const=0.1),
        )
    if key == "pnpd_bt":
        return SolverConfig(
            PNPD, alpha=1.0, beta=0.99 / 8.0, k_max=3, gamma_rule=GAMMA_FISTA,
            scheduler=Scheduler(BOOTSTRAP, nu0=1e-2, n_bt=20),
            rescale_lambda=True,
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
