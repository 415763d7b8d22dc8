"""Solver configuration files.

Flat structured text: ``key = value`` lines grouped under bracketed
section headers.  Unknown sections or keys are rejected.  Schema:

    [solver]
    preset = pnpd            optional; applies a preset before overrides
    algorithm = pnpd         npd | npdit | pnpd | pnpd_ne
    alpha = 1.0
    beta = 0.12375
    k_max = 3
    gamma_rule = fista_t     none | fista_t
    epsilon = 0.99           backtracking parameters, npdit only
    delta_bt = 0.5
    l_init = 1.0
    poly = 0.1, 1.0          optional explicit coefficients c0, c1, ...
    rescale_lambda = false
    exact_prox = false
    max_iter = 100

    [scheduler]
    kind = constant          constant | decay085 | sqrt_increase | bootstrap
    nu_const = 0.1
    nu_inf = 0.01
    nu0 = 0.01
    n_bt = 20

    [regularizer]
    kind = tv_iso            tv_iso | l1
    lambda = 2e-4

Every key is optional except [regularizer] lambda; numbers use the
decimal point regardless of locale.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import replace

from . import solvers, spectral
from .regularizers import Regularizer

_SOLVER_KEYS = {
    "preset", "algorithm", "alpha", "beta", "k_max", "gamma_rule",
    "epsilon", "delta_bt", "l_init", "poly", "rescale_lambda",
    "exact_prox", "max_iter",
}
_SCHEDULER_KEYS = {"kind", "nu_const", "nu_inf", "nu0", "n_bt"}
_REGULARIZER_KEYS = {"kind", "lambda"}
_SECTIONS = {
    "solver": _SOLVER_KEYS,
    "scheduler": _SCHEDULER_KEYS,
    "regularizer": _REGULARIZER_KEYS,
}

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def _parse_bool(s: str) -> bool:
    try:
        return _BOOL[s.strip().lower()]
    except KeyError:
        raise ValueError(f"bad boolean {s!r}") from None


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, delimiters=("=",))


def parse_config(text: str) -> tuple[solvers.SolverConfig, Regularizer | None]:
    """Parse config text into a solver configuration and optional penalty."""
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}]")

    sol = cp["solver"] if cp.has_section("solver") else {}
    if "preset" in sol:
        cfg = solvers.make_preset(sol["preset"])
    else:
        if "algorithm" not in sol:
            raise ValueError("config needs [solver] algorithm or preset")
        cfg = solvers.SolverConfig(algorithm=sol["algorithm"].strip().lower())

    updates = {}
    if "algorithm" in sol:
        updates["algorithm"] = sol["algorithm"].strip().lower()
    for key in ("alpha", "beta", "epsilon", "delta_bt", "l_init"):
        if key in sol:
            updates[key] = float(sol[key])
    for key in ("k_max", "max_iter"):
        if key in sol:
            updates[key] = int(sol[key])
    if "gamma_rule" in sol:
        updates["gamma_rule"] = sol["gamma_rule"].strip().lower()
    if "rescale_lambda" in sol:
        updates["rescale_lambda"] = _parse_bool(sol["rescale_lambda"])
    if "exact_prox" in sol:
        updates["exact_prox"] = _parse_bool(sol["exact_prox"])
    if "poly" in sol:
        coeffs = tuple(float(c) for c in sol["poly"].split(","))
        updates["poly"] = spectral.Polynomial(coeffs)

    if cp.has_section("scheduler"):
        sch = cp["scheduler"]
        sched_kwargs = {}
        if "kind" in sch:
            sched_kwargs["kind"] = sch["kind"].strip().lower()
        for key in ("nu_const", "nu_inf", "nu0"):
            if key in sch:
                sched_kwargs[key] = float(sch[key])
        if "n_bt" in sch:
            sched_kwargs["n_bt"] = int(sch["n_bt"])
        updates["scheduler"] = replace(cfg.scheduler, **sched_kwargs)

    cfg = replace(cfg, **updates) if updates else cfg

    reg = None
    if cp.has_section("regularizer"):
        rg = cp["regularizer"]
        if "lambda" not in rg:
            raise ValueError("[regularizer] section needs lambda")
        reg = Regularizer(kind=rg.get("kind", "tv_iso").strip().lower(),
                          lam=float(rg["lambda"]))
    return cfg, reg


def load_config(path) -> tuple[solvers.SolverConfig, Regularizer | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: solvers.SolverConfig, reg: Regularizer | None = None) -> str:
    out = io.StringIO()
    out.write("[solver]\n")
    out.write(f"algorithm = {cfg.algorithm}\n")
    out.write(f"alpha = {cfg.alpha!r}\n")
    out.write(f"beta = {cfg.beta!r}\n")
    out.write(f"k_max = {cfg.k_max}\n")
    out.write(f"gamma_rule = {cfg.gamma_rule}\n")
    out.write(f"epsilon = {cfg.epsilon!r}\n")
    out.write(f"delta_bt = {cfg.delta_bt!r}\n")
    out.write(f"l_init = {cfg.l_init!r}\n")
    if cfg.poly is not None:
        out.write(f"poly = {', '.join(repr(c) for c in cfg.poly.coeffs)}\n")
    out.write(f"rescale_lambda = {str(cfg.rescale_lambda).lower()}\n")
    out.write(f"exact_prox = {str(cfg.exact_prox).lower()}\n")
    out.write(f"max_iter = {cfg.max_iter}\n")
    s = cfg.scheduler
    out.write("\n[scheduler]\n")
    out.write(f"kind = {s.kind}\n")
    out.write(f"nu_const = {s.nu_const!r}\n")
    out.write(f"nu_inf = {s.nu_inf!r}\n")
    out.write(f"nu0 = {s.nu0!r}\n")
    out.write(f"n_bt = {s.n_bt}\n")
    if reg is not None:
        out.write("\n[regularizer]\n")
        out.write(f"kind = {reg.kind}\n")
        out.write(f"lambda = {reg.lam!r}\n")
    return out.getvalue()


def save_config(path, cfg: solvers.SolverConfig, reg: Regularizer | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg, reg))
