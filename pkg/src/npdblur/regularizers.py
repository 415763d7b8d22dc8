"""Non-smooth penalties and the conjugate-prox machinery the nested
dual loop consumes.

Both supported penalties have indicator conjugates, so the prox of the
conjugate is a projection and does not depend on the dual step size:

* isotropic TV couples the two gradient channels pixelwise; the dual
  ball is the per-pixel Euclidean disk of radius lambda;
* the l1 penalty (used with W = identity) has the l-infinity ball of
  radius lambda as its dual set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral

TV_ISO = "tv_iso"
L1 = "l1"
KINDS = (TV_ISO, L1)


@dataclass(frozen=True)
class Regularizer:
    kind: str
    lam: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def tv_value(u: np.ndarray) -> float:
    """Isotropic total variation: sum of per-pixel gradient magnitudes."""
    g = spectral.grad_apply(u)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


def prox_conj_tv(v: np.ndarray, lam: float) -> np.ndarray:
    """Project a dual field onto the per-pixel disk of radius lam."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    mag = np.sqrt(v[0] ** 2 + v[1] ** 2)
    return v * (lam / np.maximum(lam, mag))


def prox_conj_l1(v: np.ndarray, lam: float) -> np.ndarray:
    """Project onto the l-infinity ball of radius lam (clamp)."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    return np.clip(v, -lam, lam)


def soft_threshold(u: np.ndarray, theta: float) -> np.ndarray:
    """sign(u) * max(|u| - theta, 0)."""
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    return np.sign(u) * np.maximum(np.abs(u) - theta, 0.0)


def reg_value(reg: Regularizer, u: np.ndarray) -> float:
    """Penalty value lambda * TV(u) or lambda * ||u||_1."""
    if reg.kind == TV_ISO:
        return reg.lam * tv_value(u)
    return reg.lam * float(np.abs(u).sum())


# The nested loop only needs three things from a regularizer: how to
# apply its analysis operator W, the adjoint, and the dual projection.


def w_apply(reg: Regularizer, u: np.ndarray) -> np.ndarray:
    if reg.kind == TV_ISO:
        return spectral.grad_apply(u)
    return u


def w_adjoint(reg: Regularizer, v: np.ndarray) -> np.ndarray:
    if reg.kind == TV_ISO:
        return spectral.grad_adjoint(v)
    return v


def prox_conj(reg: Regularizer, v: np.ndarray) -> np.ndarray:
    if reg.kind == TV_ISO:
        return prox_conj_tv(v, reg.lam)
    return prox_conj_l1(v, reg.lam)


def dual_zero(reg: Regularizer, img_shape: tuple[int, int]) -> np.ndarray:
    """Zero element of the dual space matching the analysis operator."""
    if reg.kind == TV_ISO:
        return np.zeros((2,) + img_shape, dtype=np.float64)
    return np.zeros(img_shape, dtype=np.float64)


def w_norm_sq_bound(reg: Regularizer) -> float:
    """Bound on ||W||^2: 8 for the periodic gradient, 1 for identity."""
    if reg.kind == TV_ISO:
        return spectral.grad_norm_sq_bound()
    return 1.0
