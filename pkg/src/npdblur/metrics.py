"""Reconstruction quality metrics and objective evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regularizers, spectral
from .grids import norm2


@dataclass(frozen=True)
class SsimParams:
    """Uniform-window SSIM parameters.

    Defaults match the common library convention: 7x7 uniform window,
    k1 = 0.01, k2 = 0.03, unit data range, sample (N-1) covariances,
    windows fully inside the image.
    """

    window: int = 7
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and positive, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0 or self.data_range <= 0:
            raise ValueError("k1, k2 and data_range must be positive")


def rre(x_rec: np.ndarray, x_true: np.ndarray) -> float:
    """Relative reconstruction error ||x_true - x_rec|| / ||x_true||."""
    if x_rec.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x_rec.shape} vs {x_true.shape}")
    denom = norm2(x_true)
    if denom == 0.0:
        raise ValueError("x_true must be nonzero")
    return norm2(x_true - x_rec) / denom


def _window_moments(x: np.ndarray, win: int) -> tuple[np.ndarray, np.ndarray]:
    view = np.lib.stride_tricks.sliding_window_view(x, (win, win))
    mu = view.mean(axis=(-2, -1))
    musq = (view * view).mean(axis=(-2, -1))
    return mu, musq


def ssim(x: np.ndarray, y: np.ndarray, p: SsimParams = SsimParams()) -> float:
    """Mean structural similarity over all fully-interior windows.

    Inputs are clamped to [0, data_range] before evaluation; variances
    use the sample (N-1) normalization.
    """
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    h, w = x.shape
    if p.window > min(h, w):
        raise ValueError(f"window {p.window} exceeds image size {x.shape}")
    xc = np.clip(x, 0.0, p.data_range)
    yc = np.clip(y, 0.0, p.data_range)

    win = p.window
    n = win * win
    bessel = n / (n - 1.0)
    mx, mxx = _window_moments(xc, win)
    my, myy = _window_moments(yc, win)
    view_xy = np.lib.stride_tricks.sliding_window_view(xc * yc, (win, win))
    mxy = view_xy.mean(axis=(-2, -1))

    vx = bessel * (mxx - mx * mx)
    vy = bessel * (myy - my * my)
    vxy = bessel * (mxy - mx * my)

    c1 = (p.k1 * p.data_range) ** 2
    c2 = (p.k2 * p.data_range) ** 2
    s = ((2 * mx * my + c1) * (2 * vxy + c2)) / (
        (mx * mx + my * my + c1) * (vx + vy + c2)
    )
    return float(s.mean())


def objective(problem, u: np.ndarray, nu_effective: float | None = None) -> float:
    """Fidelity plus penalty at ``u``.

    Plain Euclidean fidelity ``0.5 * ||A u - b||^2`` by default; when
    ``nu_effective`` is given the residual is weighted by the inverse of
    ``A A^T + nu I`` evaluated spectrally.
    """
    r = spectral.conv_apply(problem.spec, u) - problem.b_delta
    if nu_effective is None:
        fid = 0.5 * norm2(r) ** 2
    else:
        h, w = r.shape
        rhat2 = np.abs(np.fft.fft2(r)) ** 2
        weight = np.abs(problem.spec) ** 2 + nu_effective
        fid = 0.5 * float((rhat2 / weight).sum()) / (h * w)
    return fid + regularizers.reg_value(problem.reg, u)
