"""Periodic convolution operators diagonalized by the 2-d DFT.

A blur with point spread function ``k`` under periodic boundary
conditions is a BCCB matrix whose eigenvalues are the 2-d DFT of the
circularly shifted kernel.  Every operator this package needs (the blur
``A``, its transpose, polynomial preconditioners ``P = p(A^T A)`` and
their range-side companions ``S = p(A A^T)``) therefore reduces to
pointwise arithmetic on one complex eigenvalue grid.

DFT normalization: unnormalized forward transform, ``1/(h*w)`` inverse
(numpy's default), so Parseval reads ``<x, y> = <X, Y> / (h*w)``.

The discrete gradient ``W`` uses forward differences with periodic
wrap-around, which keeps ``||W||^2 <= 8`` exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grids import NumericalError, as_image, norm2

IMAG_RTOL = 1e-9


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with nonnegative coefficients and positive constant term.

    ``coeffs[i]`` multiplies ``x**i``.  Evaluated on the squared moduli
    of a blur spectrum it yields a symmetric positive definite
    preconditioner bounded below by ``coeffs[0]``.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if not c:
            raise ValueError("polynomial needs at least one coefficient")
        if not all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        if c[0] <= 0.0:
            raise ValueError(f"constant coefficient must be positive, got {c[0]}")
        if any(v < 0.0 for v in c):
            raise ValueError(f"coefficients must be nonnegative, got {c}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(np.asarray(x, dtype=np.float64))
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    @property
    def is_identity(self) -> bool:
        return self.coeffs[0] == 1.0 and all(c == 0.0 for c in self.coeffs[1:])


IDENTITY_POLY = Polynomial((1.0,))


def shifted_preconditioner_poly(nu: float) -> Polynomial:
    """p(x) = x + nu, the iterated-Tikhonov style shift."""
    return Polynomial((nu, 1.0))


def blended_preconditioner_poly(nu: float) -> Polynomial:
    """p(x) = (1 - nu) * x + nu, interpolating the blur normal operator
    and the identity."""
    return Polynomial((nu, 1.0 - nu))


def psf_to_spectrum(psf: np.ndarray, grid_h: int, grid_w: int) -> np.ndarray:
    """Eigenvalue grid of the periodic blur generated by ``psf``.

    The kernel is normalized to unit sum, embedded in a zero canvas and
    circularly shifted so its center pixel ``(ph//2, pw//2)`` lands at
    index (0, 0); the 2-d DFT of that canvas is returned.  The DC entry
    is exactly 1 after normalization.
    """
    psf = as_image(psf)
    ph, pw = psf.shape
    if ph > grid_h or pw > grid_w:
        raise ValueError(f"psf {psf.shape} larger than grid ({grid_h}, {grid_w})")
    total = float(psf.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise ValueError("psf entries must sum to a positive value")
    canvas = np.zeros((grid_h, grid_w), dtype=np.float64)
    canvas[:ph, :pw] = psf / total
    canvas = np.roll(canvas, (-(ph // 2), -(pw // 2)), axis=(0, 1))
    return np.fft.fft2(canvas)


def _to_real(freq_result: np.ndarray, ref_norm: float, what: str) -> np.ndarray:
    out = np.fft.ifft2(freq_result)
    max_imag = float(np.abs(out.imag).max())
    if max_imag > IMAG_RTOL * max(ref_norm, np.finfo(np.float64).tiny):
        raise NumericalError(
            f"{what}: imaginary residue {max_imag:.3e} exceeds tolerance "
            f"(corrupted spectrum?)"
        )
    return np.ascontiguousarray(out.real)


def conv_apply(spec: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply the blur: IDFT(spec * DFT(u))."""
    if spec.shape != u.shape:
        raise ValueError(f"shape mismatch: {spec.shape} vs {u.shape}")
    return _to_real(spec * np.fft.fft2(u), norm2(u), "conv_apply")


def conv_adjoint_apply(spec: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply the transposed blur via the conjugated spectrum."""
    if spec.shape != y.shape:
        raise ValueError(f"shape mismatch: {spec.shape} vs {y.shape}")
    return _to_real(np.conj(spec) * np.fft.fft2(y), norm2(y), "conv_adjoint_apply")


def build_precond(p: Polynomial, spec: np.ndarray) -> np.ndarray:
    """Eigenvalue grid of ``p(A^T A)``: p evaluated at squared moduli.

    The same grid also represents ``p(A A^T)`` because the operator is
    square BCCB, so one array serves both the primal preconditioner and
    its range-side companion.
    """
    return p(np.abs(spec) ** 2)


def precond_solve(pspec: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the inverse preconditioner: IDFT(DFT(x) / pspec)."""
    if pspec.shape != x.shape:
        raise ValueError(f"shape mismatch: {pspec.shape} vs {x.shape}")
    freq = np.fft.fft2(x) / pspec
    ref = float(np.linalg.norm(freq)) / np.sqrt(x.size)
    return _to_real(freq, ref, "precond_solve")


class OperatorNorms(NamedTuple):
    norm_a: float
    norm_pinv: float
    norm_pinv_ata: float
    norm_sinv: float


def operator_norms(spec: np.ndarray, p: Polynomial) -> OperatorNorms:
    """Exact spectral norms of A, P^{-1}, P^{-1}A^TA and S^{-1}.

    A square BCCB operator shares the eigenvalue grid ``|a_k|^2``
    between ``A^T A`` and ``A A^T``, so ``||S^{-1}|| = ||P^{-1}||``.
    """
    mods = np.abs(spec) ** 2
    pvals = p(mods)
    norm_a = float(np.sqrt(mods.max()))
    norm_pinv = 1.0 / float(pvals.min())
    norm_pinv_ata = float((mods / pvals).max())
    return OperatorNorms(norm_a, norm_pinv, norm_pinv_ata, norm_pinv)


# ---------------------------------------------------------------------------
# Discrete gradient (forward differences, periodic wrap) and its adjoint.
# ---------------------------------------------------------------------------


def grad_apply(u: np.ndarray) -> np.ndarray:
    """W u: channel 0 column differences, channel 1 row differences."""
    out = np.empty((2,) + u.shape, dtype=np.float64)
    out[0] = np.roll(u, -1, axis=1) - u
    out[1] = np.roll(u, -1, axis=0) - u
    return out


def grad_adjoint(v: np.ndarray) -> np.ndarray:
    """W^T v, the exact adjoint of grad_apply (negative divergence)."""
    gx, gy = v[0], v[1]
    return (np.roll(gx, 1, axis=1) - gx) + (np.roll(gy, 1, axis=0) - gy)


def grad_norm_sq_bound() -> float:
    """Upper bound on ||W||^2 for the periodic forward-difference stencil."""
    return 8.0


def laplacian_spectrum(h: int, w: int) -> np.ndarray:
    """Eigenvalue grid of W^T W: 4 sin^2(pi k/h) + 4 sin^2(pi l/w)."""
    rows = 4.0 * np.sin(np.pi * np.arange(h) / h) ** 2
    cols = 4.0 * np.sin(np.pi * np.arange(w) / w) ** 2
    return rows[:, None] + cols[None, :]


def grad_norm_sq_estimate(h: int, w: int, iters: int) -> float:
    """Power iteration on W^T W; approaches 8 from below."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(0)
    x = rng.standard_normal((h, w))
    x /= norm2(x)
    lam = 0.0
    for _ in range(iters):
        y = grad_adjoint(grad_apply(x))
        lam = float(np.dot(x.ravel(), y.ravel()))
        ny = norm2(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    return lam


# ---------------------------------------------------------------------------
# Spectrum serialization: raw dump with real and imaginary planes.
# ---------------------------------------------------------------------------


def spectrum_to_raw(spec: np.ndarray) -> bytes:
    h, w = spec.shape
    return (
        struct.pack("<QQ", h, w)
        + spec.real.astype("<f8").tobytes()
        + spec.imag.astype("<f8").tobytes()
    )


def spectrum_from_raw(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise ValueError("raw spectrum dump too short for header")
    h, w = struct.unpack("<QQ", data[:16])
    if h < 1 or w < 1 or len(data) != 16 + 16 * h * w:
        raise ValueError(f"raw spectrum size mismatch for {h}x{w} grid")
    plane = 8 * h * w
    re = np.frombuffer(data[16 : 16 + plane], dtype="<f8").reshape(h, w)
    im = np.frombuffer(data[16 + plane :], dtype="<f8").reshape(h, w)
    return (re + 1j * im).copy()
