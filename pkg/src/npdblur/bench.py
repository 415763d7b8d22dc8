"""Benchmark problem generation: kernels, noise, the bundled phantom,
and the on-disk problem directory layout.

A problem directory contains a flat ``problem.txt`` manifest (key =
value lines) naming the artifact files: ground truth PGM, PSF and data
as raw float dumps, and the realized noise vector so runs replay
bit-exactly across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import grids, spectral
from .regularizers import Regularizer
from .solvers import Problem

GAUSSIAN = "gaussian"
MOTION = "motion"

MANIFEST_NAME = "problem.txt"


@dataclass(frozen=True)
class PsfSpec:
    kind: str
    sigma: float = 2.0
    length: int = 9
    angle: float = 45.0
    support: int = 21

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, MOTION):
            raise ValueError(f"unknown psf kind {self.kind!r}")
        if self.support < 1 or self.support % 2 == 0:
            raise ValueError(f"support must be odd and positive, got {self.support}")
        if self.kind == GAUSSIAN and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.kind == MOTION and self.length < 1:
            raise ValueError("length must be >= 1")


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"noise level must be in (0, 1), got {self.level}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def gen_psf(spec: PsfSpec) -> np.ndarray:
    """Normalized blur kernel on an odd square support."""
    s = spec.support
    half = s // 2
    if spec.kind == GAUSSIAN:
        ax = np.arange(-half, half + 1, dtype=np.float64)
        k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * spec.sigma**2))
    else:
        # Rasterize a centered segment with bilinear splatting; sample
        # density is high enough that the kernel is a stable function of
        # (length, angle) alone.
        k = np.zeros((s, s), dtype=np.float64)
        theta = math.radians(spec.angle)
        di, dj = math.sin(theta), math.cos(theta)
        nsamp = 64 * spec.length
        weight = 1.0 / nsamp
        span = (spec.length - 1) / 2.0
        for m in range(nsamp):
            t = -span + (m + 0.5) / nsamp * (spec.length - 1) if spec.length > 1 else 0.0
            fi, fj = half + t * di, half + t * dj
            i0, j0 = int(math.floor(fi)), int(math.floor(fj))
            wi, wj = fi - i0, fj - j0
            for oi, ow in ((0, 1.0 - wi), (1, wi)):
                for oj, cw in ((0, 1.0 - wj), (1, wj)):
                    ii, jj = i0 + oi, j0 + oj
                    if 0 <= ii < s and 0 <= jj < s:
                        k[ii, jj] += weight * ow * cw
    total = k.sum()
    if total <= 0:
        raise ValueError("degenerate psf")
    return k / total


def add_noise(b: np.ndarray, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """Add white Gaussian noise rescaled to an exact relative level.

    Returns the noisy data, the realized noise vector (persist it to
    replay), and delta = level * ||b||.
    """
    nb = grids.norm2(b)
    if nb == 0.0:
        raise ValueError("b must be nonzero")
    rng = np.random.default_rng(spec.seed)
    eta = rng.standard_normal(b.shape)
    ne = grids.norm2(eta)
    if ne == 0.0:
        raise ValueError("degenerate noise draw")
    delta = spec.level * nb
    eta *= delta / ne
    return b + eta, eta, delta


def make_phantom(h: int = 64, w: int = 64) -> np.ndarray:
    """Piecewise-constant test image: four nested rectangles at
    intensities 0, 0.3, 0.7, 1.0."""
    img = np.zeros((h, w), dtype=np.float64)
    for eighths, value in ((1, 0.3), (2, 0.7), (3, 1.0)):
        mi, mj = eighths * h // 8, eighths * w // 8
        img[mi : h - mi, mj : w - mj] = value
    return img


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def write_manifest(path: Path, entries: dict[str, str]) -> None:
    lines = [f"{k} = {v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def generate_problem_dir(
    out_dir: Path,
    image: np.ndarray,
    psf_spec: PsfSpec,
    noise_spec: NoiseSpec,
) -> dict[str, str]:
    """Blur an image, add noise, and persist every artifact.

    The ground truth is written as a 16-bit PGM and read back before
    blurring, so the directory is self-consistent with respect to
    quantization.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x_true = grids.read_pgm(grids.write_pgm(image, maxval=65535))
    h, w = x_true.shape
    psf = gen_psf(psf_spec)
    spec = spectral.psf_to_spectrum(psf, h, w)
    b = spectral.conv_apply(spec, x_true)
    b_delta, eta, delta = add_noise(b, noise_spec)

    (out_dir / "ground_truth.pgm").write_bytes(grids.write_pgm(x_true, maxval=65535))
    (out_dir / "psf.raw").write_bytes(grids.write_raw(psf))
    (out_dir / "b_delta.raw").write_bytes(grids.write_raw(b_delta))
    (out_dir / "noise.raw").write_bytes(grids.write_raw(eta))

    entries = {
        "grid_height": str(h),
        "grid_width": str(w),
        "ground_truth": "ground_truth.pgm",
        "psf": "psf.raw",
        "b_delta": "b_delta.raw",
        "noise": "noise.raw",
        "psf_kind": psf_spec.kind,
        "psf_support": str(psf_spec.support),
        "noise_level": repr(noise_spec.level),
        "noise_seed": str(noise_spec.seed),
        "delta": repr(delta),
        "intensity_range": "0..1",
    }
    if psf_spec.kind == GAUSSIAN:
        entries["psf_sigma"] = repr(psf_spec.sigma)
    else:
        entries["psf_length"] = str(psf_spec.length)
        entries["psf_angle"] = repr(psf_spec.angle)
    write_manifest(out_dir / MANIFEST_NAME, entries)
    return entries


def load_problem_dir(problem_dir: Path, reg: Regularizer) -> Problem:
    """Rebuild a solver problem from a generated directory."""
    problem_dir = Path(problem_dir)
    entries = read_manifest(problem_dir / MANIFEST_NAME)
    h = int(entries["grid_height"])
    w = int(entries["grid_width"])
    psf = grids.read_raw((problem_dir / entries["psf"]).read_bytes())
    b_delta = grids.read_raw((problem_dir / entries["b_delta"]).read_bytes())
    x_true = grids.read_pgm((problem_dir / entries["ground_truth"]).read_bytes())
    spec = spectral.psf_to_spectrum(psf, h, w)
    return Problem(spec=spec, b_delta=b_delta, reg=reg, x_true=x_true)
