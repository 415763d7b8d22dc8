"""Grid containers, their algebra, and file interchange.

Conventions used throughout the package:

* an image is a 2-d ``float64`` array of shape ``(height, width)``,
  row-major, nominally in ``[0, 1]`` but never clamped by arithmetic;
* a dual field (the range of the discrete gradient) is a ``float64``
  array of shape ``(2, height, width)`` with channel 0 holding the
  horizontal differences and channel 1 the vertical ones;
* all norms and inner products are Euclidean on the row-major
  flattening of the array.

File formats: PGM (P2 ascii / P5 binary) for quantized grayscale
exchange, a raw little-endian float64 dump for bit-exact intermediate
storage, and a CSV trace of per-iteration metrics.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

TRACE_HEADER = "iteration,elapsed_s,objective,rre,ssim"


class NumericalError(RuntimeError):
    """Raised when an operation produces non-finite values or diverges."""


def as_image(arr) -> np.ndarray:
    """Validate and return ``arr`` as a float64 image array."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"image must be 2-d with positive shape, got {a.shape}")
    return a


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{what} contains non-finite entries")
    return a


def zeros_like_dual(img: np.ndarray) -> np.ndarray:
    """All-zero dual field on the same grid as ``img``."""
    h, w = img.shape
    return np.zeros((2, h, w), dtype=np.float64)


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``alpha * x + y`` elementwise."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return alpha * x + y


def norm2(x: np.ndarray) -> float:
    """Euclidean norm of the flattened array."""
    return float(np.linalg.norm(x.ravel()))


def dot(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean inner product on the row-major flattening."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x.ravel(), y.ravel()))


@dataclass(frozen=True)
class MetricsRow:
    """One per-iteration record of a solver trace.

    ``rre`` and ``ssim`` are NaN when no ground truth was available.
    """

    iteration: int
    elapsed_s: float
    objective: float
    rre: float
    ssim: float


# ---------------------------------------------------------------------------
# PGM (P2 / P5)
# ---------------------------------------------------------------------------


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace/comment separated integers from a PGM header.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens: list[int] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if start == i:
            raise ValueError("truncated PGM header")
        try:
            tokens.append(int(data[start:i]))
        except ValueError as exc:
            raise ValueError(f"bad PGM header token {data[start:i]!r}") from exc
    if i >= n or not data[i : i + 1].isspace():
        raise ValueError("PGM header not terminated by whitespace")
    return tokens, i + 1


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a P2 (ascii) or P5 (binary) PGM into an image in [0, 1]."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in (b"2", b"5"):
        raise ValueError("not a P2/P5 PGM file")
    binary = data[1:2] == b"5"
    (width, height, maxval), offset = _read_pgm_tokens(data[2:], 3)
    offset += 2
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise ValueError(f"bad PGM dimensions {width}x{height} maxval {maxval}")
    npix = width * height
    if binary:
        bytes_per = 2 if maxval > 255 else 1
        payload = data[offset : offset + npix * bytes_per]
        if len(payload) != npix * bytes_per:
            raise ValueError("truncated PGM payload")
        dtype = ">u2" if bytes_per == 2 else np.uint8
        raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        cleaned = b" ".join(ln.split(b"#")[0] for ln in data[offset:].split(b"\n"))
        values = cleaned.split()
        if len(values) < npix:
            raise ValueError("truncated PGM payload")
        raw = np.array([int(v) for v in values[:npix]], dtype=np.float64)
    if raw.max(initial=0.0) > maxval:
        raise ValueError("PGM sample exceeds maxval")
    return (raw / maxval).reshape(height, width)


def write_pgm(img: np.ndarray, maxval: int = 255, binary: bool = True) -> bytes:
    """Quantize an image (clamped to [0, 1]) and encode it as P5 or P2."""
    img = as_image(img)
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    h, w = img.shape
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode()
        dtype = ">u2" if maxval > 255 else np.uint8
        return header + q.astype(dtype).tobytes()
    header = f"P2\n{w} {h}\n{maxval}\n".encode()
    body = "\n".join(" ".join(str(v) for v in row) for row in q) + "\n"
    return header + body.encode()


# ---------------------------------------------------------------------------
# Raw float64 dump: height, width as little-endian u64, then row-major data.
# ---------------------------------------------------------------------------


def write_raw(img: np.ndarray) -> bytes:
    img = as_image(img)
    h, w = img.shape
    return struct.pack("<QQ", h, w) + img.astype("<f8").tobytes()


def read_raw(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise ValueError("raw dump too short for header")
    h, w = struct.unpack("<QQ", data[:16])
    if h < 1 or w < 1 or len(data) != 16 + 8 * h * w:
        raise ValueError(f"raw dump size mismatch for {h}x{w} grid")
    return np.frombuffer(data[16:], dtype="<f8").reshape(h, w).copy()


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trace_csv(trace, sink=None) -> bytes:
    """Serialize metric rows; 17 significant digits, LF line endings."""
    lines = [TRACE_HEADER]
    prev = -1
    for row in trace:
        if row.iteration <= prev:
            raise ValueError("trace iterations must be strictly increasing")
        prev = row.iteration
        lines.append(
            f"{row.iteration},{_fmt(row.elapsed_s)},{_fmt(row.objective)},"
            f"{_fmt(row.rre)},{_fmt(row.ssim)}"
        )
    data = ("\n".join(lines) + "\n").encode()
    if sink is not None:
        sink.write(data)
    return data


def read_trace_csv(data: bytes) -> list[MetricsRow]:
    text = data.decode()
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("bad trace CSV header")
    rows = []
    for ln in lines[1:]:
        it, el, obj, rre, ssim = ln.split(",")
        rows.append(MetricsRow(int(it), float(el), float(obj), float(rre), float(ssim)))
    return rows
