"""Grid types, PGM I/O, differential operators, and mask metrics.

Pixel (x, y) of a width-by-height grid lives at flat index n = x * height + y.
Arrays are therefore stored with shape (width, height) so that C-order
flattening reproduces that index. PGM payloads are scanline order (y outer,
x inner), which is the transpose of the in-memory layout.

All types are treated as immutable after construction and every operation is
a pure function of its inputs, so independent images can be processed
concurrently without coordination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PgmError

_MAXVAL = 255


def _as_grid_array(width: int, height: int, values, dtype) -> np.ndarray:
    if width < 1 or height < 1:
        raise ValueError(f"invalid grid dimensions {width}x{height}")
    arr = np.asarray(values, dtype=dtype)
    if arr.size != width * height:
        raise ValueError(
            f"value count {arr.size} does not match {width}x{height} grid"
        )
    return arr.reshape(width, height)


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """A 2-D scalar field holding one intensity per pixel."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        arr = _as_grid_array(self.width, self.height, self.values, np.float64)
        if not np.isfinite(arr).all():
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", arr)

    def flat(self) -> np.ndarray:
        """Values at flat index n = x * height + y."""
        return self.values.ravel()


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Same layout as ImageGrid; holds derived quantities (gradients etc.)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        arr = _as_grid_array(self.width, self.height, self.values, np.float64)
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True, eq=False)
class SegMask:
    """Boolean lesion mask with the same layout as its source grid."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        arr = _as_grid_array(self.width, self.height, self.bits, bool)
        object.__setattr__(self, "bits", arr)

    def area(self) -> int:
        return int(self.bits.sum())


# --- PGM I/O ---------------------------------------------------------------

def _header_tokens(data: bytes, count: int):
    """Yield `count` whitespace-separated header tokens, skipping # comments.

    Returns the tokens and the offset one byte past the final separator.
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord(b"#"):
            while i < n and data[i] != ord(b"\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord(b"#"):
            i += 1
        if i == start:
            raise PgmError("malformed header: truncated before all fields")
        tokens.append(data[start:i])
        if len(tokens) < count:
            continue
        # exactly one whitespace byte separates the header from the payload
        if i < n and data[i : i + 1].isspace():
            i += 1
        elif i < n:
            raise PgmError("malformed header: missing separator after maxval")
    return tokens, i


def decode_pgm(data: bytes) -> ImageGrid:
    """Decode a P2 (ASCII) or P5 (binary) PGM byte string."""
    if len(data) < 2:
        raise PgmError("malformed header: too short")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"malformed header: unknown magic {magic!r}")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise PgmError("malformed header: non-integer dimension field") from e
    if width < 1 or height < 1:
        raise PgmError(f"invalid dimensions {width}x{height}")
    if maxval > _MAXVAL:
        raise PgmError(f"maxval {maxval} exceeds 8-bit limit {_MAXVAL}")
    if maxval < 1:
        raise PgmError(f"invalid maxval {maxval}")
    npix = width * height
    if magic == b"P5":
        payload = data[offset : offset + npix]
        if len(payload) < npix:
            raise PgmError(
                f"truncated payload: expected {npix} bytes, got {len(payload)}"
            )
        if len(data) > offset + npix:
            raise PgmError("payload length mismatch: trailing bytes")
        raster = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        text = data[offset:].split()
        if len(text) < npix:
            raise PgmError(
                f"truncated payload: expected {npix} samples, got {len(text)}"
            )
        if len(text) > npix:
            raise PgmError("payload length mismatch: trailing samples")
        try:
            raster = np.array([int(t) for t in text], dtype=np.float64)
        except ValueError as e:
            raise PgmError("malformed payload: non-integer sample") from e
    if raster.min() < 0 or raster.max() > maxval:
        raise PgmError("sample value outside maxval range")
    # scanlines are y-major; transpose into the (width, height) layout
    return ImageGrid(width, height, raster.reshape(height, width).T.copy())


def encode_pgm(grid: ImageGrid | SegMask) -> bytes:
    """Encode as canonical P5: `P5\\n<w> <h>\\n255\\n` then y-major bytes.

    ImageGrid values must already lie in [0, 255]; they are rounded to the
    nearest integer (ties to even). SegMask writes 255 for true, 0 for false.
    """
    if isinstance(grid, SegMask):
        raster = np.where(grid.bits.T, _MAXVAL, 0).astype(np.uint8)
    else:
        v = grid.values
        if v.min() < 0 or v.max() > _MAXVAL:
            raise ValueError("values not representable in 8 bits; scale to [0, 255]")
        raster = np.rint(v.T).astype(np.uint8)
    header = f"P5\n{grid.width} {grid.height}\n{_MAXVAL}\n".encode("ascii")
    return header + raster.tobytes()


def load_image(path) -> ImageGrid:
    """Read a PGM file; raw intensities in [0, 255]."""
    with open(path, "rb") as f:
        return decode_pgm(f.read())


def save_image(grid: ImageGrid | SegMask, path) -> None:
    """Write canonical P5; see encode_pgm for the value convention."""
    with open(path, "wb") as f:
        f.write(encode_pgm(grid))


# --- field operations -------------------------------------------------------

def normalize(grid: ImageGrid) -> ImageGrid:
    """Affinely map values to [0, 1]; a constant image maps to all zeros."""
    v = grid.values
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros_like(v)
    else:
        out = (v - lo) / (hi - lo)
    return ImageGrid(grid.width, grid.height, out)


def gradient_central(field) -> tuple[ScalarField, ScalarField]:
    """Per-axis first derivatives, unit spacing.

    Central differences in the interior, one-sided at the borders.
    """
    if field.width < 3 or field.height < 3:
        raise ValueError("gradient requires at least a 3x3 grid")
    v = field.values
    gx = np.gradient(v, axis=0)
    gy = np.gradient(v, axis=1)
    return (
        ScalarField(field.width, field.height, gx),
        ScalarField(field.width, field.height, gy),
    )


def _second_diff(v: np.ndarray, axis: int) -> np.ndarray:
    """Central second difference with edge-replicated (zero-flux) borders."""
    p = np.pad(v, [(1, 1) if a == axis else (0, 0) for a in range(v.ndim)], mode="edge")
    sl = [slice(None)] * v.ndim

    def take(lo, hi):
        s = list(sl)
        s[axis] = slice(lo, hi)
        return p[tuple(s)]

    return take(2, None) - 2.0 * take(1, -1) + take(0, -2)


def gaussian_smooth(field, sigma: float) -> ScalarField:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), mirrored borders.

    The kernel is normalized to sum 1, and the edge-inclusive mirror boundary
    preserves the total field sum. sigma == 0 is the identity.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    v = np.asarray(field.values, dtype=np.float64)
    if sigma == 0:
        return ScalarField(field.width, field.height, v.copy())
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    out = v
    for axis in range(2):
        pad = [(radius, radius) if a == axis else (0, 0) for a in range(2)]
        padded = np.pad(out, pad, mode="symmetric")
        acc = np.zeros_like(out)
        for tap, w in enumerate(kernel):
            sl = [slice(None)] * 2
            sl[axis] = slice(tap, tap + out.shape[axis])
            acc += w * padded[tuple(sl)]
        out = acc
    return ScalarField(field.width, field.height, out)


def dice(a: SegMask, b: SegMask) -> float:
    """Dice overlap 2|A∩B| / (|A| + |B|); two empty masks score 1."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    na, nb = a.bits.sum(), b.bits.sum()
    if na == 0 and nb == 0:
        return 1.0
    inter = np.logical_and(a.bits, b.bits).sum()
    return 2.0 * float(inter) / float(na + nb)
