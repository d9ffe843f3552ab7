"""Grayscale image container, synthetic images, noise injection, metrics and PGM IO."""

from __future__ import annotations

import dataclasses
import enum
import os
import re
from dataclasses import dataclass

import numpy as np

#: Bit generator used for every noise draw; recorded alongside experiment metrics.
RNG_ALGORITHM = "numpy.PCG64"


class ImageFormatError(ValueError):
    """Malformed or unsupported image file."""


@dataclass(frozen=True)
class GrayscaleImage:
    """An ``m x n`` grid of gray values over a ``length x width`` physical rectangle.

    ``values[i, j]`` is the pixel in row ``i`` and column ``j``; its location is
    ``((j + 1/2) * length / n, (i + 1/2) * width / m)``.  Values are never
    clipped here, so noisy images may leave ``[0, 1]``.
    """

    values: np.ndarray
    length: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"image values must be a non-empty 2-D array, got shape {vals.shape}")
        if not (self.length > 0 and self.width > 0):
            raise ValueError("physical dimensions must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "width", float(self.width))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def spacing(self) -> tuple[float, float]:
        """Pixel spacing ``(horizontal, vertical)`` in physical units."""
        return self.length / self.cols, self.width / self.rows

    def locations(self) -> np.ndarray:
        """Pixel-center coordinates, shape ``(m*n, 2)``, row-major."""
        return lattice_points(self.rows, self.cols, self.length, self.width)

    def with_values(self, values) -> "GrayscaleImage":
        return dataclasses.replace(self, values=values)


def lattice_points(m: int, n: int, length: float = 1.0, width: float = 1.0) -> np.ndarray:
    hx, hy = length / n, width / m
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    return np.column_stack([((jj + 0.5) * hx).ravel(), ((ii + 0.5) * hy).ravel()])


def _check_dims(m, n, length, width):
    if m < 1 or n < 1:
        raise ValueError(f"pixel counts must be >= 1, got {m}x{n}")
    if not (length > 0 and width > 0):
        raise ValueError(f"physical size must be positive, got {length}x{width}")


def cosine_field(x1, x2, alpha: float):
    """``0.5 * (1 + cos(alpha*x1) * cos(alpha*x2))``."""
    return 0.5 * (1.0 + np.cos(alpha * np.asarray(x1)) * np.cos(alpha * np.asarray(x2)))


def synth_cosine(m: int, n: int, length: float = 1.0, width: float = 1.0, alpha: float = 20.0) -> GrayscaleImage:
    _check_dims(m, n, length, width)
    pts = lattice_points(m, n, length, width)
    vals = cosine_field(pts[:, 0], pts[:, 1], alpha).reshape(m, n)
    return GrayscaleImage(vals, length, width)


def synth_zero(m: int, n: int, length: float = 1.0, width: float = 1.0) -> GrayscaleImage:
    _check_dims(m, n, length, width)
    return GrayscaleImage(np.zeros((m, n)), length, width)


class NoiseKind(str, enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean i.i.d. pixel noise.

    ``uniform`` draws from the open interval ``(-sigma, sigma)``; ``gaussian``
    uses ``sigma`` as the standard deviation.
    """

    kind: NoiseKind = NoiseKind.GAUSSIAN
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def sample(self, size) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        if self.sigma == 0:
            return np.zeros(size)
        if self.kind is NoiseKind.GAUSSIAN:
            return rng.normal(0.0, self.sigma, size=size)
        y = rng.uniform(-self.sigma, self.sigma, size=size)
        # uniform() is half-open; redraw the (measure-zero) left endpoint
        bad = y <= -self.sigma
        while bad.any():
            y[bad] = rng.uniform(-self.sigma, self.sigma, size=int(bad.sum()))
            bad = y <= -self.sigma
        return y


def add_noise(img: GrayscaleImage, model: NoiseModel) -> GrayscaleImage:
    return img.with_values(img.values + model.sample(img.shape))


def _same_shape(a: GrayscaleImage, b: GrayscaleImage):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def l2_error(a: GrayscaleImage, b: GrayscaleImage) -> float:
    """Root-mean-square pixel difference."""
    _same_shape(a, b)
    return float(np.sqrt(np.mean((a.values - b.values) ** 2)))


def sup_error(a: GrayscaleImage, b: GrayscaleImage) -> float:
    _same_shape(a, b)
    return float(np.max(np.abs(a.values - b.values)))


# ---------------------------------------------------------------------------
# file IO

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*([^\s#]+)")


def _pgm_header(data: bytes):
    fields, pos = [], 0
    for _ in range(4):
        mt = _PGM_TOKEN.match(data, pos)
        if mt is None:
            raise ImageFormatError("truncated PGM header")
        fields.append(mt.group(1))
        pos = mt.end()
    magic = fields[0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported magic number {magic!r}")
    try:
        ncols, nrows, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise ImageFormatError("non-integer PGM header field") from exc
    if ncols < 1 or nrows < 1 or not (0 < maxval < 65536):
        raise ImageFormatError(f"invalid PGM header: {ncols}x{nrows} maxval={maxval}")
    return magic, nrows, ncols, maxval, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode P2/P5 bytes into an array scaled into ``[0, 1]`` by maxval."""
    magic, m, n, maxval, pos = _pgm_header(data)
    count = m * n
    if magic == b"P5":
        # exactly one whitespace byte separates header from raster
        body = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(body) < count * dtype.itemsize:
            raise ImageFormatError("truncated P5 raster")
        raw = np.frombuffer(body, dtype=dtype, count=count)
    else:
        tokens = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(tokens) < count:
            raise ImageFormatError("truncated P2 raster")
        raw = np.array([int(t) for t in tokens[:count]])
    if raw.max(initial=0) > maxval:
        raise ImageFormatError("sample exceeds maxval")
    return raw.reshape(m, n).astype(float) / maxval


def read_image(path, length: float = 1.0, width: float = 1.0) -> GrayscaleImage:
    """Read a PGM (P2/P5) file, or any grayscale image Pillow can decode."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P2", b"P5"):
        return GrayscaleImage(parse_pgm(data), length, width)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError(f"{path}: not a PGM file and Pillow is unavailable") from exc
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=float) / 65535.0
            else:
                arr = np.asarray(im.convert("L"), dtype=float) / 255.0
    except Exception as exc:
        raise ImageFormatError(f"{path}: unsupported image format ({exc})") from exc
    return GrayscaleImage(arr, length, width)


def encode_pgm(values: np.ndarray, maxval: int = 65535, binary: bool = True) -> bytes:
    if not (0 < maxval < 65536):
        raise ValueError("maxval must lie in [1, 65535]")
    q = np.rint(np.clip(values, 0.0, 1.0) * maxval).astype(np.int64)
    m, n = q.shape
    header = f"{'P5' if binary else 'P2'}\n{n} {m}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return header + q.astype(dtype).tobytes()
    lines = [" ".join(str(v) for v in row) for row in q]
    return header + ("\n".join(lines) + "\n").encode()


def write_image(img: GrayscaleImage, path, maxval: int = 65535, binary: bool = True):
    """Write ``img`` as PGM, clipping to ``[0, 1]`` before quantization."""
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img.values, maxval=maxval, binary=binary))
