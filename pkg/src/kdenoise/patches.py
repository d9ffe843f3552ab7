"""Overlapping rectangular patch covers and partition-of-unity blending."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .imaging import GrayscaleImage
from .pipeline import DenoiseConfig, build_operators


class CoverError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]``.

    ``open_edges`` names edges (``"left"``, ``"right"``, ``"top"``, ``"bottom"``)
    that are not part of the boundary used for weighting; they are the edges
    lying on the image border.
    """

    x0: float
    x1: float
    y0: float
    y1: float
    open_edges: frozenset = frozenset()

    @property
    def diameter(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def boundary_distance(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        d = np.full(np.broadcast(x, y).shape, np.inf)
        for edge, dist in (
            ("left", x - self.x0),
            ("right", self.x1 - x),
            ("top", y - self.y0),
            ("bottom", self.y1 - y),
        ):
            if edge not in self.open_edges:
                d = np.minimum(d, dist)
        return d

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)


@dataclass(frozen=True)
class Patch:
    rows: slice
    cols: slice
    rect: Rect


@dataclass(frozen=True)
class PatchCover:
    shape: tuple[int, int]
    length: float
    width: float
    tile: int
    overlap: int
    delta1: float
    patches: tuple

    def __len__(self):
        return len(self.patches)

    @property
    def diameters(self) -> list[float]:
        return [p.rect.diameter for p in self.patches]


def tile_starts(size: int, tile: int, overlap: int) -> list[int]:
    """Start offsets stepping by ``tile - overlap``; the last tile is clamped to the edge."""
    if tile >= size:
        return [0]
    step = tile - overlap
    starts = list(range(0, size - tile, step))
    starts.append(size - tile)
    return starts


def make_cover(m: int, n: int, length: float = 1.0, width: float = 1.0, tile: int = 64, overlap: int = 16, delta1: float = 1.0) -> PatchCover:
    if not (tile > overlap >= 1):
        raise CoverError(f"need tile > overlap >= 1, got tile={tile} overlap={overlap}")
    if m < 1 or n < 1:
        raise CoverError("image must be nonempty")
    hx, hy = length / n, width / m
    tr, tc = min(tile, m), min(tile, n)
    patches = []
    for r0 in tile_starts(m, tile, overlap):
        for c0 in tile_starts(n, tile, overlap):
            r1, c1 = r0 + tr, c0 + tc
            open_edges = {
                name
                for name, on_border in (("left", c0 == 0), ("right", c1 == n), ("top", r0 == 0), ("bottom", r1 == m))
                if on_border
            }
            rect = Rect(c0 * hx, c1 * hx, r0 * hy, r1 * hy, frozenset(open_edges))
            patches.append(Patch(slice(r0, r1), slice(c0, c1), rect))
    return PatchCover((m, n), length, width, tile, overlap, delta1, tuple(patches))


def pou_weight(x, y, rect: Rect, h: float, delta1: float):
    """Bump weight ``1 - exp(-dist(x, boundary)^2 / (h^2 delta1))`` inside the closed rectangle, else 0."""
    if not (h > 0 and delta1 > 0):
        raise ValueError("h and delta1 must be positive")
    d = rect.boundary_distance(x, y)
    w = -np.expm1(-(d * d) / (h * h * delta1))
    return np.where(rect.contains(x, y), w, 0.0)


def patch_weights(cover: PatchCover, patch: Patch) -> np.ndarray:
    m, n = cover.shape
    hx, hy = cover.length / n, cover.width / m
    x = (np.arange(patch.cols.start, patch.cols.stop) + 0.5) * hx
    y = (np.arange(patch.rows.start, patch.rows.stop) + 0.5) * hy
    return pou_weight(x[None, :], y[:, None], patch.rect, patch.rect.diameter, cover.delta1)


def blend(estimates, cover: PatchCover) -> np.ndarray:
    """Weighted average ``sum_i f_i phi_i / sum_i phi_i`` of per-patch fields.

    ``estimates[i]`` has the shape of patch ``i``; accumulation runs in patch
    order so the result does not depend on how the estimates were produced.
    """
    if len(estimates) != len(cover.patches):
        raise CoverError("one estimate per patch required")
    weights = [patch_weights(cover, p) for p in cover.patches]
    total = np.zeros(cover.shape)
    for p, w in zip(cover.patches, weights):
        total[p.rows, p.cols] += w
    if np.any(~(total > 0)):
        raise CoverError("partition-of-unity weights vanish at some pixel")
    # Accumulate deviations from a reference estimate (the first patch covering
    # each pixel): constant fields and single covers come out exactly, and the
    # final clip keeps the convex-combination bound under rounding.
    ref = np.full(cover.shape, np.nan)
    lo = np.full(cover.shape, np.inf)
    hi = np.full(cover.shape, -np.inf)
    ests = []
    for p, w, est in zip(cover.patches, weights, estimates):
        est = np.asarray(est, dtype=float)
        if est.shape != w.shape:
            raise CoverError(f"estimate shape {est.shape} does not match patch {w.shape}")
        r = ref[p.rows, p.cols]
        np.copyto(r, est, where=np.isnan(r))
        lo[p.rows, p.cols] = np.minimum(lo[p.rows, p.cols], est)
        hi[p.rows, p.cols] = np.maximum(hi[p.rows, p.cols], est)
        ests.append(est)
    acc = np.zeros(cover.shape)
    for p, w, est in zip(cover.patches, weights, ests):
        acc[p.rows, p.cols] += w * (est - ref[p.rows, p.cols])
    return np.clip(ref + acc / total, lo, hi)


def _patch_image(img: GrayscaleImage, patch: Patch) -> GrayscaleImage:
    hx, hy = img.spacing
    vals = img.values[patch.rows, patch.cols]
    r, c = vals.shape
    # reuse the exact extents for full-width/height patches so operators are shared
    length = img.length if c == img.cols else c * hx
    width = img.width if r == img.rows else r * hy
    return GrayscaleImage(vals, length, width)


def _denoise_values(args):
    vals, length, width, cfg = args
    ops = build_operators(GrayscaleImage(vals, length, width), cfg)
    return ops.apply(vals.ravel()).reshape(vals.shape)


def _unique_shapes(subs):
    seen = {}
    for s in subs:
        seen.setdefault(s.shape, s)
    return list(seen.values())


def denoise_image(img: GrayscaleImage, cfg: DenoiseConfig | None = None, cover: PatchCover | None = None):
    """Denoise ``img`` patch by patch and blend.  Returns ``(image, diagnostics)``."""
    cfg = cfg or DenoiseConfig()
    m, n = img.shape
    cover = cover or make_cover(m, n, img.length, img.width, cfg.tile, cfg.overlap, cfg.delta1)
    subs = [_patch_image(img, p) for p in cover.patches]
    jobs = [(s.values, s.length, s.width, cfg) for s in subs]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            estimates = list(pool.map(_denoise_values, jobs))
    else:
        estimates = [_denoise_values(j) for j in jobs]
    out = blend(estimates, cover)
    diag = {
        "patches": len(cover),
        "tile": cfg.tile,
        "overlap": cfg.overlap,
        "delta1": cfg.delta1,
        "patch_grid": [[p.rows.start, p.rows.stop, p.cols.start, p.cols.stop] for p in cover.patches],
        "operators": {f"{s.shape[0]}x{s.shape[1]}": build_operators(s, cfg).diagnostics() for s in _unique_shapes(subs)},
    }
    return img.with_values(out), diag
