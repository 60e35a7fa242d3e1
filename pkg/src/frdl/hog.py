"""Histogram of oriented gradients.

Gradients use the ``[+1, 0, -1]`` kernels applied as cross-correlation, so
``IX(y, x) = I(y, x-1) - I(y, x+1)`` and ``IY(y, x) = I(y-1, x) - I(y+1, x)``
with edge pixels replicated.  Orientation is ``atan2(IX, IY)`` folded into
[0, 180) degrees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from frdl.errors import ConfigError, DataError


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: tuple[int, int] = (2, 2)  # cells (rows, cols)
    block_stride: int = 1
    bins: int = 9
    epsilon: float = 1e-6

    def __post_init__(self):
        if isinstance(self.block_size, int):
            object.__setattr__(self, "block_size", (self.block_size, self.block_size))
        if self.cell_size < 1 or self.block_stride < 1 or min(self.block_size) < 1:
            raise ConfigError("cell size, block size and block stride must be >= 1")
        if self.bins < 2:
            raise ConfigError("need at least 2 orientation bins")

    def layout(self, shape) -> "HogLayout":
        h, w = shape
        if h % self.cell_size or w % self.cell_size:
            raise DataError(f"image {h}x{w} is not a multiple of the {self.cell_size}px cell size")
        cy, cx = h // self.cell_size, w // self.cell_size
        by, bx = self.block_size
        if cy < by or cx < bx:
            raise DataError(f"image {h}x{w} holds fewer cells than one {by}x{bx} block")
        return HogLayout(
            cells_x=cx, cells_y=cy,
            blocks_x=(cx - bx) // self.block_stride + 1,
            blocks_y=(cy - by) // self.block_stride + 1,
            bins=self.bins, block_cells=by * bx,
        )

    def length(self, shape) -> int:
        return self.layout(shape).length


@dataclass(frozen=True)
class HogLayout:
    cells_x: int
    cells_y: int
    blocks_x: int
    blocks_y: int
    bins: int
    block_cells: int

    @property
    def length(self) -> int:
        return self.blocks_x * self.blocks_y * self.block_cells * self.bins


@dataclass
class HogDescriptor:
    values: np.ndarray
    layout: HogLayout


def _as_gray_float(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 3:
        from frdl.ingest import to_gray
        image = to_gray(image)
    if image.ndim != 2:
        raise DataError(f"expected a 2-D image, got shape {image.shape}")
    return image.astype(np.float64)


class GradientField(NamedTuple):
    ix: np.ndarray
    iy: np.ndarray


def gradients(image) -> GradientField:
    img = _as_gray_float(image)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise DataError(f"image {img.shape} too small for gradients (need 3x3)")
    p = np.pad(img, 1, mode="edge")
    ix = p[1:-1, :-2] - p[1:-1, 2:]
    iy = p[:-2, 1:-1] - p[2:, 1:-1]
    return GradientField(ix, iy)


def magnitude_angle(ix, iy) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and unsigned orientation in degrees, 0 where magnitude is 0."""
    ix = np.asarray(ix, dtype=np.float64)
    iy = np.asarray(iy, dtype=np.float64)
    mag = np.hypot(ix, iy)
    phi = np.mod(np.degrees(np.arctan2(ix, iy)), 180.0)
    phi[phi >= 180.0] -= 180.0  # mod can round tiny negatives up to 180
    phi[mag == 0] = 0.0
    return mag, phi


def cell_histograms(mag, phi, params: HogParams) -> np.ndarray:
    """Magnitude-weighted votes split linearly between the two nearest bins.

    Bin ``b`` is centred on ``(b + 0.5) * 180 / bins`` and the bins wrap
    around.  Returns ``(cells_y, cells_x, bins)``.
    """
    h, w = mag.shape
    nb = params.bins
    pos = phi / (180.0 / nb) - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    b0 = lo.astype(np.int64) % nb
    b1 = (b0 + 1) % nb
    cs = params.cell_size
    cy, cx = h // cs, w // cs
    cell_id = (np.arange(h)[:, None] // cs) * cx + (np.arange(w)[None, :] // cs)
    n = cy * cx * nb
    hist = np.bincount((cell_id * nb + b0).ravel(), (mag * (1 - frac)).ravel(), minlength=n)
    hist += np.bincount((cell_id * nb + b1).ravel(), (mag * frac).ravel(), minlength=n)
    return hist.reshape(cy, cx, nb)


def normalize_blocks(hist, params: HogParams) -> np.ndarray:
    cy, cx, nb = hist.shape
    by, bx = params.block_size
    s = params.block_stride
    out = []
    for y in range(0, cy - by + 1, s):
        for x in range(0, cx - bx + 1, s):
            v = hist[y:y + by, x:x + bx].ravel()
            out.append(v / np.sqrt(v @ v + params.epsilon ** 2))
    return np.concatenate(out)


def hog_descriptor(image, params: HogParams | None = None) -> HogDescriptor:
    params = params or HogParams()
    img = _as_gray_float(image)
    layout = params.layout(img.shape)
    ix, iy = gradients(img)
    mag, phi = magnitude_angle(ix, iy)
    hist = cell_histograms(mag, phi, params)
    values = normalize_blocks(hist, params)
    assert values.size == layout.length
    return HogDescriptor(values, layout)


def resize_bilinear(image, shape) -> np.ndarray:
    """Bilinear resample with pixel-centre alignment and edge clamping."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[:2]
    oh, ow = shape
    ys = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    xs = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    grid = np.meshgrid(ys, xs, indexing="ij")
    if image.ndim == 2:
        return ndimage.map_coordinates(image, grid, order=1, mode="nearest")
    return np.stack(
        [ndimage.map_coordinates(image[..., c], grid, order=1, mode="nearest")
         for c in range(image.shape[2])],
        axis=-1,
    )
