"""Sample-bank background subtraction, mask cleanup and ROI extraction.

Every pixel keeps a bank of ``l`` intensities drawn from its spatial
neighbourhood.  A new value is background when enough bank entries lie
within ``match_radius`` of it.  Background pixels refresh their own bank and
a neighbour's bank at random (conservative update); foreground pixels never
touch the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from frdl.errors import ConfigError, DataError

SE_3x3 = np.ones((3, 3), dtype=bool)


@dataclass
class BackgroundModel:
    samples: np.ndarray  # (H, W, l) uint8
    neighborhood_radius: int = 1
    match_radius: float = 20.0
    min_matches: int = 2
    update_subsampling: int = 16
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if self.samples.ndim != 3 or self.samples.shape[2] < 1:
            raise ConfigError("background samples must be (H, W, l) with l >= 1")
        if self.match_radius < 0:
            raise ConfigError("match radius must be >= 0")
        if not 1 <= self.min_matches <= self.l:
            raise ConfigError(f"min_matches must lie in [1, {self.l}]")
        if self.update_subsampling < 1:
            raise ConfigError("update_subsampling must be >= 1")
        if self.rng is None:
            self.rng = np.random.default_rng(0)

    @property
    def l(self) -> int:
        return self.samples.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[:2]


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def slices(self):
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def contains(self, rows, cols) -> bool:
        rows, cols = np.asarray(rows), np.asarray(cols)
        return bool(
            np.all((rows >= self.y) & (rows < self.y + self.h))
            and np.all((cols >= self.x) & (cols < self.x + self.w))
        )


def _check_gray(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise DataError(f"background modelling needs a grayscale frame, got shape {frame.shape}")
    return frame


def _neighbor_coords(shape, count, radius, rng):
    """Random in-bounds neighbour coordinates, ``count`` per pixel."""
    h, w = shape
    dy = rng.integers(-radius, radius + 1, size=(h, w, count))
    dx = rng.integers(-radius, radius + 1, size=(h, w, count))
    rows = np.clip(np.arange(h)[:, None, None] + dy, 0, h - 1)
    cols = np.clip(np.arange(w)[None, :, None] + dx, 0, w - 1)
    return rows, cols


def init_background_model(
    frame,
    l: int = 20,
    neighborhood_radius: int = 1,
    seed: int = 0,
    *,
    match_radius: float = 20.0,
    min_matches: int = 2,
    update_subsampling: int = 16,
) -> BackgroundModel:
    frame = _check_gray(frame)
    if l < 1:
        raise ConfigError("need at least one background sample per pixel")
    if neighborhood_radius < 0:
        raise ConfigError("neighbourhood radius must be >= 0")
    rng = np.random.default_rng(seed)
    rows, cols = _neighbor_coords(frame.shape, l, neighborhood_radius, rng)
    samples = frame[rows, cols].astype(np.uint8)
    return BackgroundModel(
        samples, neighborhood_radius, match_radius, min_matches, update_subsampling, rng
    )


def _matches(model: BackgroundModel, frame: np.ndarray) -> np.ndarray:
    diff = np.abs(model.samples.astype(np.int16) - frame.astype(np.int16)[..., None])
    return np.count_nonzero(diff <= model.match_radius, axis=2)


def classify_foreground(model: BackgroundModel, frame) -> np.ndarray:
    """Boolean mask, True where fewer than ``min_matches`` samples are close."""
    frame = _check_gray(frame)
    if frame.shape != model.shape:
        raise DataError(f"frame {frame.shape} does not match background model {model.shape}")
    return _matches(model, frame) < model.min_matches


def update_background_model(model: BackgroundModel, frame, mask) -> BackgroundModel:
    """Conservative random update, in place; returns ``model`` for chaining.

    Each background pixel, with probability ``1/update_subsampling``,
    overwrites a random slot of its own bank; independently and with the
    same probability it writes its value into a random slot of a random
    8-neighbour's bank.
    """
    frame = _check_gray(frame)
    mask = np.asarray(mask, dtype=bool)
    if frame.shape != model.shape or mask.shape != model.shape:
        raise DataError("frame and mask must match the background model dimensions")
    rng = model.rng
    h, w = model.shape
    bg = ~mask
    p = 1.0 / model.update_subsampling

    own = bg & (rng.random((h, w)) < p)
    slot = rng.integers(0, model.l, size=(h, w))
    r, c = np.nonzero(own)
    model.samples[r, c, slot[r, c]] = frame[r, c]

    spread = bg & (rng.random((h, w)) < p)
    # 8-neighbour offset, resampled until it is not the pixel itself
    dy = rng.integers(-1, 2, size=(h, w))
    dx = rng.integers(-1, 2, size=(h, w))
    still = (dy == 0) & (dx == 0)
    while still.any():
        dy[still] = rng.integers(-1, 2, size=still.sum())
        dx[still] = rng.integers(-1, 2, size=still.sum())
        still = (dy == 0) & (dx == 0)
    nslot = rng.integers(0, model.l, size=(h, w))
    r, c = np.nonzero(spread)
    nr = np.clip(r + dy[r, c], 0, h - 1)
    nc = np.clip(c + dx[r, c], 0, w - 1)
    model.samples[nr, nc, nslot[r, c]] = frame[r, c]
    return model


def morph_open(mask) -> np.ndarray:
    """3x3 erosion then 3x3 dilation; outside the frame counts as background."""
    mask = np.asarray(mask, dtype=bool)
    eroded = ndimage.binary_erosion(mask, structure=SE_3x3, border_value=0)
    return ndimage.binary_dilation(eroded, structure=SE_3x3, border_value=0)


def largest_component(mask) -> np.ndarray | None:
    """Pixels of the largest 8-connected component, or None for an empty mask.

    Equal sizes go to the component whose first pixel in row-major order
    comes first.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=SE_3x3)
    if n == 0:
        return None
    # scipy numbers components in row-major order of their first pixel,
    # so argmax's first-hit rule implements the tie break
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def extract_roi(mask) -> BoundingBox:
    """Square box around the largest foreground component.

    The tight box is grown symmetrically on its short side to a square and
    shifted back inside the frame; if the frame is too small on that axis,
    the box is clipped to the frame.  An empty mask gives the full frame.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    comp = largest_component(mask)
    if comp is None:
        return BoundingBox(0, 0, w, h)
    rows, cols = np.nonzero(comp)
    y0, y1 = int(rows.min()), int(rows.max()) + 1
    x0, x1 = int(cols.min()), int(cols.max()) + 1
    side = max(y1 - y0, x1 - x0)
    y0, y1 = _grow(y0, y1, side, h)
    x0, x1 = _grow(x0, x1, side, w)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def _grow(a: int, b: int, side: int, limit: int) -> tuple[int, int]:
    extra = side - (b - a)
    a -= extra // 2
    b += extra - extra // 2
    if a < 0:
        b, a = b - a, 0
    if b > limit:
        a, b = a - (b - limit), limit
    return max(a, 0), b


def mask_iou(a, b) -> float:
    a, b = np.asarray(a, dtype=bool), np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def background_reference(frames: np.ndarray) -> np.ndarray:
    """Lower temporal median of a grayscale stack (an observed value per pixel).

    Used to seed the model when the first frame already contains the moving
    subject; seeding from that frame would bake the subject into the bank and
    leave a ghost behind once it moves.
    """
    frames = np.asarray(frames)
    k = (frames.shape[0] - 1) // 2
    return np.partition(frames, k, axis=0)[k]


def segment_clip(frames, model_seed: int = 0, init: str = "median", **model_kw):
    """Run classify -> open -> update over a grayscale clip.

    Returns ``(raw_masks, opened_masks)``, both ``(T, H, W)`` bool.
    ``init`` is ``"median"`` (seed from :func:`background_reference`) or
    ``"first"`` (seed from frame 0).
    """
    frames = np.asarray(frames)
    if init == "median":
        ref = background_reference(frames)
    elif init == "first":
        ref = frames[0]
    else:
        raise ConfigError(f"unknown background init {init!r}")
    model = init_background_model(ref, seed=model_seed, **model_kw)
    raw = np.empty(frames.shape, dtype=bool)
    opened = np.empty(frames.shape, dtype=bool)
    for t, f in enumerate(frames):
        raw[t] = classify_foreground(model, f)
        opened[t] = morph_open(raw[t])
        update_background_model(model, f, raw[t])
    return raw, opened
