"""Absorption-image reduction of a stored spinwave.

The spinwave is imaged by the shadow it casts on a resonant probe, so the
local magnitude follows from the optical depth of the shadow:
|S| ~ sqrt(ln(I0 / I)).  The forward model here is the exact inverse and
is used for round-trip checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ParameterError


class ImageFormatError(ValueError):
    pass


@dataclass(frozen=True)
class IntensityImage:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or min(px.shape) < 1:
            raise ParameterError(f"image must be a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or np.any(px < 0):
            raise ParameterError("image pixels must be finite and non-negative")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class SpinwaveMap:
    values: np.ndarray
    clamped: int = 0


def _check_same(a: IntensityImage, b: IntensityImage):
    if a.pixels.shape != b.pixels.shape:
        raise ParameterError(f"image dimensions differ: {a.pixels.shape} vs {b.pixels.shape}")


def infer_spinwave_map(i0: IntensityImage, i: IntensityImage, floor: float = 1e-12) -> SpinwaveMap:
    """|S| per pixel from the reference and shadow images.

    Pixels brighter than the reference (noise) are clamped to zero and
    counted instead of producing an imaginary root.
    """
    _check_same(i0, i)
    if not floor > 0:
        raise ParameterError("floor must be positive")
    od = np.log(np.maximum(i0.pixels, floor) / np.maximum(i.pixels, floor))
    clamped = int(np.count_nonzero(od < 0))
    return SpinwaveMap(np.sqrt(np.maximum(od, 0.0)), clamped)


def average_frames(frames) -> IntensityImage:
    frames = list(frames)
    if not frames:
        raise ParameterError("need at least one frame to average")
    for f in frames[1:]:
        _check_same(frames[0], f)
    return IntensityImage(np.mean([f.pixels for f in frames], axis=0))


def synthesize_images(s_map, i0_level: float, k: float) -> tuple[IntensityImage, IntensityImage]:
    """Reference and shadow images that reduce to sqrt(k) * s_map."""
    s_map = np.asarray(s_map, dtype=float)
    if np.any(s_map < 0):
        raise ParameterError("s_map must be non-negative")
    if not k > 0:
        raise ParameterError("k must be positive")
    i0 = np.full(s_map.shape, float(i0_level))
    return IntensityImage(i0), IntensityImage(i0 * np.exp(-k * s_map ** 2))


# ---------------------------------------------------------------- file formats

def write_pgm(path, image: IntensityImage, maxval: int | None = None) -> None:
    """Plain (P2) graymap; pixels are rounded to integers."""
    px = np.rint(image.pixels).astype(np.int64)
    top = int(px.max()) if maxval is None else int(maxval)
    top = max(top, 1)
    if top > 65535:
        raise ImageFormatError(f"maxval {top} exceeds the graymap limit 65535")
    lines = ["P2", f"{image.width} {image.height}", str(top)]
    lines += [" ".join(str(v) for v in row) for row in px]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> IntensityImage:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ImageFormatError(f"{path}: not a plain graymap (expected magic P2)")
    try:
        width, height, maxval = (int(v) for v in tokens[1:4])
        data = np.array([int(v) for v in tokens[4:]], dtype=float)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed graymap: {exc}") from None
    if data.size != width * height:
        raise ImageFormatError(f"{path}: expected {width * height} samples, found {data.size}")
    if np.any(data > maxval):
        raise ImageFormatError(f"{path}: sample exceeds maxval {maxval}")
    return IntensityImage(data.reshape(height, width))


def write_map_csv(path, values: np.ndarray, header: str = "# |S| map, rows = y, columns = x") -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in np.asarray(values, dtype=float):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_map_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
