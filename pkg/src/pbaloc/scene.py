"""Synthetic test scenes: an eight-armed star on a salt-and-pepper background.

A scene is an 8-bit grayscale raster with a known target center, so oracles
and experiments can be scored against ground truth.  Scenes persist as binary
PGM (P5) files with a JSON sidecar carrying the generation parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Rect


@dataclass(frozen=True)
class Scene:
    """Grayscale image with a known target center.

    ``pixels`` is (height, width) uint8, row-major; ``target_center`` is
    (row, col), 1-indexed.
    """

    pixels: np.ndarray
    target_center: tuple[int, int]
    target_half_size: int
    noise_density: float
    seed: int

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.uint8, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)
        r, c = self.target_center
        if not (1 <= r <= arr.shape[0] and 1 <= c <= arr.shape[1]):
            raise ValueError(f"target_center {self.target_center} outside image")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def dims(self) -> tuple[int, int]:
        return (self.height, self.width)


def generate_star_scene(
    dims: tuple[int, int],
    center: tuple[int, int],
    half_size: int,
    noise_density: float,
    seed: int,
) -> Scene:
    """Render a star and overlay salt-and-pepper noise.

    The star is the union of a plus shape and its two 45-degree diagonals
    (eight arms of length ``half_size``, one pixel wide) at intensity 255 on
    a zero background; it covers exactly 8*half_size + 1 pixels.  Noise then
    replaces each pixel independently: to 0 with probability density/2, to
    255 with probability density/2.  Identical seeds produce identical
    rasters.
    """
    n_rows, n_cols = dims
    r0, c0 = center
    if half_size < 1:
        raise ValueError(f"half_size must be >= 1, got {half_size}")
    if not (0.0 <= noise_density < 1.0):
        raise ValueError(f"noise_density must be in [0, 1), got {noise_density}")
    if not (
        r0 - half_size >= 1
        and r0 + half_size <= n_rows
        and c0 - half_size >= 1
        and c0 + half_size <= n_cols
    ):
        raise ValueError(
            f"center {center} closer than half_size={half_size} to a border "
            f"of a {n_rows}x{n_cols} image"
        )

    img = np.zeros((n_rows, n_cols), dtype=np.uint8)
    r, c = r0 - 1, c0 - 1
    for k in range(half_size + 1):
        img[r - k, c] = 255
        img[r + k, c] = 255
        img[r, c - k] = 255
        img[r, c + k] = 255
        img[r - k, c - k] = 255
        img[r - k, c + k] = 255
        img[r + k, c - k] = 255
        img[r + k, c + k] = 255

    rng = np.random.default_rng(seed)
    u = rng.random((n_rows, n_cols))
    img[u < noise_density / 2.0] = 0
    img[u >= 1.0 - noise_density / 2.0] = 255
    return Scene(img, center, half_size, noise_density, seed)


def extract_block(scene: Scene, rect: Rect) -> np.ndarray:
    """Copy the sub-raster covered by ``rect`` (1-indexed, inclusive)."""
    if rect.row_hi > scene.height or rect.col_hi > scene.width:
        raise ValueError(f"rect {rect} outside {scene.height}x{scene.width} scene")
    return scene.pixels[rect.row_lo - 1 : rect.row_hi, rect.col_lo - 1 : rect.col_hi].copy()


def resize_to_square(raster: np.ndarray, target_side: int) -> np.ndarray:
    """Nearest-neighbor rescale of a square raster to target_side x target_side.

    Source index for destination index i is floor(i * m / target_side), so
    equal sizes are the identity and no new gray values are introduced.
    """
    arr = np.asarray(raster)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"raster must be square, got shape {arr.shape}")
    if target_side < 1:
        raise ValueError(f"target_side must be >= 1, got {target_side}")
    m = arr.shape[0]
    idx = (np.arange(target_side) * m) // target_side
    return arr[np.ix_(idx, idx)].copy()


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Write a binary PGM (P5, maxval 255) file."""
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"pixels must be 2-D, got shape {arr.shape}")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5) file into a uint8 array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a P5 PGM file")
    # Header = magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines; pixel data follows the single
    # whitespace byte after maxval.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # the single whitespace byte terminating the header
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write the raster as PGM plus a JSON sidecar with the ground truth."""
    write_pgm(path, scene.pixels)
    meta = {
        "target_center": list(scene.target_center),
        "target_half_size": scene.target_half_size,
        "noise_density": scene.noise_density,
        "seed": scene.seed,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def load_scene(path: str | Path) -> Scene:
    """Load a PGM + sidecar pair written by :func:`save_scene`."""
    pixels = read_pgm(path)
    meta = json.loads(sidecar_path(path).read_text())
    return Scene(
        pixels=pixels,
        target_center=tuple(meta["target_center"]),
        target_half_size=int(meta["target_half_size"]),
        noise_density=float(meta["noise_density"]),
        seed=int(meta["seed"]),
    )
