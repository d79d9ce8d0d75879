"""Frames of two-dimensional trajectories.

Coordinate 1 runs left to right and coordinate 2 top to bottom, so type-1
particles drift right and type-2 particles drift down.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .lattice import Configuration

ASCII_GLYPHS = {0: ".", 1: ">", 2: "v"}

VACANT_RGB = (255, 255, 255)
# Type 1 red, type 2 blue; the rest are reserved for slices of n > 2 lattices.
PALETTE = {
    1: (255, 0, 0),
    2: (0, 0, 255),
    3: (0, 160, 0),
    4: (255, 160, 0),
    5: (160, 0, 160),
    6: (0, 160, 160),
}


def _grid2d(config: Configuration) -> np.ndarray:
    if config.shape.n != 2:
        raise ValueError(f"rendering needs a 2-D lattice, got {config.shape}")
    n1, n2 = config.shape.dims
    # linear index = x1 + N1*x2, so rows of the reshaped grid are fixed x2
    return config.type_grid().reshape(n2, n1)


def ascii_frame(config: Configuration) -> str:
    grid = _grid2d(config)
    return "".join("".join(ASCII_GLYPHS[int(v)] for v in row) + "\n" for row in grid)


def ppm_frame(config: Configuration, scale: int = 1) -> bytes:
    """Binary P6 image, ``N_1 * scale`` wide and ``N_2 * scale`` high."""
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    grid = _grid2d(config)
    lut = np.array([VACANT_RGB] + [PALETTE[k] for k in sorted(PALETTE)], dtype=np.uint8)
    rgb = lut[grid]
    if scale > 1:
        rgb = rgb.repeat(scale, axis=0).repeat(scale, axis=1)
    h, w = rgb.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Decode a P6 image written by :func:`ppm_frame` into an ``(h, w, 3)`` array."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def frame_name(t: int, steps: int, suffix: str) -> str:
    width = max(5, len(str(steps)))
    return f"frame_{t:0{width}d}.{suffix}"


def write_frames(frames: list[Configuration], out_dir: str | Path, style: str = "ascii", scale: int = 1) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    steps = len(frames) - 1
    paths = []
    for t, config in enumerate(frames):
        if style == "ascii":
            path = out / frame_name(t, steps, "txt")
            path.write_text(ascii_frame(config))
        elif style == "ppm":
            path = out / frame_name(t, steps, "ppm")
            path.write_bytes(ppm_frame(config, scale))
        else:
            raise ValueError(f"unknown render style {style!r}")
        paths.append(path)
    return paths
