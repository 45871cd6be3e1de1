"""Texture descriptors for RGB images.

The fixed 129-component vector is three concatenated segments:
  [0:64)    grayscale histogram, 4-wide bins, normalized to sum 1
  [64:123)  uniform local binary pattern histogram over interior pixels,
            8 neighbors at radius 1, normalized to sum 1
  [123:129) color moments: channel means then population standard
            deviations, channels scaled to [0, 1]

Only binary PPM (P6, maxval 255) decoding is built in, so feature
extraction is bit-exact and dependency-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .errors import (
    BadMagic,
    DataError,
    EmptyClass,
    TruncatedPixelData,
    UnreadableImage,
    UnsupportedMaxval,
)

N_FEATURES = 129

FEATURE_NAMES = (
    [f"ghist_{i}" for i in range(64)]
    + [f"lbp_{i}" for i in range(59)]
    + ["mean_r", "mean_g", "mean_b", "std_r", "std_g", "std_b"]
)


@dataclass
class ImageRGB8:
    """Row-major 8-bit RGB raster, at least 3x3."""

    width: int
    height: int
    pixels: NDArray[np.uint8]

    def __post_init__(self) -> None:
        if self.width < 3 or self.height < 3:
            raise ValueError("image must be at least 3x3")
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel block shape {pixels.shape} does not match "
                f"{self.height}x{self.width} RGB"
            )
        self.pixels = pixels


def _read_header_token(blob: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines, then take one token
    n = len(blob)
    while pos < n:
        c = blob[pos : pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and blob[pos : pos + 1] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and blob[pos : pos + 1] not in b" \t\r\n":
        pos += 1
    return blob[start:pos], pos


def load_ppm(path) -> ImageRGB8:
    """Decode a binary PPM (P6) file with maxval 255, bit-exactly.

    Raises:
        BadMagic: the file is not P6.
        UnsupportedMaxval: maxval is anything but 255.
        TruncatedPixelData: raster is shorter than width*height*3 bytes.
    """
    blob = Path(path).read_bytes()
    magic, pos = _read_header_token(blob, 0)
    if magic != b"P6":
        raise BadMagic(magic[:16])
    fields = []
    for _ in range(3):
        token, pos = _read_header_token(blob, pos)
        if not token.isdigit():
            raise BadMagic(token[:16])
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedMaxval(maxval)
    pos += 1  # exactly one whitespace byte separates header from raster
    need = width * height * 3
    raster = blob[pos : pos + need]
    if len(raster) < need:
        raise TruncatedPixelData(need, len(raster))
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    try:
        return ImageRGB8(width=width, height=height, pixels=pixels)
    except ValueError as e:
        raise UnreadableImage(str(path), str(e)) from None


def write_ppm(img: ImageRGB8, path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def grayscale(img: ImageRGB8) -> NDArray[np.uint8]:
    """Luma plane: floor(0.299 R + 0.587 G + 0.114 B + 0.5) per pixel."""
    r = img.pixels[:, :, 0].astype(np.float64)
    g = img.pixels[:, :, 1].astype(np.float64)
    b = img.pixels[:, :, 2].astype(np.float64)
    return np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5).astype(np.uint8)


def _transitions(code: int) -> int:
    bits = [(code >> p) & 1 for p in range(8)]
    return sum(bits[p] != bits[(p + 1) % 8] for p in range(8))


def _uniform_bins() -> NDArray[np.int64]:
    # codes with at most 2 circular 0/1 transitions, ascending, then catch-all
    table = np.full(256, 58, dtype=np.int64)
    uniform = [c for c in range(256) if _transitions(c) <= 2]
    for i, code in enumerate(uniform):
        table[code] = i
    return table


UNIFORM_BIN = _uniform_bins()

# neighbor offsets (dy, dx): east first, counter-clockwise
LBP_OFFSETS = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)]


def _lbp_codes(gray: NDArray[np.uint8]) -> NDArray[np.int64]:
    h, w = gray.shape
    center = gray[1 : h - 1, 1 : w - 1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for p, (dy, dx) in enumerate(LBP_OFFSETS):
        neighbor = gray[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (neighbor >= center).astype(np.int64) << p
    return codes


def _channel_moments(channel: NDArray[np.uint8]) -> tuple[float, float]:
    # moments from value counts, so pixel order can never matter
    counts = np.bincount(channel.ravel(), minlength=256).astype(np.float64)
    n = counts.sum()
    values = np.arange(256, dtype=np.float64)
    mean = float((counts * values).sum() / n)
    var = float((counts * (values - mean) * (values - mean)).sum() / n)
    return mean / 255.0, float(np.sqrt(var)) / 255.0


def texture_features(img: ImageRGB8) -> NDArray[np.float64]:
    """The 129-component descriptor; deterministic, no resizing."""
    gray = grayscale(img)
    n_pixels = gray.size
    ghist = np.bincount((gray >> 2).ravel(), minlength=64).astype(np.float64)
    ghist /= n_pixels

    codes = _lbp_codes(gray)
    lbp = np.bincount(UNIFORM_BIN[codes.ravel()], minlength=59).astype(np.float64)
    lbp /= codes.size

    means = []
    stds = []
    for c in range(3):
        mean, std = _channel_moments(img.pixels[:, :, c])
        means.append(mean)
        stds.append(std)
    return np.concatenate([ghist, lbp, np.array(means + stds)])


def featurize_directory(root, problems: list | None = None) -> Dataset:
    """One feature row per image under root/<class_dir>/, labels by directory.

    Rows are ordered lexicographically by file path. Undecodable files are
    collected into ``problems`` as (path, reason) pairs when a list is
    given; otherwise any failure raises after the scan completes.

    Raises:
        DataError: fewer than two class directories.
        EmptyClass: a class directory with no decodable image.
        UnreadableImage: a file failed to decode and no problems list given.
    """
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise DataError(f"{root}: need at least two class directories")
    collected: list[tuple[str, str]] = []
    rows: list[NDArray[np.float64]] = []
    labels: list[int] = []
    for label, class_dir in enumerate(class_dirs):
        decoded = 0
        for path in sorted(p for p in class_dir.iterdir() if p.is_file()):
            try:
                img = load_ppm(path)
            except DataError as e:
                collected.append((str(path), str(e)))
                continue
            rows.append(texture_features(img))
            labels.append(label)
            decoded += 1
        if decoded == 0:
            raise EmptyClass(str(class_dir))
    if collected and problems is None:
        path, reason = collected[0]
        raise UnreadableImage(path, f"{reason} ({len(collected)} file(s) failed)")
    if problems is not None:
        problems.extend(collected)
    return Dataset(
        features=np.vstack(rows),
        labels=np.array(labels, dtype=np.int64),
        class_names=[p.name for p in class_dirs],
        feature_names=list(FEATURE_NAMES),
    )
