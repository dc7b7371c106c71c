"""Raw RGB cell image -> standardized 128x128 binary mask.

Stages: PNG decode, anti-aliased resize to 128x128, grayscale conversion,
Otsu threshold on a 256-bin histogram, then binarization with a configurable
foreground polarity. All stages are pure functions; the same file always
yields a bit-identical mask.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError
from skimage.transform import resize as _skimage_resize

from .errors import DecodeError, DegenerateImageError

MASK_SIDE = 128

# Foreground polarity after thresholding:
#   paper - threshold then invert, foreground = intensity <= t (dark class)
#   auto  - foreground = class holding the minority of the border pixels
#   light - foreground = intensity > t (bright class)
POLARITY_MODES = ("paper", "auto", "light")

# ITU-R 601 luma weights of the standard RGB->gray conversion.
_GRAY_WEIGHTS = np.array([0.2125, 0.7154, 0.0721])

_OTSU_BINS = 256


def load_rgb(path) -> np.ndarray:
    """Decode a PNG file to an (H, W, 3) uint8 array, pixel-exact.

    Raises OSError if the file is missing/unreadable and DecodeError if the
    payload is not a valid PNG. Non-PNG image formats are rejected rather
    than silently converted.
    """
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise DecodeError(f"{path}: not a PNG file (format={im.format})")
            try:
                rgb = im.convert("RGB")
                arr = np.asarray(rgb, dtype=np.uint8)
            except OSError as exc:  # truncated payload surfaces at pixel access
                raise DecodeError(f"{path}: corrupt PNG ({exc})") from exc
    except FileNotFoundError:
        raise
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: not a decodable image ({exc})") from exc
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DecodeError(f"{path}: unexpected decoded shape {arr.shape}")
    return arr


def resize_antialiased(img: np.ndarray) -> np.ndarray:
    """Resize an RGB image to 128x128 with Gaussian anti-aliasing.

    Downscaling pre-blurs each axis with sigma = max(0, (scale - 1) / 2)
    (truncated at 4 sigma) before bilinear sampling; upscaling is plain
    bilinear. Channels are clamped to [0, 255] after the float computation.
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB array, got {img.shape}")
    if img.shape[:2] == (MASK_SIDE, MASK_SIDE):
        return np.ascontiguousarray(img, dtype=np.uint8)
    out = _skimage_resize(
        img.astype(np.float64),
        (MASK_SIDE, MASK_SIDE),
        order=1,
        mode="reflect",
        anti_aliasing=True,
        preserve_range=True,
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Per-pixel luma (0.2125 R + 0.7154 G + 0.0721 B) / 255, in [0, 1]."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB array, got {img.shape}")
    return img.astype(np.float64) @ _GRAY_WEIGHTS / 255.0


def otsu_split_bin(hist: np.ndarray) -> int:
    """Index k of the cut (bins 0..k vs k+1..end) maximizing between-class
    variance w0*w1*(mu0 - mu1)^2; ties go to the lowest k.

    Counts are integers, so the comparison runs in exact integer arithmetic
    (sigma_b is proportional to (S0*W1 - S1*W0)^2 / (W0*W1)); mathematically
    tied cuts therefore resolve identically on every platform. Bin positions
    enter as indices, which matches any affine placement of bin centers.
    """
    arr = np.asarray(hist)
    counts = np.rint(arr).astype(np.int64)
    if arr.dtype.kind == "f" and not np.allclose(arr, counts, atol=1e-6):
        raise ValueError("histogram must hold integer counts")
    n = counts.size
    if n < 2 or counts.sum() <= 0 or np.any(counts < 0):
        raise ValueError("histogram needs at least two bins and nonnegative mass")
    W0 = np.cumsum(counts)
    S0 = np.cumsum(counts * np.arange(n, dtype=np.int64))
    total_w = int(W0[-1])
    total_s = int(S0[-1])
    best_k = -1
    best_num = 0
    best_den = 1
    for k in range(n - 1):
        w0 = int(W0[k])
        w1 = total_w - w0
        if w0 == 0 or w1 == 0:
            continue
        s0 = int(S0[k])
        num = (s0 * w1 - (total_s - s0) * w0) ** 2  # Python ints: no overflow
        den = w0 * w1
        if best_k < 0 or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    if best_k < 0:
        raise ValueError("histogram mass sits in a single bin")
    return best_k


def otsu_threshold(gray: np.ndarray) -> float:
    """Otsu threshold of a grayscale image.

    Builds a 256-bin histogram over [min, max] of the observed intensities
    and returns the center of the top bin of the lower class at the cut that
    maximizes between-class variance.
    """
    vals = np.asarray(gray, dtype=np.float64).ravel()
    lo = float(vals.min())
    hi = float(vals.max())
    if lo == hi:
        raise DegenerateImageError("constant-intensity image has no threshold")
    hist, edges = np.histogram(vals, bins=_OTSU_BINS, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2.0
    k = otsu_split_bin(hist)
    return float(centers[k])


def binarize_and_invert(gray: np.ndarray, threshold: float, polarity: str = "paper") -> np.ndarray:
    """Threshold a grayscale image into a boolean mask, foreground True.

    paper: mask = (intensity > t) then inverted, so foreground is the dark
    class. auto: foreground is whichever class occupies the minority of the
    image border (dark class on a tie). light: foreground is the bright class.
    """
    if polarity not in POLARITY_MODES:
        raise ValueError(f"polarity must be one of {POLARITY_MODES}, got {polarity!r}")
    bright = np.asarray(gray, dtype=np.float64) > threshold
    if polarity == "light":
        return bright
    if polarity == "paper":
        return ~bright
    border = np.concatenate([bright[0, :], bright[-1, :], bright[1:-1, 0], bright[1:-1, -1]])
    n_bright = int(border.sum())
    n_dark = border.size - n_bright
    return bright if n_bright < n_dark else ~bright


def preprocess_rgb(img: np.ndarray, polarity: str = "paper") -> np.ndarray:
    """Full mask pipeline on a decoded RGB image: resize, gray, Otsu, binarize."""
    gray = to_gray(resize_antialiased(img))
    return binarize_and_invert(gray, otsu_threshold(gray), polarity)


def preprocess_file(path, polarity: str = "paper") -> np.ndarray:
    """Load a PNG and run the full mask pipeline."""
    return preprocess_rgb(load_rgb(path), polarity)


def write_pgm(gray: np.ndarray, path) -> None:
    """Dump a grayscale image as binary PGM (P5, 8-bit) for visual inspection."""
    arr = np.clip(np.rint(np.asarray(gray, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def write_pbm(mask: np.ndarray, path) -> None:
    """Dump a binary mask as PBM (P4, packed bits); foreground bits are 1."""
    arr = np.asarray(mask, dtype=bool)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(np.packbits(arr, axis=1).tobytes())
