"""
Fillers for vacated object pixels.
"""
import cv2
import numpy as np
from loguru import logger

NOISE_MEAN = 127.5
NOISE_STD = 64.0


def _as_channels(pixels: np.ndarray) -> np.ndarray:
    return pixels[..., None] if pixels.ndim == 2 else pixels


def _neighbour_sums(values: np.ndarray, valid: np.ndarray):
    """Sum and count of the valid 4-neighbours of every pixel"""
    weighted = values * valid[..., None]
    acc = np.zeros_like(values)
    cnt = np.zeros(valid.shape, dtype=np.float64)
    acc[1:] += weighted[:-1]
    cnt[1:] += valid[:-1]
    acc[:-1] += weighted[1:]
    cnt[:-1] += valid[1:]
    acc[:, 1:] += weighted[:, :-1]
    cnt[:, 1:] += valid[:, :-1]
    acc[:, :-1] += weighted[:, 1:]
    cnt[:, :-1] += valid[:, 1:]
    return acc, cnt


def inpaint_mean(pixels: np.ndarray, region: np.ndarray, known: np.ndarray) -> np.ndarray:
    """
    Fill `region` by propagating 4-neighbour means inward from `known` pixels.

    Each sweep fills the region pixels that touch at least one already known
    pixel with the mean of those neighbours. Region pixels no sweep can reach
    take the mean of all known pixels (or of the whole image when nothing is
    known). Pixels outside `region` are returned unchanged.
    """
    out = np.array(pixels, copy=True)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        return out

    values = _as_channels(pixels).astype(np.float64)
    filled = np.asarray(known, dtype=bool) & ~region
    todo = region.copy()
    if filled.any():
        fallback = values[filled].mean(axis=0)
    else:
        fallback = values.reshape(-1, values.shape[-1]).mean(axis=0)

    sweeps = 0
    while todo.any():
        acc, cnt = _neighbour_sums(values, filled)
        frontier = todo & (cnt > 0)
        if not frontier.any():
            values[todo] = fallback
            break
        values[frontier] = acc[frontier] / cnt[frontier][:, None]
        filled |= frontier
        todo &= ~frontier
        sweeps += 1

    logger.debug(f"Inpainted {int(region.sum())} pixels in {sweeps} sweeps")
    result = np.clip(np.rint(values), 0, 255).astype(pixels.dtype)
    result = result[..., 0] if pixels.ndim == 2 else result
    out[region] = result[region]
    return out


def noise_fill(pixels: np.ndarray, region: np.ndarray, seed: int) -> np.ndarray:
    """Seeded Gaussian noise inside `region`, clipped to the 8-bit range"""
    out = np.array(pixels, copy=True)
    region = np.asarray(region, dtype=bool)
    n = int(region.sum())
    if n == 0:
        return out
    rng = np.random.default_rng(seed)
    shape = (n,) if pixels.ndim == 2 else (n, pixels.shape[2])
    noise = rng.normal(NOISE_MEAN, NOISE_STD, size=shape)
    out[region] = np.clip(np.rint(noise), 0, 255).astype(pixels.dtype)
    return out


def telea_fill(pixels: np.ndarray, region: np.ndarray, known: np.ndarray, radius: int = 3) -> np.ndarray:
    """OpenCV Telea inpainting of `region` from `known` pixels; other pixels are returned unchanged"""
    out = np.array(pixels, copy=True)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        return out
    damaged = (~np.asarray(known, dtype=bool) | region).astype(np.uint8) * 255
    src = np.ascontiguousarray(pixels, dtype=np.uint8)
    repaired = cv2.inpaint(src, damaged, radius, cv2.INPAINT_TELEA)
    out[region] = repaired[region]
    return out
