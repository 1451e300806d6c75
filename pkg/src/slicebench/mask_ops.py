"""Binary mask morphology and geometry.

Everything here is deterministic: all tie-breaks are lexicographic
(lowest row, then column; lowest slice) so repeated runs produce
bit-identical results.
"""

from typing import List, NamedTuple, Tuple

import numpy as np
from scipy import ndimage


class EmptyRegion(Exception):
    pass


class EmptyMask(Exception):
    pass


class PixelPoint(NamedTuple):
    row: int
    col: int


def _structure(connectivity):
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def erode3x3(mask: np.ndarray) -> np.ndarray:
    """Erode by the full 3x3 square kernel.

    A pixel survives iff it and all 8 neighbors are set. Out-of-bounds
    neighbors count as unset, so border pixels never survive.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    out = np.ones_like(mask)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            out &= padded[1 + dr : 1 + dr + mask.shape[0],
                          1 + dc : 1 + dc + mask.shape[1]]
    return out


def connected_components(mask: np.ndarray, connectivity: int = 8) -> List[np.ndarray]:
    """Foreground components as masks, largest first.

    Ties in size are broken by the smallest row-major index of each
    component's first pixel.
    """
    mask = np.asarray(mask, dtype=bool)
    labeled, count = ndimage.label(mask, structure=_structure(connectivity))
    if count == 0:
        return []
    flat = labeled.ravel()
    sizes = np.bincount(flat, minlength=count + 1)
    firsts = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(firsts, flat, np.arange(flat.size, dtype=np.int64))
    order = sorted(range(1, count + 1), key=lambda i: (-sizes[i], firsts[i]))
    return [labeled == i for i in order]


def largest_component(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    components = connected_components(mask, connectivity)
    if not components:
        raise EmptyRegion("mask has no foreground")
    return components[0]


def interior_center(region: np.ndarray) -> PixelPoint:
    """The foreground pixel deepest inside the region.

    Measured by chessboard distance to the background, with outside
    the image counting as background; this always lands on a foreground
    pixel, unlike a centroid, which can fall in a hole of a concave
    region. Ties go to the lowest row, then the lowest column.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise EmptyRegion("region has no foreground")
    padded = np.pad(region, 1, constant_values=False)
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")
    dist = dist[1:-1, 1:-1]
    # argmax scans in row-major order, which is exactly the tie-break.
    row, col = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return PixelPoint(int(row), int(col))


def foreground_seed(gt: np.ndarray) -> Tuple[int, PixelPoint]:
    """Starting slice and point for a 3D foreground mask.

    The slice is the rounded z-coordinate of the 3D centroid (half up);
    if that slice happens to be empty, the nearest slice with
    foreground is used, ties toward lower z. The point is the interior
    center of that slice's largest 8-connected component.
    """
    gt = np.asarray(gt, dtype=bool)
    if not gt.any():
        raise EmptyMask("ground truth has no foreground")
    zs = np.nonzero(gt)[2]
    centroid_z = float(zs.mean())
    k = int(np.floor(centroid_z + 0.5))
    if not gt[:, :, k].any():
        candidates = sorted(
            (z for z in range(gt.shape[2]) if gt[:, :, z].any()),
            key=lambda z: (abs(z - k), z),
        )
        k = candidates[0]
    component = largest_component(gt[:, :, k], connectivity=8)
    return k, interior_center(component)
