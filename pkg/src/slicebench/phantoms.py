"""Deterministic synthetic volumes with known ground truth.

Each phantom pairs an int16 image with a uint8 label map holding two
targets: an ellipsoid "organ" (label 1, single-connected, the easy
regime) and a multi-blob "lesion" (label 2, several well-separated
components, the regime where slice propagation over-tracks).

Geometry constraints the test suite relies on:
  - every target spans at most 8 foreground slices, so a backend that
    perfects one slice per annotation pass can reach Dice 1.0 within
    the 8-pass budget;
  - foreground occupies at most half the stack, leaving plenty of
    background slices for over-tracking to pollute;
  - two lesion blobs share the central slice of the lesion's extent,
    so that slice has multiple connected components;
  - the image always contains values below -200 and above 300, so the
    default display window is exercised at both ends.

Same seed, same bytes: generation is driven entirely by seeded
generators and files are written with a pinned gzip timestamp.
"""

import json
import pathlib

import numpy as np

from . import volume_io
from .volume_io import Volume

DEFAULT_SHAPE = (48, 48, 48)
DEFAULT_SPACING = (1.0, 1.0, 2.5)
DEFAULT_CASES = 4

ORGAN_LABEL = 1
LESION_LABEL = 2

HU_BACKGROUND = -500.0
HU_BODY = 40.0
HU_ORGAN = 90.0
HU_LESION = 170.0
HU_TABLE = 420.0


def _paint_ellipsoid(grid, center, radii):
    nx, ny, nz = grid.shape
    x, y, z = np.ogrid[0:nx, 0:ny, 0:nz]
    cx, cy, cz = center
    rx, ry, rz = radii
    inside = (((x - cx) / rx) ** 2
              + ((y - cy) / ry) ** 2
              + ((z - cz) / rz) ** 2) <= 1.0
    grid |= inside
    return inside


def _case_geometry(rng):
    """Jittered centers and radii for one case, within safe margins."""
    def jit(scale=1.0):
        return float(rng.uniform(-scale, scale))

    def zjit():
        return int(rng.integers(-1, 2))

    organ = {
        "center": (24 + jit(), 24 + jit(), 22 + jit()),
        "radii": (7.5 + jit(0.9), 7.5 + jit(0.9), 2.6 + jit(0.4)),
    }
    # Four z-clusters spread over the stack. Blob z-centers are integer
    # so each cluster covers exactly 3 (rz 1.2) or 1 (rz 0.8) slices:
    # 3 + 3 + 1 + 1 = 8 foreground slices, never more. Blobs B and C
    # share the z at the center of the lesion's extent, so the central
    # lesion slice always splits into two components.
    z_low = 9 + zjit()
    z_high = 43 + zjit()
    z_mid = (z_low - 1 + z_high) // 2
    lesion = [
        {"center": (11 + jit(), 11 + jit(), z_low),
         "radii": (5.0 + jit(0.5), 5.0 + jit(0.5), 1.2)},
        {"center": (38 + jit(), 32 + jit(), z_mid),
         "radii": (5.0 + jit(0.4), 5.0 + jit(0.4), 1.2)},
        {"center": (11 + jit(), 34 + jit(), z_mid),
         "radii": (4.5 + jit(0.4), 4.5 + jit(0.4), 1.2)},
        {"center": (36 + jit(), 12 + jit(), 35 + zjit()),
         "radii": (4.0 + jit(0.4), 4.0 + jit(0.4), 0.8)},
        {"center": (24 + jit(), 40 + jit(), z_high),
         "radii": (4.5 + jit(0.4), 4.5 + jit(0.4), 0.8)},
    ]
    return organ, lesion


def _render_case(rng, shape):
    organ_geo, lesion_geo = _case_geometry(rng)

    organ = np.zeros(shape, dtype=bool)
    _paint_ellipsoid(organ, organ_geo["center"], organ_geo["radii"])
    lesion = np.zeros(shape, dtype=bool)
    for blob in lesion_geo:
        _paint_ellipsoid(lesion, blob["center"], blob["radii"])

    nx, ny, nz = shape
    x, y, _ = np.ogrid[0:nx, 0:ny, 0:nz]
    body = (((x - nx / 2) / (nx * 0.42)) ** 2
            + ((y - ny / 2) / (ny * 0.42)) ** 2) <= 1.0
    body = np.broadcast_to(body, shape)

    image = np.full(shape, HU_BACKGROUND)
    image = np.where(body, HU_BODY, image)
    image = np.where(organ, HU_ORGAN, image)
    image = np.where(lesion, HU_LESION, image)
    image[nx - 4 : nx - 2, :, :] = HU_TABLE  # scanner-table stripe
    image = image + rng.normal(0.0, 12.0, size=shape)
    image = np.clip(np.rint(image), -1024, 1024).astype(np.int16)

    labels = np.zeros(shape, dtype=np.uint8)
    labels[organ] = ORGAN_LABEL
    labels[lesion] = LESION_LABEL
    return image, labels, {"organ_ellipsoid": organ_geo, "lesion_blobs": lesion_geo}


def make_phantoms(out_dir, seed=0, cases=DEFAULT_CASES, shape=DEFAULT_SHAPE,
                  spacing=DEFAULT_SPACING):
    """Write `cases` phantom pairs plus a manifest; returns the manifest."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(cases):
        rng = np.random.default_rng([int(seed), i])
        image, labels, geometry = _render_case(rng, shape)
        case_id = f"case_{i:03d}"
        image_name = f"{case_id}_image.nii.gz"
        label_name = f"{case_id}_label.nii.gz"
        volume_io.write_nifti(
            Volume(data=image, spacing=spacing, datatype="int16"),
            out / image_name)
        volume_io.write_nifti(
            Volume(data=labels, spacing=spacing, datatype="uint8"),
            out / label_name)
        entry = {"case_id": case_id,
                 "image_path": image_name,
                 "label_path": label_name}
        entry.update(geometry)
        entries.append(entry)

    manifest = {
        "name": f"phantoms-seed{seed}",
        "cases": entries,
        "labels": {"organ": ORGAN_LABEL, "lesion": LESION_LABEL},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
