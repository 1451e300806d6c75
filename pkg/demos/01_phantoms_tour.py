"""Tour of the synthetic phantom volumes.

Generates a small phantom dataset, then walks through one case: file
layout, header facts, label occupancy, and where the annotation
protocol would place its first click.

Run:  python3 demos/01_phantoms_tour.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from slicebench import binarize_label, read_nifti
from slicebench.mask_ops import foreground_seed
from slicebench.phantoms import make_phantoms

workspace = Path(tempfile.mkdtemp(prefix="slicebench-demo-"))
print(f"workspace: {workspace}\n")

print("=" * 60)
print("1. Generate phantoms")
print("=" * 60)
manifest = make_phantoms(workspace / "phantoms", seed=7, cases=2)
for entry in manifest["cases"]:
    print(f"  {entry['case_id']}: {entry['image_path']} + {entry['label_path']}")
print(f"  labels: {manifest['labels']}")

print()
print("=" * 60)
print("2. Read one case back")
print("=" * 60)
case = manifest["cases"][0]
image = read_nifti(workspace / "phantoms" / case["image_path"])
labels = read_nifti(workspace / "phantoms" / case["label_path"])
print(f"  image  shape={image.shape} spacing={image.spacing} "
      f"datatype={image.datatype}")
print(f"  labels shape={labels.shape} datatype={labels.datatype}")
print(f"  intensity range: [{image.data.min()}, {image.data.max()}] "
      f"(synthetic HU; covers a typical abdominal display window)")

print()
print("=" * 60)
print("3. Label occupancy along z")
print("=" * 60)
for organ, label_id in manifest["labels"].items():
    gt = binarize_label(labels, label_id)
    per_slice = gt.sum(axis=(0, 1))
    fg = np.flatnonzero(per_slice)
    print(f"  {organ} (label {label_id}): {int(gt.sum())} voxels on "
          f"{len(fg)} slices (z {fg.min()}..{fg.max()})")
    for k in fg:
        bar = "#" * max(1, int(per_slice[k] / 8))
        print(f"    z={k:2d} {per_slice[k]:4d} {bar}")

print()
print("=" * 60)
print("4. Where annotation would start")
print("=" * 60)
for organ, label_id in manifest["labels"].items():
    gt = binarize_label(labels, label_id)
    k, point = foreground_seed(gt)
    print(f"  {organ}: slice {k}, pixel (row={point.row}, col={point.col})"
          f" -- the interior center of the centroid slice's largest blob")

print()
print("manifest.json is the hand-off format for `slicebench evaluate`:")
print(json.dumps({k: manifest[k] for k in ("name", "labels")}, indent=2))
