"""Benchmark harness for interactive slice-propagation segmentation.

Simulates a human annotator clicking on CT slices, lets a pluggable
backend propagate each annotated slice through the volume, and scores
the result under two volumetric Dice conventions.
"""

__version__ = "0.1.0"

from .backend_api import open_session, rle_decode, rle_encode
from .click_protocol import (ClickPoint, ProtocolConfig, SimulationResult,
                             run_simulation)
from .mask_ops import PixelPoint
from .metrics import (CurvePoint, DicePair, SliceScore, aggregate_curve,
                      dice2d, dice3d)
from .volume_io import Volume, binarize_label, read_nifti, slice_of, write_nifti

__all__ = [
    "__version__",
    "Volume", "read_nifti", "write_nifti", "binarize_label", "slice_of",
    "PixelPoint", "ClickPoint", "ProtocolConfig", "SimulationResult",
    "run_simulation", "open_session", "rle_encode", "rle_decode",
    "DicePair", "SliceScore", "CurvePoint",
    "dice2d", "dice3d", "aggregate_curve",
]
