"""Checkpoint-ensemble uncertainty quantification for image segmentation.

Library layout:

* ``arrays`` / ``arrayio`` -- array types, validators, normalization,
  slicing, and the binary array file format
* ``scheduler``            -- warm-restart cosine learning-rate schedule
* ``selection``            -- per-cycle checkpoint selection from a trace
* ``ensemble``             -- posterior averaging and argmax labels
* ``uncertainty``          -- entropy maps, dilation, contour scores
* ``metrics``              -- Dice, calibration (ECE), rank correlation
* ``toy``                  -- synthetic data and a small trainable model
* ``pipeline`` / ``cli``   -- end-to-end driver and command line
"""

__version__ = "0.1.0"

from .arrays import (
    SliceShape,
    VolumeShape,
    slice_axial,
    stack_slices,
    validate_probabilities,
    zscore_normalize,
)
from .arrayio import read_array, write_array
from .ensemble import argmax_labels, class_foreground, ensemble_mean
from .metrics import average_entropy, dice, ece, uncertainty_dice_table
from .scheduler import SgdrConfig, cycle_of, lr_at, restart_epochs
from .selection import SelectionPolicy, TrainingTrace, find_cycle_peaks
from .uncertainty import (
    StructuringElement,
    contour_normalizer,
    dilate,
    pixel_entropy,
    threshold_binary,
    total_entropy,
    uncertainty_score,
)

__all__ = [
    "SgdrConfig",
    "SelectionPolicy",
    "SliceShape",
    "StructuringElement",
    "TrainingTrace",
    "VolumeShape",
    "argmax_labels",
    "average_entropy",
    "class_foreground",
    "contour_normalizer",
    "cycle_of",
    "dice",
    "dilate",
    "ece",
    "ensemble_mean",
    "find_cycle_peaks",
    "lr_at",
    "pixel_entropy",
    "read_array",
    "restart_epochs",
    "slice_axial",
    "stack_slices",
    "threshold_binary",
    "total_entropy",
    "uncertainty_dice_table",
    "uncertainty_score",
    "validate_probabilities",
    "write_array",
    "zscore_normalize",
]
