"""Entropy maps, binary morphology, and contour-normalized uncertainty scores.

The per-class score pipeline: take the class's probability plane from the
averaged posterior, threshold it at 0.5 into a binary mask, dilate, keep
only the ring of pixels the dilation added (the segmentation contour), and
divide total entropy by the ring's pixel count. Normalizing by contour
length makes scores comparable across segmentations of different sizes.

Entropy is base-2 (bits) throughout. Masks over 3D volumes are dilated
slice by slice with a 2D element by default; pass a 3D element for
volumetric dilation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import validate_binary, validate_probabilities
from .ensemble import class_foreground
from .errors import ValidationError

FOREGROUND_THRESHOLD = 0.5


@dataclass(frozen=True)
class StructuringElement:
    """Neighborhood mask for dilation; odd-sided, center cell set."""

    mask: np.ndarray

    def __post_init__(self):
        mask = validate_binary(self.mask)
        object.__setattr__(self, "mask", mask)
        if any(side % 2 == 0 for side in mask.shape):
            raise ValidationError(f"element sides must be odd, got {mask.shape}")
        center = tuple(side // 2 for side in mask.shape)
        if mask[center] != 1:
            raise ValidationError("element center cell must be set")

    @classmethod
    def full(cls, ndim: int = 2, radius: int = 1):
        """Fully-set square (2D) or cube (3D) of side 2*radius + 1."""
        if ndim not in (2, 3):
            raise ValidationError(f"element must be 2D or 3D, got ndim={ndim}")
        if radius < 0:
            raise ValidationError(f"radius must be >= 0, got {radius}")
        side = 2 * radius + 1
        return cls(np.ones((side,) * ndim, dtype=np.uint8))

    @classmethod
    def of(cls, value, default_ndim: int = 2):
        if value is None:
            return cls.full(default_ndim)
        if isinstance(value, cls):
            return value
        return cls(np.asarray(value))


@dataclass(frozen=True)
class UncertaintyScore:
    """Per-class result: total entropy, ring size, and their ratio."""

    class_id: int
    h_total: float
    contour_pixels: int
    score: float
    empty_contour: bool


def pixel_entropy(p) -> np.ndarray:
    """Per-pixel Shannon entropy -sum_k p_k log2 p_k, with 0*log2(0) = 0."""
    arr = validate_probabilities(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(arr > 0.0, -arr * np.log2(arr), 0.0)
    return terms.sum(axis=0)


def threshold_binary(field, tau: float = FOREGROUND_THRESHOLD) -> np.ndarray:
    """1 where field > tau, else 0 (strict: a pixel exactly at tau is background)."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"threshold must be in [0, 1], got {tau}")
    f = np.asarray(field, dtype=np.float64)
    if f.size == 0:
        raise ValidationError("empty field")
    if f.min() < 0.0 or f.max() > 1.0:
        raise ValidationError(
            f"field values outside [0, 1]: min {f.min()}, max {f.max()}"
        )
    return (f > tau).astype(np.uint8)


def dilate(image, element=None) -> np.ndarray:
    """Binary dilation; outside the image counts as background.

    A 3D image with a 2D element is dilated independently per axial slice.
    """
    img = validate_binary(image)
    elem = StructuringElement.of(element, default_ndim=min(img.ndim, 2))
    if img.ndim == 3 and elem.mask.ndim == 2:
        return np.stack([_dilate_nd(sl, elem.mask) for sl in img], axis=0)
    if img.ndim != elem.mask.ndim:
        raise ValidationError(
            f"{elem.mask.ndim}D element incompatible with {img.ndim}D image"
        )
    return _dilate_nd(img, elem.mask)


def _dilate_nd(img, mask):
    # out[x] = 1 iff img[x - a] = 1 for some set offset a of the element
    radii = tuple(side // 2 for side in mask.shape)
    padded = np.pad(img, [(r, r) for r in radii])
    out = np.zeros_like(img)
    offsets = np.argwhere(mask == 1) - np.array(radii)
    for a in offsets:
        window = tuple(
            slice(r - int(ak), r - int(ak) + n)
            for r, ak, n in zip(radii, a, img.shape)
        )
        np.logical_or(out, padded[window], out=out)
    return out.astype(np.uint8)


def contour_normalizer(image, element=None) -> np.ndarray:
    """Ring of pixels added by dilation: dilate(I) minus I as a set difference."""
    img = validate_binary(image)
    grown = dilate(img, element)
    return (grown & ~img.astype(bool)).astype(np.uint8)


def total_entropy(entropy_map, region=None) -> float:
    """Sum of entropy values over the whole map, or over a binary region."""
    h = np.asarray(entropy_map, dtype=np.float64)
    if region is None:
        return float(h.sum())
    mask = validate_binary(region)
    if mask.shape != h.shape:
        raise ValidationError(
            f"region shape {mask.shape} does not match map shape {h.shape}"
        )
    return float(h[mask == 1].sum())


def uncertainty_score(
    p,
    class_id: int,
    element=None,
    *,
    restrict_to_contour: bool = False,
    allow_background: bool = False,
) -> UncertaintyScore:
    """Contour-normalized uncertainty score for one class.

    ``restrict_to_contour`` limits the entropy sum to the contour ring
    instead of the whole image. An empty contour is reported via the
    ``empty_contour`` flag with score 0, not an error.
    """
    arr = validate_probabilities(p)
    if class_id == 0 and not allow_background:
        raise ValidationError(
            "background (class 0) is scored only with allow_background=True"
        )
    plane = class_foreground(arr, class_id)
    mask = threshold_binary(plane, FOREGROUND_THRESHOLD)
    ring = contour_normalizer(mask, element)
    contour_pixels = int(ring.sum())
    entropy = pixel_entropy(arr)
    h_total = total_entropy(entropy, ring if restrict_to_contour else None)
    if contour_pixels == 0:
        return UncertaintyScore(class_id, h_total, 0, 0.0, True)
    return UncertaintyScore(
        class_id, h_total, contour_pixels, h_total / contour_pixels, False
    )
