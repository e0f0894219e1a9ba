"""Python access to the tep segmentation pipeline core."""

from ._tep import (
    PROTOCOL_VERSION,
    BBox,
    Mask,
    TepError,
    bbox_iou,
    boundary_f,
    classify_phases,
    cli,
    evaluate,
    fuse_tiny,
    mask_iou,
    simulate,
    suite_names,
    wire_methods,
)

__all__ = [
    "PROTOCOL_VERSION",
    "BBox",
    "Mask",
    "TepError",
    "bbox_iou",
    "boundary_f",
    "classify_phases",
    "cli",
    "evaluate",
    "fuse_tiny",
    "mask_iou",
    "simulate",
    "suite_names",
    "wire_methods",
]
