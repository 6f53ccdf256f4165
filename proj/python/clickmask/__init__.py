"""Interactive click-based segmentation, polygon export and mask propagation."""

from ._core import (
    ClickmaskError,
    apply_window,
    engines,
    extract_polygons,
    first_click,
    grid_layout,
    iou,
    load_image,
    next_click,
    propagate,
    rasterize,
    read_mask,
    run_session,
    save_png,
    segment,
    write_mask,
)

__all__ = [
    "ClickmaskError",
    "apply_window",
    "engines",
    "extract_polygons",
    "first_click",
    "grid_layout",
    "iou",
    "load_image",
    "next_click",
    "propagate",
    "rasterize",
    "read_mask",
    "run_session",
    "save_png",
    "segment",
    "write_mask",
]
