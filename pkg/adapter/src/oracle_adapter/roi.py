"""Gaze-driven region-of-interest cropping."""

from __future__ import annotations

from PIL import Image

from .gaze import GazeRecord


def crop_roi(frame: Image.Image, gaze: GazeRecord | None, roi_fraction: float) -> Image.Image:
    """Axis-aligned crop of side ``roi_fraction * min(H, W)`` centered on the
    gaze point and intersected with the frame bounds.

    A missing or invalid gaze record yields the full frame.
    """
    if not 0.0 < roi_fraction <= 1.0:
        raise ValueError("roi_fraction must be in (0, 1]")
    if gaze is None or not gaze.valid:
        return frame
    width, height = frame.size
    side = roi_fraction * min(width, height)
    cx, cy = gaze.x * width, gaze.y * height
    left = max(0, int(round(cx - side / 2)))
    top = max(0, int(round(cy - side / 2)))
    right = min(width, int(round(cx + side / 2)))
    bottom = min(height, int(round(cy + side / 2)))
    if right <= left or bottom <= top:
        return frame
    return frame.crop((left, top, right, bottom))
