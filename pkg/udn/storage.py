import logging
import os
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

CSV_OPTIONS = {
    "index": False,
    "sep": ",",
    "decimal": ".",
    "lineterminator": "\n",
    "float_format": "%.10g",
}


def frame_to_csv(frame: pd.DataFrame) -> str:
    """Renders a frame with the package's CSV conventions."""
    return frame.to_csv(**CSV_OPTIONS)


def save_frame(frame: pd.DataFrame, path: str | Path) -> Path:
    """
    Saves a frame as CSV, atomically.

    The table is written to a temporary sibling first and renamed into place,
    so a failed run never leaves a truncated file behind.

    Args:
        frame (pd.DataFrame): The table to write.
        path (str | Path): The destination.

    Returns:
        Path: The destination path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.partial")
    try:
        tmp.write_text(frame_to_csv(frame), encoding="utf-8", newline="")
        os.replace(tmp, path)
    finally:
        remove_partial(tmp)
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def remove_partial(path: str | Path) -> None:
    """Deletes a leftover output file, if any."""
    Path(path).unlink(missing_ok=True)
