"""Figures for ``hydb inspect --plot``."""

from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

log = logging.getLogger(__name__)

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

_PART_COLORS = {"header": "#4c72b0", "lsb frame": "#c44e52", "pixels": "#8fbc8f",
                "trailer": "#dd8452"}


def savefig(fig, filename):
    log.info("saving %s", filename)
    fig.savefig(filename, bbox_inches="tight")
    plt.close(fig)


def _layout(ax, info, frame_bytes):
    spans = [("header", 0, info.pixel_offset)]
    if frame_bytes:
        spans.append(("lsb frame", info.pixel_offset, frame_bytes))
    spans.append(("pixels", info.pixel_offset + frame_bytes, info.pixel_length - frame_bytes))
    if info.trailer_length:
        spans.append(("trailer", info.image_end, info.trailer_length))
    for label, start, width in spans:
        ax.barh(0, width, left=start, color=_PART_COLORS[label], label=label)
    ax.set_yticks([])
    ax.set_xlabel("byte offset")
    ax.set_title(f"{info.format.upper()} layout, {info.file_size} bytes")
    ax.legend(loc="upper center", bbox_to_anchor=(0.5, -0.45), ncol=len(spans), frameon=False)


def _histogram(ax, info):
    deltas = sorted(info.delta_histogram)
    counts = [info.delta_histogram[d] for d in deltas]
    ax.bar([str(d) for d in deltas], counts, color="#4c72b0")
    ax.set_yscale("symlog")
    ax.set_xlabel("stego - cover")
    ax.set_ylabel("pixel bytes")
    ax.set_title(f"byte deltas ({info.changed_bytes} changed)")


def _change_map(ax, info, width=256):
    delta = info.delta_map
    rows = -(-len(delta) // width)
    grid = np.zeros(rows * width, dtype=np.int16)
    grid[:len(delta)] = delta
    ax.imshow(grid.reshape(rows, width), cmap="coolwarm", vmin=-1, vmax=1,
              aspect="auto", interpolation="nearest")
    ax.set_title(f"delta by pixel byte ({width} per row)")
    ax.set_xticks([])
    ax.set_ylabel("row")


def render_inspection(info, filename):
    """Draw the byte layout and, when a cover was given, the delta views."""
    frame_bytes = info.lsb_frame_bytes
    with plt.rc_context(STYLE):
        if info.delta_histogram is None:
            fig, ax = plt.subplots(figsize=(7, 1.8))
            _layout(ax, info, frame_bytes)
        else:
            fig = plt.figure(figsize=(8, 6))
            grid = fig.add_gridspec(2, 2, height_ratios=[1, 3])
            _layout(fig.add_subplot(grid[0, :]), info, frame_bytes)
            _histogram(fig.add_subplot(grid[1, 0]), info)
            _change_map(fig.add_subplot(grid[1, 1]), info)
            fig.tight_layout()
        savefig(fig, filename)
