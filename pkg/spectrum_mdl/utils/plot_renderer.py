"""
Plot rendering utilities
SVG scatter of data with decoded representation-set codes colored by pattern
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from ..models.domain import RepresentationSet  # noqa: E402
from ..models.network import SpectrumCodec  # noqa: E402
from ..models.reports import DescriptionLengthReport  # noqa: E402
from ..services.spectrum_service import patterns_of_batch  # noqa: E402

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "spectrum-mdl"
MAX_CODES_PER_PATTERN = 20_000


def _plane(points: np.ndarray) -> np.ndarray:
    """First two coordinates; 1-D data is drawn on the x axis"""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] == 1:
        return np.column_stack([points[:, 0], np.zeros(len(points))])
    return points[:, :2]


def render_codes_svg(
    path: Union[str, Path],
    model: SpectrumCodec,
    points: np.ndarray,
    dl: DescriptionLengthReport,
    cover_points: Optional[np.ndarray] = None,
    title: Optional[str] = None
) -> Path:
    """
    Draw data colored by spiking pattern and the decoded codes of each grid as squares

    Only the first two data dimensions are drawn. Output is byte-stable for equal inputs.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = np.atleast_2d(points)

    labels = [entry.pattern.label for entry in dl.entries]
    colors = {label: plt.get_cmap("tab20")(index % 20) for index, label in enumerate(labels)}
    data_patterns = [pattern.label for pattern in patterns_of_batch(model.encode_batch(points))]
    xy = _plane(points)

    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        for label in labels:
            rows = [i for i, p in enumerate(data_patterns) if p == label]
            if rows:
                ax.scatter(xy[rows, 0], xy[rows, 1], s=4, color=colors[label], alpha=0.35, linewidths=0)

        for entry in dl.entries:
            if entry.grid is None:
                continue
            rep = RepresentationSet(entry.grid)
            if rep.size > MAX_CODES_PER_PATTERN:
                logger.warning("pattern %s has %d codes; not drawn", entry.pattern, rep.size)
                continue
            decoded = _plane(model.decode_batch(rep.code_matrix()))
            ax.scatter(decoded[:, 0], decoded[:, 1], s=14, marker="s", color=colors[entry.pattern.label],
                       edgecolors="black", linewidths=0.3, label=entry.pattern.label)

        if cover_points is not None and len(cover_points):
            cover = _plane(cover_points)
            ax.scatter(cover[:, 0], cover[:, 1], s=8, marker="x", color="black", linewidths=0.5, label="cover")

        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        if title:
            ax.set_title(title)
        if labels:
            ax.legend(loc="upper right", fontsize=6, markerscale=0.8, frameon=False)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.debug("rendered %s", path)
    return path

