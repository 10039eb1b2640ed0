"""
Dataset service
Point generation from the demo supports and point-file I/O
Single Responsibility: where the data comes from
"""

import csv
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError
from ..models.schemas import DatasetSpec
from .essence_service import BoundedSupport, point_cloud_support, ring_support, two_circles_support

logger = logging.getLogger(__name__)

SUPPORT_FACTORIES = {
    "two-circles": two_circles_support,
    "ring": ring_support,
}


def support_for(kind: str, points: Optional[np.ndarray] = None) -> BoundedSupport:
    """
    Support of a dataset kind; custom data uses its own points

    Raises:
        ConfigError: If the kind is unknown or custom points are missing
    """
    if kind in SUPPORT_FACTORIES:
        return SUPPORT_FACTORIES[kind]()
    if kind == "custom":
        if points is None:
            raise ConfigError("A custom support needs its point set")
        return point_cloud_support(points)
    raise ConfigError(f"Unknown dataset kind '{kind}', expected one of {[*SUPPORT_FACTORIES, 'custom']}")


def gen_data(kind: str, n: int, seed: int) -> np.ndarray:
    """
    Draw n points uniformly from a demo support

    Args:
        kind: 'two-circles' or 'ring'
        n: Number of points (>= 1)
        seed: Sampling seed

    Returns:
        (n, 2) array of points

    Raises:
        ConfigError: If the kind has no generator
    """
    if kind not in SUPPORT_FACTORIES:
        raise ConfigError(f"Cannot generate data for '{kind}', expected one of {list(SUPPORT_FACTORIES)}")
    if n < 1:
        raise ValueError(f"Need at least one point, got n={n}")
    points = SUPPORT_FACTORIES[kind]().sample(n, seed)
    logger.info("generated %d %s points (seed=%d)", n, kind, seed)
    return points


def save_points(path: Union[str, Path], points: np.ndarray) -> Path:
    """Write points as CSV with an x1,...,xD header and round-trip float text"""
    path = Path(path)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{d + 1}" for d in range(points.shape[1])])
        writer.writerows([[repr(float(v)) for v in row] for row in points])
    return path


def load_points(path: Union[str, Path]) -> np.ndarray:
    """
    Read a point CSV written by save_points or by hand

    Raises:
        ConfigError: If the file is missing, malformed or empty
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Point file not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ConfigError(f"Point file is empty: {path}")
    header, body = rows[0], [row for row in rows[1:] if row]
    if header != [f"x{d + 1}" for d in range(len(header))]:
        raise ConfigError(f"Point file header must be x1,...,xD, got {header}")
    if not body:
        raise ConfigError(f"Point file has no points: {path}")
    try:
        points = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as e:
        raise ConfigError(f"Malformed point file {path}: {e}") from e
    if points.ndim != 2 or points.shape[1] != len(header):
        raise ConfigError(f"Every row of {path} must have {len(header)} values")
    if not np.all(np.isfinite(points)):
        raise ConfigError(f"Point file {path} contains non-finite values")
    return points


def load_dataset(spec: DatasetSpec, seed: int) -> np.ndarray:
    """Training points for a dataset spec"""
    if spec.kind == "custom":
        return load_points(spec.path)
    return gen_data(spec.kind, spec.n, seed)


def split_holdout(points: np.ndarray, holdout_n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded split of a fixed point set into training and holdout rows

    At most a fifth of the points are held out; a single point serves as both.
    """
    if len(points) < 2:
        return points, points
    size = max(1, min(holdout_n, len(points) // 5))
    order = np.random.default_rng(seed).permutation(len(points))
    return points[np.sort(order[size:])], points[np.sort(order[:size])]


def load_dataset_with_holdout(spec: DatasetSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Training and holdout points for a dataset spec

    Generated kinds draw a fresh holdout with seed + 1; custom files are split.
    """
    if spec.kind == "custom":
        return split_holdout(load_points(spec.path), spec.holdout_n, seed)
    return gen_data(spec.kind, spec.n, seed), gen_data(spec.kind, spec.holdout_n, seed + 1)
