"""Distances, bisquare basis functions and multi-resolution basis systems."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from st_glmm_tools.const import (
    ADJACENCY_NEIGHBORS,
    APERTURE_FACTOR,
    CENTERS_COLUMNS,
    EARTH_RADIUS_KM,
    Metric,
)
from st_glmm_tools.errors import NumericalError, SchemaError, UsageError
from st_glmm_tools.models import Location


def as_coords(locations: Sequence[Location] | np.ndarray) -> np.ndarray:
    """Return an (n, 2) coordinate array."""

    if isinstance(locations, np.ndarray):
        return np.atleast_2d(np.asarray(locations, dtype=float))

    return np.array([[loc.coord1, loc.coord2] for loc in locations], dtype=float)


def pairwise_distance(
    a: np.ndarray, b: np.ndarray, metric: Metric = Metric.PLANAR
) -> np.ndarray:
    """Return the (len(a), len(b)) matrix of distances.

    Planar coordinates are in domain units. Great-circle coordinates are
    (longitude, latitude) in degrees and the result is in km.
    """

    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))

    if metric == Metric.PLANAR:
        return cdist(a, b)

    lon_a, lat_a = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
    lon_b, lat_b = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]

    half_chord = (
        np.sin((lat_b - lat_a) / 2.0) ** 2
        + np.cos(lat_a) * np.cos(lat_b) * np.sin((lon_b - lon_a) / 2.0) ** 2
    )
    half_chord = np.clip(half_chord, 0.0, 1.0)

    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(half_chord))


def distance(a: Location, b: Location) -> float:
    """Return the distance between two locations of the same metric."""

    if a.metric != b.metric:
        raise UsageError(f"Mismatched metrics: {a.metric.value} and {b.metric.value}")

    return float(
        pairwise_distance(
            np.array([[a.coord1, a.coord2]]), np.array([[b.coord1, b.coord2]]), a.metric
        )[0, 0]
    )


def bisquare_from_distance(d: np.ndarray | float, aperture: float) -> np.ndarray:
    """Evaluate (1 - (d/aperture)^2)^2 inside the support, 0 outside."""

    if aperture <= 0:
        raise UsageError(f"Aperture must be positive: {aperture}")

    d = np.asarray(d, dtype=float)
    ratio = d / aperture

    return np.where(d < aperture, (1.0 - ratio**2) ** 2, 0.0)


def bisquare(s: Location, c: Location, aperture: float) -> float:
    """Evaluate the bisquare basis function centered at c at location s."""

    return float(bisquare_from_distance(distance(s, c), aperture))


@dataclass(frozen=True)
class BasisResolution:
    """Centers and common aperture of one resolution."""

    centers: np.ndarray
    aperture: float
    metric: Metric = Metric.PLANAR

    def __post_init__(self):
        if self.centers.ndim != 2 or self.centers.shape[0] == 0:
            raise UsageError("A resolution needs at least one center")
        if not self.aperture > 0:
            raise UsageError(f"Aperture must be positive: {self.aperture}")

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def with_default_aperture(
        cls, centers: np.ndarray, metric: Metric = Metric.PLANAR
    ) -> "BasisResolution":
        """Use 1.5 times the minimum inter-center distance as aperture."""

        if centers.shape[0] < 2:
            raise UsageError("A single center needs an explicit aperture")

        d = pairwise_distance(centers, centers, metric)
        np.fill_diagonal(d, np.inf)

        return cls(centers, APERTURE_FACTOR * float(d.min()), metric)

    def evaluate(self, coords: np.ndarray) -> np.ndarray:
        """Return the (n, size) matrix of raw basis values."""

        d = pairwise_distance(coords, self.centers, self.metric)
        return bisquare_from_distance(d, self.aperture)


@dataclass(frozen=True)
class BasisSystem:
    """Ordered resolutions (coarse first) with standardization statistics."""

    resolutions: tuple[BasisResolution, ...]
    adjacency: np.ndarray
    col_means: np.ndarray | None = None
    col_sds: np.ndarray | None = None

    def __post_init__(self):
        if len(self.resolutions) not in (1, 2):
            raise UsageError("Basis systems have one or two resolutions")
        if len({res.metric for res in self.resolutions}) != 1:
            raise UsageError("All resolutions must share one metric")
        if self.adjacency.shape != (self.r2, self.r1):
            raise UsageError(
                f"Adjacency must be {self.r2}x{self.r1}, got {self.adjacency.shape}"
            )
        if self.col_sds is not None and not (self.col_sds > 0).all():
            raise NumericalError("Standardization sds must be positive")

    @property
    def metric(self) -> Metric:
        return self.resolutions[0].metric

    @property
    def r1(self) -> int:
        return self.resolutions[0].size

    @property
    def r2(self) -> int:
        return self.resolutions[1].size if len(self.resolutions) > 1 else 0

    @property
    def r(self) -> int:
        return self.r1 + self.r2

    @property
    def is_standardized(self) -> bool:
        return self.col_means is not None

    @classmethod
    def build(
        cls,
        resolutions: Sequence[BasisResolution],
        neighbors: int = ADJACENCY_NEIGHBORS,
    ) -> "BasisSystem":
        """Assemble a system and its nearest-neighbor adjacency."""

        resolutions = tuple(resolutions)
        if len(resolutions) == 2:
            k = min(neighbors, resolutions[1].size)
            adjacency = build_adjacency(resolutions[0], resolutions[1], k)
        else:
            adjacency = np.zeros((0, resolutions[0].size))

        return cls(resolutions, adjacency)

    def raw_matrix(self, coords: np.ndarray) -> np.ndarray:
        return np.hstack([res.evaluate(coords) for res in self.resolutions])

    def standardize_on(self, reference: Sequence[Location] | np.ndarray) -> "BasisSystem":
        """Freeze column means and sample sds over a reference location set."""

        coords = as_coords(reference)
        if coords.shape[0] < 2:
            raise UsageError("Standardization needs at least two locations")

        raw = self.raw_matrix(coords)
        means = raw.mean(axis=0)
        sds = raw.std(axis=0, ddof=1)

        zero = np.flatnonzero(~(sds > 0))
        if zero.size:
            raise NumericalError(
                f"Basis function {int(zero[0])} has zero sample sd on the "
                + "reference set",
                index=int(zero[0]),
            )

        logging.debug(f"Standardized {self.r} basis functions on {len(coords)} sites.")

        return replace(self, col_means=means, col_sds=sds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "resolutions": [
                {"aperture": res.aperture, "centers": res.centers.tolist()}
                for res in self.resolutions
            ],
            "adjacency": self.adjacency.astype(int).tolist(),
            "col_means": None if self.col_means is None else self.col_means.tolist(),
            "col_sds": None if self.col_sds is None else self.col_sds.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BasisSystem":
        metric = Metric(data["metric"])
        resolutions = tuple(
            BasisResolution(np.array(res["centers"], dtype=float), res["aperture"], metric)
            for res in data["resolutions"]
        )
        adjacency = np.array(data["adjacency"], dtype=float).reshape(
            resolutions[1].size if len(resolutions) > 1 else 0, resolutions[0].size
        )

        return cls(
            resolutions,
            adjacency,
            None if data["col_means"] is None else np.array(data["col_means"]),
            None if data["col_sds"] is None else np.array(data["col_sds"]),
        )


def build_basis_matrix(
    locations: Sequence[Location] | np.ndarray,
    system: BasisSystem,
    standardize: bool = True,
) -> np.ndarray:
    """Return the N x r basis matrix at the given locations.

    With standardize set, the system's frozen statistics are applied; a
    system without statistics is standardized on these locations.
    """

    coords = as_coords(locations)
    raw = system.raw_matrix(coords)

    if not standardize:
        return raw

    if not system.is_standardized:
        system = system.standardize_on(coords)

    assert system.col_means is not None and system.col_sds is not None
    return (raw - system.col_means) / system.col_sds


def planar_grid_centers(
    counts: Sequence[tuple[int, int]],
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0),
    boundary_extension: bool = False,
) -> list[BasisResolution]:
    """Return regular grids of centers, one per resolution.

    The domain is (xmin, xmax, ymin, ymax). With boundary_extension, every
    resolution after the first places (n - 2) cell-centered points per axis
    inside the domain plus one exterior ring one spacing beyond the edges,
    so the count per axis stays n.
    """

    xmin, xmax, ymin, ymax = domain
    if not (xmax > xmin and ymax > ymin):
        raise UsageError(f"Degenerate domain: {domain}")

    resolutions: list[BasisResolution] = []

    for level, (nx, ny) in enumerate(counts):
        if nx < 1 or ny < 1:
            raise UsageError(f"Center counts must be positive: {(nx, ny)}")

        extend = boundary_extension and level > 0
        if extend and (nx < 3 or ny < 3):
            raise UsageError("Boundary extension needs at least 3 centers per axis")

        axes = []
        spacings = []
        for n, lo, hi in ((nx, xmin, xmax), (ny, ymin, ymax)):
            interior = n - 2 if extend else n
            spacing = (hi - lo) / interior
            offset = -0.5 if extend else 0.5
            axes.append(lo + (np.arange(n) + offset) * spacing)
            spacings.append(spacing)

        xs, ys = np.meshgrid(axes[0], axes[1], indexing="xy")
        centers = np.column_stack([xs.ravel(), ys.ravel()])
        aperture = APERTURE_FACTOR * min(spacings)

        resolutions.append(BasisResolution(centers, aperture, Metric.PLANAR))

    return resolutions


def build_adjacency(
    coarse: BasisResolution, fine: BasisResolution, k: int = ADJACENCY_NEIGHBORS
) -> np.ndarray:
    """Mark the k nearest fine centers of each coarse center.

    Ties are broken by the lower fine-center index.
    """

    if not 1 <= k <= fine.size:
        raise UsageError(f"Neighbor count must be in [1, {fine.size}]: {k}")

    d = pairwise_distance(fine.centers, coarse.centers, coarse.metric)
    adjacency = np.zeros((fine.size, coarse.size))

    for j in range(coarse.size):
        nearest = np.argsort(d[:, j], kind="stable")[:k]
        adjacency[nearest, j] = 1.0

    return adjacency


def load_centers(
    path: Path,
    metric: Metric = Metric.PLANAR,
    apertures: Sequence[float] | None = None,
    neighbors: int = ADJACENCY_NEIGHBORS,
) -> BasisSystem:
    """Read a `res,coord1,coord2` centers file into a basis system."""

    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")

    frame = pd.read_csv(path)
    if list(frame.columns) != CENTERS_COLUMNS:
        raise SchemaError(f"Centers file header must be {','.join(CENTERS_COLUMNS)}")

    levels = sorted(frame["res"].unique())
    if apertures is not None and len(apertures) != len(levels):
        raise UsageError(f"Expected {len(levels)} apertures, got {len(apertures)}")

    resolutions: list[BasisResolution] = []
    for i, level in enumerate(levels):
        centers = frame.loc[frame["res"] == level, ["coord1", "coord2"]].to_numpy(
            dtype=float
        )
        if apertures is None:
            resolutions.append(BasisResolution.with_default_aperture(centers, metric))
        else:
            resolutions.append(BasisResolution(centers, float(apertures[i]), metric))

    logging.info(
        f"Loaded {len(frame)} centers in {len(levels)} resolutions from {path}."
    )

    return BasisSystem.build(resolutions, neighbors)


def save_centers(system: BasisSystem, path: Path) -> Path:
    """Write the centers of a basis system as `res,coord1,coord2`."""

    frames = [
        pd.DataFrame(
            {"res": level + 1, "coord1": res.centers[:, 0], "coord2": res.centers[:, 1]}
        )
        for level, res in enumerate(system.resolutions)
    ]

    if not path.parent.exists():
        path.parent.mkdir(parents=True)

    pd.concat(frames).to_csv(path, index=False)

    return path
