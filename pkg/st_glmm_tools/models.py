"""Models for the st_glmm_tools package."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from st_glmm_tools.const import (
    DATASET_CSV,
    DEFAULT_OUTPUT_PATH,
    Metric,
)
from st_glmm_tools.errors import DomainError, SchemaError, UsageError


@dataclass
class CommonOptions:
    """Common options."""

    output_path: Path = DEFAULT_OUTPUT_PATH
    verbose: bool = False
    threads: int = 1

    @property
    def simulation_path(self) -> Path:
        """Return the default directory for simulated data."""
        return self.output_path / "simulation"

    @property
    def simulated_dataset_path(self) -> Path:
        """Return the default simulated dataset file."""
        return self.simulation_path / DATASET_CSV

    @property
    def chain_path(self) -> Path:
        """Return the default chain archive directory."""
        return self.output_path / "chain"

    @property
    def predictions_path(self) -> Path:
        """Return the default predictions directory."""
        return self.output_path / "predictions"

    @property
    def summaries_path(self) -> Path:
        """Return the default summaries directory."""
        return self.output_path / "summaries"

    @property
    def validation_path(self) -> Path:
        """Return the default validation directory."""
        return self.output_path / "validation"


@dataclass(frozen=True)
class Location:
    """A point in a planar domain or on the sphere (longitude, latitude)."""

    coord1: float
    coord2: float
    metric: Metric = Metric.PLANAR

    def __post_init__(self):
        if not (np.isfinite(self.coord1) and np.isfinite(self.coord2)):
            raise DomainError(f"Non-finite coordinates: {self}")
        if self.metric == Metric.GREAT_CIRCLE and not -90.0 <= self.coord2 <= 90.0:
            raise DomainError(f"Latitude out of range: {self.coord2}")


@dataclass(frozen=True)
class StDataset:
    """Binary observations per time point with locations and covariates."""

    coords: list[np.ndarray]
    z: list[np.ndarray]
    X: list[np.ndarray]
    metric: Metric = Metric.PLANAR

    def __post_init__(self):
        if not (len(self.coords) == len(self.z) == len(self.X)):
            raise SchemaError("Per-time lists must have equal length")
        if len(self.coords) == 0:
            raise SchemaError("Dataset has no time points")

        widths = {X_t.shape[1] for X_t in self.X}
        if len(widths) != 1:
            raise SchemaError(f"Inconsistent covariate width across t: {widths}")

        for t, (coords_t, z_t, X_t) in enumerate(zip(self.coords, self.z, self.X)):
            if coords_t.ndim != 2 or coords_t.shape[1] != 2:
                raise SchemaError(f"Coordinates at t={t + 1} must be N_t x 2")
            if X_t.shape[0] != coords_t.shape[0] or z_t.shape[0] != coords_t.shape[0]:
                raise SchemaError(f"Row counts differ at t={t + 1}")
            if not np.isin(z_t, (0, 1)).all():
                raise SchemaError(f"Observations at t={t + 1} must be 0 or 1")

    @property
    def T(self) -> int:
        return len(self.coords)

    @property
    def p(self) -> int:
        return self.X[0].shape[1]

    @property
    def sizes(self) -> list[int]:
        return [coords_t.shape[0] for coords_t in self.coords]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Return the start index of each time point in the stacked layout."""
        return np.concatenate(([0], np.cumsum(self.sizes)))

    def locations(self, t: int) -> list[Location]:
        """Return the locations at time t (1-based)."""

        return [
            Location(float(c1), float(c2), self.metric)
            for c1, c2 in self.coords[t - 1]
        ]

    def subset(self, indices: list[np.ndarray]) -> "StDataset":
        """Return the dataset restricted to the given row indices per time."""

        if len(indices) != self.T:
            raise UsageError("One index array per time point is required")

        return StDataset(
            coords=[c[idx] for c, idx in zip(self.coords, indices)],
            z=[z[idx] for z, idx in zip(self.z, indices)],
            X=[X[idx] for X, idx in zip(self.X, indices)],
            metric=self.metric,
        )

    def head(self, T: int) -> "StDataset":
        """Return the first T time points."""

        return StDataset(self.coords[:T], self.z[:T], self.X[:T], self.metric)


@dataclass(frozen=True)
class Propagator:
    """Structured VAR(1) propagator."""

    lambda1: float
    lambda2: float
    lambda3: float
    adjacency: np.ndarray
    H: np.ndarray

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3])


@dataclass
class ModelParams:
    """Model parameters beta, K, H, U and the fine-scale variance."""

    beta: np.ndarray
    K: np.ndarray
    H: Propagator
    U: np.ndarray
    sigma2_xi: float

    def __post_init__(self):
        if self.sigma2_xi < 0:
            raise DomainError(f"sigma2_xi must be non-negative: {self.sigma2_xi}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta.tolist(),
            "lambda": self.H.lambdas.tolist(),
            "K": self.K.tolist(),
            "U": self.U.tolist(),
            "sigma2_xi": self.sigma2_xi,
        }


@dataclass
class LatentState:
    """Basis coefficients per time and fine-scale effects at observed sites."""

    eta: np.ndarray
    xi: list[np.ndarray]

    @property
    def T(self) -> int:
        return self.eta.shape[0]

    def copy(self) -> "LatentState":
        return LatentState(self.eta.copy(), [xi_t.copy() for xi_t in self.xi])


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws plus sampler bookkeeping."""

    beta: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    K: np.ndarray
    U: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    iterations: np.ndarray
    offsets: np.ndarray
    adjacency: np.ndarray
    sigma2_xi: float
    acceptance: dict[str, tuple[int, int]] = field(default_factory=dict)
    accept_flags: dict[str, np.ndarray] = field(default_factory=dict)
    manifest: dict[str, Any] = field(default_factory=dict)

    @property
    def draws(self) -> int:
        return self.beta.shape[0]

    @property
    def T(self) -> int:
        return self.eta.shape[1]

    @property
    def r(self) -> int:
        return self.eta.shape[2]

    def xi_at(self, t: int) -> np.ndarray:
        """Return the xi draws at time t (1-based), shape (draws, N_t)."""

        return self.xi[:, self.offsets[t - 1] : self.offsets[t]]

    def acceptance_rates(self) -> dict[str, float]:
        return {
            name: accepted / proposed if proposed else float("nan")
            for name, (accepted, proposed) in self.acceptance.items()
        }

    @staticmethod
    def concatenate(samples: list["PosteriorSamples"]) -> "PosteriorSamples":
        """Pool draws from independent chains of the same model."""

        first = samples[0]
        acceptance: dict[str, tuple[int, int]] = {}
        for sample in samples:
            for name, (accepted, proposed) in sample.acceptance.items():
                prev = acceptance.get(name, (0, 0))
                acceptance[name] = (prev[0] + accepted, prev[1] + proposed)

        return PosteriorSamples(
            beta=np.concatenate([s.beta for s in samples]),
            lam=np.concatenate([s.lam for s in samples]),
            tau=np.concatenate([s.tau for s in samples]),
            K=np.concatenate([s.K for s in samples]),
            U=np.concatenate([s.U for s in samples]),
            eta=np.concatenate([s.eta for s in samples]),
            xi=np.concatenate([s.xi for s in samples]),
            iterations=np.concatenate([s.iterations for s in samples]),
            offsets=first.offsets,
            adjacency=first.adjacency,
            sigma2_xi=first.sigma2_xi,
            acceptance=acceptance,
            accept_flags={
                name: np.concatenate([s.accept_flags[name] for s in samples])
                for name in first.accept_flags
            },
            manifest=first.manifest,
        )
