"""Run configuration loaded from JSON and validated before any compute."""

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Type, TypeVar

import numpy as np

from st_glmm_tools.const import (
    ACCEPTANCE_BAND,
    ADJACENCY_NEIGHBORS,
    BAND_HALF_WIDTH,
    COVARIANCE_ADAPTATION_START,
    DEFAULT_BURN_IN,
    DEFAULT_ITERATIONS,
    DEFAULT_LOG_EVERY,
    DEFAULT_THIN,
    HOVMOLLER_HALF_BANDWIDTH_KM,
    HOVMOLLER_LEVELS,
    ICE_CUTOFF,
    NORTH_POLE,
    PIXEL_AREA_KM2,
    TRANSITION_THRESHOLD,
    Metric,
)
from st_glmm_tools.errors import DomainError, SchemaError, UsageError
from st_glmm_tools.geometry.basis import (
    BasisResolution,
    BasisSystem,
    load_centers,
    planar_grid_centers,
)
from st_glmm_tools.helpers import to_jsonable

C = TypeVar("C")


def _require_file(path: Path | None) -> Path | None:
    if path is None:
        return None

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"File not found: {path}")

    return path


@dataclass
class BasisConfig:
    """Regular planar grids by count, or centers read from a file."""

    counts: list[tuple[int, int]] = field(default_factory=lambda: [(2, 2), (6, 6)])
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    boundary_extension: bool = True
    centers_path: Path | None = None
    metric: Metric = Metric.PLANAR
    apertures: list[float] | None = None
    neighbors: int = ADJACENCY_NEIGHBORS

    def __post_init__(self):
        self.counts = [(int(nx), int(ny)) for nx, ny in self.counts]
        self.domain = tuple(float(v) for v in self.domain)  # type: ignore[assignment]
        self.metric = Metric(self.metric)
        self.centers_path = _require_file(self.centers_path)

        if self.neighbors < 1:
            raise UsageError(f"neighbors must be at least 1: {self.neighbors}")
        if self.apertures is not None and min(self.apertures) <= 0:
            raise UsageError(f"Apertures must be positive: {self.apertures}")
        if self.centers_path is None and self.metric != Metric.PLANAR:
            raise UsageError("Spherical basis systems need a centers file")

    def build(self) -> BasisSystem:
        if self.centers_path is not None:
            return load_centers(
                self.centers_path, self.metric, self.apertures, self.neighbors
            )

        resolutions = planar_grid_centers(
            self.counts, self.domain, self.boundary_extension
        )
        if self.apertures is not None:
            if len(self.apertures) != len(resolutions):
                raise UsageError(
                    f"Expected {len(resolutions)} apertures, got {len(self.apertures)}"
                )
            resolutions = [
                BasisResolution(res.centers, aperture, res.metric)
                for res, aperture in zip(resolutions, self.apertures)
            ]

        return BasisSystem.build(resolutions, self.neighbors)


@dataclass
class PriorConfig:
    """Inverse-Wishart hyperparameters relative to plug-in matrices.

    nu = nu_factor * r and Phi = phi_factor * plug-in, with phi_factor
    defaulting to 3r + 1. Plug-in matrices come from plugin_path (JSON with
    keys K and U) or default to plugin_scale * I, plugin_scale = 1/r.
    """

    nu_factor: float = 2.0
    phi_factor: float | None = None
    plugin_scale: float | None = None
    plugin_path: Path | None = None
    beta_prior_sd: float | None = None
    sigma2_xi: float = 0.05

    def __post_init__(self):
        self.plugin_path = _require_file(self.plugin_path)

        if self.nu_factor <= 0:
            raise UsageError(f"nu_factor must be positive: {self.nu_factor}")
        if self.phi_factor is not None and self.phi_factor <= 0:
            raise UsageError(f"phi_factor must be positive: {self.phi_factor}")
        if self.plugin_scale is not None and self.plugin_scale <= 0:
            raise UsageError(f"plugin_scale must be positive: {self.plugin_scale}")
        if self.beta_prior_sd is not None and self.beta_prior_sd <= 0:
            raise UsageError(f"beta_prior_sd must be positive: {self.beta_prior_sd}")
        if not self.sigma2_xi > 0:
            raise DomainError(f"sigma2_xi must be positive: {self.sigma2_xi}")

    def plugin_matrices(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Return the plug-in K and U."""

        if self.plugin_path is not None:
            data = json.loads(self.plugin_path.read_text())
            try:
                K_hat = np.array(data["K"], dtype=float)
                U_hat = np.array(data["U"], dtype=float)
            except KeyError as error:
                raise SchemaError(f"Plug-in file lacks {error}") from error

            if K_hat.shape != (r, r) or U_hat.shape != (r, r):
                raise SchemaError(f"Plug-in matrices must be {r}x{r}")

            return K_hat, U_hat

        scale = self.plugin_scale if self.plugin_scale is not None else 1.0 / r

        return scale * np.eye(r), scale * np.eye(r)


@dataclass
class ChainConfig:
    """Sampler length, step sizes and adaptation settings.

    Step sizes left as None start at 2.38^2 / d for a d-dimensional block.
    """

    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    seed: int = 0
    step_beta: float | None = None
    step_lambda: float | None = None
    step_eta: float | None = None
    step_xi: float | None = None
    adapt: bool = True
    adaptation_start: int = COVARIANCE_ADAPTATION_START
    acceptance_band: tuple[float, float] = ACCEPTANCE_BAND
    fixed_parameter_mode: bool = False
    log_every: int = DEFAULT_LOG_EVERY
    threads: int = 1

    def __post_init__(self):
        self.acceptance_band = tuple(self.acceptance_band)  # type: ignore[assignment]

        if self.iterations < 1:
            raise UsageError(f"iterations must be positive: {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise UsageError(
                f"burn_in must be in [0, iterations): {self.burn_in} vs {self.iterations}"
            )
        if self.thin < 1:
            raise UsageError(f"thin must be at least 1: {self.thin}")
        if self.threads < 1:
            raise UsageError(f"threads must be at least 1: {self.threads}")
        for name in ("step_beta", "step_lambda", "step_eta", "step_xi"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise UsageError(f"{name} must be positive: {value}")
        low, high = self.acceptance_band
        if not 0 < low < high < 1:
            raise UsageError(f"Invalid acceptance band: {self.acceptance_band}")

    @property
    def acceptance_target(self) -> float:
        """Step sizes adapt toward the middle of the acceptance band."""

        return sum(self.acceptance_band) / 2

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def is_retained(self, iteration: int) -> bool:
        """Iterations count from 1; draws after burn-in are kept every thin-th step."""

        return iteration > self.burn_in and (iteration - self.burn_in) % self.thin == 0


@dataclass
class SimConfig:
    """Simulation design on a regular grid over the unit square."""

    grid: tuple[int, int] = (100, 100)
    T: int = 6
    beta: tuple[float, ...] = (5.0, -15.0)
    sigma2: float = 1.0
    psi: float = 0.2
    lambdas: tuple[float, float, float] = (0.4, 0.4, 0.035)
    sigma2_xi: float = 0.05
    small_scale_fraction: float = 0.95
    mbd: tuple[float, float, float, float] = (0.7, 1.0, 0.8, 1.0)
    mar_count: int = 600
    seed: int = 0
    basis: BasisConfig = field(default_factory=BasisConfig)

    def __post_init__(self):
        self.grid = tuple(int(n) for n in self.grid)  # type: ignore[assignment]
        self.beta = tuple(float(b) for b in self.beta)
        self.lambdas = tuple(float(v) for v in self.lambdas)  # type: ignore[assignment]
        self.mbd = tuple(float(v) for v in self.mbd)  # type: ignore[assignment]
        if isinstance(self.basis, dict):
            self.basis = load_section(BasisConfig, self.basis)

        if min(self.grid) < 1:
            raise UsageError(f"Grid counts must be positive: {self.grid}")
        if self.T < 1:
            raise UsageError(f"T must be positive: {self.T}")
        if len(self.beta) != 2:
            raise UsageError("Simulation beta has an intercept and a slope")
        if self.sigma2 <= 0 or self.psi <= 0:
            raise DomainError("sigma2 and psi must be positive")
        if not 0 < self.small_scale_fraction < 1:
            raise DomainError(
                f"small_scale_fraction must lie in (0, 1): {self.small_scale_fraction}"
            )
        if self.sigma2_xi < 0:
            raise DomainError(f"sigma2_xi must be non-negative: {self.sigma2_xi}")
        if self.mar_count < 0:
            raise UsageError(f"mar_count must be non-negative: {self.mar_count}")

        xmin, xmax, ymin, ymax = self.mbd
        dxmin, dxmax, dymin, dymax = self.basis.domain
        if not (dxmin <= xmin < xmax <= dxmax and dymin <= ymin < ymax <= dymax):
            raise UsageError(f"MBD rectangle {self.mbd} lies outside the domain")


@dataclass
class SummaryConfig:
    """Cutoffs, bands and bins of the summary reports."""

    cutoff: float = ICE_CUTOFF
    threshold: float = TRANSITION_THRESHOLD
    band_half_width: float = BAND_HALF_WIDTH
    band_latitudes: list[float] = field(default_factory=lambda: [65.0, 70.0, 75.0, 80.0])
    hovmoller_half_bandwidth: float = HOVMOLLER_HALF_BANDWIDTH_KM
    hovmoller_bins: tuple[float, float, float] = (0.0, 3300.0, 75.0)
    reference_point: tuple[float, float] = NORTH_POLE
    levels: tuple[float, ...] = HOVMOLLER_LEVELS
    pixel_area: float = PIXEL_AREA_KM2
    window: int | None = None

    def __post_init__(self):
        self.hovmoller_bins = tuple(self.hovmoller_bins)  # type: ignore[assignment]
        self.reference_point = tuple(self.reference_point)  # type: ignore[assignment]
        self.levels = tuple(self.levels)

        if not 0 < self.cutoff < 1:
            raise UsageError(f"cutoff must lie in (0, 1): {self.cutoff}")
        if self.band_half_width <= 0:
            raise UsageError(f"band_half_width must be positive: {self.band_half_width}")
        if self.hovmoller_half_bandwidth <= 0:
            raise UsageError("hovmoller_half_bandwidth must be positive")
        start, stop, step = self.hovmoller_bins
        if step <= 0 or stop < start:
            raise UsageError(f"Invalid Hovmoller bins: {self.hovmoller_bins}")
        if self.window is not None and self.window < 2:
            raise UsageError(f"window must be at least 2: {self.window}")

    @property
    def bin_centers(self) -> np.ndarray:
        start, stop, step = self.hovmoller_bins
        return np.arange(start, stop + step / 2.0, step)


@dataclass
class RunConfig:
    """All configuration sections of a run."""

    basis: BasisConfig = field(default_factory=BasisConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    simulation: SimConfig = field(default_factory=SimConfig)
    summary: SummaryConfig = field(default_factory=SummaryConfig)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        section_types = {f.name: f.default_factory for f in fields(cls)}  # type: ignore

        unknown = set(data) - set(section_types)
        if unknown:
            raise SchemaError(f"Unknown config sections: {sorted(unknown)}")

        return cls(
            **{
                name: load_section(section_types[name], value)
                for name, value in data.items()
            }
        )

    @classmethod
    def load(cls, path: Path | None) -> "RunConfig":
        if path is None:
            return cls()

        if not path.is_file():
            raise FileNotFoundError(f"File not found: {path}")

        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as error:
            raise SchemaError(f"Invalid config {path}: {error.msg}", error.lineno)

        if not isinstance(data, dict):
            raise SchemaError(f"Config {path} must hold a JSON object")

        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable(self)


def load_section(section_type: Type[C], data: dict[str, Any]) -> C:
    """Build a config section, rejecting unknown keys."""

    names = {f.name for f in fields(section_type)}  # type: ignore[arg-type]
    unknown = set(data) - names
    if unknown:
        raise SchemaError(
            f"Unknown keys in {section_type.__name__}: {sorted(unknown)}"  # type: ignore
        )

    try:
        return section_type(**data)
    except TypeError as error:
        raise SchemaError(f"Invalid {section_type.__name__}: {error}") from error
