"""Summary functionals over posterior and predictive draws."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from st_glmm_tools.const import (
    BAND_HALF_WIDTH,
    CREDIBLE_QUANTILES,
    HOVMOLLER_HALF_BANDWIDTH_KM,
    ICE_CUTOFF,
    NORTH_POLE,
    PIXEL_AREA_KM2,
    TRANSITION_THRESHOLD,
    Metric,
)
from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import pairwise_distance
from st_glmm_tools.helpers import type7_quantiles
from st_glmm_tools.models import ModelParams, PosteriorSamples

FIVE_NUMBER = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class BandSpec:
    """Latitude band (lat0 - half_width, lat0 + half_width), open at both ends."""

    lat0: float
    half_width: float = BAND_HALF_WIDTH

    def __post_init__(self):
        if not self.half_width > 0:
            raise UsageError(f"Band half width must be positive: {self.half_width}")

    def contains(self, lat: np.ndarray) -> np.ndarray:
        return (lat > self.lat0 - self.half_width) & (lat < self.lat0 + self.half_width)


@dataclass(frozen=True)
class BandStats:
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float

    @property
    def empty(self) -> bool:
        return self.count == 0

    @classmethod
    def empty_band(cls) -> "BandStats":
        nan = float("nan")
        return cls(0, nan, nan, nan, nan, nan, nan)


def band_stats(values: np.ndarray, lat: np.ndarray, band: BandSpec) -> BandStats:
    """Five-number summary and mean of the values inside a band."""

    inside = np.asarray(values, dtype=float)[band.contains(np.asarray(lat))]
    if inside.size == 0:
        return BandStats.empty_band()

    q = type7_quantiles(inside, FIVE_NUMBER)

    return BandStats(int(inside.size), *(float(v) for v in q), float(inside.mean()))


@dataclass(frozen=True)
class HovmollerSpec:
    """Distance bins around a reference point, each (x - h, x + h)."""

    bin_centers: np.ndarray
    reference: tuple[float, float] = NORTH_POLE
    half_bandwidth: float = HOVMOLLER_HALF_BANDWIDTH_KM
    metric: Metric = Metric.GREAT_CIRCLE
    mask: np.ndarray | None = None

    def __post_init__(self):
        if not self.half_bandwidth > 0:
            raise UsageError(f"Half bandwidth must be positive: {self.half_bandwidth}")
        if (np.diff(self.bin_centers) <= 0).any():
            raise UsageError("Hovmoller bin centers must be increasing")
        if self.mask is not None and (np.asarray(self.mask) < 0).any():
            raise UsageError("Hovmoller mask indices must be non-negative")


@dataclass(frozen=True)
class HovmollerResult:
    """Bin-by-time averages (NaN for empty bins) and level crossings per time."""

    bin_centers: np.ndarray
    matrix: np.ndarray
    crossings: dict[float, np.ndarray]


def level_crossing(x: np.ndarray, values: np.ndarray, level: float) -> float:
    """Leftmost crossing of a level by linear interpolation.

    NaN when the level is never crossed or the finite values all sit on it.
    """

    finite = values[~np.isnan(values)]
    if finite.size and (finite == level).all():
        return float("nan")

    for i in range(len(x) - 1):
        a, b = values[i], values[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == level:
            return float(x[i])
        if (a - level) * (b - level) < 0:
            return float(x[i] + (level - a) * (x[i + 1] - x[i]) / (b - a))

    if len(x) and values[-1] == level:
        return float(x[-1])

    return float("nan")


def hovmoller(
    fields: list[np.ndarray],
    coords: list[np.ndarray],
    spec: HovmollerSpec,
    levels: tuple[float, ...] = (),
) -> HovmollerResult:
    """Average each time's field over locations whose distance falls in each bin.

    With a mask only the listed location indices contribute.
    """

    x = np.asarray(spec.bin_centers, dtype=float)
    h = spec.half_bandwidth
    reference = np.array([spec.reference], dtype=float)
    matrix = np.full((x.size, len(fields)), np.nan)

    for t, (values, c) in enumerate(zip(fields, coords)):
        d = pairwise_distance(c, reference, spec.metric)[:, 0]
        keep = np.zeros(d.size, dtype=bool)
        if spec.mask is None:
            keep[:] = True
        else:
            keep[spec.mask[spec.mask < d.size]] = True

        inside = (np.abs(d[None, :] - x[:, None]) < h) & keep[None, :]
        counts = inside.sum(axis=1)
        sums = inside.astype(float) @ np.asarray(values, dtype=float)
        filled = counts > 0
        matrix[filled, t] = sums[filled] / counts[filled]

    crossings = {
        level: np.array([level_crossing(x, matrix[:, t], level) for t in range(len(fields))])
        for level in levels
    }

    return HovmollerResult(x, matrix, crossings)


@dataclass(frozen=True)
class SemivariogramResult:
    """Per-draw semivariogram values at lags 1..M."""

    lags: np.ndarray
    draws: np.ndarray

    def summary(self) -> pd.DataFrame:
        q = type7_quantiles(self.draws, FIVE_NUMBER)
        return pd.DataFrame(
            {
                "lag": self.lags,
                "mean": self.draws.mean(axis=0),
                "min": q[0],
                "q1": q[1],
                "median": q[2],
                "q3": q[3],
                "max": q[4],
            }
        )


def max_lag(window: int) -> int:
    """Half the number of possible lags, rounded up."""

    return int(np.ceil((window - 1) / 2.0))


def temporal_semivariogram(
    delta_draws: np.ndarray,
    lat: np.ndarray,
    band: BandSpec,
    window: int | None = None,
) -> SemivariogramResult:
    """Half the mean squared temporal increment at lags 1..M within a band.

    delta_draws has shape (draws, T, n) over locations shared by all times;
    the first `window` times are used.
    """

    delta_draws = np.asarray(delta_draws, dtype=float)
    window = delta_draws.shape[1] if window is None else window
    if window < 2 or window > delta_draws.shape[1]:
        raise UsageError(f"Window must lie in [2, {delta_draws.shape[1]}]: {window}")

    inside = band.contains(np.asarray(lat))
    if not inside.any():
        raise UsageError(f"Band around {band.lat0} holds no locations")

    delta = delta_draws[:, :window][:, :, inside]
    lags = np.arange(1, max_lag(window) + 1)
    values = np.stack(
        [0.5 * ((delta[:, :-h] - delta[:, h:]) ** 2).mean(axis=(1, 2)) for h in lags],
        axis=1,
    )

    return SemivariogramResult(lags, values)


def classification_accuracy(
    mean_p: list[np.ndarray], z: list[np.ndarray], cutoff: float = ICE_CUTOFF
) -> np.ndarray:
    """Per-time share of locations where (mean_p > cutoff) matches z."""

    if len(mean_p) != len(z):
        raise UsageError("Probability fields and data cover different times")

    rates = []
    for p_t, z_t in zip(mean_p, z):
        if p_t.shape != z_t.shape:
            raise UsageError("Probability field and data are not aligned")
        rates.append(float(((p_t > cutoff).astype(int) == z_t).mean()))

    return np.array(rates)


@dataclass(frozen=True)
class TransitionProbabilities:
    """Ice-to-water and water-to-ice probabilities; NaN where undefined."""

    ice_to_water: np.ndarray
    water_to_ice: np.ndarray

    @property
    def ice_to_water_defined(self) -> np.ndarray:
        return ~np.isnan(self.ice_to_water)

    @property
    def water_to_ice_defined(self) -> np.ndarray:
        return ~np.isnan(self.water_to_ice)


def _conditional_fraction(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    counts = denominator.sum(axis=0)
    hits = (numerator & denominator).sum(axis=0)
    out = np.full(counts.shape, np.nan)
    np.divide(hits, counts, out=out, where=counts > 0)
    return out


def transition_probabilities(
    p_t: np.ndarray, p_next: np.ndarray, cutoff: float = ICE_CUTOFF
) -> TransitionProbabilities:
    """Estimate transition probabilities from draws of shape (draws, n)."""

    if p_t.shape != p_next.shape:
        raise UsageError("Draw tensors at t and t + 1 differ in shape")

    ice_t, ice_next = p_t >= cutoff, p_next >= cutoff

    return TransitionProbabilities(
        ice_to_water=_conditional_fraction(~ice_next, ice_t),
        water_to_ice=_conditional_fraction(ice_next, ~ice_t),
    )


@dataclass(frozen=True)
class TransitionRates:
    ice_to_water: float
    ice_to_water_count: int
    water_to_ice: float
    water_to_ice_count: int


def transition_classification_rates(
    probabilities: TransitionProbabilities,
    z_t: np.ndarray,
    z_next: np.ndarray,
    threshold: float = TRANSITION_THRESHOLD,
) -> TransitionRates:
    """Share of observed transitions whose probability exceeds the threshold.

    Undefined probabilities never count as detected.
    """

    observed_iw = (z_t == 1) & (z_next == 0)
    observed_wi = (z_t == 0) & (z_next == 1)

    def rate(pi: np.ndarray, observed: np.ndarray) -> tuple[float, int]:
        count = int(observed.sum())
        if count == 0:
            return float("nan"), 0
        detected = np.nan_to_num(pi, nan=-np.inf) > threshold
        return float((detected & observed).sum() / count), count

    iw, n_iw = rate(probabilities.ice_to_water, observed_iw)
    wi, n_wi = rate(probabilities.water_to_ice, observed_wi)

    return TransitionRates(iw, n_iw, wi, n_wi)


def sea_ice_extent(
    p_draws: np.ndarray,
    pixel_area: float = PIXEL_AREA_KM2,
    cutoff: float = ICE_CUTOFF,
) -> np.ndarray:
    """Per-draw area of pixels with p at or above the cutoff; draws along axis 0."""

    return pixel_area * (np.asarray(p_draws) >= cutoff).sum(axis=-1)


def extent_summary(extent: np.ndarray) -> pd.DataFrame:
    """Posterior mean and 95% interval of extent draws of shape (draws, T)."""

    lower, upper = type7_quantiles(extent, CREDIBLE_QUANTILES)
    return pd.DataFrame(
        {
            "t": np.arange(1, extent.shape[1] + 1),
            "mean": extent.mean(axis=0),
            "lower": lower,
            "upper": upper,
        }
    )


def band_trend(
    xbeta_draws: np.ndarray, y_draws: np.ndarray, lat: np.ndarray, band: BandSpec
) -> pd.DataFrame:
    """Posterior means over time of the band averages of x'beta and y.

    Both draw arrays have shape (draws, T, n).
    """

    inside = band.contains(np.asarray(lat))
    if not inside.any():
        raise UsageError(f"Band around {band.lat0} holds no locations")

    T = xbeta_draws.shape[1]
    return pd.DataFrame(
        {
            "t": np.arange(1, T + 1),
            "xbeta": xbeta_draws[:, :, inside].mean(axis=2).mean(axis=0),
            "y": y_draws[:, :, inside].mean(axis=2).mean(axis=0),
        }
    )


def parameter_summary(
    samples: PosteriorSamples, truth: dict[str, float] | None = None
) -> pd.DataFrame:
    """Posterior mean and 95% credible interval of beta and lambda."""

    names = [f"beta_{j + 1}" for j in range(samples.beta.shape[1])] + [
        f"lambda_{j + 1}" for j in range(3)
    ]
    draws = np.hstack([samples.beta, samples.lam])
    lower, upper = type7_quantiles(draws, CREDIBLE_QUANTILES)

    frame = pd.DataFrame(
        {"parameter": names, "mean": draws.mean(axis=0), "lower": lower, "upper": upper}
    )
    if truth is not None:
        frame.insert(1, "truth", [truth.get(name, np.nan) for name in names])

    return frame


def parameter_truth(params: ModelParams) -> dict[str, float]:
    """Name the true beta and lambda values the way parameter_summary does."""

    truth = {f"beta_{j + 1}": float(b) for j, b in enumerate(params.beta)}
    truth.update({f"lambda_{j + 1}": float(v) for j, v in enumerate(params.H.lambdas)})

    return truth
