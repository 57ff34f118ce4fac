"""Summary reports computed from a chain archive and its dataset."""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Type

import numpy as np
import pandas as pd

from st_glmm_tools.config import SummaryConfig
from st_glmm_tools.const import SummaryReport
from st_glmm_tools.errors import UsageError
from st_glmm_tools.geometry.basis import build_basis_matrix
from st_glmm_tools.model.core import inv_logit
from st_glmm_tools.models import StDataset
from st_glmm_tools.sampler.archive import ChainArchive
from st_glmm_tools.summaries.base_report import BaseReport
from st_glmm_tools.summaries.functionals import (
    BandSpec,
    HovmollerSpec,
    band_stats,
    band_trend,
    classification_accuracy,
    extent_summary,
    hovmoller,
    parameter_summary,
    sea_ice_extent,
    temporal_semivariogram,
    transition_classification_rates,
    transition_probabilities,
)


@dataclass
class SummaryInputs:
    """Per-time draws of the latent fields at the fitted locations."""

    archive: ChainArchive
    dataset: StDataset
    config: SummaryConfig
    mask: np.ndarray | None = None
    truth: dict[str, float] | None = None

    def __post_init__(self):
        if self.dataset.sizes != [c.shape[0] for c in self.archive.layout]:
            raise UsageError("Dataset does not match the archive's observed layout")
        for t, (c, layout) in enumerate(zip(self.dataset.coords, self.archive.layout)):
            if not np.allclose(c, layout):
                raise UsageError(f"Dataset locations at t={t + 1} differ from the archive")

    @property
    def T(self) -> int:
        return self.dataset.T

    @cached_property
    def S(self) -> list[np.ndarray]:
        return [build_basis_matrix(c, self.archive.basis) for c in self.dataset.coords]

    def lat(self, t: int) -> np.ndarray:
        return self.dataset.coords[t - 1][:, 1]

    @cached_property
    def shared_locations(self) -> bool:
        first = self.dataset.coords[0]
        return all(
            c.shape == first.shape and np.allclose(c, first) for c in self.dataset.coords
        )

    def xbeta_draws(self, t: int) -> np.ndarray:
        return self.archive.samples.beta @ self.dataset.X[t - 1].T

    def delta_draws(self, t: int) -> np.ndarray:
        """S_t eta_t + xi_t per draw, the detrended latent field."""

        samples = self.archive.samples
        return samples.eta[:, t - 1] @ self.S[t - 1].T + samples.xi_at(t)

    def y_draws(self, t: int) -> np.ndarray:
        return self.xbeta_draws(t) + self.delta_draws(t)

    def p_draws(self, t: int) -> np.ndarray:
        return inv_logit(self.y_draws(t))

    @cached_property
    def mean_p(self) -> list[np.ndarray]:
        return [self.p_draws(t).mean(axis=0) for t in range(1, self.T + 1)]

    @cached_property
    def mean_y(self) -> list[np.ndarray]:
        return [self.y_draws(t).mean(axis=0) for t in range(1, self.T + 1)]

    def require_shared_locations(self, report: SummaryReport) -> None:
        if not self.shared_locations:
            raise UsageError(
                f"The {report.value} report needs the same locations at every time"
            )

    def band_stack(self, draws_at, inside: np.ndarray) -> np.ndarray:
        """Stack per-time draws restricted to a band into (draws, T, n)."""

        return np.stack([draws_at(t)[:, inside] for t in range(1, self.T + 1)], axis=1)


class SummaryReportBase(BaseReport):
    """Report over a shared set of summary inputs."""

    def __init__(self, inputs: SummaryInputs):
        self.inputs = inputs

    def metadata(self) -> dict[str, Any]:
        manifest = self.inputs.archive.samples.manifest
        return {
            "draws": self.inputs.archive.samples.draws,
            "archive_config_hash": manifest.get("config_hash"),
        }

    @property
    def bands(self) -> list[BandSpec]:
        config = self.inputs.config
        return [BandSpec(lat0, config.band_half_width) for lat0 in config.band_latitudes]


class BandsReport(SummaryReportBase):
    """Band statistics of E(p_t | data) and band trends of x'beta and y."""

    report = SummaryReport.BANDS

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs = self.inputs

        rows = []
        for t in range(1, inputs.T + 1):
            for band in self.bands:
                stats = band_stats(inputs.mean_p[t - 1], inputs.lat(t), band)
                if stats.empty:
                    logging.warning(f"Band around {band.lat0} is empty at t={t}.")
                rows.append({"t": t, "lat0": band.lat0, **vars(stats)})

        tables = {self.report.file_name: pd.DataFrame(rows)}

        if inputs.shared_locations:
            lat = inputs.lat(1)
            trends = []
            for band in self.bands:
                inside = band.contains(lat)
                if not inside.any():
                    continue
                trend = band_trend(
                    inputs.band_stack(inputs.xbeta_draws, inside),
                    inputs.band_stack(inputs.y_draws, inside),
                    lat[inside],
                    band,
                )
                trend.insert(0, "lat0", band.lat0)
                trends.append(trend)
            if trends:
                tables["bands_trend.csv"] = pd.concat(trends, ignore_index=True)

        return tables


class HovmollerReport(SummaryReportBase):
    """Distance-by-time averages of the posterior mean fields."""

    report = SummaryReport.HOVMOLLER

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs, config = self.inputs, self.inputs.config
        spec = HovmollerSpec(
            bin_centers=config.bin_centers,
            reference=config.reference_point,
            half_bandwidth=config.hovmoller_half_bandwidth,
            metric=inputs.archive.basis.metric,
            mask=inputs.mask,
        )

        p_result = hovmoller(inputs.mean_p, inputs.dataset.coords, spec, config.levels)
        y_result = hovmoller(inputs.mean_y, inputs.dataset.coords, spec)

        def matrix_frame(matrix: np.ndarray) -> pd.DataFrame:
            frame = pd.DataFrame(
                matrix, columns=[f"t{t}" for t in range(1, inputs.T + 1)]
            )
            frame.insert(0, "x", p_result.bin_centers)
            return frame

        crossings = pd.DataFrame({"t": np.arange(1, inputs.T + 1)})
        for level, values in p_result.crossings.items():
            crossings[f"level_{level:g}"] = values

        return {
            self.report.file_name: matrix_frame(p_result.matrix),
            "hovmoller_y.csv": matrix_frame(y_result.matrix),
            "hovmoller_crossings.csv": crossings,
        }

    def metadata(self) -> dict[str, Any]:
        config = self.inputs.config
        return {
            **super().metadata(),
            "reference_point": config.reference_point,
            "half_bandwidth": config.hovmoller_half_bandwidth,
            "masked": self.inputs.mask is not None,
        }


class SemivariogramReport(SummaryReportBase):
    """Temporal semivariograms of the detrended field per band."""

    report = SummaryReport.SEMIVARIOGRAM

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs = self.inputs
        inputs.require_shared_locations(self.report)

        lat = inputs.lat(1)
        frames = []
        for band in self.bands:
            inside = band.contains(lat)
            if not inside.any():
                logging.warning(f"Band around {band.lat0} is empty; skipping.")
                continue

            result = temporal_semivariogram(
                inputs.band_stack(inputs.delta_draws, inside),
                lat[inside],
                band,
                inputs.config.window,
            )
            summary = result.summary()
            summary.insert(0, "lat0", band.lat0)
            frames.append(summary)

        if not frames:
            raise UsageError("No band holds any location")

        return {self.report.file_name: pd.concat(frames, ignore_index=True)}


class AccuracyReport(SummaryReportBase):
    """Share of correctly classified locations per time."""

    report = SummaryReport.ACCURACY

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs = self.inputs
        rates = classification_accuracy(
            inputs.mean_p, inputs.dataset.z, inputs.config.cutoff
        )

        return {
            self.report.file_name: pd.DataFrame(
                {"t": np.arange(1, inputs.T + 1), "accuracy": rates}
            )
        }

    def metadata(self) -> dict[str, Any]:
        return {**super().metadata(), "cutoff": self.inputs.config.cutoff}


class TransitionsReport(SummaryReportBase):
    """Transition probabilities per pixel and their classification rates."""

    report = SummaryReport.TRANSITIONS

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs, config = self.inputs, self.inputs.config
        inputs.require_shared_locations(self.report)

        coords = inputs.dataset.coords[0]
        rates, fields = [], []

        for t in range(1, inputs.T):
            probabilities = transition_probabilities(
                inputs.p_draws(t), inputs.p_draws(t + 1), config.cutoff
            )
            result = transition_classification_rates(
                probabilities,
                inputs.dataset.z[t - 1],
                inputs.dataset.z[t],
                config.threshold,
            )
            rates.append({"t": t + 1, **vars(result)})
            fields.append(
                pd.DataFrame(
                    {
                        "t": t + 1,
                        "coord1": coords[:, 0],
                        "coord2": coords[:, 1],
                        "ice_to_water": probabilities.ice_to_water,
                        "water_to_ice": probabilities.water_to_ice,
                    }
                )
            )

        if not rates:
            raise UsageError("Transitions need at least two time points")

        return {
            self.report.file_name: pd.DataFrame(rates),
            "transition_probabilities.csv": pd.concat(fields, ignore_index=True),
        }

    def metadata(self) -> dict[str, Any]:
        config = self.inputs.config
        return {
            **super().metadata(),
            "cutoff": config.cutoff,
            "threshold": config.threshold,
        }


class ExtentReport(SummaryReportBase):
    """Posterior total area classified as ice per time."""

    report = SummaryReport.EXTENT

    def compute(self) -> dict[str, pd.DataFrame]:
        inputs, config = self.inputs, self.inputs.config
        extent = np.stack(
            [
                sea_ice_extent(inputs.p_draws(t), config.pixel_area, config.cutoff)
                for t in range(1, inputs.T + 1)
            ],
            axis=1,
        )

        return {self.report.file_name: extent_summary(extent)}

    def metadata(self) -> dict[str, Any]:
        config = self.inputs.config
        return {
            **super().metadata(),
            "pixel_area": config.pixel_area,
            "cutoff": config.cutoff,
        }


class ParametersReport(SummaryReportBase):
    report = SummaryReport.PARAMETERS

    def compute(self) -> dict[str, pd.DataFrame]:
        return {
            self.report.file_name: parameter_summary(
                self.inputs.archive.samples, self.inputs.truth
            )
        }


REPORTS: dict[SummaryReport, Type[SummaryReportBase]] = {
    report_type.report: report_type
    for report_type in (
        BandsReport,
        HovmollerReport,
        SemivariogramReport,
        AccuracyReport,
        TransitionsReport,
        ExtentReport,
        ParametersReport,
    )
}
