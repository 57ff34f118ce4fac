"""Trace export, effective sample sizes and split-chain potential scale reduction."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from st_glmm_tools.const import ACCEPTANCE_BAND
from st_glmm_tools.errors import UsageError
from st_glmm_tools.models import PosteriorSamples


@dataclass(frozen=True)
class EffectiveSampleSize:
    value: float
    degenerate: bool


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Sample autocorrelation at all lags via FFT."""

    n = x.shape[0]
    centered = x - x.mean()
    spectrum = np.fft.rfft(centered, n=2 * n)
    autocovariance = np.fft.irfft(spectrum * np.conj(spectrum), n=2 * n)[:n] / n

    return autocovariance / autocovariance[0]


def effective_sample_size(x: np.ndarray) -> EffectiveSampleSize:
    """ESS with Geyer's initial positive sequence truncation."""

    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise UsageError("Effective sample size needs at least two draws")

    if np.ptp(x) == 0:
        return EffectiveSampleSize(float("nan"), True)

    rho = autocorrelation(x)
    pair_sums = rho[: n - n % 2].reshape(-1, 2).sum(axis=1)

    positive = np.flatnonzero(pair_sums <= 0)
    stop = positive[0] if positive.size else pair_sums.size
    tau = -1.0 + 2.0 * pair_sums[:stop].sum()

    return EffectiveSampleSize(float(n / max(tau, 1.0 / np.log10(max(n, 10)))), False)


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction over chains split in half, shape (chains, draws)."""

    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    half = chains.shape[1] // 2
    if half < 2:
        raise UsageError("Split R-hat needs at least four draws per chain")

    halves = np.concatenate([chains[:, :half], chains[:, half : 2 * half]])
    within = halves.var(axis=1, ddof=1).mean()
    if within == 0:
        return float("nan")

    between = half * halves.mean(axis=1).var(ddof=1)
    pooled = (half - 1) / half * within + between / half

    return float(np.sqrt(pooled / within))


def scalar_traces(samples: PosteriorSamples) -> dict[str, np.ndarray]:
    traces: dict[str, np.ndarray] = {}

    for j in range(samples.beta.shape[1]):
        traces[f"beta_{j + 1}"] = samples.beta[:, j]
    for j in range(3):
        traces[f"lambda_{j + 1}"] = samples.lam[:, j]
    traces["trace_K"] = np.trace(samples.K, axis1=1, axis2=2)
    traces["trace_U"] = np.trace(samples.U, axis1=1, axis2=2)

    return traces


def trace_frame(samples: PosteriorSamples) -> pd.DataFrame:
    return pd.DataFrame({"iteration": samples.iterations, **scalar_traces(samples)})


def acceptance_frame(
    samples: PosteriorSamples, band: tuple[float, float] = ACCEPTANCE_BAND
) -> pd.DataFrame:
    """Post burn-in acceptance per component; in_band is False for unproposed ones."""

    low, high = band
    rows = []
    for name, (accepted, proposed) in samples.acceptance.items():
        rate = accepted / proposed if proposed else float("nan")
        in_band = bool(low <= rate <= high)
        if proposed and not in_band:
            logging.warning(f"Acceptance rate of {name} is {rate:.3f}, outside {band}.")
        rows.append(
            {
                "component": name,
                "accepted": accepted,
                "proposed": proposed,
                "rate": rate,
                "in_band": in_band,
            }
        )

    return pd.DataFrame(rows)


def diagnostics(
    samples: PosteriorSamples, chains: list[PosteriorSamples] | None = None
) -> pd.DataFrame:
    """Per-scalar mean, sd, ESS and, with two or more chains, split R-hat."""

    if samples.draws < 2:
        raise UsageError("Diagnostics need at least two retained draws")

    traces = scalar_traces(samples)
    chain_traces = [scalar_traces(chain) for chain in chains] if chains else []

    rows = []
    for name, trace in traces.items():
        ess = effective_sample_size(trace)
        row = {
            "name": name,
            "mean": float(trace.mean()),
            "sd": float(trace.std(ddof=1)),
            "ess": ess.value,
            "degenerate": ess.degenerate,
            "rhat": float("nan"),
        }
        if len(chain_traces) >= 2:
            length = min(len(ct[name]) for ct in chain_traces)
            row["rhat"] = split_rhat(np.stack([ct[name][:length] for ct in chain_traces]))
        rows.append(row)

        if ess.degenerate:
            logging.debug(f"{name} is constant across draws.")

    return pd.DataFrame(rows)
