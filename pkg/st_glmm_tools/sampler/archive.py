"""Chain archive directories: manifest, layout, scalar traces and draw blocks."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from st_glmm_tools.const import (
    ETA_BIN,
    K_BIN,
    LAYOUT_CSV,
    SCALARS_CSV,
    U_BIN,
    XI_BIN,
)
from st_glmm_tools.construct.draws import read_draws, write_draws
from st_glmm_tools.errors import SchemaError
from st_glmm_tools.geometry.basis import BasisSystem
from st_glmm_tools.helpers import ensure_directory, read_manifest, write_manifest
from st_glmm_tools.models import PosteriorSamples
from st_glmm_tools.sampler.priors import PriorSpec

ACCEPT_PREFIX = "accept_"


@dataclass
class ChainArchive:
    """Everything prediction and summaries need from a fit."""

    samples: PosteriorSamples
    basis: BasisSystem
    priors: PriorSpec
    layout: list[np.ndarray]
    seed: int
    config: dict[str, Any]

    @property
    def T(self) -> int:
        return len(self.layout)

    @property
    def p(self) -> int:
        return self.samples.beta.shape[1]

    def shapes(self) -> dict[str, Any]:
        samples = self.samples
        return {
            "draws": samples.draws,
            "T": samples.T,
            "r": samples.r,
            "p": self.p,
            "N": int(samples.xi.shape[1]),
        }


def scalars_frame(samples: PosteriorSamples) -> pd.DataFrame:
    columns: dict[str, np.ndarray] = {"iteration": samples.iterations}

    for j in range(samples.beta.shape[1]):
        columns[f"beta_{j + 1}"] = samples.beta[:, j]
    for j in range(3):
        columns[f"lambda_{j + 1}"] = samples.lam[:, j]
    for j in range(3):
        columns[f"tau_{j + 1}"] = samples.tau[:, j]
    for name, flags in samples.accept_flags.items():
        columns[f"{ACCEPT_PREFIX}{name}"] = flags

    return pd.DataFrame(columns)


def layout_frame(layout: list[np.ndarray]) -> pd.DataFrame:
    return pd.concat(
        [
            pd.DataFrame({"t": t + 1, "coord1": c[:, 0], "coord2": c[:, 1]})
            for t, c in enumerate(layout)
        ],
        ignore_index=True,
    )


def save_archive(directory: Path, archive: ChainArchive) -> Path:
    ensure_directory(directory)
    samples = archive.samples

    write_manifest(
        directory,
        archive.seed,
        archive.config,
        priors=archive.priors.to_dict(),
        shapes=archive.shapes(),
        basis=archive.basis.to_dict(),
        sizes=[int(c.shape[0]) for c in archive.layout],
        sigma2_xi=samples.sigma2_xi,
        acceptance={name: list(counts) for name, counts in samples.acceptance.items()},
    )

    layout_frame(archive.layout).to_csv(directory / LAYOUT_CSV, index=False)
    scalars_frame(samples).to_csv(directory / SCALARS_CSV, index=False)

    write_draws(directory / K_BIN, samples.K)
    write_draws(directory / U_BIN, samples.U)
    write_draws(directory / ETA_BIN, samples.eta)
    write_draws(directory / XI_BIN, samples.xi)

    logging.info(f"Wrote {samples.draws} draws to {directory}")

    return directory


def _layout_from_frame(frame: pd.DataFrame, sizes: list[int]) -> list[np.ndarray]:
    layout = [
        frame.loc[frame["t"] == t + 1, ["coord1", "coord2"]].to_numpy(dtype=float)
        for t in range(len(sizes))
    ]
    if [c.shape[0] for c in layout] != sizes:
        raise SchemaError(f"{LAYOUT_CSV} does not match the manifest sizes {sizes}")

    return layout


def load_archive(directory: Path) -> ChainArchive:
    """Read a chain archive written by save_archive."""

    if not directory.is_dir():
        raise FileNotFoundError(f"Chain archive not found: {directory}")

    manifest = read_manifest(directory)
    try:
        shapes = manifest["shapes"]
        D, T, r, p = shapes["draws"], shapes["T"], shapes["r"], shapes["p"]
        N = shapes["N"]
        sizes = [int(n) for n in manifest["sizes"]]
        basis = BasisSystem.from_dict(manifest["basis"])
        priors = PriorSpec.from_dict(manifest["priors"])
        sigma2_xi = float(manifest["sigma2_xi"])
        seed = int(manifest["seed"])
    except KeyError as error:
        raise SchemaError(f"Manifest in {directory} lacks {error}") from error

    layout = _layout_from_frame(pd.read_csv(directory / LAYOUT_CSV), sizes)

    scalars = pd.read_csv(directory / SCALARS_CSV)
    if len(scalars) != D:
        raise SchemaError(f"{SCALARS_CSV} holds {len(scalars)} rows, expected {D}")

    accept_flags = {
        column[len(ACCEPT_PREFIX) :]: scalars[column].to_numpy(dtype=int)
        for column in scalars.columns
        if column.startswith(ACCEPT_PREFIX)
    }

    samples = PosteriorSamples(
        beta=scalars[[f"beta_{j + 1}" for j in range(p)]].to_numpy(dtype=float),
        lam=scalars[[f"lambda_{j + 1}" for j in range(3)]].to_numpy(dtype=float),
        tau=scalars[[f"tau_{j + 1}" for j in range(3)]].to_numpy(dtype=float),
        K=read_draws(directory / K_BIN, D, (r, r)),
        U=read_draws(directory / U_BIN, D, (r, r)),
        eta=read_draws(directory / ETA_BIN, D, (T, r)),
        xi=read_draws(directory / XI_BIN, D, (N,)),
        iterations=scalars["iteration"].to_numpy(dtype=int),
        offsets=np.concatenate(([0], np.cumsum(sizes))).astype(int),
        adjacency=basis.adjacency,
        sigma2_xi=sigma2_xi,
        acceptance={
            name: (int(counts[0]), int(counts[1]))
            for name, counts in manifest.get("acceptance", {}).items()
        },
        accept_flags=accept_flags,
        manifest=manifest,
    )

    logging.info(f"Loaded {D} draws from {directory}")

    return ChainArchive(
        samples=samples,
        basis=basis,
        priors=priors,
        layout=layout,
        seed=seed,
        config=manifest.get("config", {}),
    )
