"""Base class for summary reports."""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, final

import pandas as pd

from st_glmm_tools.const import VERSION, SummaryReport
from st_glmm_tools.helpers import ensure_directory

METADATA_PREFIX = "# "


class BaseReport(ABC):
    """Base class for summary reports."""

    report: SummaryReport

    @abstractmethod
    def compute(self) -> dict[str, pd.DataFrame]:
        """Return the report tables keyed by file name."""

    def metadata(self) -> dict[str, Any]:
        return {}

    @final
    def export(self, output_path: Path) -> list[Path]:
        """Compute the report and write each table behind metadata header rows."""

        ensure_directory(output_path)

        header = {"report": self.report.value, "version": VERSION, **self.metadata()}
        lines = [f"{METADATA_PREFIX}{key}: {value}" for key, value in header.items()]

        output_paths: list[Path] = []
        for file_name, table in self.compute().items():
            file_path = output_path / file_name

            logging.debug(f"Writing {self.report.value} table {file_path}...")

            with open(file_path, "w", encoding="utf-8", newline="") as file:
                file.write("\n".join(lines) + "\n")
                table.to_csv(file, index=False, na_rep="NA")

            output_paths.append(file_path)

        return output_paths


def read_report(file_path: Path) -> pd.DataFrame:
    """Read a report table, skipping its metadata rows."""

    return pd.read_csv(file_path, comment=METADATA_PREFIX[0])
