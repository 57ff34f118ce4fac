"""Fixed-size float64 records, one per retained draw."""

from dataclasses import dataclass
from pathlib import Path

import construct as cs
import numpy as np
from construct_typed import DataclassMixin, DataclassStruct, csfield

from st_glmm_tools.const import FLOAT64_SIZE
from st_glmm_tools.construct.base_construct import BaseConstruct
from st_glmm_tools.errors import SchemaError

LITTLE_ENDIAN_FLOAT64 = np.dtype("<f8")


@dataclass
class DrawRecord(DataclassMixin):
    """One draw, row-major little-endian float64."""

    payload: bytes = csfield(
        cs.Bytes(lambda ctx: ctx._params.record_size * FLOAT64_SIZE)
    )


@dataclass
class DrawArchive(BaseConstruct):
    """A block of draw records with no trailing bytes."""

    records: list[DrawRecord] = csfield(
        cs.Array(lambda ctx: ctx._params.record_count, DataclassStruct(DrawRecord))
    )
    end: None = csfield(cs.Terminated)

    @classmethod
    def from_array(cls, draws: np.ndarray) -> "DrawArchive":
        flat = np.ascontiguousarray(draws, dtype=LITTLE_ENDIAN_FLOAT64).reshape(
            draws.shape[0], -1
        )

        return cls(records=[DrawRecord(payload=row.tobytes()) for row in flat])

    def to_array(self, shape: tuple[int, ...]) -> np.ndarray:
        if not self.records:
            return np.empty((0, *shape))

        flat = np.frombuffer(
            b"".join(record.payload for record in self.records),
            dtype=LITTLE_ENDIAN_FLOAT64,
        )

        return flat.astype(float).reshape(len(self.records), *shape)


def write_draws(path: Path, draws: np.ndarray) -> Path:
    """Write an array of shape (draws, ...) as one record per draw."""

    record_size = int(np.prod(draws.shape[1:], dtype=int))

    return DrawArchive.from_array(draws).to_file(
        path, record_count=draws.shape[0], record_size=record_size
    )


def read_draws(path: Path, count: int, shape: tuple[int, ...]) -> np.ndarray:
    """Read `count` records of the given per-draw shape."""

    record_size = int(np.prod(shape, dtype=int))

    try:
        archive = DrawArchive.from_file(
            path, record_count=count, record_size=record_size
        )
    except cs.ConstructError as error:
        raise SchemaError(
            f"{path.name} does not hold {count} records of {record_size} floats: {error}"
        ) from error

    return archive.to_array(shape)
