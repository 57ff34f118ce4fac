from abc import ABC
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Type, TypeVar

from construct_typed import DataclassMixin, DataclassStruct

T = TypeVar("T", bound="BaseConstruct")


@dataclass
class BaseConstruct(ABC, DataclassMixin):
    """Base construct class."""

    @classmethod
    def from_file(cls: Type[T], file_path: Path, **params: Any) -> T:
        """Read the file and return the construct."""

        if not file_path.is_file():
            raise FileNotFoundError(f"File not found: {file_path}")

        obj: T = DataclassStruct(cls).parse_file(file_path, **params)

        return obj

    def to_file(self, file_path: Path, **params: Any) -> Path:
        """Write the construct to a file."""

        DataclassStruct(type(self)).build_file(self, file_path, **params)

        return file_path
