"""Exception hierarchy; every error knows the exit code the cli reports."""
from __future__ import annotations

from .const import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC


class GsemaError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", *, study_id: str | None = None, pathway: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.study_id = study_id
        self.pathway = pathway

    def for_study(self, study_id: str) -> GsemaError:
        if self.study_id is None:
            self.study_id = study_id
        return self

    def __str__(self) -> str:
        parts = []
        if self.study_id is not None:
            parts.append(f"study {self.study_id}")
        if self.pathway is not None:
            parts.append(f"pathway {self.pathway}")
        prefix = ", ".join(parts)
        return f"{prefix}: {self.message}" if prefix else self.message


class ConfigError(GsemaError):
    exit_code = EXIT_CONFIG


class DataError(GsemaError):
    exit_code = EXIT_DATA


class ParseError(DataError):
    def __init__(self, message: str, *, row: int | None = None, column: int | None = None, **kwargs) -> None:
        super().__init__(message, **kwargs)
        self.row = row
        self.column = column


class DuplicateGene(DataError):
    def __init__(self, gene: str, **kwargs) -> None:
        super().__init__(f"duplicate gene id {gene!r}", **kwargs)
        self.gene = gene


class DuplicateSet(DataError):
    def __init__(self, name: str, **kwargs) -> None:
        super().__init__(f"duplicate gene set {name!r}", **kwargs)
        self.name = name


class MissingLabel(DataError):
    def __init__(self, sample: str, **kwargs) -> None:
        super().__init__(f"no class label for sample {sample!r}", **kwargs)
        self.sample = sample


class DegenerateDesign(DataError):
    pass


class EmptyInput(DataError):
    pass


class IoError(DataError):
    pass


class InvalidKernel(DataError):
    pass


class NoPathways(DataError):
    pass


class NumericError(GsemaError):
    exit_code = EXIT_NUMERIC


class DomainError(NumericError):
    pass


class DegenerateVariance(NumericError):
    pass
