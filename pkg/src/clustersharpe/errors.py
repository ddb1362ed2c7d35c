"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations

import contextlib
from typing import Iterator


class ClusterSharpeError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when an error crosses a stage boundary."""

    stage: str | None = None


class DataFormatError(ClusterSharpeError, ValueError):
    pass


class EmptyInputError(DataFormatError):
    pass


class DataError(ClusterSharpeError, ValueError):
    pass


class InsufficientDataError(DataError):
    pass


class PreconditionError(ClusterSharpeError, ValueError):
    pass


class ConfigurationError(ClusterSharpeError, ValueError):
    pass


class DomainError(ClusterSharpeError, ValueError):
    pass


class ZeroVarianceError(ClusterSharpeError, ZeroDivisionError):
    pass


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any library error raised inside the block with ``name`` (first tag wins)."""
    try:
        yield
    except ClusterSharpeError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
