"""
Exception hierarchy shared by the simulator and its tooling.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union


class RoamingError(Exception):
    """Base class for every error raised on purpose by this package."""


class ScenarioError(RoamingError, ValueError):
    """A scenario (or one of its parts) violates a documented invariant."""


class ConfigError(ScenarioError):
    """A scenario file could not be turned into a valid Scenario."""

    def __init__(
        self,
        message: str,
        *,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ) -> None:
        self.path = str(path) if path is not None else None
        self.line = line
        self.detail = message
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
        elif line is not None:
            location = f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class NotNeighborError(RoamingError, ValueError):
    """A handoff candidate lies outside N(current AP)."""


class CausalityError(RoamingError, RuntimeError):
    """An event was scheduled before the current simulation time."""
