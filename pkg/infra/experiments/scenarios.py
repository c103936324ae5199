from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import ValidationError

from roaming.config import Scenario
from roaming.errors import ConfigError

logger = logging.getLogger(__name__)

SECTIONS = (
    "arena",
    "aps",
    "timing",
    "thresholds",
    "mobility",
    "traffic",
    "scheme",
    "selection",
    "run",
)


def _line_of(node: Optional[yaml.Node], loc: tuple[Union[int, str], ...]) -> Optional[int]:
    """1-based line of the YAML node at ``loc``, or of its closest existing parent."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for part in loc:
        child = None
        if isinstance(node, yaml.MappingNode) and isinstance(part, str):
            for key, value in node.value:
                if key.value == part:
                    child = (key, value)
                    break
            if child is None:
                return line
            line = child[0].start_mark.line + 1
            node = child[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                return line
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _summarize(err: dict[str, Any]) -> str:
    loc = ".".join(str(p) for p in err["loc"])
    msg = err["msg"]
    if err["type"] == "extra_forbidden":
        msg = "unknown key"
    elif err["type"] == "missing":
        msg = "required section or key is missing"
    return f"{loc}: {msg}" if loc else msg


def parse_scenario_text(text: str, path: Union[str, Path] = "<string>") -> Scenario:
    """Validate a YAML scenario document. Errors carry the offending line."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(
            f"not valid YAML: {getattr(e, 'problem', e)}",
            path=path,
            line=mark.line + 1 if mark is not None else None,
        ) from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("a scenario must be a mapping of sections", path=path, line=1)
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(
                f"unknown section '{key}' (expected one of: {', '.join(SECTIONS)})",
                path=path,
                line=_line_of(root, (key,)),
            )

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        # validators on a model report the model itself; point at its section
        loc = tuple(
            p for p in first["loc"] if not (isinstance(p, str) and p.startswith("function-"))
        )
        raise ConfigError(_summarize(first), path=path, line=_line_of(root, loc)) from e
    logger.debug("parsed scenario %s", path)
    return scenario


def parse_config(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file. OSError propagates untouched."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_scenario_text(text, path=path)
