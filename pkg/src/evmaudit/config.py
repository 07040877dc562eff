"""Analyzer configuration: defaults, key=value config files, CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .symbolic import DEFAULT_DEPTH_CAP


@dataclass(frozen=True, slots=True)
class AnalyzerConfig:
    timeout_s: float = 10.0
    visit_limit: int = 3
    step_budget: int = 1_000_000
    include_timestamp_in_bid: bool = False
    depth_cap: int = DEFAULT_DEPTH_CAP
    output: str = "text"  # "text" | "json"
    jobs: int = 1

    def override(self, **kwargs: Any) -> "AnalyzerConfig":
        """New config with the given non-None fields replaced."""
        changes = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **changes) if changes else self


_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}

_FIELD_TYPES = {
    "timeout_s": float,
    "visit_limit": int,
    "step_budget": int,
    "include_timestamp_in_bid": bool,
    "depth_cap": int,
    "output": str,
    "jobs": int,
}


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip().strip("\"'")
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        typ = _FIELD_TYPES[key]
        if typ is bool:
            if val.lower() not in _BOOL_WORDS:
                raise ValueError(f"config line {lineno}: {key} wants a boolean, got {val!r}")
            values[key] = _BOOL_WORDS[val.lower()]
        else:
            values[key] = typ(val)
    return values


def load_config(path: str | Path) -> AnalyzerConfig:
    return AnalyzerConfig().override(**parse_config_text(Path(path).read_text()))
