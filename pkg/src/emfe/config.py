"""Resolved run configuration, written next to every command's outputs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class RunConfig:
    command: str
    data: str | None = None
    csv: str | None = None
    out: str = "runs"
    seed: int = 42
    test_fraction: float = 0.2
    polarity: str = "paper"
    connectivity: int = 8
    features: str = "two"
    model: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    n_samples: int = 25
    folds: int = 5
    threshold_target: float = 0.95
    n_iterations: int = 1000
    stability_runs: int = 10
    workers: int = 1

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path
