"""Workbench configuration: one YAML file plus command-line overrides.

``sampling_seed`` is mandatory so IAA membership is reproducible; it is
pinned into the store's event log on first use and immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .engine import QueueConfig
from .errors import FormatError


@dataclass
class WorkbenchConfig:
    store_dir: Path = Path("./crossdoc-store")
    sampling_seed: Optional[int] = None
    iaa_fraction: float = 0.05
    weekly_iaa_cap: int = 150
    claim_lease_minutes: float = 15.0
    ranking_mode: str = "similarity"
    date_window_days: int = 14
    author_overlap_threshold: float = 0.5
    linkage: str = "average"
    cluster_tau: float = 0.5
    snapshot_interval: int = 1000
    host: str = "127.0.0.1"
    port: int = 8400
    extras: dict = field(default_factory=dict)

    def queue_config(self) -> QueueConfig:
        if self.sampling_seed is None:
            raise FormatError("config must set sampling_seed (reproducibility)")
        return QueueConfig(
            sampling_seed=int(self.sampling_seed),
            iaa_fraction=self.iaa_fraction,
            weekly_iaa_cap=self.weekly_iaa_cap,
            claim_lease_minutes=self.claim_lease_minutes,
            ranking_mode=self.ranking_mode,
        )


def load_config(path: Optional[Path] = None, **overrides) -> WorkbenchConfig:
    """Read the YAML config (if any) and apply non-None overrides."""
    config = WorkbenchConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: config must be a mapping")
        for key, value in doc.items():
            if hasattr(config, key) and key != "extras":
                setattr(config, key, value)
            else:
                config.extras[key] = value
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    config.store_dir = Path(config.store_dir)
    return config
