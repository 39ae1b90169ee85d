from __future__ import annotations

import copy
import os

import yaml
from dataclasses import dataclass, field
from typing import Any, Dict

DEFAULT_CONFIG = {
    "limits": {
        "window_cap": 4096,
        "program_cap": 1_000_000,
        "coverage_node_cap": 2_000_000,
        "max_state_dim": 64,
        "max_density_dim": 16,
        "max_coverage_grid": 32,
        "max_coverage_word_length": 6,
    },
    "tolerances": {
        "structural": 1e-10,
        "compile_eps": 1e-10,
        "intermediate": 1e-9,
        "rank": 1e-12,
    },
    "verification": {
        "max_workers": 4,
        "coverage_samples": 512,
    },
    "reports": {
        "wall_time": False,
    },
    "diagnostics": {
        "debug_logging": False,
        "log_max_bytes": 1_048_576,
        "log_retention": 5,
    },
}

@dataclass
class AppConfig:
    raw: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))
    path: str = ""

    @staticmethod
    def _merge_with_defaults(overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Merge overrides with :data:`DEFAULT_CONFIG` recursively.

        Every key defined in ``DEFAULT_CONFIG`` is present in the result while
        user-provided overrides and additional keys are preserved. Nested
        dictionaries are merged so that missing limits or tolerances fall back
        to their defaults without clobbering sibling options.
        """

        def merge(defaults: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
            merged = copy.deepcopy(updates) if isinstance(updates, dict) else {}
            for key, value in defaults.items():
                if isinstance(value, dict):
                    existing = merged.get(key)
                    if isinstance(existing, dict):
                        merged[key] = merge(value, existing)
                    else:
                        merged[key] = merge(value, {})
                else:
                    merged.setdefault(key, copy.deepcopy(value))
            return merged

        sanitized = overrides if isinstance(overrides, dict) else {}
        return merge(copy.deepcopy(DEFAULT_CONFIG), sanitized)

    @classmethod
    def load(cls, data_dir: str) -> "AppConfig":
        os.makedirs(data_dir, exist_ok=True)
        cfg_path = os.path.join(data_dir, "config.yaml")
        loaded: Dict[str, Any] = {}
        if os.path.exists(cfg_path):
            with open(cfg_path, "r") as f:
                loaded = yaml.safe_load(f) or {}
        cfg = cls(raw=cls._merge_with_defaults(loaded), path=cfg_path)
        cfg.save()
        return cfg

    def save(self):
        with open(self.path, "w") as f:
            yaml.safe_dump(self.raw, f, sort_keys=False)

    def get(self, *keys, default=None):
        d = self.raw
        for k in keys:
            if not isinstance(d, dict) or k not in d:
                return default
            d = d[k]
        return d

    def limit(self, name: str) -> int:
        return int(self.get("limits", name, default=DEFAULT_CONFIG["limits"][name]))

    def tolerance(self, name: str) -> float:
        return float(
            self.get("tolerances", name, default=DEFAULT_CONFIG["tolerances"][name])
        )
