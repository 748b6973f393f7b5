#!/usr/bin/env python3
"""
Centralized configuration for slackreclaim.
Values come from the environment (optionally a .env file), prefixed SLACKRECLAIM_.
"""
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from .errors import ConfigError

load_dotenv()

ENV_PREFIX = "SLACKRECLAIM_"

SIM_CONFIG: Dict[str, Any] = {
    "log_level": "INFO",
    "cpu": "transmeta_crusoe",
    "eligibility_factor": 20,
    "output_dir": "results",
    "host": "0.0.0.0",
    "port": 8870,
    "workers": 1,
}

# Experiment presets; "quick" runs in minutes, "full" is the 100-500 task sweep.
PROFILES: Dict[str, Dict[str, Any]] = {
    "quick": {
        "families": ["random", "lu", "gauss_jordan"],
        "sizes": [100, 200],
        "processor_counts": [2, 4, 8, 16],
        "repetitions": 30,
        "lu_repetitions": 30,
    },
    "full": {
        "families": ["random", "lu", "gauss_jordan"],
        "sizes": [100, 200, 300, 400, 500],
        "processor_counts": [2, 4, 8, 16, 32],
        "repetitions": 100,
        "lu_repetitions": 30,
    },
}


class SimConfig:
    def __init__(self):
        self._cache: Dict[str, Any] = {}

    def get_config(self, key: str, default: Optional[Any] = None) -> Any:
        if key in self._cache:
            return self._cache[key]

        value = os.getenv(f"{ENV_PREFIX}{key.upper()}")
        if value is None:
            value = SIM_CONFIG.get(key, default)
        self._cache[key] = value
        return value

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        return int(self.get_config(key, default))

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        return float(self.get_config(key, default))

    def clear(self) -> None:
        self._cache.clear()

    def get_profile(self, name: str) -> Dict[str, Any]:
        if name not in PROFILES:
            raise ConfigError(f"unknown profile '{name}' (expected one of {sorted(PROFILES)})")
        return dict(PROFILES[name])


settings = SimConfig()
