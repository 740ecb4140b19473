from __future__ import annotations

import logging

import torch

from app.config import Settings, get_settings
from app.observability.observability_manager import ObservabilityManager

# ---- Singletons (lazily initialized) ----

_obs_manager: ObservabilityManager | None = None
_run_id: str | None = None
_torch_configured = False


def dep_settings() -> Settings:
    return get_settings()


def dep_observability(settings: Settings | None = None) -> ObservabilityManager:
    global _obs_manager
    if _obs_manager is None:
        _obs_manager = ObservabilityManager(settings or dep_settings())
    return _obs_manager


def dep_run_id() -> str:
    """One id per CLI invocation."""
    global _run_id
    if _run_id is None:
        _run_id = ObservabilityManager.generate_run_id()
    return _run_id


def configure_runtime(settings: Settings | None = None) -> None:
    global _torch_configured
    if _torch_configured:
        return
    settings = settings or dep_settings()
    logging.getLogger().setLevel(settings.log_level.upper())
    if settings.torch_threads > 0:
        torch.set_num_threads(settings.torch_threads)
    _torch_configured = True
