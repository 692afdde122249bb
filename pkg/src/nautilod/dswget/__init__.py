"""Distributed evaluation: engines that delegate work to each other."""

from .client import ClientTracker, DswgetError, LocalNetwork, partition_by_host
from .config import ConfigError, EngineConfig, load_config, load_stores
from .engine import Engine, ProtocolError
from .messages import DswgetMessage, WireError, decode, encode

__all__ = [
    "ClientTracker",
    "ConfigError",
    "DswgetError",
    "DswgetMessage",
    "Engine",
    "EngineConfig",
    "LocalNetwork",
    "ProtocolError",
    "WireError",
    "decode",
    "encode",
    "load_config",
    "load_stores",
    "partition_by_host",
]
