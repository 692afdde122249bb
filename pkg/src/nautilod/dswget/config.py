"""Simulation config: one ``host=manifest [address]`` line per engine."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..rdf import RDFError, load_fixture_web


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    host: str
    manifest: Path
    address: tuple[str, int] | None = None  # TCP mode only


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ConfigError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def load_config(path: str | Path) -> list[EngineConfig]:
    """Read an engine list.

    Lines look like ``dbpedia.org=dbpedia.tsv`` or, for the TCP transport,
    ``dbpedia.org=dbpedia.tsv 127.0.0.1:7101``.  Manifest paths are relative
    to the config file; ``#`` starts a comment.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}") from None
    out: list[EngineConfig] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        host, sep, rest = line.partition("=")
        host = host.strip().lower()
        fields = rest.split()
        if not sep or not host or len(fields) not in (1, 2):
            raise ConfigError(f"{path}:{lineno}: expected 'host=manifest [addr:port]'")
        if host in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate host {host}")
        seen.add(host)
        address = parse_address(fields[1]) if len(fields) == 2 else None
        out.append(EngineConfig(host, path.parent / fields[0], address))
    if not out:
        raise ConfigError(f"{path}: no engines listed")
    return out


def load_stores(configs: list[EngineConfig]):
    """Fixture store for every configured engine, keyed by host."""
    stores = {}
    for c in configs:
        try:
            stores[c.host] = load_fixture_web(c.manifest)
        except RDFError as exc:
            raise ConfigError(str(exc)) from None
    return stores
