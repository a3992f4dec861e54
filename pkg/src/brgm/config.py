"""Seeding and flat ``key=value`` run configuration files."""

from __future__ import annotations

import os
import zlib
from pathlib import Path

import numpy as np

from .errors import ConfigError

STREAMS = ("init", "mc", "percept", "sampler")
SEED_ENV = "BRGM_SEED"


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named consumer of ``seed``.

    The stream key is a hash of the name, so adding a new consumer never
    shifts the draws of an existing one.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def stream_seed(seed: int, name: str) -> int:
    """Integer seed derived from a named stream (for seeded constructors)."""
    return int(rng_stream(seed, name).integers(0, 2**31 - 1))


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from exc


def read_config(path, allowed: set[str] | None = None) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if allowed is not None and key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def write_config(path, values: dict) -> None:
    lines = [f"{k}={_fmt(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    return str(v)
