"""Run configuration: plain key=value files merged under command-line flags
(flags win), plus output manifests that make every stage re-runnable.

Config files hold one `key = value` per line; `#` starts a comment. Keys
use the flag names with dashes turned into underscores. The INCOFORGE_CONFIG
environment variable names a default config file.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Any

__all__ = [
    "ENV_CONFIG",
    "parse_kv_file",
    "coerce",
    "resolve_options",
    "dict_hash",
    "write_manifest",
]

ENV_CONFIG = "INCOFORGE_CONFIG"


def parse_kv_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(raw: str, like: Any) -> Any:
    """Parse a config-file string to the type of the flag's default."""
    if isinstance(like, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def resolve_options(args, defaults: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    """Final option values: flag if given, else config file, else default.

    Flags must be declared with default=None so "not given" is detectable.
    Returns the fully resolved mapping and writes it back onto args.
    """
    file_cfg: dict[str, str] = {}
    path = config_path or os.environ.get(ENV_CONFIG)
    if path:
        file_cfg = parse_kv_file(path)
    resolved: dict[str, Any] = {}
    for key, default in defaults.items():
        given = getattr(args, key, None)
        if given is not None:
            value = given
        elif key in file_cfg:
            value = coerce(file_cfg[key], default)
        else:
            value = default
        resolved[key] = value
        setattr(args, key, value)
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise ValueError(f"config file sets unknown keys: {sorted(unknown)}")
    return resolved


def dict_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    output_path: str,
    command: str,
    resolved: dict[str, Any],
    inputs: dict[str, str] | None = None,
    extra: dict | None = None,
) -> str:
    """Write <output>.manifest.json beside an output file. The manifest
    carries everything needed to re-run the stage: the resolved config, its
    hash, and content hashes of inputs and the output."""
    manifest = {
        "command": command,
        "config": resolved,
        "config_hash": dict_hash(resolved),
        "inputs": {
            name: _file_hash(p) for name, p in (inputs or {}).items() if p and os.path.exists(p)
        },
        "output": _file_hash(output_path) if os.path.exists(output_path) else None,
    }
    if extra:
        manifest.update(extra)
    path = f"{output_path}.manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path
