"""External-process adapters: command templates or HTTP endpoints.

Config shape (JSON): {"kind": "command"|"http", "command": [..., "{input}", ...],
"url": "...", "timeout_s": 120}. Images cross the boundary as 8-bit PNG files
(command mode) or multipart uploads (HTTP mode).
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AdapterError

DEFAULT_TIMEOUT_S = 120.0


@dataclass
class AdapterConfig:
    kind: str  # "command" | "http"
    command: list[str] = field(default_factory=list)
    url: str = ""
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if self.kind not in ("command", "http"):
            raise AdapterError(f"adapter kind must be 'command' or 'http', got {self.kind!r}")
        if self.kind == "command" and not self.command:
            raise AdapterError("command adapter needs a non-empty command list")
        if self.kind == "http" and not self.url:
            raise AdapterError("http adapter needs a url")

    @classmethod
    def from_dict(cls, raw: dict) -> "AdapterConfig":
        return cls(
            kind=raw.get("kind", "command"),
            command=list(raw.get("command", [])),
            url=raw.get("url", ""),
            timeout_s=float(raw.get("timeout_s", DEFAULT_TIMEOUT_S)),
        )


def run_command_adapter(config: AdapterConfig, substitutions: dict[str, Path]) -> str:
    """Run the command with {placeholder} paths substituted; returns stdout."""
    argv = []
    for token in config.command:
        for key, path in substitutions.items():
            token = token.replace("{" + key + "}", str(path))
        argv.append(token)
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=config.timeout_s
        )
    except subprocess.TimeoutExpired as e:
        raise AdapterError(f"adapter timed out after {config.timeout_s}s: {argv[0]}") from e
    except OSError as e:
        raise AdapterError(f"adapter failed to start: {e}") from e
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip()[-500:]
        raise AdapterError(f"adapter exited {proc.returncode}: {tail}")
    return proc.stdout


def post_http_adapter(config: AdapterConfig, files: dict[str, bytes]) -> bytes:
    """POST named PNG payloads as multipart form data; returns the response body."""
    import requests

    try:
        resp = requests.post(
            config.url,
            files={name: (f"{name}.png", data, "image/png") for name, data in files.items()},
            timeout=config.timeout_s,
        )
    except requests.RequestException as e:
        raise AdapterError(f"http adapter failed: {e}") from e
    if not (200 <= resp.status_code < 300):
        raise AdapterError(f"http adapter returned {resp.status_code}")
    return resp.content
