"""Runtime configuration.

Precedence, highest first: CLI flags > environment variables (SUBHOP_*)
> config file (JSON) > built-in defaults. The API key is only ever read
from the environment or the config file, never from a CLI flag.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ConfigError

ENV_PREFIX = "SUBHOP_"


@dataclass
class Config:
    backend: str = "stub"              # stub | remote
    endpoint: str = ""
    model: str = "gpt-4o-mini"
    api_key: str = ""
    embedder: str = "hash"
    embedding_dim: int = 256
    k_triples: int = 5                 # triples retrieved per sub-question
    k_docs: int = 5                    # passages retrieved in the fallback
    max_subquestions: int = 6
    llm_budget: int = 25               # gateway calls per question
    parallelism: int = 4
    max_tokens: int = 512
    retry_limit: int = 3
    backoff_base: float = 0.5
    request_timeout: float = 30.0
    extract_char_budget: int = 8000
    decomposition: bool = True         # ablation: False = single-element plans
    rewriting: bool = True             # ablation: False = literal substitution only
    graph_update: bool = True          # ablation: False = no fallback write-back
    templates_dir: str = ""            # empty = packaged defaults
    snapshot_dir: str = "snapshot"
    run_dir: str = "runs"
    stub_script: str = ""
    corpus: str = ""                   # optional corpus path override
    wire_log: str = ""

    def validate(self) -> None:
        if self.backend not in ("stub", "remote"):
            raise ConfigError(f"backend must be 'stub' or 'remote', got {self.backend!r}")
        for name in ("k_triples", "k_docs", "max_subquestions", "llm_budget",
                     "parallelism", "embedding_dim", "max_tokens"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if self.backend == "remote" and not self.endpoint:
            raise ConfigError("remote backend requires an endpoint")

    def public_dict(self) -> dict:
        """Config snapshot for reports and traces; never includes the key."""
        data = dataclasses.asdict(self)
        data.pop("api_key", None)
        return data


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Config)}


def _coerce(name: str, raw: str) -> object:
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {name}={raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {name}={raw!r}") from None
    return raw


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, object] | None = None,
) -> Config:
    """Merge defaults, config file, environment and explicit overrides."""
    values: dict[str, object] = {}

    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config file: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")
        for name, value in raw.items():
            if name not in _FIELD_TYPES:
                raise ConfigError(f"unknown config field {name!r}")
            values[name] = value

    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        env_name = ENV_PREFIX + name.upper()
        if env_name in env:
            values[name] = _coerce(name, env[env_name])

    if overrides:
        for name, value in overrides.items():
            if name not in _FIELD_TYPES:
                raise ConfigError(f"unknown config field {name!r}")
            if value is not None:
                values[name] = value

    config = Config(**values)
    config.validate()
    return config
