"""Service configuration: JSON file -> validated settings -> wired Engine.

Relative paths in the file (index_dir, script_file) resolve against the
config file's own directory so a config can travel with its fixtures.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .embedding import LocalHashEmbedder, RemoteEmbedder
from .engine import DEFAULT_HISTORY_WINDOW, Engine
from .llm import RemoteLlmBackend, ScriptedBackend, load_script
from .responder import DEFAULT_QA_REVIEWS_PER_ITEM
from .retrieval import DEFAULT_K, DEFAULT_M, load_index
from .state import DEFAULT_MANDATORY, DEFAULT_SUBKEYS, StateSchema

logger = logging.getLogger(__name__)

KNOWN_KEYS = {
    "index_dir",
    "llm",
    "encoder",
    "k",
    "m",
    "qa_reviews_per_item",
    "mandatory_subkeys",
    "constraint_subkeys",
    "history_window",
    "transcript_dir",
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class LlmSettings:
    backend: str  # "remote" | "scripted"
    base_url: str | None = None
    model: str = "default"
    script_file: Path | None = None


@dataclass(frozen=True)
class EncoderSettings:
    provider: str  # "local" | "remote"
    dim: int = 64
    seed: int = 0
    base_url: str | None = None


@dataclass(frozen=True)
class AppConfig:
    index_dir: Path
    llm: LlmSettings
    encoder: EncoderSettings
    k: int = DEFAULT_K
    m: int = DEFAULT_M
    qa_reviews_per_item: int = DEFAULT_QA_REVIEWS_PER_ITEM
    history_window: int = DEFAULT_HISTORY_WINDOW
    constraint_subkeys: tuple[str, ...] = DEFAULT_SUBKEYS
    mandatory_subkeys: tuple[str, ...] = DEFAULT_MANDATORY
    transcript_dir: Path | None = None


def _require(raw: dict, key: str, path) -> object:
    if key not in raw:
        raise ConfigError(f"config {path} missing required key {key!r}")
    return raw[key]


def _positive_int(raw: dict, key: str, default: int) -> int:
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"config key {key!r} must be a positive integer, got {value!r}")
    return value


def _string_list(raw: dict, key: str, default: tuple[str, ...]) -> tuple[str, ...]:
    value = raw.get(key)
    if value is None:
        return default
    if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
        raise ConfigError(f"config key {key!r} must be a list of non-empty strings")
    return tuple(value)


def load_config(path) -> AppConfig:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file {config_path} does not exist")
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {config_path} must hold a JSON object")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        logger.warning("config %s has unknown keys (ignored): %s", config_path, sorted(unknown))
    base_dir = config_path.parent

    index_dir = _require(raw, "index_dir", config_path)
    if not isinstance(index_dir, str) or not index_dir:
        raise ConfigError("index_dir must be a non-empty string")

    llm_raw = _require(raw, "llm", config_path)
    if not isinstance(llm_raw, dict):
        raise ConfigError("llm section must be an object")
    backend = llm_raw.get("backend")
    if backend not in ("remote", "scripted"):
        raise ConfigError(f"llm.backend must be 'remote' or 'scripted', got {backend!r}")
    script_file = llm_raw.get("script_file")
    base_url = llm_raw.get("base_url")
    if backend == "scripted":
        if not script_file:
            raise ConfigError("llm.backend 'scripted' requires llm.script_file")
        script_file = base_dir / script_file
    else:
        if not base_url:
            raise ConfigError("llm.backend 'remote' requires llm.base_url")
        script_file = None
    llm = LlmSettings(
        backend=backend,
        base_url=base_url,
        model=llm_raw.get("model", "default"),
        script_file=script_file,
    )

    enc_raw = _require(raw, "encoder", config_path)
    if not isinstance(enc_raw, dict):
        raise ConfigError("encoder section must be an object")
    provider = enc_raw.get("provider")
    if provider not in ("local", "remote"):
        raise ConfigError(f"encoder.provider must be 'local' or 'remote', got {provider!r}")
    if provider == "remote" and not enc_raw.get("base_url"):
        raise ConfigError("encoder.provider 'remote' requires encoder.base_url")
    encoder = EncoderSettings(
        provider=provider,
        dim=_positive_int(enc_raw, "dim", 64),
        seed=enc_raw.get("seed", 0),
        base_url=enc_raw.get("base_url"),
    )
    if not isinstance(encoder.seed, int) or isinstance(encoder.seed, bool):
        raise ConfigError("encoder.seed must be an integer")

    transcript_dir = raw.get("transcript_dir")
    return AppConfig(
        index_dir=base_dir / index_dir,
        llm=llm,
        encoder=encoder,
        k=_positive_int(raw, "k", DEFAULT_K),
        m=_positive_int(raw, "m", DEFAULT_M),
        qa_reviews_per_item=_positive_int(raw, "qa_reviews_per_item", DEFAULT_QA_REVIEWS_PER_ITEM),
        history_window=_positive_int(raw, "history_window", DEFAULT_HISTORY_WINDOW),
        constraint_subkeys=_string_list(raw, "constraint_subkeys", DEFAULT_SUBKEYS),
        mandatory_subkeys=_string_list(raw, "mandatory_subkeys", DEFAULT_MANDATORY),
        transcript_dir=(base_dir / transcript_dir) if transcript_dir else None,
    )


def build_engine(config: AppConfig) -> Engine:
    """Load the index and wire the configured backends into an Engine."""
    index = load_index(config.index_dir)

    if config.encoder.provider == "local":
        encoder = LocalHashEmbedder(dim=config.encoder.dim, seed=config.encoder.seed)
    else:
        encoder = RemoteEmbedder(config.encoder.base_url, dim=index.manifest.dim)
    if encoder.provider_id != index.manifest.provider_id:
        raise ConfigError(
            f"encoder {encoder.provider_id!r} does not match the index's embedding space"
            f" {index.manifest.provider_id!r}: queries would be scored in the wrong basis"
        )

    if config.llm.backend == "scripted":
        llm = ScriptedBackend(load_script(config.llm.script_file))
    else:
        llm = RemoteLlmBackend(config.llm.base_url, model=config.llm.model)

    try:
        schema = StateSchema(
            constraint_subkeys=config.constraint_subkeys,
            mandatory_subkeys=config.mandatory_subkeys,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid state schema: {exc}") from exc

    return Engine(
        index,
        llm,
        encoder,
        schema=schema,
        k=config.k,
        m=config.m,
        qa_reviews_per_item=config.qa_reviews_per_item,
        history_window=config.history_window,
    )
