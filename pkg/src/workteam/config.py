"""Service and CLI configuration: one self-describing JSON document.

Precedence: CLI flags > environment variables > config file > defaults.
Relative paths inside a config file resolve against the file's directory.
Secrets (API keys, auth tokens) are never stored in the file; the file names
the environment variable that holds them.

Backend kinds per role (supervisor/orchestrator/filler/tools):
  scripted — deterministic replay from a script file
  http     — chat-completions endpoint
  echo     — rule-based fake that reproduces gold workflows (evaluation only)
  garbage  — fake that never produces parseable output (failure-path checks)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from .agents import EngineConfig, EngineDeps
from .gateway import Backend, HttpBackend, ScriptedBackend, load_script
from .registry import Registry, load_registry
from .retrieval import ComponentFilter, Embedder, HashEmbedder, HttpEmbedder
from .evaluation.dataset import DatasetSample
from .evaluation.harness import make_echo_deps, make_garbage_deps

ROLES = ("supervisor", "orchestrator", "filler", "tools")

ENV_PREFIX = "WORKTEAM_"


class ConfigError(ValueError):
    pass


@dataclass
class BackendConfig:
    kind: str = "http"
    script_path: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = None
    timeout: float = 60.0


@dataclass
class EmbedderConfig:
    kind: str = "hash"
    dimension: int = 256
    endpoint: Optional[str] = None
    token_env: Optional[str] = None
    timeout: float = 30.0


@dataclass
class RegistryPaths:
    components: str = "components.json"
    descriptions: str = "param_descriptions.json"
    templates: str = "blank_templates.json"


@dataclass
class ServiceConfig:
    registry: RegistryPaths = field(default_factory=RegistryPaths)
    backends: dict[str, BackendConfig] = field(
        default_factory=lambda: {role: BackendConfig() for role in ROLES}
    )
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    k: int = 10
    max_reflections: int = 2
    max_turns: int = 8
    session_ttl: float = 3600.0
    busy_mode: str = "queue"  # queue | reject
    transcript_dir: Optional[str] = None
    auth_token_env: Optional[str] = None
    registry_strict: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.max_reflections < 0:
            raise ConfigError("max_reflections must be >= 0")
        if self.max_turns < 1:
            raise ConfigError("max_turns must be >= 1")
        if self.busy_mode not in ("queue", "reject"):
            raise ConfigError("busy_mode must be 'queue' or 'reject'")


def _dataclass_from_obj(cls, obj: Mapping[str, Any], where: str):
    fields = {f for f in cls.__dataclass_fields__}
    extra = set(obj) - fields
    if extra:
        raise ConfigError(f"{where}: unknown fields {sorted(extra)}")
    return cls(**obj)


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    return str((base / value).resolve()) if not Path(value).is_absolute() else value


def load_config(
    path: Optional[str | Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Mapping[str, str] = os.environ,
) -> ServiceConfig:
    """Assemble a config from defaults, file, environment, and explicit overrides."""
    data: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must contain a JSON object")
        base = p.parent

    env_overrides: dict[str, Any] = {}
    for key, cast in (
        ("listen_host", str),
        ("listen_port", int),
        ("k", int),
        ("max_reflections", int),
        ("max_turns", int),
        ("session_ttl", float),
        ("busy_mode", str),
        ("transcript_dir", str),
    ):
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                env_overrides[key] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad environment value for {key}: {raw!r}") from exc
    data.update(env_overrides)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})

    registry_obj = data.pop("registry", {})
    backends_obj = data.pop("backends", {})
    embedder_obj = data.pop("embedder", {})

    registry = _dataclass_from_obj(RegistryPaths, registry_obj, "registry")
    registry.components = _resolve(base, registry.components)
    registry.descriptions = _resolve(base, registry.descriptions)
    registry.templates = _resolve(base, registry.templates)

    backends: dict[str, BackendConfig] = {}
    unknown_roles = set(backends_obj) - set(ROLES)
    if unknown_roles:
        raise ConfigError(f"backends: unknown roles {sorted(unknown_roles)}")
    for role in ROLES:
        bc = _dataclass_from_obj(BackendConfig, backends_obj.get(role, {}), f"backends.{role}")
        bc.script_path = _resolve(base, bc.script_path)
        backends[role] = bc

    embedder = _dataclass_from_obj(EmbedderConfig, embedder_obj, "embedder")

    config = _dataclass_from_obj(ServiceConfig, data, "config")
    config.registry = registry
    config.backends = backends
    config.embedder = embedder
    if config.transcript_dir is not None:
        config.transcript_dir = _resolve(base, config.transcript_dir)
    return config


def build_registry(config: ServiceConfig) -> Registry:
    return load_registry(
        config.registry.components,
        config.registry.descriptions,
        config.registry.templates,
        strict=config.registry_strict,
    )


def build_embedder(config: ServiceConfig) -> Embedder:
    emb = config.embedder
    if emb.kind == "hash":
        return HashEmbedder(emb.dimension)
    if emb.kind == "http":
        if not emb.endpoint:
            raise ConfigError("http embedder requires an endpoint")
        token = os.environ.get(emb.token_env, "") if emb.token_env else None
        return HttpEmbedder(emb.endpoint, token or None, emb.timeout)
    raise ConfigError(f"unknown embedder kind {emb.kind!r}")


def engine_config(config: ServiceConfig) -> EngineConfig:
    return EngineConfig(
        k=config.k,
        max_reflections=config.max_reflections,
        max_turns=config.max_turns,
    )


class DepsBuilder:
    """Builds EngineDeps per session/sample from a service config.

    The registry and embedding cache are shared; scripted backends are
    instantiated fresh per call so concurrent sessions cannot interleave each
    other's scripts.
    """

    def __init__(self, config: ServiceConfig, registry: Optional[Registry] = None):
        self.config = config
        self.registry = registry if registry is not None else build_registry(config)
        self.embedder = build_embedder(config)
        self.component_filter = ComponentFilter(self.registry, self.embedder)
        self._scripts = {
            role: load_script(bc.script_path)
            for role, bc in config.backends.items()
            if bc.kind == "scripted"
            if bc.script_path
        }
        for role, bc in config.backends.items():
            if bc.kind == "scripted" and not bc.script_path:
                raise ConfigError(f"backends.{role}: scripted kind requires script_path")
            if bc.kind == "http" and not (bc.endpoint and bc.model):
                raise ConfigError(f"backends.{role}: http kind requires endpoint and model")
            if bc.kind not in ("scripted", "http", "echo", "garbage"):
                raise ConfigError(f"backends.{role}: unknown kind {bc.kind!r}")

    @property
    def kinds(self) -> set[str]:
        return {bc.kind for bc in self.config.backends.values()}

    def _backend(self, role: str) -> Backend:
        bc = self.config.backends[role]
        if bc.kind == "scripted":
            return ScriptedBackend(self._scripts[role], role)
        if bc.kind == "http":
            return HttpBackend(bc.endpoint, bc.model, bc.api_key_env, bc.timeout)
        raise ConfigError(f"backends.{role}: kind {bc.kind!r} cannot serve sessions directly")

    def deps(self, sample: Optional[DatasetSample] = None) -> EngineDeps:
        kinds = self.kinds
        if kinds == {"echo"}:
            if sample is None:
                raise ConfigError("echo backends require a dataset sample (evaluation only)")
            return make_echo_deps(
                self.registry, sample, engine_config(self.config), self.component_filter
            )
        if kinds == {"garbage"}:
            return make_garbage_deps(
                self.registry, engine_config(self.config), self.component_filter
            )
        if kinds & {"echo", "garbage"}:
            raise ConfigError("echo/garbage backends cannot be mixed with other kinds")
        return EngineDeps(
            registry=self.registry,
            component_filter=self.component_filter,
            supervisor=self._backend("supervisor"),
            orchestrator=self._backend("orchestrator"),
            filler=self._backend("filler"),
            tools=self._backend("tools"),
            config=engine_config(self.config),
        )

    def baseline_backend(self, samples: list[DatasetSample]) -> Backend:
        """The generation model for baseline runs (the 'tools' role)."""
        bc = self.config.backends["tools"]
        if bc.kind == "echo":
            from .evaluation.harness import make_echo_baseline_backend

            return make_echo_baseline_backend(samples)
        if bc.kind == "garbage":
            from .evaluation.harness import make_garbage_backend

            return make_garbage_backend()
        return self._backend("tools")
