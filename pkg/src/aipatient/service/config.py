"""Service configuration: one JSON document, validated at startup."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from aipatient.adapters import AdapterParams, CallLog, HttpAdapter, LMAdapter, MockAdapter
from aipatient.mocks import build_identity_mock


class ConfigError(Exception):
    pass


class AdapterConfig(BaseModel):
    kind: Literal["mock", "http"] = "mock"
    endpoint: Optional[str] = None
    model: str = "mock"
    api_key_env: Optional[str] = None  # env var name only; keys never live in config
    temperature: float = 1.0
    max_output_tokens: int = Field(default=4096, gt=0)


class ServiceConfig(BaseModel):
    kg_path: str
    adapter: AdapterConfig = AdapterConfig()
    listen_host: str = "127.0.0.1"
    listen_port: int = Field(default=8000, ge=1, le=65535)
    session_idle_timeout_s: float = Field(default=3600.0, gt=0)
    prompt_dir: Optional[str] = None
    expose_trace: bool = True
    random_seed: Optional[int] = None


def load_config(path: str | Path) -> ServiceConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    try:
        config = ServiceConfig.model_validate(payload)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid config: {details}") from exc
    if config.adapter.kind == "http" and not config.adapter.endpoint:
        raise ConfigError("invalid config: adapter.endpoint is required when adapter.kind is http")
    return config


def build_adapter(config: AdapterConfig, call_log: CallLog | None = None) -> LMAdapter:
    if config.kind == "mock":
        return build_identity_mock(call_log=call_log)
    params = AdapterParams(
        model=config.model,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
        endpoint=config.endpoint,
        api_key_env=config.api_key_env,
    )
    return HttpAdapter(params, call_log=call_log)
