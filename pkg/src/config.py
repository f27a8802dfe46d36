from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union
import json
import logging
import os
import re

from dotenv import load_dotenv
from pydantic import ValidationError

from src.schema import ScenarioConfig

load_dotenv()

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
_TRUE = ("1", "true", "yes", "on")
_FALSE = ("", "0", "false", "no", "off")
# validators prefix their messages with the dotted key they are about
_KEY_PREFIX = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*):\s*(.*)$", re.DOTALL)


class ConfigError(ValueError):
    """Invalid scenario configuration; `key` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    show_progress: bool = False
    output_dir: Optional[Path] = None

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Read process settings from the environment (and `.env`).

        Raises:
            ValueError: if a variable holds an unusable value
        """
        log_level = os.getenv("NU_WALK_LOG_LEVEL", "INFO").strip().upper()
        if log_level not in _LOG_LEVELS:
            raise ValueError(f"NU_WALK_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}, got {log_level!r}")

        progress = os.getenv("NU_WALK_PROGRESS", "0").strip().lower()
        if progress not in _TRUE + _FALSE:
            raise ValueError(f"NU_WALK_PROGRESS must be a boolean flag, got {progress!r}")

        output_dir = os.getenv("NU_WALK_OUTPUT_DIR")
        return cls(
            log_level=log_level,
            show_progress=progress in _TRUE,
            output_dir=Path(output_dir) if output_dir else None,
        )


def _error_key(error: dict) -> tuple[str, str]:
    loc_key = ".".join(str(part) for part in error.get("loc", ()))
    message = error.get("msg", "")
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]

    match = _KEY_PREFIX.match(message)
    if match and (not loc_key or match.group(1).startswith(loc_key.split(".")[0])):
        return match.group(1), match.group(2)
    return loc_key or "config", message


def parse_config(text: Union[bytes, str]) -> ScenarioConfig:
    """
    Parse and validate a JSON scenario configuration.

    Args:
        text: UTF-8 JSON document

    Returns:
        The validated ScenarioConfig with defaults filled in

    Raises:
        ConfigError: naming the first offending key
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ConfigError("config", f"not valid UTF-8 ({e.reason})") from e

    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(document, dict):
        raise ConfigError("config", "top level must be a JSON object")

    try:
        return ScenarioConfig.model_validate(document)
    except ValidationError as e:
        key, message = _error_key(e.errors()[0])
        logger.debug(f"Config validation failed with {e.error_count()} error(s)")
        raise ConfigError(key, message) from e


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror}") from e
    config = parse_config(raw)
    logger.info(f"Loaded {config.scenario} config from {path}")
    return config
