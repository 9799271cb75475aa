import logging
from pathlib import Path

from pydantic import ValidationError

from harness.schemas import RunSpec
from models.errors import ConfigError
from utils.config import load_yaml_with_env
from utils.parse import apply_overrides

logger = logging.getLogger(__name__)


def format_validation_errors(exc: ValidationError) -> list[str]:
    """One "dotted.location: message" line per pydantic error."""
    lines = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{location}: {error['msg']}")
    return lines


def load_run_spec(path: str | Path | None, overrides: list[str] | None = None) -> RunSpec:
    """Read a YAML run file, apply --set overrides and validate into a RunSpec.

    Every schema violation is collected into a single ConfigError.
    """
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw = load_yaml_with_env(path)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must contain a mapping of sections")
    try:
        raw = apply_overrides(raw, overrides or [])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    try:
        spec = RunSpec.model_validate(raw)
    except ValidationError as exc:
        lines = format_validation_errors(exc)
        raise ConfigError(f"{len(lines)} configuration error(s):\n  " + "\n  ".join(lines)) from exc
    logger.debug(f"Resolved run spec from {path or 'defaults'} with {len(overrides or [])} override(s)")
    return spec
