import os
from pathlib import Path

import yaml
from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

BASE_DIR = Path(__file__).resolve().parent.parent
ENV_PATH = BASE_DIR / ".env"


class EnvSettings(BaseSettings):
    DALD_DATA_DIR: Path = BASE_DIR / "datasets"
    DALD_OUTPUT_DIR: Path = BASE_DIR / "out"
    DALD_LOG_LEVEL: str = "INFO"
    DALD_MAX_WORKERS: int = 1

    @field_validator("DALD_LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        if not isinstance(v, str):
            raise ValueError("DALD_LOG_LEVEL must be a string")
        return v.strip().upper()

    @field_validator("DALD_MAX_WORKERS")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        if v < 1:
            raise ValueError("DALD_MAX_WORKERS must be >= 1")
        return v

    model_config = SettingsConfigDict(env_file=ENV_PATH, case_sensitive=True, extra="ignore")


def load_yaml_with_env(path):
    with open(path) as f:
        raw_yaml = f.read()
    # interpolate ${VAR} with os.environ
    for key, value in os.environ.items():
        raw_yaml = raw_yaml.replace(f"${{{key}}}", value)
    return yaml.safe_load(raw_yaml) or {}


class Settings:
    def __init__(self):
        self.env = EnvSettings()

    @property
    def DATA_DIR(self) -> Path:
        return Path(self.env.DALD_DATA_DIR)

    @property
    def OUTPUT_DIR(self) -> Path:
        return Path(self.env.DALD_OUTPUT_DIR)

    @property
    def MAX_WORKERS(self) -> int:
        return self.env.DALD_MAX_WORKERS

    @property
    def LOG_LEVEL(self) -> str:
        return self.env.DALD_LOG_LEVEL


settings = Settings()
