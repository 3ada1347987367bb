"""
Configuration management.
Process-level settings; experiment parameters live in config documents
(see `src.config_loader`).
"""

from typing import Optional

from dotenv import load_dotenv
from pydantic import field_validator
from pydantic_settings import BaseSettings

# Explicitly load .env file before Settings
load_dotenv(override=True)


class Settings(BaseSettings):
    # Logging
    log_level: str = "INFO"
    log_json: bool = False

    # Execution
    workers: int = 1
    output_dir: str = "runs"

    # Repository defaults layered under every experiment document
    defaults_path: str = "config.yaml"

    class Config:
        env_prefix = "LOSAW_"
        env_file = ".env"
        extra = "ignore"

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()

    @field_validator("workers")
    @classmethod
    def _positive_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be >= 1")
        return value


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
