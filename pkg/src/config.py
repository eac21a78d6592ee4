"""
Configuration module for tbnorm.
Manages environment-level settings such as the output root and log level.
"""
from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from TBNORM_* environment variables."""

    output_dir: Path = Path("runs")
    log_level: str = "INFO"
    default_seed: int = 0
    environment: str = "development"

    model_config = SettingsConfigDict(
        env_prefix="TBNORM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
