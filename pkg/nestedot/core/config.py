"""
Application configuration management using Pydantic Settings
Handles environment variables and solver defaults
"""

from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Main application settings"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="NESTEDOT_",
        case_sensitive=True,
        extra="ignore",
    )

    # Application Settings
    APP_NAME: str = "nestedot"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: Literal["json", "text"] = "json"
    LOG_FILE: Optional[str] = None
    LOG_MAX_BYTES: int = 10 * 1024 * 1024  # 10MB
    LOG_BACKUP_COUNT: int = 5

    # Execution
    THREADS: int = Field(1, ge=1)

    # Numerical tolerances
    PROBABILITY_TOLERANCE: float = 1e-12
    MARGINAL_TOLERANCE: float = 1e-10

    # Solver defaults
    EXACT_METHOD: Literal["simplex", "highs"] = "simplex"
    SINKHORN_TOL: float = Field(1e-9, gt=0)
    SINKHORN_MAX_ITER: int = Field(10000, ge=1)
    SINKHORN_LOG_DOMAIN: bool = True
    GAMMA_DIVISOR: float = Field(30.0, gt=0)

    # CLI output
    FLOAT_FORMAT: str = ".12g"


@lru_cache()
def get_settings() -> Settings:
    """
    Create cached settings instance
    This ensures settings are loaded only once
    """
    return Settings()


# Global settings instance
settings = get_settings()
