"""Application configuration."""
import logging
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

OUTPUT_DIR_DEFAULT = Path("./runs")


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="USDN_SIM_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    # Where `simulate` and `compare` write run artifacts unless --out is given
    output_dir: Path = OUTPUT_DIR_DEFAULT
    default_seeds: int = Field(10, ge=1)
    # >1 runs seeds in a process pool; runs share nothing mutable
    workers: int = Field(1, ge=1)
    warmup_limit_s: float = Field(600.0, gt=0)

    # App
    app_name: str = "uSDN Track Slicing Simulator"
    debug: bool = False
    log_level: str = "INFO"

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: str | None) -> str:
        if v is None or (isinstance(v, str) and v.strip() == ""):
            return "INFO"
        level = str(v).strip().upper()
        # getLevelNamesMapping() is 3.11+; on 3.10 use the same underlying mapping
        names = getattr(logging, "getLevelNamesMapping", lambda: dict(logging._nameToLevel))()
        if level not in names:
            raise ValueError(f"unknown log level {v!r}")
        return level

    @field_validator("output_dir", mode="before")
    @classmethod
    def default_output_dir(cls, v: str | Path | None) -> Path:
        if v is None or (isinstance(v, str) and v.strip() == ""):
            return OUTPUT_DIR_DEFAULT
        return Path(v)


settings = Settings()
