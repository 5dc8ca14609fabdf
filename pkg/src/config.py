from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    output_root: Path = Path("runs")
    vehicle_config: Path = Path("config/vehicle/default.yaml")

    rollout_workers: int = 1

    checkpoint_interval: int = 10_000
    return_window: int = 10

    log_level: str = "INFO"
    log_format: str = "console"


settings = Settings()
