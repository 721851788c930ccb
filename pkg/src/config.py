from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    environment_name: str = "local"
    redis_url: str | None = None
    max_qubits: int = 12
    max_exact_qubits: int = 6
    log_level: str = "INFO"
    results_dir: str = "results"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8"
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()
