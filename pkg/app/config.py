from pydantic_settings import BaseSettings
from pydantic import Field


class Settings(BaseSettings):
    # Sampling defaults
    DEFAULT_SEED: int = Field(20240611, alias="DEFAULT_SEED")
    DEFAULT_SAMPLES: int = Field(1000, alias="DEFAULT_SAMPLES")
    DEFAULT_THREADS: int = Field(1, alias="DEFAULT_THREADS")  # 0 = one worker per CPU
    CHUNK_SIZE: int = Field(256, alias="CHUNK_SIZE")

    # Vectorized engine: max rows x darts held in memory per batch
    BATCH_ELEMENT_LIMIT: int = Field(1_000_000, alias="BATCH_ELEMENT_LIMIT")

    # =========================================================================
    # Exact enumeration guards
    # =========================================================================

    MATCHING_ENUMERATION_MAX_N: int = Field(16, alias="MATCHING_ENUMERATION_MAX_N")  # 15!! = 2,027,025
    EXACT_CASE_LIMIT: int = Field(10_000_000, alias="EXACT_CASE_LIMIT")
    STIRLING_MAX_M: int = Field(64, alias="STIRLING_MAX_M")

    # Output
    FLOAT_DIGITS: int = Field(17, alias="FLOAT_DIGITS")

    # Logging
    LOG_LEVEL: str = Field("INFO", alias="LOG_LEVEL")

    # Run ledger (empty string disables it)
    RUN_LOG_FILE: str = Field("logs/runs.jsonl", alias="RUN_LOG_FILE")

    # verify --quick divides sample counts by this
    VERIFY_QUICK_DIVISOR: int = Field(100, alias="VERIFY_QUICK_DIVISOR")

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
    }


def get_settings() -> Settings:
    return Settings()

# public instance
settings: Settings = get_settings()
