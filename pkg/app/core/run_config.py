"""
Run configuration for the gluing simulator.

RunDefaults reads documented defaults from Pydantic Settings; RunConfig
validates one CLI invocation against them before any work starts.
"""

import logging
from functools import lru_cache
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.gluing import ModelKind, ModelParams

logger = logging.getLogger(__name__)

Command = Literal["sample", "dist", "oracle", "verify", "stirling"]


class RunDefaults:
    """Run defaults loaded from Pydantic Settings."""

    def __init__(self):
        from app.config import settings

        # Sampling
        self.seed: int = settings.DEFAULT_SEED
        self.samples: int = settings.DEFAULT_SAMPLES
        self.threads: int = settings.DEFAULT_THREADS
        self.chunk_size: int = settings.CHUNK_SIZE

        # Verification
        self.quick_divisor: int = settings.VERIFY_QUICK_DIVISOR

    def __repr__(self) -> str:
        return (
            f"RunDefaults(seed={self.seed}, samples={self.samples}, "
            f"threads={self.threads}, chunk_size={self.chunk_size})"
        )


@lru_cache(maxsize=1)
def load_run_defaults() -> RunDefaults:
    defaults = RunDefaults()
    logger.debug("Run defaults loaded - %r", defaults)
    return defaults


class RunConfig(BaseModel):
    """One validated CLI invocation."""

    command: Command
    model: Optional[ModelKind] = None
    n: Optional[int] = Field(None, ge=1)
    m: int = Field(0, ge=0)
    t: int = Field(3, ge=3)
    samples: int = Field(default_factory=lambda: load_run_defaults().samples, ge=1)
    seed: int = Field(default_factory=lambda: load_run_defaults().seed, ge=0, lt=2 ** 64)
    out: Optional[str] = None
    format: Literal["jsonl", "csv"] = "jsonl"
    threads: Union[int, Literal["auto"]] = Field(default_factory=lambda: load_run_defaults().threads)
    only: Optional[str] = None
    quick: bool = False

    @field_validator("threads", mode="before")
    @classmethod
    def _parse_threads(cls, value):
        if isinstance(value, str) and value != "auto":
            return int(value)
        return value

    @field_validator("threads")
    @classmethod
    def _threads_nonnegative(cls, value):
        if value != "auto" and value < 0:
            raise ValueError("threads must be nonnegative or 'auto'")
        return value

    @field_validator("only")
    @classmethod
    def _known_criterion(cls, value):
        from app.core.verification import CRITERIA

        if value is not None and value not in CRITERIA:
            raise ValueError(f"unknown criterion {value!r}; known: {', '.join(CRITERIA)}")
        return value

    @model_validator(mode="after")
    def _model_required(self):
        if self.command in ("sample", "dist", "oracle"):
            if self.model is None or self.n is None:
                raise ValueError(f"{self.command} needs --model and --n")
            self.params()
        if self.command == "dist" and self.samples < 2:
            raise ValueError("dist needs at least 2 samples")
        return self

    def params(self) -> ModelParams:
        """ModelParams of this run; raises InvalidModelParamsError when invalid."""
        return ModelParams(self.model, self.n, self.m, self.t)

    def ledger_fields(self) -> dict:
        fields = {"seed": self.seed, "samples": self.samples}
        if self.model is not None:
            fields.update(model=self.model.value, n=self.n, m=self.m, t=self.t)
        return fields
