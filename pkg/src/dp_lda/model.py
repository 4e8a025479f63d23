from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .cgs import Hyperparams
from .lp import FlipConfig

LIST_FIELDS = {"values", "seeds"}

KEY_ALIASES = {
    "K": "topics",
    "n_iters": "iters",
    "output": "out",
    "output_dir": "out",
    "stopword_path": "stopwords",
}


class Mechanism(StrEnum):
    PLAIN = "plain"
    MONITORED_WORD = "monitored-word"
    MONITORED_DOC = "monitored-doc"
    LP = "lp"
    LAPLACE = "laplace"


class RunConfig(BaseModel):
    """
    Everything a run needs. Loaded from a flat `key = value` file, with
    command-line flags applied on top.
    """

    model_config = ConfigDict(extra="forbid")

    # data
    train: Path | None = None
    test: Path | None = None
    stopwords: Path | None = None
    top_v: int = Field(1000, ge=1)
    n_test: int = Field(0, ge=0)
    model: Path | None = None
    replay: Path | None = None
    out: Path = Path("out")

    # model
    topics: int = Field(50, ge=1)
    alpha: float = Field(0.1, gt=0)
    beta: float = Field(0.01, gt=0)
    iters: int = Field(300, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    fold_in_iters: int = Field(50, ge=0)

    # privacy
    mechanism: Mechanism = Mechanism.PLAIN
    f: float | None = Field(None, gt=0, le=1)
    epsilon: float | None = Field(None, gt=0)

    # sweeps
    values: list[float] = []
    value_kind: Literal["f", "epsilon"] = "f"
    seeds: list[int] = []
    workers: int = Field(1, ge=1)

    # synthetic corpora
    docs: int = Field(1000, ge=1)
    test_docs: int = Field(200, ge=0)
    vocab_size: int = Field(200, ge=1)
    doc_len: int = Field(50, ge=1)
    planted_topics: int = Field(5, ge=1)

    # oracle
    instances: int = Field(200, ge=1)
    max_topics: int = Field(4, ge=2)
    max_removed: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _check_privacy_parameters(self) -> "RunConfig":
        if self.mechanism is Mechanism.LP and self.f is not None and self.epsilon is not None:
            raise ValueError("lp takes either f or epsilon, not both")
        if self.mechanism is Mechanism.LAPLACE and self.f is not None:
            raise ValueError("laplace is configured by epsilon; f does not apply")
        if self.values:
            return self
        if self.mechanism is Mechanism.LP and self.f is None and self.epsilon is None and self.replay is None:
            raise ValueError("lp needs f or epsilon (or values for a sweep)")
        if self.mechanism is Mechanism.LAPLACE and self.epsilon is None:
            raise ValueError("laplace needs epsilon (or values for a sweep)")
        return self

    @property
    def hyper(self) -> Hyperparams:
        return Hyperparams(K=self.topics, alpha=self.alpha, beta=self.beta)

    @property
    def flip(self) -> FlipConfig:
        if self.f is not None:
            return FlipConfig(f=self.f)
        if self.epsilon is not None:
            return FlipConfig.from_epsilon(self.epsilon)
        raise ValueError("lp needs f or epsilon")

    @property
    def sweep_seeds(self) -> list[int]:
        return self.seeds or [self.seed]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        return cls(**{KEY_ALIASES.get(k, k): v for k, v in data.items()})

    @classmethod
    def from_file(cls, filepath: str | Path) -> "RunConfig":
        return cls.from_dict(parse_key_values(Path(filepath)))

    def merged(self, overrides: dict[str, Any]) -> "RunConfig":
        """A new config with the non-None overrides applied (and re-validated)."""
        data = self.model_dump(exclude_unset=True)
        data.update({KEY_ALIASES.get(k, k): v for k, v in overrides.items() if v is not None})
        return RunConfig(**data)


def parse_key_values(path: Path) -> dict[str, Any]:
    data: dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = KEY_ALIASES.get(key, key)
            if key in LIST_FIELDS:
                data[key] = [v.strip() for v in value.split(",") if v.strip()]
            else:
                data[key] = value
    return data


class RunMetadata(BaseModel):
    mechanism: str
    K: int
    alpha: float
    beta: float
    n_iters: int
    seed: int
    f: float | None = None
    local_epsilon: float | None = None
    epsilon: float | None = None
    laplace_scale: float | None = None
    binary_encoding: bool = False
    total_eps: float | None = None
    notes: list[str] = []
    config: dict[str, Any] = {}
    inputs: dict[str, str] = {}


class LedgerSummary(BaseModel):
    level: str
    N: int
    total_eps: float
    n_iters: int
    records: int
    note: str
    config: dict[str, Any] = {}
    inputs: dict[str, str] = {}
