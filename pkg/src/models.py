"""
Pydantic models for configuration, reports and serialized artifacts.
"""
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

NormKind = Literal["bn", "gn", "cn", "tbbn"]


class AblationFlags(BaseModel):
    """
    Toggles for the three task-balanced components of TBBN.

    All-true is full TBBN; all-false reproduces vanilla BN.
    """

    model_config = ConfigDict(frozen=True)

    balanced_stats_train: bool = True
    balanced_stats_test: bool = True
    balanced_affine: bool = True

    @classmethod
    def vanilla(cls) -> "AblationFlags":
        """Flags that reduce TBBN to plain BN."""
        return cls(
            balanced_stats_train=False,
            balanced_stats_test=False,
            balanced_affine=False,
        )

    @classmethod
    def case(cls, number: int) -> "AblationFlags":
        """
        Named ablation cases.

        Case 1 = (F,T,T), Case 2 = (T,F,T), Case 3 = (T,T,F), Case 4 = (F,F,T).
        """
        cases = {
            1: (False, True, True),
            2: (True, False, True),
            3: (True, True, False),
            4: (False, False, True),
        }
        if number not in cases:
            raise ValueError(f"Unknown ablation case: {number}")
        train, test, affine = cases[number]
        return cls(
            balanced_stats_train=train,
            balanced_stats_test=test,
            balanced_affine=affine,
        )

    @classmethod
    def from_label(cls, label: str) -> "AblationFlags":
        """Inverse of :meth:`label`."""
        label = label.strip().upper()
        if len(label) != 3 or set(label) - {"T", "F"}:
            raise ValueError(f"ablation label must be three of T/F, got {label!r}")
        train, test, affine = (ch == "T" for ch in label)
        return cls(
            balanced_stats_train=train,
            balanced_stats_test=test,
            balanced_affine=affine,
        )

    def label(self) -> str:
        """Compact T/F triple, e.g. 'TTF'."""
        return "".join(
            "T" if flag else "F"
            for flag in (
                self.balanced_stats_train,
                self.balanced_stats_test,
                self.balanced_affine,
            )
        )


class TrainConfig(BaseModel):
    """Knobs for one CIL training run."""

    lr: float = Field(default=0.05, ge=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    epochs: int = Field(default=30, ge=0)
    batch_current: int = Field(default=48, ge=1)
    batch_previous: int = Field(default=16, ge=0)
    seed: int = 0
    norm: NormKind = "bn"
    groups: int = Field(default=4, ge=1)
    ablation: AblationFlags = Field(default_factory=AblationFlags)
    bessel: bool = False
    memory_size: int = Field(default=60, ge=0)
    hidden: int = Field(default=32, ge=1)
    arch: Literal["mlp", "conv"] = "mlp"

    # Oracle affine retraining
    oracle_epochs: int = Field(default=10, ge=0)
    oracle_lr: float = Field(default=0.05, ge=0.0)


class StreamConfig(BaseModel):
    """Synthetic task-stream settings."""

    tasks: int = Field(default=5, ge=1)
    classes_per_task: int = Field(default=2, ge=1)
    dim: int = Field(default=16, ge=1)
    samples_per_class: int = Field(default=200, ge=2)
    class_scale: float = 0.9
    task_shift: float = 1.5
    noise: float = 1.0
    idx_images: Optional[Path] = None
    idx_labels: Optional[Path] = None


# Flat config-file keys (mirroring the CLI flags) -> (section, field).
# A section of None addresses a top-level RunConfig field.
FLAT_KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "experiment": (None, "experiment"),
    "out": (None, "output_dir"),
    "seeds": (None, "seeds"),
    "toy_batches": (None, "toy_batches"),
    "toy_separation": (None, "toy_separation"),
    "mc_batches": (None, "mc_batches"),
    "seed": ("train", "seed"),
    "lr": ("train", "lr"),
    "weight_decay": ("train", "weight_decay"),
    "epochs": ("train", "epochs"),
    "bc": ("train", "batch_current"),
    "bp": ("train", "batch_previous"),
    "norm": ("train", "norm"),
    "groups": ("train", "groups"),
    "ablation": ("train", "ablation"),
    "bessel": ("train", "bessel"),
    "memory_size": ("train", "memory_size"),
    "hidden": ("train", "hidden"),
    "arch": ("train", "arch"),
    "oracle_epochs": ("train", "oracle_epochs"),
    "oracle_lr": ("train", "oracle_lr"),
    "tasks": ("stream", "tasks"),
    "classes_per_task": ("stream", "classes_per_task"),
    "dim": ("stream", "dim"),
    "samples_per_class": ("stream", "samples_per_class"),
    "class_scale": ("stream", "class_scale"),
    "task_shift": ("stream", "task_shift"),
    "noise": ("stream", "noise"),
    "idx_images": ("stream", "idx_images"),
    "idx_labels": ("stream", "idx_labels"),
}


def _emit(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, AblationFlags):
        return value.label()
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def _parse(key: str, text: str):
    text = text.strip()
    if key == "seeds":
        return [int(part) for part in text.split(",") if part.strip()]
    if key == "bessel":
        if text.lower() not in ("on", "off", "true", "false", "1", "0"):
            raise ValueError(f"bessel must be on or off, got {text!r}")
        return text.lower() in ("on", "true", "1")
    if key == "ablation":
        return AblationFlags.from_label(text)
    if key in ("idx_images", "idx_labels") and not text:
        return None
    return text


class RunConfig(BaseModel):
    """Everything an experiment needs; experiments are pure functions of it."""

    experiment: str = "cil-run"
    train: TrainConfig = Field(default_factory=TrainConfig)
    stream: StreamConfig = Field(default_factory=StreamConfig)
    output_dir: Path = Path("runs")
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])

    # toy-gaussian / bias-check
    toy_batches: int = Field(default=2000, ge=1)
    toy_separation: float = Field(default=2.0, ge=0.0)
    mc_batches: int = Field(default=100_000, ge=1)

    @model_validator(mode="after")
    def _check_seeds(self) -> "RunConfig":
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        return self

    def to_flat(self) -> Dict[str, str]:
        """Flat key -> text mapping in FLAT_KEYS order."""
        flat = {}
        for key, (section, name) in FLAT_KEYS.items():
            owner = self if section is None else getattr(self, section)
            flat[key] = _emit(getattr(owner, name))
        return flat

    @classmethod
    def from_flat(cls, values: Mapping[str, Optional[str]]) -> "RunConfig":
        """
        Build a config from flat keys; missing keys keep their defaults.

        Raises:
            ValueError: For an unknown key or an unparsable value
            ValidationError: If a value violates a field constraint
        """
        nested: Dict[str, dict] = {"train": {}, "stream": {}}
        top: Dict[str, object] = {}
        for key, text in values.items():
            if key not in FLAT_KEYS:
                raise ValueError(f"unknown config key: {key}")
            section, name = FLAT_KEYS[key]
            value = _parse(key, text or "")
            if section is None:
                top[name] = value
            else:
                nested[section][name] = value
        return cls(
            train=TrainConfig(**nested["train"]),
            stream=StreamConfig(**nested["stream"]),
            **top,
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a flat ``key=value`` file."""
        return cls.from_flat(dotenv_values(path))

    def to_file(self, path: Union[str, Path]) -> Path:
        """Write a flat ``key=value`` file that :meth:`from_file` reads back."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{key}={text}" for key, text in self.to_flat().items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def with_overrides(self, overrides: Mapping[str, Optional[str]]) -> "RunConfig":
        """Copy with flat keys replaced; ``None`` values are ignored."""
        flat = self.to_flat()
        flat.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_flat(flat)


class BlockReport(BaseModel):
    """Finite-difference agreement for one parameter block."""

    max_rel_error: float
    mean_rel_error: float
    size: int


class GradReport(BaseModel):
    """Result of a finite-difference gradient check."""

    blocks: Dict[str, BlockReport]
    step: float
    threshold: float
    passed: bool

    @computed_field
    @property
    def max_rel_error(self) -> float:
        """Worst relative error over all blocks."""
        if not self.blocks:
            return 0.0
        return max(block.max_rel_error for block in self.blocks.values())


class MetricsReport(BaseModel):
    """The four CIL summary metrics."""

    final_accuracy: float
    average_accuracy: float
    forgetting: float
    learning_accuracy: float


class MisclassCounts(BaseModel):
    """Misclassifications bucketed by source task and predicted task."""

    c_to_p: int = Field(default=0, ge=0)
    c_to_c: int = Field(default=0, ge=0)
    p_to_c: int = Field(default=0, ge=0)
    p_to_p: int = Field(default=0, ge=0)
    task_grid: List[List[int]] = Field(default_factory=list)

    @property
    def total(self) -> int:
        return self.c_to_p + self.c_to_c + self.p_to_c + self.p_to_p

    def largest_bucket(self) -> str:
        """Name of the bucket with the most errors."""
        buckets = {
            "c_to_p": self.c_to_p,
            "c_to_c": self.c_to_c,
            "p_to_c": self.p_to_c,
            "p_to_p": self.p_to_p,
        }
        return max(buckets, key=buckets.get)


class MeanBiasReport(BaseModel):
    """Gap between the uniform task mean and BN's expected batch mean."""

    derived_gap: List[float]
    printed_gap: List[float]
    expected_bn_mean: List[float]
    population_mean: List[float]


class CheckpointManifest(BaseModel):
    """JSON half of a TBNORM1 checkpoint."""

    magic: str = "TBNORM1"
    arch: str
    norm: NormKind
    hidden: int
    groups: int
    in_shape: List[int]
    num_classes: int
    ablation: AblationFlags
    bessel: bool
    tensors: List[Dict[str, object]]
