"""Tensor shapes, layer specifications, and elaborated model specifications.

A :class:`ModelSpec` is a fully elaborated backbone: an ordered flat list of
:class:`LayerEntry` records, each tagging its layer with the stage, residual
block, and branch role it belongs to. The flat list is the single source of
truth; accounting walks it per layer and the numeric kernel regroups it into
residual segments via the annotations.

Spatial tuples (kernel, padding, dilation) are in (freq, time) order,
matching the (channels, freq, time) tensor layout. Strides always travel as
:class:`~stride_lab.strides.StridePair` values with named components, so the
two orders never mix silently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from .strides import StridePair, TrellisPath

__all__ = [
    "Activation",
    "Add",
    "BatchNorm2d",
    "BlockKind",
    "ComplexityReport",
    "Conv2d",
    "Family",
    "FullyConnected",
    "GlobalAvgPool",
    "Layer",
    "LayerEntry",
    "MaxPool2d",
    "ModelSpec",
    "Res2NetConv",
    "ShortcutKind",
    "SqueezeExcite",
    "StageSpec",
    "TemporalStatsPool",
    "TensorShape",
]


@dataclass(frozen=True)
class TensorShape:
    """A (channels, freq, time) feature-map shape; every field >= 1."""

    channels: int
    freq: int
    time: int

    def __post_init__(self) -> None:
        for name in ("channels", "freq", "time"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.freq, self.time)


class Family(enum.Enum):
    ORIGINAL_RESNET = "original_resnet"
    MODIFIED_RESNET = "modified_resnet"
    GEMINI_RESNET = "gemini_resnet"
    DF_RESNET = "df_resnet"
    SD_RESNET = "sd_resnet"


class BlockKind(enum.Enum):
    BASIC = "basic"
    BOTTLENECK = "bottleneck"
    DF_INVERTED = "df_inverted"


class ShortcutKind(enum.Enum):
    IDENTITY = "identity"
    SUBSAMPLE = "subsample"
    PROJECTION = "projection"


def _check_positive(name: str, value: int) -> None:
    if not isinstance(value, int) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class Conv2d:
    name: str
    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: StridePair = StridePair(1, 1)
    padding: tuple[int, int] = (0, 0)
    dilation: tuple[int, int] = (1, 1)
    groups: int = 1
    bias: bool = False

    def __post_init__(self) -> None:
        _check_positive("in_channels", self.in_channels)
        _check_positive("out_channels", self.out_channels)
        _check_positive("groups", self.groups)
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"{self.name}: channels ({self.in_channels} -> {self.out_channels}) "
                f"must be divisible by groups ({self.groups})"
            )
        if any(k < 1 for k in self.kernel) or any(d < 1 for d in self.dilation):
            raise ValueError(f"{self.name}: kernel and dilation components must be >= 1")
        if any(p < 0 for p in self.padding):
            raise ValueError(f"{self.name}: padding components must be >= 0")


@dataclass(frozen=True)
class MaxPool2d:
    name: str
    kernel: tuple[int, int]
    stride: StridePair
    padding: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class BatchNorm2d:
    name: str
    channels: int

    def __post_init__(self) -> None:
        _check_positive("channels", self.channels)


@dataclass(frozen=True)
class Activation:
    name: str
    fn: str = "relu"

    def __post_init__(self) -> None:
        if self.fn not in ("relu", "sigmoid"):
            raise ValueError(f"unsupported activation {self.fn!r}")


@dataclass(frozen=True)
class Add:
    """Residual merge; carries the shortcut kind and the block's stride."""

    name: str
    shortcut: ShortcutKind
    stride: StridePair = StridePair(1, 1)


@dataclass(frozen=True)
class SqueezeExcite:
    """Channel attention: pooled squeeze, two fully connected layers, scale."""

    name: str
    channels: int
    reduction: int

    def __post_init__(self) -> None:
        _check_positive("channels", self.channels)
        if self.reduction < 1:
            raise ValueError("reduction ratio must be >= 1")
        if self.channels % self.reduction:
            raise ValueError(
                f"{self.name}: channels ({self.channels}) must be divisible by reduction ({self.reduction})"
            )


@dataclass(frozen=True)
class Res2NetConv:
    """Hierarchical multi-scale replacement for a 3x3 conv: the channel
    dimension splits into ``scale`` equal groups, the first passes through,
    each later group is convolved after adding the previous group's output."""

    name: str
    channels: int
    scale: int
    kernel: tuple[int, int] = (3, 3)
    padding: tuple[int, int] = (1, 1)

    def __post_init__(self) -> None:
        if self.scale < 2:
            raise ValueError("res2net scale must be >= 2")
        if self.channels % self.scale:
            raise ValueError(
                f"{self.name}: channels ({self.channels}) must split evenly into scale ({self.scale})"
            )

    @property
    def width(self) -> int:
        return self.channels // self.scale


@dataclass(frozen=True)
class TemporalStatsPool:
    """Mean and standard deviation over time per (channel, freq) cell,
    concatenated into a vector of length 2 * channels * freq."""

    name: str


@dataclass(frozen=True)
class GlobalAvgPool:
    """Channel-wise mean over both spatial dimensions."""

    name: str


@dataclass(frozen=True)
class FullyConnected:
    name: str
    in_dim: int
    out_dim: int
    bias: bool = True

    def __post_init__(self) -> None:
        _check_positive("in_dim", self.in_dim)
        _check_positive("out_dim", self.out_dim)


Layer = Union[
    Conv2d,
    MaxPool2d,
    BatchNorm2d,
    Activation,
    Add,
    SqueezeExcite,
    Res2NetConv,
    TemporalStatsPool,
    GlobalAvgPool,
    FullyConnected,
]


class Role(enum.Enum):
    MAIN = "main"
    SHORTCUT = "shortcut"


@dataclass(frozen=True)
class LayerEntry:
    """One layer in the flat elaboration, tagged with its structural slot.

    ``stage`` is 1 for the stem, 2..5 for residual stages, 0 for the head.
    ``block`` numbers residual blocks within a stage (1-based) and is None
    for plumbing outside blocks (stem, downsampling convs, head).
    """

    layer: Layer
    stage: int
    block: int | None = None
    role: Role = Role.MAIN


@dataclass(frozen=True)
class StageSpec:
    """Descriptor for one residual stage."""

    index: int
    kind: BlockKind
    width: int
    out_channels: int
    num_blocks: int
    stride: StridePair
    separate_downsample: bool = False


@dataclass(frozen=True)
class ModelSpec:
    """A fully elaborated backbone specification."""

    family: Family
    depth_label: int
    base_channels: int
    embedding_dim: int
    input_freq_bins: int
    path: TrellisPath
    stages: tuple[StageSpec, ...]
    entries: tuple[LayerEntry, ...]
    se_reduction: int | None = None
    res2net_scale: int | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def display_name(self) -> str:
        base = {
            Family.ORIGINAL_RESNET: "original ResNet",
            Family.MODIFIED_RESNET: "modified ResNet",
            Family.GEMINI_RESNET: "Gemini ResNet",
            Family.DF_RESNET: "DF-ResNet",
            Family.SD_RESNET: "SD-ResNet",
        }[self.family]
        extras = []
        if self.se_reduction:
            extras.append("SE")
        if self.res2net_scale:
            extras.append(f"Res2Net(s={self.res2net_scale})")
        suffix = f" + {' + '.join(extras)}" if extras else ""
        return f"{base}{self.depth_label}{suffix}"

    def layers(self) -> tuple[Layer, ...]:
        return tuple(entry.layer for entry in self.entries)

    def segments(self) -> tuple["Segment", ...]:
        """Group the flat entry list into linear and residual-block segments."""
        segments: list[Segment] = []
        pending: list[LayerEntry] = []

        def flush() -> None:
            if pending:
                segments.append(Segment(kind="linear", entries=tuple(pending)))
                pending.clear()

        i = 0
        entries = self.entries
        while i < len(entries):
            entry = entries[i]
            if entry.block is None:
                pending.append(entry)
                i += 1
                continue
            flush()
            j = i
            key = (entry.stage, entry.block)
            while j < len(entries) and entries[j].block is not None and (
                entries[j].stage,
                entries[j].block,
            ) == key:
                j += 1
            segments.append(Segment(kind="block", entries=tuple(entries[i:j])))
            i = j
        flush()
        return tuple(segments)


@dataclass(frozen=True)
class Segment:
    """A run of entries: either purely sequential or one residual block."""

    kind: str  # "linear" | "block"
    entries: tuple[LayerEntry, ...]

    def merge_layer(self) -> Add:
        for entry in self.entries:
            if isinstance(entry.layer, Add):
                return entry.layer
        raise ValueError("residual segment without an add layer")


@dataclass(frozen=True)
class ComplexityReport:
    """Exact parameter and multiply-accumulate counts for a model."""

    params_total: int
    params_by_layer: tuple[tuple[str, int], ...]
    flops_total: int | None = None
    flops_by_layer: tuple[tuple[str, int], ...] | None = None
    input_shape: TensorShape | None = None

    def __post_init__(self) -> None:
        if self.params_total != sum(v for _, v in self.params_by_layer):
            raise ValueError("params_total must equal the sum of per-layer entries")
        if self.flops_by_layer is not None:
            if self.flops_total != sum(v for _, v in self.flops_by_layer):
                raise ValueError("flops_total must equal the sum of per-layer entries")

    @property
    def params_millions(self) -> float:
        return self.params_total / 1e6

    @property
    def flops_giga(self) -> float | None:
        if self.flops_total is None:
            return None
        return self.flops_total / 1e9
