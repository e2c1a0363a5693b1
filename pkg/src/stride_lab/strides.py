"""Stride pairs, trellis paths, and the canonical naming scheme.

A backbone's downsampling plan is a five-step sequence of per-stage
(time, frequency) stride pairs, each component restricted to 1 or 2.
Running products of the strides give the cumulative downsampling
factors (alpha_n, beta_n); the pair after stage 5 is the path's
endpoint on the 6x6 trellis grid.

Paths are named by endpoint and rank within their endpoint family:

* ``T{a}{b}`` / ``F{a}{b}`` for time-priority (alpha < beta) and
  frequency-priority (alpha > beta) endpoints, where ``a = log2 alpha5``
  and ``b = log2 beta5``;
* ``MOD`` and ``ORI`` for the two reserved equal-stride configurations,
  other equal paths get ``E{a}{a}``;
* the family's latest-downsampling path carries the bare name, alternate
  paths to the same endpoint carry a deterministic letter suffix
  (``b``, ``c``, ...).
"""

from __future__ import annotations

import enum
import functools
import itertools
import re
from dataclasses import dataclass

__all__ = [
    "PathClass",
    "StridePair",
    "TrellisPath",
    "UnknownConfigError",
    "canonical_name",
    "classify_path",
    "downsampling_factors",
    "final_factors",
    "iter_all_paths",
    "paths_to_endpoint",
    "resolve_name",
]

NUM_STAGES = 5

#: Allowed per-dimension stride values.
STRIDE_VALUES = (1, 2)

#: Valid cumulative downsampling factors after stage 5.
ENDPOINT_FACTORS = (1, 2, 4, 8, 16, 32)


class PathClass(enum.Enum):
    """Which resolution a stride configuration preserves."""

    TIME_PRIORITY = "time_priority"
    EQUAL = "equal"
    FREQUENCY_PRIORITY = "frequency_priority"


class UnknownConfigError(ValueError):
    """Raised when a configuration name cannot be resolved to a path."""


@dataclass(frozen=True)
class StridePair:
    """Per-stage stride: ``time`` and ``freq`` components, each 1 or 2."""

    time: int
    freq: int

    def __post_init__(self) -> None:
        for value in (self.time, self.freq):
            if value not in STRIDE_VALUES:
                raise ValueError(f"stride components must be 1 or 2, got {value}")

    def is_unit(self) -> bool:
        return self.time == 1 and self.freq == 1


@dataclass(frozen=True)
class TrellisPath:
    """A stride configuration: exactly five sequential stride pairs."""

    steps: tuple[StridePair, ...]
    label: str | None = None

    def __post_init__(self) -> None:
        if len(self.steps) != NUM_STAGES:
            raise ValueError(f"a path has exactly {NUM_STAGES} steps, got {len(self.steps)}")
        if not all(isinstance(step, StridePair) for step in self.steps):
            raise TypeError("path steps must be StridePair values")

    @classmethod
    def from_lists(
        cls,
        time_strides: tuple[int, ...] | list[int],
        freq_strides: tuple[int, ...] | list[int],
        label: str | None = None,
    ) -> "TrellisPath":
        if len(time_strides) != len(freq_strides):
            raise ValueError("time and freq stride lists must have equal length")
        steps = tuple(StridePair(t, f) for t, f in zip(time_strides, freq_strides))
        return cls(steps=steps, label=label)

    @property
    def time_strides(self) -> tuple[int, ...]:
        return tuple(step.time for step in self.steps)

    @property
    def freq_strides(self) -> tuple[int, ...]:
        return tuple(step.freq for step in self.steps)

    def relabeled(self, label: str) -> "TrellisPath":
        return TrellisPath(steps=self.steps, label=label)


def downsampling_factors(path: TrellisPath) -> tuple[tuple[int, int], ...]:
    """Cumulative (alpha_n, beta_n) after each stage, n = 1..5."""
    factors = []
    alpha = beta = 1
    for step in path.steps:
        alpha *= step.time
        beta *= step.freq
        factors.append((alpha, beta))
    return tuple(factors)


def final_factors(path: TrellisPath) -> tuple[int, int]:
    """The path's endpoint (alpha_5, beta_5)."""
    return downsampling_factors(path)[-1]


def classify_path(path: TrellisPath) -> PathClass:
    """Time-priority iff alpha_5 < beta_5, frequency-priority iff the reverse."""
    alpha, beta = final_factors(path)
    if alpha < beta:
        return PathClass.TIME_PRIORITY
    if alpha > beta:
        return PathClass.FREQUENCY_PRIORITY
    return PathClass.EQUAL


# ---------------------------------------------------------------------------
# Endpoint families and canonical naming
# ---------------------------------------------------------------------------

# Published alternate configurations pinned to their established letter
# suffixes, keyed by endpoint. Each entry is (time_strides, freq_strides) in
# suffix order b, c, d. The general departure-stage rule below reproduces the
# (2, 16) letters on its own but not the (4, 8) ones, so all six are pinned.
_PINNED_ALTERNATES: dict[tuple[int, int], tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]] = {
    (2, 16): (
        ((1, 1, 1, 2, 1), (1, 2, 2, 2, 2)),
        ((1, 1, 2, 1, 1), (1, 2, 2, 2, 2)),
        ((1, 2, 1, 1, 1), (1, 2, 2, 2, 2)),
    ),
    (4, 8): (
        ((1, 1, 2, 2, 1), (1, 1, 2, 2, 2)),
        ((1, 1, 1, 2, 2), (1, 2, 2, 2, 1)),
        ((1, 1, 2, 1, 2), (1, 2, 2, 2, 1)),
    ),
}

# Reserved names for the two equal-stride configurations every report
# cross-references: the default modern recipe and the classic image one.
_RESERVED_EQUAL = {
    (8, 8): "MOD",
    (32, 32): "ORI",
}

_SUFFIX_ALPHABET = "bcdefghijklmnopqrstuvwxyz"


def _suffix(rank: int) -> str:
    """Letter suffix for the rank-th alternate path (rank >= 1)."""
    if rank < 1:
        return ""
    rank -= 1
    n = len(_SUFFIX_ALPHABET)
    if rank < n:
        return _SUFFIX_ALPHABET[rank]
    hi, lo = divmod(rank - n, n)
    return _SUFFIX_ALPHABET[hi] + _SUFFIX_ALPHABET[lo]


def _suffix_rank(suffix: str) -> int:
    if suffix == "":
        return 0
    n = len(_SUFFIX_ALPHABET)
    indexes = [_SUFFIX_ALPHABET.index(ch) for ch in suffix]
    if len(indexes) == 1:
        return indexes[0] + 1
    if len(indexes) == 2:
        return n + indexes[0] * n + indexes[1] + 1
    raise UnknownConfigError(f"unparseable suffix {suffix!r}")


def _stride_tuples_to_endpoint(time: tuple[int, ...], freq: tuple[int, ...]) -> tuple[int, int]:
    alpha = beta = 1
    for t in time:
        alpha *= t
    for f in freq:
        beta *= f
    return alpha, beta


def _latest_tuple(factor: int) -> tuple[int, ...]:
    """Stride tuple with all downsampling packed into the latest stages."""
    exponent = factor.bit_length() - 1
    return (1,) * (NUM_STAGES - exponent) + (2,) * exponent


def _dim_tuples(factor: int) -> list[tuple[int, ...]]:
    """All per-dimension stride tuples whose product equals ``factor``."""
    exponent = factor.bit_length() - 1
    tuples = []
    for positions in itertools.combinations(range(NUM_STAGES), exponent):
        strides = [1] * NUM_STAGES
        for pos in positions:
            strides[pos] = 2
        tuples.append(tuple(strides))
    return tuples


def _first_departure(time: tuple[int, ...], freq: tuple[int, ...],
                     canon_time: tuple[int, ...], canon_freq: tuple[int, ...]) -> int:
    for stage in range(NUM_STAGES):
        if time[stage] != canon_time[stage] or freq[stage] != canon_freq[stage]:
            return stage + 1
    return NUM_STAGES + 1


@functools.lru_cache(maxsize=None)
def _family_order(alpha5: int, beta5: int) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
    """Deterministic ordering of all paths to an endpoint.

    The latest-downsampling path comes first (bare name), pinned published
    alternates follow in their established order, and the remaining paths are
    sorted by departing later from the canonical path, ties broken
    lexicographically.
    """
    if alpha5 not in ENDPOINT_FACTORS or beta5 not in ENDPOINT_FACTORS:
        raise ValueError(f"invalid endpoint ({alpha5}, {beta5})")
    canon = (_latest_tuple(alpha5), _latest_tuple(beta5))
    pinned = _PINNED_ALTERNATES.get((alpha5, beta5), ())
    placed = {canon, *pinned}
    rest = []
    for time in _dim_tuples(alpha5):
        for freq in _dim_tuples(beta5):
            config = (time, freq)
            if config in placed:
                continue
            rest.append(config)
    rest.sort(key=lambda cfg: (-_first_departure(cfg[0], cfg[1], *canon), cfg[0], cfg[1]))
    return (canon, *pinned, *rest)


def _base_name(alpha5: int, beta5: int) -> str:
    a = alpha5.bit_length() - 1
    b = beta5.bit_length() - 1
    if alpha5 < beta5:
        return f"T{a}{b}"
    if alpha5 > beta5:
        return f"F{a}{b}"
    return f"E{a}{b}"


def canonical_name(path: TrellisPath) -> str:
    """Stable, injective short name for a path (e.g. ``T14c``, ``MOD``)."""
    alpha5, beta5 = final_factors(path)
    config = (path.time_strides, path.freq_strides)
    order = _family_order(alpha5, beta5)
    rank = order.index(config)
    if rank == 0 and (alpha5, beta5) in _RESERVED_EQUAL:
        return _RESERVED_EQUAL[(alpha5, beta5)]
    return _base_name(alpha5, beta5) + _suffix(rank)


_NAME_PATTERN = re.compile(r"^(?P<cls>[TFE])(?P<a>[0-5])(?P<b>[0-5])(?P<suffix>[a-z]{0,2})$")


def resolve_name(name: str) -> TrellisPath:
    """Inverse of :func:`canonical_name`; raises :class:`UnknownConfigError`."""
    cleaned = name.strip()
    for endpoint, reserved in _RESERVED_EQUAL.items():
        if cleaned.upper() == reserved:
            time, freq = _family_order(*endpoint)[0]
            return TrellisPath.from_lists(time, freq, label=reserved)
    match = _NAME_PATTERN.match(cleaned)
    if match is None:
        raise UnknownConfigError(f"unrecognized configuration name {cleaned!r}")
    alpha5 = 2 ** int(match.group("a"))
    beta5 = 2 ** int(match.group("b"))
    cls = match.group("cls")
    expected = {"T": PathClass.TIME_PRIORITY, "F": PathClass.FREQUENCY_PRIORITY, "E": PathClass.EQUAL}[cls]
    actual = (
        PathClass.TIME_PRIORITY if alpha5 < beta5
        else PathClass.FREQUENCY_PRIORITY if alpha5 > beta5
        else PathClass.EQUAL
    )
    if actual is not expected:
        raise UnknownConfigError(f"{cleaned!r}: prefix {cls!r} does not match endpoint ({alpha5}, {beta5})")
    rank = _suffix_rank(match.group("suffix"))
    order = _family_order(alpha5, beta5)
    if rank >= len(order):
        raise UnknownConfigError(f"{cleaned!r}: endpoint ({alpha5}, {beta5}) has only {len(order)} paths")
    if rank == 0 and (alpha5, beta5) in _RESERVED_EQUAL:
        reserved = _RESERVED_EQUAL[(alpha5, beta5)]
        raise UnknownConfigError(f"{cleaned!r}: this configuration is named {reserved!r}")
    time, freq = order[rank]
    return TrellisPath.from_lists(time, freq, label=cleaned)


def paths_to_endpoint(alpha5: int, beta5: int) -> tuple[TrellisPath, ...]:
    """All paths reaching (alpha5, beta5), in canonical naming order."""
    paths = []
    for time, freq in _family_order(alpha5, beta5):
        path = TrellisPath.from_lists(time, freq)
        paths.append(path.relabeled(canonical_name(path)))
    return tuple(paths)


def iter_all_paths():
    """All 4^5 = 1024 stride configurations, in endpoint-major order."""
    for alpha_exp in range(NUM_STAGES + 1):
        for beta_exp in range(NUM_STAGES + 1):
            yield from paths_to_endpoint(2 ** alpha_exp, 2 ** beta_exp)
