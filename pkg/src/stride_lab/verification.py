"""Cross-checks between the symbolic analysis and the numeric kernel.

Each check builds a spec, runs it on a real tensor, and demands that the
numeric per-layer output shapes equal the symbolic trace and that the
instrumented multiply count equals the analytic MAC count exactly. The two
sides are computed by independent code paths.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .analysis import count_flops, trace
from .builder import make_request, build
from .catalog import CATALOG_NAMES
from .layers import Conv2d, Family, ModelSpec, TensorShape
from .numkernel import DEFAULT_SEED, GradCheckReport, gradcheck_conv, run_model
from .strides import StridePair

__all__ = [
    "CheckResult",
    "default_seed",
    "gradcheck_suite",
    "verify_catalog_configs",
    "verify_spec_numeric",
]

SEED_ENV_VAR = "STRIDE_LAB_SEED"


def default_seed() -> int:
    """The numeric seed, overridable through the environment."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    layers_checked: int
    multiplies: int
    analytic_flops: int
    detail: str = ""


def verify_spec_numeric(
    spec: ModelSpec,
    time: int = 300,
    seed: int | None = None,
    name: str | None = None,
) -> CheckResult:
    """Numeric run vs symbolic trace: shapes per layer, multiplies exactly."""
    if seed is None:
        seed = default_seed()
    label = name or spec.display_name
    symbolic = trace(spec, time=time)
    rng = np.random.default_rng(np.uint64(seed))
    x = rng.uniform(-1.0, 1.0, size=(1, 1, spec.input_freq_bins, time))
    result = run_model(spec, x, seed=seed)
    analytic = count_flops(spec, TensorShape(1, spec.input_freq_bins, time))

    problems = []
    if len(symbolic) != len(result.shapes):
        problems.append(
            f"layer count mismatch: symbolic {len(symbolic)} vs numeric {len(result.shapes)}"
        )
    else:
        for sym, (num_name, num_shape) in zip(symbolic, result.shapes):
            if sym.name != num_name:
                problems.append(f"layer order mismatch at {sym.name} vs {num_name}")
                break
            if sym.out_shape != num_shape:
                problems.append(
                    f"{sym.name}: symbolic shape {sym.out_shape} != numeric {num_shape}"
                )
    if result.counter.multiplies != analytic.flops_total:
        problems.append(
            f"multiply count {result.counter.multiplies} != analytic {analytic.flops_total}"
        )
    if result.embedding.shape != (1, spec.embedding_dim):
        problems.append(f"embedding shape {result.embedding.shape}")
    return CheckResult(
        name=label,
        ok=not problems,
        layers_checked=len(symbolic),
        multiplies=result.counter.multiplies,
        analytic_flops=analytic.flops_total,
        detail="; ".join(problems),
    )


def catalog_spec(config_name: str, depth: int = 34) -> ModelSpec:
    """ResNet-template spec for a cataloged configuration name; the ORI row
    uses the original recipe (7x7 stem, max pool, C=64)."""
    family = Family.ORIGINAL_RESNET if config_name == "ORI" else Family.MODIFIED_RESNET
    return build(make_request(family, depth, path=config_name))


def verify_catalog_configs(
    names: tuple[str, ...] = CATALOG_NAMES,
    depth: int = 34,
    time: int = 300,
    seed: int | None = None,
) -> tuple[CheckResult, ...]:
    results = []
    for config_name in names:
        spec = catalog_spec(config_name, depth)
        results.append(
            verify_spec_numeric(spec, time=time, seed=seed, name=config_name)
        )
    return tuple(results)


def _grad_layer(rng: np.random.Generator, index: int) -> Conv2d:
    """Small random conv layer; the cycle guarantees strided and depthwise
    cases keep appearing."""
    kernel = int(rng.choice([1, 3]))
    stride = StridePair(int(rng.choice([1, 2])), int(rng.choice([1, 2])))
    if index % 3 == 1:
        stride = StridePair(2, int(rng.choice([1, 2])))
    depthwise = index % 4 == 2
    if depthwise:
        channels = int(rng.integers(2, 9))
        return Conv2d(
            name=f"gradcheck{index}",
            in_channels=channels,
            out_channels=channels,
            kernel=(kernel, kernel),
            stride=stride,
            padding=(kernel // 2, kernel // 2),
            groups=channels,
        )
    in_ch = int(rng.integers(1, 9))
    out_ch = int(rng.integers(1, 9))
    return Conv2d(
        name=f"gradcheck{index}",
        in_channels=in_ch,
        out_channels=out_ch,
        kernel=(kernel, kernel),
        stride=stride,
        padding=(kernel // 2, kernel // 2),
    )


def gradcheck_suite(
    trials: int = 100,
    tolerance: float = 1e-4,
    seed: int | None = None,
) -> tuple[GradCheckReport, ...]:
    """Finite-difference checks over random small layers, strided and
    depthwise cases included."""
    if seed is None:
        seed = default_seed()
    rng = np.random.default_rng(np.uint64(seed))
    reports = []
    for i in range(trials):
        layer = _grad_layer(rng, i)
        f = int(rng.integers(4, 9))
        t = int(rng.integers(4, 9))
        x = rng.uniform(-1.0, 1.0, size=(1, layer.in_channels, f, t))
        reports.append(gradcheck_conv(layer, x=x, tolerance=tolerance, seed=seed + i))
    return tuple(reports)
