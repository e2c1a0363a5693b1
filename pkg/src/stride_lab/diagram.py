"""Graphviz DOT emission for the stride-space trellis.

Nodes are the 36 reachable cumulative-downsampling states (alpha, beta);
edges are the three downsampling moves. Staying put (stride (1,1)) is a
self-loop and is only drawn when a highlighted path uses it. The two golden
endpoints are drawn with a double ring and a gold fill.
"""

from __future__ import annotations

from .catalog import GOLDEN_GEMINI_FACTORS
from .strides import NUM_STAGES, TrellisPath, canonical_name, downsampling_factors

__all__ = ["trellis_dot"]

_PALETTE = ("crimson", "royalblue", "darkgreen", "darkorange", "purple", "teal")

_MOVES = (
    ((1, 0), "(2,1)"),
    ((0, 1), "(1,2)"),
    ((1, 1), "(2,2)"),
)


def _node_id(alpha_exp: int, beta_exp: int) -> str:
    return f"a{alpha_exp}b{beta_exp}"


def trellis_dot(paths: tuple[TrellisPath, ...] = (), mark_golden: bool = True) -> str:
    """Render the trellis grid, optionally overlaying stride-configuration
    paths as colored edge chains (self-loops included)."""
    golden = set(GOLDEN_GEMINI_FACTORS) if mark_golden else set()
    lines = [
        "digraph trellis {",
        "  rankdir=TB;",
        '  node [shape=circle, fontsize=10, style=filled, fillcolor=white];',
    ]
    for a in range(NUM_STAGES + 1):
        for b in range(NUM_STAGES + 1):
            attrs = [f'label="({2 ** a},{2 ** b})"', f'pos="{b},{-a}!"']
            if (2 ** a, 2 ** b) in golden:
                attrs.append("peripheries=2")
                attrs.append("fillcolor=gold")
            lines.append(f"  {_node_id(a, b)} [{', '.join(attrs)}];")
    for a in range(NUM_STAGES + 1):
        for b in range(NUM_STAGES + 1):
            for (da, db), label in _MOVES:
                na, nb = a + da, b + db
                if na > NUM_STAGES or nb > NUM_STAGES:
                    continue
                lines.append(
                    f'  {_node_id(a, b)} -> {_node_id(na, nb)} [label="{label}", color=gray60];'
                )
    for i, path in enumerate(paths):
        color = _PALETTE[i % len(_PALETTE)]
        name = path.label or canonical_name(path)
        prev = (0, 0)
        for step, (alpha, beta) in zip(path.steps, downsampling_factors(path)):
            node = (alpha.bit_length() - 1, beta.bit_length() - 1)
            lines.append(
                f"  {_node_id(*prev)} -> {_node_id(*node)} "
                f'[label="({step.time},{step.freq})", color={color}, penwidth=2.0, '
                f'fontcolor={color}, tooltip="{name}"];'
            )
            prev = node
    lines.append("}")
    return "\n".join(lines) + "\n"
