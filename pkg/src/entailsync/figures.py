"""Matplotlib rendering of entailment graphs to image files.

Used by the CLI report path: one figure per replica, nodes layered by
longest path from the constructors, solid arrows for entails edges, dashed
arrows for rebases, cancelled operations greyed and struck.
"""

from __future__ import annotations

from .journal import EntailmentGraph, OpId


def _layers(graph: EntailmentGraph) -> dict[OpId, int]:
    depth: dict[OpId, int] = {}
    for opid in graph.topo_order():
        preds = graph._order_preds(opid)
        depth[opid] = 1 + max((depth.get(p, 0) for p in preds), default=0)
    return depth


def _positions(graph: EntailmentGraph) -> dict[OpId, tuple[float, float]]:
    depth = _layers(graph)
    by_layer: dict[int, list[OpId]] = {}
    for opid, d in depth.items():
        by_layer.setdefault(d, []).append(opid)
    pos = {}
    for d, members in by_layer.items():
        members.sort(key=lambda o: o.sort_key)
        width = len(members)
        for i, opid in enumerate(members):
            pos[opid] = (i - (width - 1) / 2.0, -d)
    return pos


def render_graph(graph: EntailmentGraph, path: str, title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import FancyArrowPatch

    pos = _positions(graph)
    fig, ax = plt.subplots(figsize=(max(4, 1.8 * len(pos) ** 0.5 + 2), 4.5))
    ax.set_axis_off()
    if title:
        ax.set_title(title, fontsize=11)
    if not pos:
        ax.annotate("(empty graph)", (0.5, 0.5), ha="center", va="center")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        return

    def arrow(src, dst, style):
        p = FancyArrowPatch(
            pos[src],
            pos[dst],
            arrowstyle="-|>",
            mutation_scale=11,
            linestyle=style,
            color="0.25" if style == "solid" else "0.45",
            shrinkA=14,
            shrinkB=14,
            zorder=1,
        )
        ax.add_patch(p)

    for src, dst in graph.entails_edges():
        if src in pos and dst in pos:
            arrow(src, dst, "solid")
    for opid, targets in graph.rebases.items():
        for target in targets:
            if target in pos and opid in pos:
                arrow(target, opid, "dashed")

    for opid, (x, y) in pos.items():
        node = graph.nodes[opid]
        cancelled = graph.is_cancelled(opid)
        rebased = graph.is_rebased(opid)
        face = "0.9" if cancelled else ("#dce6f5" if rebased else "#f5e9c8")
        label = str(opid)
        if node.actions:
            label += "\n" + "; ".join(a.summary() for a in node.actions)
        ax.annotate(
            label,
            (x, y),
            ha="center",
            va="center",
            fontsize=7,
            zorder=2,
            bbox=dict(boxstyle="round,pad=0.35", fc=face, ec="0.3"),
        )
        if cancelled:
            ax.plot(
                [x - 0.28, x + 0.28], [y, y], color="0.2", lw=1.0, zorder=3
            )

    xs = [p[0] for p in pos.values()]
    ys = [p[1] for p in pos.values()]
    ax.set_xlim(min(xs) - 1, max(xs) + 1)
    ax.set_ylim(min(ys) - 0.8, max(ys) + 0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
