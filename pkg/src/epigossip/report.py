"""Plan-length sweeps over complete graphs, as CSV rows and a plot."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .graph import complete_digraph, complete_graph, detect_balanced_bipartite, hamiltonian_path, spanning_tree
from .knowledge import goal_T
from .planner import ProblemInstance, verify
from .protocols import (
    FORMULAS,
    bipartite_protocol,
    directional_protocol,
    hamiltonian_protocol,
    parallel_protocol,
    spanning_tree_protocol,
    split_rest,
)

CSV_HEADER = ["mode", "n", "d", "protocol", "calls_or_steps", "formula", "match"]

PROTOCOLS_BY_MODE = {
    "two-way": ("bipartite", "hamiltonian", "spanning-tree"),
    "one-way": ("directional",),
    "parallel": ("parallel",),
}


@dataclass(frozen=True)
class StatsRow:
    mode: str
    n: int
    d: int
    protocol: str
    measured: int
    formula: int
    verified: bool | None = None

    @property
    def match(self) -> bool:
        return self.measured == self.formula


def build_protocol(name: str, n: int, d: int):
    """The named construction on the complete graph (or digraph) over 1..n."""
    if name == "bipartite":
        left, right = split_rest(list(range(3, n + 1)))
        return bipartite_protocol((1, 2), left, right, d, complete_graph(n))
    if name == "hamiltonian":
        g = complete_graph(n)
        return hamiltonian_protocol(hamiltonian_path(g), d, g)
    if name == "spanning-tree":
        return spanning_tree_protocol(spanning_tree(complete_graph(n)), d)
    if name == "directional":
        return directional_protocol(list(range(1, n + 1)), d, complete_digraph(n))
    if name == "parallel":
        g = complete_graph(n)
        v1, v2 = detect_balanced_bipartite(g)
        return parallel_protocol(v1, v2, d, g)
    raise ValueError(f"unknown protocol {name!r}")


def sweep(mode: str, ns, ds, check: bool = False) -> list[StatsRow]:
    """One row per (n, d, protocol); ``check`` also runs the verifier."""
    if mode not in PROTOCOLS_BY_MODE:
        raise ValueError(f"unknown mode {mode!r}")
    rows = []
    for n in ns:
        for d in ds:
            for name in PROTOCOLS_BY_MODE[mode]:
                if (name == "bipartite" and n < 4) or (name == "hamiltonian" and n < 3):
                    continue
                plan = build_protocol(name, n, d)
                ok = None
                if check:
                    g = complete_digraph(n) if mode == "one-way" else complete_graph(n)
                    inst = ProblemInstance(g, mode, goal_T(n, d + 1), d)
                    ok = verify(inst, plan).success
                rows.append(StatsRow(mode, n, d, name, len(plan), FORMULAS[name](n, d), ok))
    return rows


def emit_stats_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.mode, r.n, r.d, r.protocol, r.measured, r.formula, "true" if r.match else "false"])
    return buf.getvalue()


def plot_stats(rows, path: str) -> None:
    """Measured lengths (markers) against the formulas (lines), one series per protocol and d."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.ticker import MaxNLocator

    series: dict[tuple[str, int], list[StatsRow]] = {}
    for r in rows:
        series.setdefault((r.protocol, r.d), []).append(r)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (name, d), rs in sorted(series.items()):
        rs = sorted(rs, key=lambda r: r.n)
        xs = [r.n for r in rs]
        line = ax.plot(xs, [r.formula for r in rs], "-", linewidth=1)[0]
        ax.plot(xs, [r.measured for r in rs], "o", color=line.get_color(), label=f"{name}, d={d}")
    modes = sorted({r.mode for r in rows})
    ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.set_xlabel("agents n")
    ax.set_ylabel("steps" if modes == ["parallel"] else "calls")
    ax.set_title(f"plan length vs closed form ({', '.join(modes)})")
    ax.legend(fontsize="small", ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
