"""Optional PNG rendering of sweep and claim tables (``--figures``).

CSV files remain the contract; these plots are a convenience and are never
consulted by the acceptance checks.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _loglog(ax, xs, ys, label):
    pts = [(x, abs(y)) for x, y in zip(xs, ys) if isinstance(y, (int, float)) and y != 0]
    if pts:
        ax.loglog(*zip(*pts), "o-", label=label)


def render_sweep(rows: list[dict], vary: str, out: Path) -> list[str]:
    fig, ax = plt.subplots(figsize=(5, 4))
    _loglog(ax, [r[vary] for r in rows], [r["delta"] for r in rows], "|E_q - e_q(g*)|")
    ax.set_xlabel(vary)
    ax.legend()
    name = "sweep_delta.png"
    fig.tight_layout()
    fig.savefig(Path(out) / name, dpi=120)
    plt.close(fig)
    return [name]


def render_claims(results, out: Path) -> list[str]:
    """One log-log panel per numeric table column against its sweep variable."""
    written = []
    for res in results:
        for table, rows in sorted(res.tables.items()):
            if not rows or not isinstance(rows[0], dict):
                continue
            x = next((k for k in ("c", "alpha", "t") if k in rows[0]), None)
            if x is None:
                continue
            cols = [k for k, v in rows[0].items()
                    if k not in (x, "c", "alpha", "Z", "q") and isinstance(v, float)]
            if not cols:
                continue
            fig, ax = plt.subplots(figsize=(5, 4))
            for col in cols[:6]:
                _loglog(ax, [r[x] for r in rows], [r.get(col) for r in rows], col)
            ax.set_xlabel(x)
            ax.set_title(f"{res.claim_id}: {table}")
            ax.legend(fontsize=7)
            name = f"claim_{res.claim_id}_{table}.png"
            fig.tight_layout()
            fig.savefig(Path(out) / name, dpi=120)
            plt.close(fig)
            written.append(name)
    return written
