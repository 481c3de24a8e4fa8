"""Figure rendering for CLI reports.

Everything here draws to files with the Agg backend — no display is
ever opened. Figures accompany the delimited outputs: the cluster
report gets the silhouette model-selection curve and a scatter of the
two most spread-out scaled features under the chosen clustering.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def render_cluster_report(
    out_dir,
    sweep: Sequence[tuple[int, float]],
    scaled: np.ndarray,
    assignments: np.ndarray,
    centers: np.ndarray,
    feature_names: Sequence[str],
) -> list[Path]:
    """Write silhouette-by-k and cluster-scatter figures; return paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ks = [k for k, _ in sweep]
    scores = [s for _, s in sweep]
    best_k = ks[int(np.argmax(scores))]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, scores, marker="o")
    ax.axvline(best_k, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("k")
    ax.set_ylabel("silhouette")
    ax.set_title(f"cluster count selection (best k = {best_k})")
    ax.set_xticks(ks)
    ax.grid(True, alpha=0.3)
    path = out_dir / "silhouette_by_k.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    # scatter over the two features with the widest scaled spread
    spread = scaled.std(axis=0)
    i, j = np.argsort(spread)[::-1][:2]
    fig, ax = plt.subplots(figsize=(6, 5))
    for cluster in sorted(set(int(a) for a in assignments)):
        mask = assignments == cluster
        ax.scatter(
            scaled[mask, i],
            scaled[mask, j],
            s=24,
            alpha=0.75,
            label=f"cluster {cluster}",
        )
    ax.scatter(
        centers[:, i],
        centers[:, j],
        marker="x",
        s=120,
        c="black",
        label="centers",
    )
    ax.set_xlabel(f"{feature_names[i]} (scaled)")
    ax.set_ylabel(f"{feature_names[j]} (scaled)")
    ax.set_title("feature clusters")
    ax.legend(fontsize=8)
    path = out_dir / "clusters.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    return written
