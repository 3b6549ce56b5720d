"""Figure rendering for evaluated matrices: nonzero-distribution (spy) plots
written as PNG/SVG through matplotlib, or as plain ASCII PGM density rasters.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .structural import RatMatrix

__all__ = ["spy_plot", "write_pgm_density"]


def spy_plot(rm: RatMatrix, path: str | Path, title: str | None = None) -> None:
    """One mark per nonzero, matrix orientation (row 0 on top)."""
    path = Path(path)
    xs, ys = [], []
    for i, row in enumerate(rm.rows):
        for j in row:
            ys.append(i)
            xs.append(j)
    fig, ax = plt.subplots(figsize=(7.0, 7.0 * max(1, rm.nrows) / max(1, rm.ncols)))
    ax.scatter(xs, ys, s=0.05 if len(xs) > 100_000 else 1.5,
               marker=",", linewidths=0, color="navy", rasterized=True)
    ax.set_xlim(-0.5, rm.ncols - 0.5)
    ax.set_ylim(rm.nrows - 0.5, -0.5)
    ax.set_xlabel(f"{rm.ncols} columns")
    ax.set_ylabel(f"{rm.nrows} rows")
    if title:
        ax.set_title(f"{title}  (nnz = {rm.nnz()})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_pgm_density(
    rm: RatMatrix, path: str | Path, max_bins: int = 512
) -> None:
    """ASCII PGM (P2) raster: darker pixels where more entries fall."""
    nb_r = min(max_bins, rm.nrows) or 1
    nb_c = min(max_bins, rm.ncols) or 1
    grid = [[0] * nb_c for _ in range(nb_r)]
    for i, row in enumerate(rm.rows):
        bi = i * nb_r // max(1, rm.nrows)
        for j in row:
            grid[bi][j * nb_c // max(1, rm.ncols)] += 1
    peak = max((v for line in grid for v in line), default=0)
    with open(path, "w", newline="\n") as fh:
        fh.write("P2\n")
        fh.write(f"# nonzero density {rm.nrows}x{rm.ncols} nnz={rm.nnz()}\n")
        fh.write(f"{nb_c} {nb_r}\n255\n")
        for line in grid:
            vals = []
            for v in line:
                shade = 255 if v == 0 else max(0, 255 - (v * 255 + peak - 1) // peak)
                vals.append(str(shade))
            fh.write(" ".join(vals) + "\n")
