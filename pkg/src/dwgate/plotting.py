"""Figures from the CSV tables written by the CLI.

Each ``figure_*`` function depends only on the standard library, numpy and
matplotlib, reads one CSV and returns a matplotlib Figure. ``plot_script``
copies the function source into a standalone script, so emitted scripts
reproduce the CLI's figures without importing this package.
"""

import inspect
import textwrap


def read_table(path):
    """Columns of a CSV whose metadata lines start with '#'."""
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return {k: [r[k] for r in rows] for k in (rows[0].keys() if rows else [])}


def figure_potential(path):
    import numpy as np
    import matplotlib.pyplot as plt

    t = read_table(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.array(t["x"], float) / np.pi, np.array(t["U_Er"], float), color="k")
    ax.set_xlabel(r"$kx/\pi$")
    ax.set_ylabel(r"$U(x)\;[E_R]$")
    fig.tight_layout()
    return fig


def figure_levels(path):
    import numpy as np
    import matplotlib.pyplot as plt

    t = read_table(path)
    d = np.array(t["delta_theta"], float)
    e = np.array(t["energy_Er"], float)
    idx = np.array(t["index"], int)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i in sorted(set(idx)):
        m = idx == i
        ax.plot(1e3 * d[m], e[m], marker=".", lw=1, label=f"level {i}")
    ax.set_xlabel(r"$\Delta\theta$ [mrad]")
    ax.set_ylabel(r"$E\;[E_R]$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def figure_spectrum(path):
    import numpy as np
    import matplotlib.pyplot as plt

    t = read_table(path)
    d = np.array(t["delta_theta"], float)
    e = np.array(t["energy_Er"], float)
    labels = np.array(t["track_label"])
    fig, ax = plt.subplots(figsize=(5, 5))
    for lab in dict.fromkeys(labels):
        m = labels == lab
        order = np.argsort(d[m])
        line, = ax.plot(d[m][order], e[m][order], lw=1)
        ax.annotate(lab, (d[m][order][-1], e[m][order][-1]), fontsize=6, color=line.get_color(),
                    xytext=(2, 0), textcoords="offset points", va="center")
    ax.set_xlabel(r"$\Delta\theta$ [rad]")
    ax.set_ylabel(r"$E\;[E_R]$")
    fig.tight_layout()
    return fig


def figure_trace(path):
    import numpy as np
    import matplotlib.pyplot as plt

    t = read_table(path)
    time = np.array(t["time_ms"], float)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for q in ("00", "01", "10", "11"):
        ax.plot(time, np.array(t[f"pop_{q}"], float), lw=1, label=f"|{q}>")
    ax.set_xlabel("t [ms]")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    tilt = ax.twinx()
    tilt.plot(time, 1e3 * np.array(t["delta_theta"], float), color="0.6", lw=1)
    tilt.set_ylabel(r"$\Delta\theta$ [mrad]", color="0.5")
    ax.legend(fontsize=7, loc="center right")
    fig.tight_layout()
    return fig


def figure_sweep(path):
    import numpy as np
    import matplotlib.pyplot as plt

    t = read_table(path)
    xname, yname = list(t)[:2]
    x = np.array(t[xname], float)
    y = np.array(t[yname], float)
    f = np.array(t["fidelity"], float)
    xs, ys = np.unique(x), np.unique(y)
    grid = np.full((len(ys), len(xs)), np.nan)
    grid[np.searchsorted(ys, y), np.searchsorted(xs, x)] = f
    fig, ax = plt.subplots(figsize=(5, 4))
    levels = [0.0, 0.9, 0.95, 0.98, 0.99, 1.0]
    if len(xs) > 1 and len(ys) > 1:
        cs = ax.contourf(xs, ys, grid, levels=levels, cmap="Greys")
        ax.contour(xs, ys, grid, levels=levels[1:-1], colors="k", linewidths=0.5)
        fig.colorbar(cs, ax=ax, label="average gate fidelity")
    else:
        ax.plot(xs if len(xs) > 1 else ys, grid.ravel(), marker="o")
    ax.set_xlabel(xname)
    ax.set_ylabel(yname)
    fig.tight_layout()
    return fig


FIGURES = {
    "potential": figure_potential,
    "levels": figure_levels,
    "spectrum": figure_spectrum,
    "trace": figure_trace,
    "sweep": figure_sweep,
}


def render(kind, csv_path, png_path, metadata=None):
    """Draw figure ``kind`` from ``csv_path`` and save it atomically as PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .io import atomic_write_with

    fig = FIGURES[kind](csv_path)
    try:
        atomic_write_with(png_path, lambda fh: fig.savefig(fh, format="png", dpi=150, metadata=metadata or {}),
                          binary=True)
    finally:
        plt.close(fig)
    return png_path


def plot_script(kind, csv_name, png_name, header=""):
    """Text of a standalone script that renders figure ``kind`` from ``csv_name``."""
    func = FIGURES[kind]
    body = "\n\n".join(textwrap.dedent(inspect.getsource(f)) for f in (read_table, func))
    return (f"#!/usr/bin/env python3\n{header}"
            f'"""Render {png_name} from {csv_name}; needs numpy and matplotlib."""\n\n'
            f"import os\nimport sys\n\n\n{body}\n\n"
            f"if __name__ == \"__main__\":\n"
            f"    here = os.path.dirname(os.path.abspath(__file__))\n"
            f"    src = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, {csv_name!r})\n"
            f"    dst = sys.argv[2] if len(sys.argv) > 2 else os.path.join(here, {png_name!r})\n"
            f"    {func.__name__}(src).savefig(dst, dpi=150)\n")
