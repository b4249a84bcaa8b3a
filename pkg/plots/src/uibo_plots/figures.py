"""Publication-style figures from benchmark and replay CSV directories.

The three kinds map onto the artifact layout of the companion batch tool:
``paths_on_heatmap`` overlays per-method true-location paths on one trial's
terrain dump, ``vibration_curves`` draws mean experienced vibration per
iteration with one-standard-deviation bands, and ``posterior_heatmap``
shows refitted posterior mean and sd surfaces. Inputs are never modified;
rendering the same directory twice produces the same figure.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# Fixed styles per method id so the same method looks the same across
# figures; unknown ids get a stable fallback colour derived from the name.
METHOD_STYLES = {
    "bo-ducb": ("tab:blue", "o"),
    "ubo-ducb": ("tab:orange", "s"),
    "uibo-ducb": ("tab:red", "^"),
    "bo-es": ("tab:cyan", "o"),
    "ubo-es": ("tab:olive", "s"),
    "uibo-es": ("tab:pink", "^"),
}

FIGURE_KINDS = ("paths_on_heatmap", "vibration_curves", "posterior_heatmap")


@dataclass(frozen=True)
class FigureSpec:
    """What to render: artifact directory, figure kind, filters, output."""

    in_dir: Path
    kind: str
    out_path: Path
    methods: tuple | None = None
    trial: int = 0

    def __post_init__(self):
        object.__setattr__(self, "in_dir", Path(self.in_dir))
        object.__setattr__(self, "out_path", Path(self.out_path))
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind must be one of {FIGURE_KINDS}, "
                             f"got {self.kind!r}")
        if self.methods is not None:
            object.__setattr__(self, "methods", tuple(self.methods))
        if self.trial < 0:
            raise ValueError(f"trial must be nonnegative, got {self.trial}")


def method_style(name: str) -> tuple[str, str]:
    if name in METHOD_STYLES:
        return METHOD_STYLES[name]
    palette = plt.get_cmap("tab10")
    return palette(zlib.crc32(name.encode()) % 10), "d"


def _read_csv(path: Path) -> list[dict]:
    if not path.is_file():
        raise FileNotFoundError(f"missing artifact: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    if any(None in row.values() or None in row for row in rows):
        raise ValueError(f"malformed CSV: {path}")
    return rows


def _column(rows: list[dict], name: str, path: Path) -> np.ndarray:
    try:
        return np.array([float(row[name]) for row in rows])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: expected numeric column {name!r}") from exc


def _square_grid(xs: np.ndarray, ys: np.ndarray, values: np.ndarray,
                 path: Path) -> tuple[np.ndarray, tuple]:
    """Reshape a lexicographic (x-major) grid dump into an image array."""
    side = int(round(np.sqrt(len(values))))
    if side * side != len(values):
        raise ValueError(f"{path}: expected a square grid, "
                         f"got {len(values)} rows")
    image = values.reshape(side, side).T  # rows become y for imshow
    extent = (xs.min(), xs.max(), ys.min(), ys.max())
    return image, extent


def _save(fig, out_path: Path):
    out_path = Path(out_path)
    if out_path.parent != Path(""):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    return fig


def plot_paths(spec: FigureSpec):
    """One trial's terrain heatmap with per-method true-location paths.

    Every polyline starts at the episode start (marked with a large X);
    markers sit on the locations where observations were taken. A method
    whose log has no rows contributes nothing beyond the start marker.
    """
    terrain_path = spec.in_dir / "terrain" / f"{spec.trial}.csv"
    rows = _read_csv(terrain_path)
    image, extent = _square_grid(_column(rows, "x", terrain_path),
                                 _column(rows, "y", terrain_path),
                                 _column(rows, "value", terrain_path),
                                 terrain_path)

    starts_path = spec.in_dir / "starts.csv"
    start_rows = _read_csv(starts_path)
    by_trial = {row["trial"]: row for row in start_rows}
    if str(spec.trial) not in by_trial:
        raise ValueError(f"{starts_path}: no start recorded for trial "
                         f"{spec.trial}")
    start = (float(by_trial[str(spec.trial)]["x"]),
             float(by_trial[str(spec.trial)]["y"]))

    trial_dir = spec.in_dir / "trials" / str(spec.trial)
    if spec.methods is not None:
        log_paths = [trial_dir / f"{m}.csv" for m in spec.methods]
    else:
        if not trial_dir.is_dir():
            raise FileNotFoundError(f"missing artifact: {trial_dir}")
        log_paths = sorted(trial_dir.glob("*.csv"))

    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    mesh = ax.imshow(image, origin="lower", extent=extent, cmap="viridis",
                     aspect="equal")
    fig.colorbar(mesh, ax=ax, label="roughness")
    for log_path in log_paths:
        rows = _read_csv(log_path)
        name = log_path.stem
        if not rows:
            continue
        xs = np.concatenate([[start[0]], _column(rows, "true_x", log_path)])
        ys = np.concatenate([[start[1]], _column(rows, "true_y", log_path)])
        color, marker = method_style(name)
        ax.plot(xs, ys, color=color, marker=marker, markersize=4,
                linewidth=1.3, label=name)
    ax.plot(*start, marker="X", color="black", markersize=14, linestyle="",
            label="start", zorder=5)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"true paths, trial {spec.trial}")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, spec.out_path)


def plot_curves(spec: FigureSpec):
    """Mean experienced vibration per iteration with ±1 sd bands."""
    curves_path = spec.in_dir / "curves.csv"
    rows = _read_csv(curves_path)
    grouped: dict[str, list[dict]] = {}
    for row in rows:
        grouped.setdefault(row["method"], []).append(row)
    if spec.methods is not None:
        missing = [m for m in spec.methods if m not in grouped]
        if missing:
            raise ValueError(f"{curves_path}: no curve for method "
                             f"{missing[0]!r}")
        names = list(spec.methods)
    else:
        names = list(grouped)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in names:
        method_rows = sorted(grouped[name], key=lambda r: int(r["iteration"]))
        its = np.array([int(r["iteration"]) for r in method_rows])
        mean = _column(method_rows, "mean_vibration", curves_path)
        sd = _column(method_rows, "sd_vibration", curves_path)
        color, _ = method_style(name)
        ax.plot(its, mean, color=color, linewidth=1.5, label=name)
        ax.fill_between(its, mean - sd, mean + sd, color=color, alpha=0.25,
                        linewidth=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean experienced vibration")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, spec.out_path)


def plot_posterior(spec: FigureSpec):
    """Posterior mean and sd surfaces for each refit mode present.

    The method filter selects modes here (``uncertain``/``deterministic``);
    without a filter, every mode with a posterior dump is drawn.
    """
    if spec.methods is not None:
        modes = list(spec.methods)
    else:
        modes = [m for m in ("uncertain", "deterministic")
                 if (spec.in_dir / f"posterior_{m}.csv").is_file()]
        if not modes:
            raise FileNotFoundError(
                f"missing artifact: {spec.in_dir / 'posterior_uncertain.csv'}")

    fig, axes = plt.subplots(len(modes), 2,
                             figsize=(9.0, 4.0 * len(modes)),
                             squeeze=False)
    for row_axes, mode in zip(axes, modes):
        path = spec.in_dir / f"posterior_{mode}.csv"
        rows = _read_csv(path)
        xs, ys = _column(rows, "x", path), _column(rows, "y", path)
        for ax, column in zip(row_axes, ("mean", "sd")):
            image, extent = _square_grid(xs, ys, _column(rows, column, path),
                                         path)
            mesh = ax.imshow(image, origin="lower", extent=extent,
                             cmap="viridis", aspect="equal")
            fig.colorbar(mesh, ax=ax)
            ax.set_title(f"{mode} posterior {column}")
            ax.set_xlabel("x")
            ax.set_ylabel("y")
    return _save(fig, spec.out_path)


_RENDERERS = {
    "paths_on_heatmap": plot_paths,
    "vibration_curves": plot_curves,
    "posterior_heatmap": plot_posterior,
}


def render(spec: FigureSpec):
    """Dispatch to the renderer for ``spec.kind``; returns the figure."""
    return _RENDERERS[spec.kind](spec)
