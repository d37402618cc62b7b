"""Render experiment-artifact CSVs into figure files.

Inputs are the run-directory CSV schemas of the ``dml`` harness:

* ``moa_curve``            moa.csv (window,value)
* ``return_curve``         one or more returns*.csv (window,value)
* ``sweep_bars``           summary.csv (value,mean,std)
* ``maze_policy``          policy CSV (state,greedy_action) + arena JSON
* ``blackjack_policy``     policy CSV (state,greedy_action)
* ``blackjack_value_diff`` values.csv (state,action,value)
* ``jsd_curve``            jsd_curve.csv (episode,jsd_bits)

Maze states are y*width+x with actions 0..3 = N,E,S,W; blackjack states
encode (player sum 12..21, dealer card 1..10, usable ace) as
((sum-12)*10 + (card-1))*2 + usable. Rendering is read-only and
deterministic: identical inputs produce identical image bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = (
    "moa_curve",
    "sweep_bars",
    "maze_policy",
    "return_curve",
    "blackjack_policy",
    "blackjack_value_diff",
    "jsd_curve",
)

_FIGSIZE = (5.0, 3.6)
_DPI = 150
_META = {"Software": "dml-figs"}


class SchemaError(ValueError):
    """Input file missing, empty, or not in the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input file is required")


def _read_csv(path, columns: list[str]) -> list[list[str]]:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input {p} does not exist")
    with open(p, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{p} is empty") from None
        if header[: len(columns)] != columns:
            raise SchemaError(
                f"{p} columns {header} do not start with expected {columns}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{p} has no data rows")
    return rows


def _series(path) -> tuple[np.ndarray, np.ndarray]:
    rows = _read_csv(path, ["window", "value"])
    x = np.array([int(r[0]) for r in rows])
    y = np.array([float(r[1]) if r[1] else np.nan for r in rows])
    return x, y


def _save(fig, output):
    fig.savefig(output, dpi=_DPI, metadata=_META)
    plt.close(fig)


def _new_axes():
    fig, ax = plt.subplots(figsize=_FIGSIZE, constrained_layout=True)
    return fig, ax


def render_moa_curve(inputs, output):
    fig, ax = _new_axes()
    for path in inputs:
        x, y = _series(path)
        ax.plot(x, y, marker="o", ms=3, label=Path(path).stem)
    ax.set_xlabel("window")
    ax.set_ylabel("mean optimal action")
    ax.set_ylim(0, 1.02)
    if len(inputs) > 1:
        ax.legend(frameon=False, fontsize=8)
    _save(fig, output)


def render_return_curve(inputs, output):
    fig, ax = _new_axes()
    for path in inputs:
        x, y = _series(path)
        ax.plot(x, y, marker="o", ms=3, label=Path(path).stem)
    ax.set_xlabel("window")
    ax.set_ylabel("average return")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, output)


def render_sweep_bars(inputs, output):
    rows = _read_csv(inputs[0], ["value", "mean", "std"])
    labels = [r[0] for r in rows]
    means = np.array([float(r[1]) for r in rows])
    stds = np.array([float(r[2]) for r in rows])
    fig, ax = _new_axes()
    xs = np.arange(len(labels))
    ax.bar(xs, means, yerr=stds, capsize=3, color="#4878d0")
    ax.set_xticks(xs)
    ax.set_xticklabels(labels)
    ax.set_xlabel("swept value")
    ax.set_ylabel("metric")
    ax.set_ylim(0, max(1.0, float((means + stds).max()) * 1.05))
    _save(fig, output)


_MOVES = {0: (0, 1), 1: (1, 0), 2: (0, -1), 3: (-1, 0)}  # N E S W


def read_policy(path) -> np.ndarray:
    rows = _read_csv(path, ["state", "greedy_action"])
    policy = np.zeros(len(rows), dtype=np.int64)
    for s, a in rows:
        policy[int(s)] = int(a)
    return policy


def maze_arrow_table(policy: np.ndarray, width: int, height: int,
                     goal: tuple[int, int]) -> np.ndarray:
    """(height, width, 2) arrow components; zero at the goal cell."""
    arrows = np.zeros((height, width, 2), dtype=np.int64)
    for y in range(height):
        for x in range(width):
            if (x, y) == tuple(goal):
                continue
            dx, dy = _MOVES[int(policy[y * width + x])]
            arrows[y, x] = (dx, dy)
    return arrows


def render_maze_policy(inputs, output):
    if len(inputs) < 2:
        raise SchemaError("maze_policy needs a policy CSV and an arena JSON")
    policy = read_policy(inputs[0])
    arena = json.loads(Path(inputs[1]).read_text())
    try:
        width, height = arena["width"], arena["height"]
        goal = tuple(arena["goal"])
        walls = arena.get("walls", [])
    except KeyError as e:
        raise SchemaError(f"arena JSON missing key {e}") from e
    if len(policy) != width * height:
        raise SchemaError("policy length does not match arena size")
    arrows = maze_arrow_table(policy, width, height, goal)
    fig, ax = _new_axes()
    for y in range(height):
        for x in range(width):
            dx, dy = arrows[y, x]
            if dx or dy:
                ax.annotate(
                    "", xy=(x + 0.35 * dx, y + 0.35 * dy), xytext=(x, y),
                    arrowprops=dict(arrowstyle="->", color="black", lw=1.2),
                )
    ax.plot(*goal, marker="*", ms=18, color="#d65f5f")
    for wx, wy, d in walls:
        if d in ("N", "S"):
            edge_y = wy + (0.5 if d == "N" else -0.5)
            ax.plot([wx - 0.5, wx + 0.5], [edge_y, edge_y], color="#c44e52", lw=3)
        else:
            edge_x = wx + (0.5 if d == "E" else -0.5)
            ax.plot([edge_x, edge_x], [wy - 0.5, wy + 0.5], color="#c44e52", lw=3)
    ax.set_xlim(-0.6, width - 0.4)
    ax.set_ylim(-0.6, height - 0.4)
    ax.set_xticks(range(width))
    ax.set_yticks(range(height))
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    _save(fig, output)


N_DEALER = 10
N_PLAYER = 10


def _blackjack_grid(values_by_state, usable: bool) -> np.ndarray:
    grid = np.zeros((N_PLAYER, N_DEALER))
    for ps in range(N_PLAYER):
        for ds in range(N_DEALER):
            state = (ps * N_DEALER + ds) * 2 + int(usable)
            grid[ps, ds] = values_by_state[state]
    return grid


def _blackjack_panels(fig, axes, grids, cmap, vmin, vmax, title):
    for ax, (label, grid) in zip(axes, grids):
        im = ax.imshow(
            grid, origin="lower", aspect="auto", cmap=cmap,
            vmin=vmin, vmax=vmax,
            extent=(0.5, 10.5, 11.5, 21.5),
        )
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("dealer showing")
        ax.set_ylabel("player sum")
        ax.set_xticks(range(1, 11))
        ax.set_yticks(range(12, 22, 2))
    fig.colorbar(im, ax=list(axes), shrink=0.8, label=title)


def render_blackjack_policy(inputs, output):
    policy = read_policy(inputs[0])
    if len(policy) != 200:
        raise SchemaError("blackjack policy must cover 200 states")
    fig, axes = plt.subplots(1, 2, figsize=(7.2, 3.4))
    grids = [
        ("no usable ace", _blackjack_grid(policy, usable=False)),
        ("usable ace", _blackjack_grid(policy, usable=True)),
    ]
    _blackjack_panels(fig, axes, grids, "coolwarm", 0, 1, "action (0 hit, 1 stick)")
    _save(fig, output)


def read_values(path) -> np.ndarray:
    rows = _read_csv(path, ["state", "action", "value"])
    n = max(int(r[0]) for r in rows) + 1
    out = np.zeros((n, 2))
    for s, a, v in rows:
        out[int(s), int(a)] = float(v)
    return out


def render_blackjack_value_diff(inputs, output):
    values = read_values(inputs[0])
    if values.shape != (200, 2):
        raise SchemaError("blackjack values must cover 200 states x 2 actions")
    diff = values[:, 1] - values[:, 0]  # stick minus hit
    fig, axes = plt.subplots(1, 2, figsize=(7.2, 3.4))
    grids = [
        ("no usable ace", _blackjack_grid(diff, usable=False)),
        ("usable ace", _blackjack_grid(diff, usable=True)),
    ]
    lim = max(0.1, float(np.abs(diff).max()))
    _blackjack_panels(fig, axes, grids, "RdBu", -lim, lim, "V(stick) - V(hit)")
    _save(fig, output)


def render_jsd_curve(inputs, output):
    fig, ax = _new_axes()
    for path in inputs:
        rows = _read_csv(path, ["episode", "jsd_bits"])
        x = np.array([int(r[0]) for r in rows])
        y = np.array([float(r[1]) for r in rows])
        ax.plot(x, y, marker="o", ms=3, label=Path(path).stem)
    ax.set_xlabel("episode")
    ax.set_ylabel("divergence (bits)")
    ax.set_ylim(bottom=0)
    if len(inputs) > 1:
        ax.legend(frameon=False, fontsize=8)
    _save(fig, output)


_RENDERERS = {
    "moa_curve": render_moa_curve,
    "return_curve": render_return_curve,
    "sweep_bars": render_sweep_bars,
    "maze_policy": render_maze_policy,
    "blackjack_policy": render_blackjack_policy,
    "blackjack_value_diff": render_blackjack_value_diff,
    "jsd_curve": render_jsd_curve,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.kind](spec.inputs, spec.output)
    return spec.output
