"""Exact rewrite distances and balanced dataset generation.

Distances are certified by exhaustive breadth-first exploration. The
default implementation meets in the middle; every rule has an inverse in
the rule set, so the rewrite graph is undirected and bidirectional layered
BFS returns the same distances as one-sided BFS (property-tested in
tests/test_oracle.py).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from random import Random

from . import expr as ex
from .rewrite import (NUM_TRANSFORMATIONS, TRANSFORMATION_NAMES,
                      Transformation, kernel)

log = logging.getLogger(__name__)


class ResourceLimitError(Exception):
    """Visited-set capacity exceeded during exhaustive search."""


DEFAULT_MAX_VISITED = 2_000_000


def bfs_distance_reference(source, target, max_depth,
                           max_visited=DEFAULT_MAX_VISITED):
    """Plain one-sided layered BFS; the certification reference."""
    if source == target:
        return 0
    visited = {source}
    frontier = [source]
    for depth in range(1, max_depth + 1):
        frontier = kernel.expand_layer(frontier, visited)
        if target in visited:
            return depth
        if not frontier:
            return None
        if len(visited) > max_visited:
            raise ResourceLimitError(f"visited {len(visited)} expressions")
    return None


def bfs_distance(source, target, max_depth,
                 max_visited=DEFAULT_MAX_VISITED):
    """Exact rewrite distance if <= max_depth, else None.

    Bidirectional: expands the smaller frontier, one full layer at a time,
    testing for a meet on generation.
    """
    if source == target:
        return 0
    if max_depth < 1:
        return None
    seen = ({source}, {target})
    frontiers = ([source], [target])
    depths = [0, 0]
    while frontiers[0] and frontiers[1]:
        if depths[0] + depths[1] >= max_depth:
            return None
        side = 0 if len(frontiers[0]) <= len(frontiers[1]) else 1
        nxt, met = kernel.expand_layer_meeting(
            frontiers[side], seen[side], seen[1 - side])
        depths[side] += 1
        if met:
            return depths[0] + depths[1]
        frontiers = (nxt, frontiers[1]) if side == 0 else (frontiers[0], nxt)
        if len(seen[0]) + len(seen[1]) > max_visited:
            raise ResourceLimitError(
                f"visited {len(seen[0]) + len(seen[1])} expressions")
    return None


def shortest_first_transformations(source, target, max_depth,
                                   max_visited=DEFAULT_MAX_VISITED):
    """Set of first steps over all shortest paths from source to target."""
    d = bfs_distance(source, target, max_depth, max_visited)
    if d is None:
        raise ValueError(f"target unreachable within depth {max_depth}")
    if d == 0:
        raise ValueError("source equals target; no first step exists")
    firsts = set()
    for t, n in kernel.neighbors(source):
        if n == target and d == 1:
            firsts.add(Transformation(t))
        elif d > 1 and bfs_distance(n, target, d - 1, max_visited) == d - 1:
            firsts.add(Transformation(t))
    return firsts


@dataclass(frozen=True)
class Example:
    source: tuple
    target: tuple
    distance: int
    first: Transformation


@dataclass
class Dataset:
    examples: list
    split: str = "train"

    def __len__(self):
        return len(self.examples)


@dataclass
class GenConfig:
    max_distance: int = 6
    per_cell: int = 10
    height_range: tuple = (4, 5)
    seed: int = 0
    max_attempts_factor: int = 400  # attempts cap per cell before giving up
    max_visited: int = DEFAULT_MAX_VISITED


@dataclass
class GenReport:
    attempts: int = 0
    shortfall: dict = field(default_factory=dict)  # (distance, first) -> missing


def randomize_focus(e, rng, max_pushes=3):
    """Push the root focus down a few random steps.

    Freshly generated expressions carry the focus at the root, which makes
    focus-up unreachable as a first transformation; sampling an interior
    focus position keeps every (distance, first) cell fillable.
    """
    from ._kernel import FOCUS_LEFT, FOCUS_RIGHT

    for _ in range(rng.randint(0, max_pushes)):
        moves = [n for t, n in kernel.neighbors(e)
                 if t in (FOCUS_LEFT, FOCUS_RIGHT)]
        if not moves:
            break
        e = rng.choice(moves)
    return e


def random_walk(e, steps, rng):
    """Random applicable transformations, avoiding immediate undo."""
    prev = None
    for _ in range(steps):
        options = kernel.neighbors(e)
        if prev is not None and len(options) > 1:
            options = [(t, n) for t, n in options if n != prev]
        if not options:
            break
        nxt = rng.choice(options)
        prev = e
        e = nxt[1]
    return e


def generate_dataset(cfg: GenConfig):
    """Balanced examples for every (distance, first transformation) cell.

    Deterministic given cfg.seed. Returns (Dataset, GenReport); cells that
    could not be filled within the attempt budget are reported as
    shortfall and logged.
    """
    if cfg.max_distance < 1 or cfg.per_cell < 1:
        raise ValueError("max_distance and per_cell must be >= 1")
    rng = Random(cfg.seed)
    cells = {(d, Transformation(t)): []
             for d in range(1, cfg.max_distance + 1)
             for t in range(NUM_TRANSFORMATIONS)}
    total_needed = len(cells) * cfg.per_cell
    budget = cfg.max_attempts_factor * len(cells) * cfg.per_cell
    report = GenReport()
    filled = 0
    while filled < total_needed and report.attempts < budget:
        report.attempts += 1
        open_distances = sorted({d for (d, _), v in cells.items()
                                 if len(v) < cfg.per_cell})
        goal = rng.choice(open_distances)
        start = randomize_focus(
            ex.gen_random_expr(cfg.height_range, rng), rng)
        end = random_walk(start, goal, rng)
        if end == start:
            continue
        d = bfs_distance(start, end, cfg.max_distance, cfg.max_visited)
        if d is None or d == 0:
            continue
        if all(len(cells[(d, Transformation(t))]) >= cfg.per_cell
               for t in range(NUM_TRANSFORMATIONS)):
            continue
        # the distance is symmetric (every rule has an inverse), so either
        # orientation of the pair is a valid example; trying both lets rare
        # firsts such as factor fill from walks ending in their inverse
        orientations = [(start, end), (end, start)]
        rng.shuffle(orientations)
        for source, target in orientations:
            firsts = shortest_first_transformations(
                source, target, cfg.max_distance, cfg.max_visited)
            # uniform among valid firsts, re-drawn among still-open cells
            # when the first draw lands in a full cell (keeps generation
            # from stalling on the last few cells)
            first = rng.choice(sorted(firsts))
            if len(cells[(d, first)]) >= cfg.per_cell:
                open_firsts = sorted(t for t in firsts
                                     if len(cells[(d, t)]) < cfg.per_cell)
                if not open_firsts:
                    continue
                first = rng.choice(open_firsts)
            cells[(d, first)].append(Example(source, target, d, first))
            filled += 1
            break
    for key, examples in cells.items():
        if len(examples) < cfg.per_cell:
            report.shortfall[key] = cfg.per_cell - len(examples)
    if report.shortfall:
        log.warning("generation budget exhausted; %d cells short: %s",
                    len(report.shortfall), report.shortfall)
    examples = [e for key in sorted(cells) for e in cells[key]]
    return Dataset(examples), report


def split_dataset(dataset: Dataset, ratios=(0.9, 0.05, 0.05), seed=0):
    """Split into train/validation/test, preserving per-cell balance."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    rng = Random(seed)
    by_cell = {}
    for example in dataset.examples:
        by_cell.setdefault((example.distance, example.first), []).append(example)
    splits = ([], [], [])
    for key in sorted(by_cell):
        cell = list(by_cell[key])
        rng.shuffle(cell)
        n = len(cell)
        n_train = round(n * ratios[0])
        n_val = round(n * ratios[1])
        splits[0].extend(cell[:n_train])
        splits[1].extend(cell[n_train:n_train + n_val])
        splits[2].extend(cell[n_train + n_val:])
    return (Dataset(splits[0], "train"),
            Dataset(splits[1], "validation"),
            Dataset(splits[2], "test"))


def save_dataset(dataset: Dataset, path):
    """TSV: distance, first name, source s-expr, target s-expr."""
    with open(path, "w") as fh:
        for e in dataset.examples:
            fh.write(f"{e.distance}\t{TRANSFORMATION_NAMES[e.first]}\t"
                     f"{ex.to_string(e.source)}\t{ex.to_string(e.target)}\n")


def load_dataset(path, split="train") -> Dataset:
    examples = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 fields")
            d, first_name, source, target = parts
            examples.append(Example(
                ex.parse(source), ex.parse(target), int(d),
                Transformation(TRANSFORMATION_NAMES.index(first_name))))
    return Dataset(examples, split)


def dataset_stats(dataset: Dataset) -> dict:
    """Count plus length/height statistics over sources and targets."""
    stats = {"count": len(dataset)}
    if not dataset.examples:
        return stats
    lengths = []
    heights = []
    for e in dataset.examples:
        for side in (e.source, e.target):
            lengths.append(ex.length(side))
            heights.append(ex.height(side))
    stats.update({
        "avg_length": sum(lengths) / len(lengths),
        "min_length": min(lengths),
        "max_length": max(lengths),
        "avg_height": sum(heights) / len(heights),
        "min_height": min(heights),
        "max_height": max(heights),
    })
    return stats


STATS_ROWS = (
    ("Number of examples", "count"),
    ("Average length", "avg_length"),
    ("Minimum length", "min_length"),
    ("Maximum length", "max_length"),
    ("Average height", "avg_height"),
    ("Minimum height", "min_height"),
    ("Maximum height", "max_height"),
)


def stats_csv(datasets) -> str:
    """CSV with one row per statistic and one column per split."""
    cols = [dataset_stats(d) for d in datasets]
    lines = ["statistic," + ",".join(d.split.capitalize() for d in datasets)]
    for label, key in STATS_ROWS:
        values = []
        for stats in cols:
            v = stats.get(key, "")
            if isinstance(v, float):
                v = f"{v:.2f}"
            values.append(str(v))
        lines.append(f"{label}," + ",".join(values))
    return "\n".join(lines) + "\n"
