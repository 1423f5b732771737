"""Path search over the rewrite graph: BFS, NNGS and Batch-NNGS.

All three test for the target on generation and share one result/stat
shape. Guided searches order the frontier by estimated distance to the
target plus alpha times the depth in the search tree.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .model import Model, batch_embed, classify, embed
from .rewrite import NUM_TRANSFORMATIONS, Transformation, kernel


@dataclass
class SearchConfig:
    alpha: float = 0.5
    batch_size: int = 512
    timeout: float = None  # seconds of wall clock; None = unlimited
    max_visited: int = 1_000_000

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.batch_size < NUM_TRANSFORMATIONS:
            raise ValueError("batch_size must be >= 8")


@dataclass
class SearchStats:
    states_expanded: int = 0
    states_generated: int = 0
    nn_batches: int = 0
    elapsed: float = 0.0


@dataclass
class SearchResult:
    outcome: str  # found | timeout | exhausted | resource_limit
    path: list = None
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def found(self):
        return self.outcome == "found"


def _reconstruct(parents, source, target):
    path = []
    node = target
    while node != source:
        parent, t = parents[node]
        path.append(t)
        node = parent
    path.reverse()
    return path


class _Deadline:
    def __init__(self, timeout):
        self.start = time.perf_counter()
        self.limit = timeout

    def expired(self):
        return (self.limit is not None
                and time.perf_counter() - self.start > self.limit)

    def elapsed(self):
        return time.perf_counter() - self.start


def bfs_search(source, target, cfg: SearchConfig) -> SearchResult:
    """Uninformed exhaustive search; found paths are shortest."""
    stats = SearchStats()
    clock = _Deadline(cfg.timeout)

    def finish(outcome, path=None):
        stats.elapsed = clock.elapsed()
        return SearchResult(outcome, path, stats)

    if source == target:
        return finish("found", [])
    visited = {source}
    parents = {}
    queue = deque([source])
    while queue:
        if clock.expired():
            return finish("timeout")
        if len(visited) > cfg.max_visited:
            return finish("resource_limit")
        current = queue.popleft()
        stats.states_expanded += 1
        for t, child in kernel.neighbors(current):
            stats.states_generated += 1
            if child in visited:
                continue
            visited.add(child)
            parents[child] = (current, Transformation(t))
            if child == target:
                return finish("found", _reconstruct(parents, source, target))
            queue.append(child)
    return finish("exhausted")


def priority(estimated_distance, depth, alpha):
    return estimated_distance + alpha * depth


class _NngsEntry:
    __slots__ = ("priority", "serial", "expr", "depth", "order", "next_idx")

    def __init__(self, priority, serial, expr, depth, order):
        self.priority = priority
        self.serial = serial
        self.expr = expr
        self.depth = depth
        self.order = order
        self.next_idx = 0

    def __lt__(self, other):
        return (self.priority, self.serial) < (other.priority, other.serial)


def nngs_search(source, target, model: Model, cfg: SearchConfig) -> SearchResult:
    """Best-first search, one neural-network call per inserted expression.

    The queue top is peeked; its transformations are tried one at a time in
    decreasing predicted likelihood, and the entry is only popped once all
    eight have been tried.
    """
    stats = SearchStats()
    clock = _Deadline(cfg.timeout)

    def finish(outcome, path=None):
        stats.elapsed = clock.elapsed()
        return SearchResult(outcome, path, stats)

    if source == target:
        return finish("found", [])

    with ad.no_grad():
        h_target = embed(target, model).data

    def insert(expr, depth):
        with ad.no_grad():
            h = embed(expr, model).data
            distance = float(np.abs(h - h_target).sum())
            logits = classify(
                ad.constant(h[None]), ad.constant(h_target[None]), model
            ).data[0]
        stats.nn_batches += 1
        # decreasing likelihood; ties by canonical transformation index
        order = list(np.argsort(-logits, kind="stable"))
        entry = _NngsEntry(priority(distance, depth, cfg.alpha),
                           insert.serial, expr, depth, order)
        insert.serial += 1
        heapq.heappush(queue, entry)

    insert.serial = 0
    queue = []
    visited = {source}
    parents = {}
    insert(source, 0)
    while queue:
        if clock.expired():
            return finish("timeout")
        if len(visited) > cfg.max_visited:
            return finish("resource_limit")
        current = queue[0]
        if current.next_idx >= NUM_TRANSFORMATIONS:
            heapq.heappop(queue)
            continue
        if current.next_idx == 0:
            stats.states_expanded += 1
        t = int(current.order[current.next_idx])
        current.next_idx += 1
        child = kernel.apply_transformation(current.expr, t)
        if child is None:
            continue
        stats.states_generated += 1
        if child in visited:
            continue
        visited.add(child)
        parents[child] = (current.expr, Transformation(t))
        if child == target:
            return finish("found", _reconstruct(parents, source, target))
        insert(child, current.depth + 1)
    return finish("exhausted")


def batch_nngs_search(source, target, model: Model,
                      cfg: SearchConfig) -> SearchResult:
    """NNGS variant amortizing network calls over queue flushes.

    A FIFO main queue is expanded BFS-style; once it exceeds the batch
    size, all its expressions are embedded in one batch, scored, and moved
    to a priority reserve queue. When the main queue runs dry, reserve
    entries are transferred back while fewer than K = batch_size / 8 have
    moved and their priority is below the first transfer's priority + 1.
    Transformation likelihoods are not used.
    """
    stats = SearchStats()
    clock = _Deadline(cfg.timeout)

    def finish(outcome, path=None):
        stats.elapsed = clock.elapsed()
        return SearchResult(outcome, path, stats)

    if source == target:
        return finish("found", [])

    with ad.no_grad():
        h_target = embed(target, model).data
    k_transfer = cfg.batch_size // NUM_TRANSFORMATIONS
    main = deque([(source, 0)])
    reserve = []  # heap of (priority, serial, expr, depth)
    serial = 0
    visited = {source}
    parents = {}
    while main or reserve:
        if clock.expired():
            return finish("timeout")
        if len(visited) > cfg.max_visited:
            return finish("resource_limit")
        if len(main) > cfg.batch_size:
            flushed = list(main)
            main.clear()
            with ad.no_grad():
                h = batch_embed([e for e, _ in flushed], model).data
            stats.nn_batches += 1
            distances = np.abs(h - h_target[None]).sum(axis=1)
            for (expr, depth), dist in zip(flushed, distances):
                heapq.heappush(reserve, (priority(float(dist), depth, cfg.alpha),
                                         serial, expr, depth))
                serial += 1
        if not main:
            first_priority = None
            transferred = 0
            while reserve and transferred < k_transfer:
                if (first_priority is not None
                        and reserve[0][0] >= first_priority + 1.0):
                    break
                prio, _, expr, depth = heapq.heappop(reserve)
                if first_priority is None:
                    first_priority = prio
                main.append((expr, depth))
                transferred += 1
            if not main:
                break
        current, depth = main.popleft()
        stats.states_expanded += 1
        for t, child in kernel.neighbors(current):
            stats.states_generated += 1
            if child in visited:
                continue
            visited.add(child)
            parents[child] = (current, Transformation(t))
            if child == target:
                return finish("found", _reconstruct(parents, source, target))
            main.append((child, depth + 1))
    return finish("exhausted")


ALGORITHMS = ("bfs", "nngs", "batch-nngs")


def run_algorithm(name, source, target, model, cfg: SearchConfig):
    if name == "bfs":
        return bfs_search(source, target, cfg)
    if name == "nngs":
        return nngs_search(source, target, model, cfg)
    if name == "batch-nngs":
        return batch_nngs_search(source, target, model, cfg)
    raise ValueError(f"unknown algorithm {name!r}")


BENCH_HEADER = ("instance_id,algorithm,outcome,path_len,states_expanded,"
                "states_generated,nn_batches,elapsed_ms")


def bench_rows(instances, algorithms, model, cfg: SearchConfig):
    """Per-instance results; instances are (instance_id, source, target)."""
    rows = []
    for instance_id, source, target in instances:
        for algo in algorithms:
            result = run_algorithm(algo, source, target, model, cfg)
            path_len = len(result.path) if result.found else ""
            rows.append({
                "instance_id": instance_id,
                "algorithm": algo,
                "outcome": result.outcome,
                "path_len": path_len,
                "states_expanded": result.stats.states_expanded,
                "states_generated": result.stats.states_generated,
                "nn_batches": result.stats.nn_batches,
                "elapsed_ms": round(result.stats.elapsed * 1000.0, 3),
                "result": result,
            })
    return rows


def bench_csv(rows) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(",".join(str(r[k]) for k in BENCH_HEADER.split(",")))
    return "\n".join(lines) + "\n"


def solve_curve(rows, algorithms, points=50):
    """Cumulative solved-instances counts per timeout threshold."""
    max_elapsed = max((r["elapsed_ms"] for r in rows), default=0.0)
    thresholds = np.linspace(0.0, max(max_elapsed, 1.0), points)
    lines = ["timeout_ms," + ",".join(f"solved_{a}" for a in algorithms)]
    for threshold in thresholds:
        counts = []
        for algo in algorithms:
            counts.append(sum(
                1 for r in rows
                if r["algorithm"] == algo and r["outcome"] == "found"
                and r["elapsed_ms"] <= threshold))
        lines.append(f"{threshold:.3f}," + ",".join(str(c) for c in counts))
    return "\n".join(lines) + "\n"
