import random

import pytest

from eqsearch import expr as ex
from eqsearch import oracle
from eqsearch import rewrite as rw
from eqsearch.rewrite import Transformation as T


def t(text):
    return ex.parse(text)


def random_pair(rng, walk=5, height=(2, 5)):
    source = ex.gen_random_expr(height, rng)
    target = oracle.random_walk(source, rng.randrange(0, walk + 1), rng)
    return source, target


class TestDistance:
    def test_identity(self):
        e = t("(F (+ a b))")
        assert oracle.bfs_distance(e, e, 5) == 0

    def test_single_commute(self):
        assert oracle.bfs_distance(t("(F (+ a b))"), t("(F (+ b a))"), 5) == 1

    def test_beyond_max_depth(self):
        src = t("(F (+ a b))")
        dst = t("(+ (F b) a)")  # commute then focus-left: distance 2
        assert oracle.bfs_distance(src, dst, 2) == 2
        assert oracle.bfs_distance(src, dst, 1) is None

    def test_matches_reference(self):
        rng = random.Random(19)
        for _ in range(150):
            source, target = random_pair(rng)
            assert (oracle.bfs_distance(source, target, 6)
                    == oracle.bfs_distance_reference(source, target, 6))

    def test_symmetric(self):
        rng = random.Random(13)
        for _ in range(200):
            source, target = random_pair(rng)
            d = oracle.bfs_distance(source, target, 6)
            assert d == oracle.bfs_distance(target, source, 6)

    def test_triangle_inequality(self):
        rng = random.Random(43)
        for _ in range(50):
            a = ex.gen_random_expr((2, 4), rng)
            b = oracle.random_walk(a, rng.randrange(0, 4), rng)
            c = oracle.random_walk(b, rng.randrange(0, 4), rng)
            dab = oracle.bfs_distance(a, b, 8)
            dbc = oracle.bfs_distance(b, c, 8)
            dac = oracle.bfs_distance(a, c, 8)
            if dab is not None and dbc is not None:
                assert dac is not None and dac <= dab + dbc

    def test_resource_limit(self):
        rng = random.Random(3)
        source = ex.gen_random_expr((5, 5), rng)
        target = oracle.random_walk(source, 12, rng)
        if source == target:
            pytest.skip("walk returned to source")
        with pytest.raises(oracle.ResourceLimitError):
            oracle.bfs_distance(source, target, 12, max_visited=10)


class TestFirsts:
    def test_distance_one(self):
        firsts = oracle.shortest_first_transformations(
            t("(F (+ a b))"), t("(F (+ b a))"), 5)
        assert firsts == {T.COMMUTE}

    def test_distance_zero_rejected(self):
        e = t("(F a)")
        with pytest.raises(ValueError):
            oracle.shortest_first_transformations(e, e, 5)

    def test_firsts_reduce_distance(self):
        rng = random.Random(47)
        checked = 0
        while checked < 60:
            source, target = random_pair(rng)
            d = oracle.bfs_distance(source, target, 6)
            if not d:
                continue
            checked += 1
            firsts = oracle.shortest_first_transformations(source, target, 6)
            assert firsts
            for first in firsts:
                step = rw.apply(source, first)
                assert oracle.bfs_distance(step, target, 6) == d - 1


class TestGeneration:
    def test_minimal_config(self):
        dataset, report = oracle.generate_dataset(
            oracle.GenConfig(max_distance=1, per_cell=1, seed=5))
        assert not report.shortfall
        assert len(dataset) == 8
        assert all(e.distance == 1 for e in dataset.examples)
        firsts = {e.first for e in dataset.examples}
        assert firsts == set(T)

    def test_balanced_and_certified(self):
        cfg = oracle.GenConfig(max_distance=3, per_cell=2, seed=9)
        dataset, report = oracle.generate_dataset(cfg)
        assert not report.shortfall
        assert len(dataset) == 3 * 8 * 2
        cells = {}
        for e in dataset.examples:
            assert e.source != e.target
            cells[(e.distance, e.first)] = cells.get((e.distance, e.first), 0) + 1
            assert oracle.bfs_distance(e.source, e.target, 6) == e.distance
            step = rw.apply(e.source, e.first)
            assert oracle.bfs_distance(step, e.target, 6) == e.distance - 1
        assert all(v == 2 for v in cells.values())

    def test_deterministic(self):
        cfg = oracle.GenConfig(max_distance=2, per_cell=2, seed=77)
        a, _ = oracle.generate_dataset(cfg)
        b, _ = oracle.generate_dataset(cfg)
        assert a.examples == b.examples

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            oracle.generate_dataset(oracle.GenConfig(max_distance=0))


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        dataset, _ = oracle.generate_dataset(
            oracle.GenConfig(max_distance=2, per_cell=2, seed=3))
        path = tmp_path / "data.tsv"
        oracle.save_dataset(dataset, path)
        loaded = oracle.load_dataset(path)
        assert loaded.examples == dataset.examples

    def test_tsv_shape(self, tmp_path):
        dataset, _ = oracle.generate_dataset(
            oracle.GenConfig(max_distance=1, per_cell=1, seed=1))
        path = tmp_path / "data.tsv"
        oracle.save_dataset(dataset, path)
        for line in path.read_text().splitlines():
            d, name, source, target = line.split("\t")
            assert int(d) == 1
            assert name in rw.TRANSFORMATION_NAMES
            ex.parse(source), ex.parse(target)

    def test_split_preserves_balance(self):
        dataset, _ = oracle.generate_dataset(
            oracle.GenConfig(max_distance=2, per_cell=10, seed=21))
        train, val, test = oracle.split_dataset(dataset, (0.8, 0.1, 0.1), seed=1)
        assert len(train) + len(val) + len(test) == len(dataset)
        assert len(train) == 8 * 2 * 8
        seen = set(map(id, train.examples + val.examples + test.examples))
        assert len(seen) == len(dataset)


class TestStats:
    def test_empty(self):
        stats = oracle.dataset_stats(oracle.Dataset([]))
        assert stats == {"count": 0}

    def test_singleton(self):
        e = t("(* a (F (+ b c)))")
        stats = oracle.dataset_stats(
            oracle.Dataset([oracle.Example(e, e, 1, T.COMMUTE)]))
        assert stats["avg_length"] == stats["min_length"] == 6
        assert stats["max_length"] == 6
        assert stats["avg_height"] == stats["min_height"] == 3
        assert stats["max_height"] == 3

    def test_csv_layout(self):
        dataset, _ = oracle.generate_dataset(
            oracle.GenConfig(max_distance=1, per_cell=1, seed=2))
        csv = oracle.stats_csv([dataset])
        lines = csv.splitlines()
        assert lines[0] == "statistic,Train"
        assert lines[1].startswith("Number of examples,8")
        assert len(lines) == 8
