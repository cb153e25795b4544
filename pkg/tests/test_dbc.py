import math

import numpy as np
import pytest

from hadr.data import DataError, Dataset
from hadr.dbc import block_membership, compute_stats, construct_blocks
from hadr.numerics import make_rng


def labelled(n_maj, n_min, m=2, seed=0):
    X = np.random.default_rng(seed).normal(size=(n_maj + n_min, m))
    y = np.r_[np.zeros(n_maj, int), np.ones(n_min, int)]
    perm = np.random.default_rng(seed + 1).permutation(y.size)
    return Dataset(X[perm], y[perm], name="syn")


class TestStats:
    @pytest.mark.parametrize("rule", ["floor", "ceil", "nearest"])
    def test_exact_division(self, rule):
        s = compute_stats(labelled(100, 10), rule)
        assert s.ir == 10.0 and s.ir_star == 10

    def test_pc1_ratio(self):
        d = labelled(1032, 77)
        assert compute_stats(d, "nearest").ir_star == 13
        assert compute_stats(d, "floor").ir_star == 13
        assert compute_stats(d, "ceil").ir_star == 14

    def test_balanced(self):
        assert compute_stats(labelled(10, 10)).ir_star == 1

    def test_minority_larger(self):
        assert compute_stats(labelled(5, 12), "floor").ir_star == 1

    def test_tie_rounds_down(self):
        assert compute_stats(labelled(25, 10), "nearest").ir_star == 2

    def test_single_class(self):
        with pytest.raises(DataError):
            compute_stats(Dataset(np.zeros((3, 1)), [0, 0, 0]))

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            compute_stats(labelled(10, 2), "banker")


class TestBlocks:
    def test_exact_blocks(self):
        d = labelled(100, 10)
        blocks = construct_blocks(d, compute_stats(d), make_rng(0, "dbc"))
        assert len(blocks) == 10
        assert all((b.data.n_neg, b.data.n_pos) == (10, 10) for b in blocks)

    def test_pc1_chunk_sizes(self):
        d = labelled(1032, 77)
        blocks = construct_blocks(d, compute_stats(d), make_rng(0, "dbc"))
        sizes = sorted(b.data.n_neg for b in blocks)
        assert sizes == [79] * 8 + [80] * 5

    def test_wine_like_blocks(self):
        d = labelled(681, 10)
        s = compute_stats(d)
        blocks = construct_blocks(d, s, make_rng(1, "dbc"))
        assert s.ir_star == 68 and len(blocks) == 68
        assert all(b.data.n_neg in (10, 11) and b.data.n_pos == 10 for b in blocks)

    def test_deterministic(self):
        d = labelled(57, 6)
        s = compute_stats(d)
        a = construct_blocks(d, s, make_rng(9, "dbc"))
        b = construct_blocks(d, s, make_rng(9, "dbc"))
        assert all(np.array_equal(x.source_row_ids, z.source_row_ids) for x, z in zip(a, b))
        c = construct_blocks(d, s, make_rng(10, "dbc"))
        assert not all(np.array_equal(x.source_row_ids, z.source_row_ids) for x, z in zip(a, c))

    def test_partition_properties(self):
        rng = np.random.default_rng(0)
        for k in range(100):
            n_min = int(rng.integers(1, 12))
            ir = float(rng.uniform(1, 150))
            n_maj = max(1, int(round(ir * n_min)))
            d = labelled(n_maj, n_min, seed=k)
            s = compute_stats(d, ["floor", "ceil", "nearest"][k % 3])
            blocks = construct_blocks(d, s, make_rng(k, "dbc"))
            assert len(blocks) == s.ir_star
            maj_rows = np.flatnonzero(d.labels == 0)
            min_rows = np.flatnonzero(d.labels == 1)
            seen = []
            for b in blocks:
                ids = b.source_row_ids
                assert np.array_equal(np.intersect1d(ids, min_rows), min_rows)
                seen.append(np.intersect1d(ids, maj_rows))
                assert np.array_equal(d.features[ids], b.features)
            sizes = [c.size for c in seen]
            assert max(sizes) - min(sizes) <= 1
            assert set(sizes) <= {math.floor(n_maj / s.ir_star), math.ceil(n_maj / s.ir_star)}
            allmaj = np.concatenate(seen)
            assert np.array_equal(np.sort(allmaj), maj_rows)
            if s.ir >= 1:
                assert all(0.5 <= c / n_min <= 2.0 for c in sizes)

    def test_membership_dump(self):
        d = labelled(20, 4)
        blocks = construct_blocks(d, compute_stats(d), make_rng(0, "dbc"))
        dump = block_membership(blocks)
        assert [e["block"] for e in dump] == list(range(5))
        assert all(e["n_pos"] == 4 for e in dump)
