import json

import numpy as np
import pytest

from hadr import datasets
from hadr.data import (
    DataError, Dataset, apply_standardizer, fit_standardizer, load, load_csv,
    load_dataset_json, load_keel_dat, save_dataset, stratified_split,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def toy(n_neg=90, n_pos=10, m=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_neg + n_pos, m))
    y = np.r_[np.zeros(n_neg, int), np.ones(n_pos, int)]
    return Dataset(X, y, name="toy")


class TestDataset:
    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), [0, 1])

    def test_non_binary_labels(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 2)), [0, 1, 2])

    def test_immutable(self):
        d = toy()
        with pytest.raises(ValueError):
            d.features[0, 0] = 1.0

    def test_json_round_trip_is_exact(self, tmp_path):
        d = toy()
        save_dataset(d, tmp_path / "d.json")
        back = load_dataset_json(tmp_path / "d.json")
        assert np.array_equal(back.features, d.features)
        assert np.array_equal(back.labels, d.labels)
        assert back.feature_names == d.feature_names and back.name == d.name
        assert set(json.loads((tmp_path / "d.json").read_text())) == {
            "name", "feature_names", "features", "labels"}


class TestCsv:
    def test_positive_label_mapping(self, tmp_path):
        p = write(tmp_path, "t.csv", "f1,f2,cls\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n")
        d = load_csv(p, "cls", "b")
        assert d.labels.tolist() == [0, 1, 0, 1]
        assert d.feature_names == ("f1", "f2")
        np.testing.assert_array_equal(d.features, [[1, 2], [3, 4], [5, 6], [7, 8]])

    def test_label_by_index(self, tmp_path):
        p = write(tmp_path, "t.csv", "y,f\na,1\nb,2\nb,3\n")
        d = load_csv(p, 0)
        assert d.labels.tolist() == [1, 0, 0]  # minority 'a' is positive

    def test_three_labels_rejected(self, tmp_path):
        p = write(tmp_path, "t.csv", "f,y\n1,a\n2,b\n3,c\n")
        with pytest.raises(DataError, match="two label values"):
            load_csv(p, "y")

    def test_non_numeric_cell_reports_position(self, tmp_path):
        p = write(tmp_path, "t.csv", "f,y\n1,a\nxx,b\n")
        with pytest.raises(DataError, match=r"row 3.*'f'"):
            load_csv(p, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "nope.csv")

    def test_csv_round_trip(self, tmp_path):
        d = toy(20, 5)
        rows = ["a,b,c,label"] + [",".join(map(repr, x.tolist())) + f",{c}"
                                  for x, c in zip(d.features, d.labels)]
        p = write(tmp_path, "r.csv", "\n".join(rows) + "\n")
        back = load_csv(p, "label", "1")
        assert np.array_equal(back.features, d.features)
        assert np.array_equal(back.labels, d.labels)


KEEL = """@relation tiny
@attribute Sex {M, F, I}
@attribute Length real [0.0, 1.0]
@attribute Rings integer [1, 29]
@attribute Class {positive, negative}
@inputs Sex, Length, Rings
@outputs Class
@data
M, 0.5, 3, negative
F, 0.25, 4, positive
I, 0.75, 5, negative
"""


class TestKeel:
    def test_parses_nominal_and_numeric(self, tmp_path):
        d = load_keel_dat(write(tmp_path, "t.dat", KEEL))
        assert d.name == "tiny"
        assert d.feature_names == ("Sex", "Length", "Rings")
        np.testing.assert_array_equal(d.features, [[0, 0.5, 3], [1, 0.25, 4], [2, 0.75, 5]])
        assert d.labels.tolist() == [0, 1, 0]

    def test_override_positive(self, tmp_path):
        d = load_keel_dat(write(tmp_path, "t.dat", KEEL), positive_class="negative")
        assert d.labels.tolist() == [1, 0, 1]

    def test_missing_data_section(self, tmp_path):
        with pytest.raises(DataError, match="@data"):
            load_keel_dat(write(tmp_path, "t.dat", KEEL.split("@data")[0]))

    def test_empty_data_section(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            load_keel_dat(write(tmp_path, "t.dat", KEEL.split("@data")[0] + "@data\n"))

    def test_unknown_type(self, tmp_path):
        with pytest.raises(DataError, match="unknown attribute type"):
            load_keel_dat(write(tmp_path, "t.dat", KEEL.replace("real [0.0, 1.0]", "date")))

    def test_malformed_header(self, tmp_path):
        with pytest.raises(DataError):
            load_keel_dat(write(tmp_path, "t.dat", "@attribute\n@data\n1\n"))

    def test_missing_value_rejected(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            load_keel_dat(write(tmp_path, "t.dat", KEEL.replace("0.25", "?")))

    def test_bundled_files_match_published_sizes(self):
        # (n, m, imbalance ratio) from the dataset summary table
        expected = {"abalone9vs18": (731, 8, 16.4), "wine3vs5": (691, 11, 68.1),
                    "abalone20": (1916, 8, 72.7), "pc1": (1109, 21, 13.4)}
        for name, (n, m, ir) in expected.items():
            d = datasets.load_named(name)
            assert (d.n, d.m) == (n, m), name
            assert round(d.imbalance_ratio, 1) == ir, name

    def test_dispatch(self, tmp_path):
        p = write(tmp_path, "t.dat", KEEL)
        assert load(p).n == 3
        with pytest.raises(DataError):
            load(p, fmt="xml")


class TestSplit:
    def test_counts(self):
        sp = stratified_split(toy(90, 10), 0.7, seed=3)
        assert (sp.train.n_neg, sp.train.n_pos) == (63, 7)
        assert (sp.test.n_neg, sp.test.n_pos) == (27, 3)

    def test_deterministic(self):
        a = stratified_split(toy(), 0.7, 5)
        b = stratified_split(toy(), 0.7, 5)
        assert np.array_equal(a.train_index, b.train_index)

    def test_partition_over_many_seeds(self):
        d = toy(50, 7)
        for seed in range(100):
            sp = stratified_split(d, 0.7, seed)
            both = np.concatenate([sp.train_index, sp.test_index])
            assert np.array_equal(np.sort(both), np.arange(d.n))
            assert sp.train.n_pos > 0 and sp.test.n_pos > 0

    def test_pc1_train_size(self):
        # 1032 negatives, 77 positives: round(722.4) + round(53.9) = 776
        sp = stratified_split(datasets.load_named("pc1"), 0.7, 0)
        assert sp.train.n == 776

    def test_tiny_class_rejected(self):
        with pytest.raises(DataError):
            stratified_split(toy(10, 1), 0.7, 0)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            stratified_split(toy(), 1.0, 0)


class TestStandardizer:
    def test_two_points(self):
        d = Dataset(np.array([[2.0], [4.0]]), [0, 1])
        s = fit_standardizer(d)
        assert s.means.tolist() == [3.0] and s.std_devs.tolist() == [1.0]
        assert apply_standardizer(s, d).features.ravel().tolist() == [-1.0, 1.0]

    def test_constant_column(self):
        d = Dataset(np.array([[5.0], [5.0], [5.0]]), [0, 1, 0])
        s = fit_standardizer(d)
        assert s.std_devs.tolist() == [1.0]
        assert apply_standardizer(s, d).features.ravel().tolist() == [0.0, 0.0, 0.0]

    def test_train_moments(self):
        d = Dataset(np.random.default_rng(0).normal(3.0, 5.0, size=(40, 4)), np.r_[[0] * 30, [1] * 10])
        Z = apply_standardizer(fit_standardizer(d), d).features
        assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
        np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-12)

    def test_never_sees_test_statistics(self):
        rng = np.random.default_rng(1)
        train = Dataset(rng.normal(size=(50, 2)), np.r_[[0] * 40, [1] * 10])
        test = Dataset(rng.normal(size=(20, 2)) + 10.0, np.r_[[0] * 15, [1] * 5])
        Z = apply_standardizer(fit_standardizer(train), test).features
        assert np.all(Z.mean(axis=0) > 5.0)

    def test_whitening_decorrelates(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(200, 3)) @ np.array([[1, 0.9, 0], [0, 1, 0.5], [0, 0, 1.0]])
        d = Dataset(X, np.r_[[0] * 150, [1] * 50])
        Z = apply_standardizer(fit_standardizer(d, "whiten"), d).features
        np.testing.assert_allclose(np.cov(Z.T, bias=True), np.eye(3), atol=1e-9)
