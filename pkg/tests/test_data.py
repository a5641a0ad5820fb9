import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from facecf.data import DataError, Dataset, ToySpec, generate_toy, load_csv, save_csv, subsample


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_basic(tmp_path):
    data = load_csv(write(tmp_path / "a.csv", "x,y,label\n0,0,0\n1,1,1\n2,2,1\n"))
    assert (data.n, data.d, data.n_classes) == (3, 2, 2)
    assert data.feature_names == ("x", "y")
    np.testing.assert_array_equal(data.labels, [0, 1, 1])


def test_load_csv_label_by_index(tmp_path):
    data = load_csv(write(tmp_path / "a.csv", "label,x\n0,5\n1,6\n"), label_column=0)
    np.testing.assert_array_equal(data.features[:, 0], [5, 6])


def test_load_csv_reports_bad_row(tmp_path):
    rows = ["x,y,label"] + [f"{i},{i},{i % 2}" for i in range(4)] + ["abc,1,0"]
    with pytest.raises(DataError, match="row 5"):
        load_csv(write(tmp_path / "a.csv", "\n".join(rows) + "\n"))


def test_load_csv_dense_remap(tmp_path):
    data = load_csv(write(tmp_path / "a.csv", "x,label\n0,7\n1,3\n2,7\n"))
    assert data.label_mapping == {3: 0, 7: 1}
    np.testing.assert_array_equal(data.labels, [1, 0, 1])


@pytest.mark.parametrize("text, msg", [
    ("x,label\n0,0\n", "at least 2"),
    ("x,label\n0,1\n1,1\n", "one distinct label"),
    ("x,label\n0,0.5\n1,1\n", "non-integer label"),
])
def test_load_csv_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(write(tmp_path / "a.csv", text))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_roundtrip_full_precision(tmp_path):
    rng = np.random.default_rng(3)
    data = Dataset(rng.normal(size=(40, 3)) * 1e3, rng.integers(0, 3, 40), n_classes=3)
    save_csv(data, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)
    assert back.fingerprint() == data.fingerprint()


def test_dataset_is_immutable():
    data = Dataset([[0.0], [1.0]], [0, 1])
    with pytest.raises(ValueError):
        data.features[0, 0] = 5.0


@pytest.mark.parametrize("X, y", [
    ([[0.0]], [0]),
    ([[0.0], [np.nan]], [0, 1]),
    ([[0.0], [1.0]], [0, 0]),
    ([[0.0], [1.0]], [0, -1]),
])
def test_dataset_invariants(X, y):
    with pytest.raises(DataError):
        Dataset(X, y)


def test_generate_toy_default_counts():
    data = generate_toy(ToySpec())
    assert data.n == 500 and data.d == 2 and data.n_classes == 2
    np.testing.assert_array_equal(data.labels, [0] * 200 + [1] * 300)


def test_generate_toy_deterministic():
    a, b = generate_toy(ToySpec(seed=11)), generate_toy(ToySpec(seed=11))
    assert a.features.tobytes() == b.features.tobytes()
    assert not np.array_equal(a.features, generate_toy(ToySpec(seed=12)).features)


def test_generate_toy_tiny():
    data = generate_toy(ToySpec(1, 1, 1, seed=0))
    assert data.n == 3
    np.testing.assert_array_equal(data.labels, [0, 1, 1])


def test_toy_spec_rejects_zero():
    with pytest.raises(DataError):
        ToySpec(n_blue=0)


def test_generate_toy_marginals():
    n = 10_000
    data = generate_toy(ToySpec(n, n, n, seed=5))
    X = data.features
    blue, bottom, cluster = X[:n], X[n:2 * n], X[2 * n:]
    assert abs(blue[:, 0].std(ddof=1) - 0.4) <= 0.04
    assert abs(bottom[:, 1].std(ddof=1) - 0.5) <= 0.05
    np.testing.assert_allclose(cluster.mean(axis=0), [3.5, 8.0], atol=0.1)
    assert 0 <= blue[:, 1].min() and blue[:, 1].max() <= 10
    assert 0 <= bottom[:, 0].min() and bottom[:, 0].max() <= 10


def test_subsample_full_is_identity(toy):
    sub, idx = subsample(toy, toy.n, seed=1)
    np.testing.assert_array_equal(idx, np.arange(toy.n))
    assert sub.fingerprint() == toy.fingerprint()


def test_subsample_two_rows(toy):
    sub, idx = subsample(toy, 2, seed=4)
    assert sub.n == 2
    for row, i in zip(sub.features, idx):
        np.testing.assert_array_equal(row, toy.features[i])


def test_subsample_deterministic_and_range(toy):
    assert np.array_equal(subsample(toy, 50, 9)[1], subsample(toy, 50, 9)[1])
    for m in (1, toy.n + 1):
        with pytest.raises(DataError):
            subsample(toy, m)


@settings(max_examples=50, deadline=None)
@given(m=st.integers(2, 500), seed=st.integers(0, 2**32 - 1))
def test_subsample_no_duplicates(toy, m, seed):
    _, idx = subsample(toy, m, seed)
    assert len(set(idx.tolist())) == m
