import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asgl_qr.data import (DataError, Dataset, GroupStructure, SplitSpec, load_csv, load_groups,
                          split, split_indices, standardize, write_groups)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_header_and_response(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,10\n")
    d = load_csv(p, response_column="y")
    assert (d.n, d.p) == (3, 2)
    assert d.names() == ["a", "b"]
    np.testing.assert_array_equal(d.y, [3, 6, 10])
    np.testing.assert_array_equal(d.X[:, 1], [2, 5, 8])


def test_load_csv_response_by_index_without_header(tmp_path):
    p = _write(tmp_path, "1,2,3\n4,5,6\n")
    d = load_csv(p, has_header=False, response_column=0)
    np.testing.assert_array_equal(d.y, [1, 4])
    assert d.p == 2


def test_load_csv_nan_cell_is_named(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,NaN,6\n")
    with pytest.raises(DataError, match=r"'NaN' at row 3, column 2"):
        load_csv(p)


def test_load_csv_unparseable_cell(tmp_path):
    p = _write(tmp_path, "a,y\n1,2\nx,3\n")
    with pytest.raises(DataError, match="'x'"):
        load_csv(p)


def test_load_csv_single_column_has_no_covariates(tmp_path):
    p = _write(tmp_path, "y\n1\n2\n")
    with pytest.raises(DataError, match="p=0"):
        load_csv(p, response_column="y")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_ragged_row(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5\n")
    with pytest.raises(DataError, match="row 3"):
        load_csv(p)


def test_dataset_is_read_only_and_validated():
    d = Dataset(np.ones((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        d.X[0, 0] = 5.0
    with pytest.raises(DataError):
        Dataset(np.ones((3, 2)), np.zeros(4))
    with pytest.raises(DataError):
        Dataset(np.ones(3), np.zeros(3))


def test_standardize_small_column():
    d = Dataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3))
    s, _ = standardize(d)
    np.testing.assert_allclose(s.X[:, 0], [-1, 0, 1], atol=1e-15)


def test_standardize_idempotent_and_reapply():
    rng = np.random.default_rng(1)
    d = Dataset(rng.normal(3, 2, (30, 4)), rng.standard_normal(30))
    s1, params = standardize(d)
    s2, _ = standardize(s1)
    assert np.max(np.abs(s2.X - s1.X)) <= 1e-12
    np.testing.assert_array_equal(params.apply(d).X, s1.X)
    np.testing.assert_allclose(s1.X.std(axis=0, ddof=1), 1.0, atol=1e-12)


def test_standardize_constant_column_named():
    d = Dataset(np.array([[5.0, 1], [5, 2], [5, 4]]), np.zeros(3), ("const", "b"))
    with pytest.raises(DataError, match="const"):
        standardize(d)


def test_standardize_center_y():
    d = Dataset(np.array([[1.0], [2], [4]]), np.array([1.0, 2, 6]))
    s, params = standardize(d, center_y=True)
    assert params.y_center == 3.0
    np.testing.assert_allclose(s.y, [-2, -1, 3])


def test_split_deterministic_and_sizes():
    a = split_indices(10, SplitSpec(5, 3, 2, seed=4))
    b = split_indices(10, SplitSpec(5, 3, 2, seed=4))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    assert [len(u) for u in a] == [5, 3, 2]


def test_split_paper_sizes():
    d = Dataset(np.zeros((5200, 1)), np.arange(5200.0))
    tr, va, te = split(d, SplitSpec(100, 100, 5000, seed=0))
    assert (tr.n, va.n, te.n) == (100, 100, 5000)


def test_split_too_large():
    d = Dataset(np.zeros((10, 1)), np.zeros(10))
    with pytest.raises(DataError):
        split(d, SplitSpec(6, 3, 2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 60),
       st.integers(0, 2 ** 32))
def test_split_disjoint(ntr, nva, nte, extra, seed):
    n = ntr + nva + nte + extra
    idx = split_indices(n, SplitSpec(ntr, nva, nte, seed))
    allidx = np.concatenate(idx)
    assert allidx.size == ntr + nva + nte
    assert np.unique(allidx).size == allidx.size
    assert allidx.min() >= 0 and allidx.max() < n


def test_group_structure():
    g = GroupStructure.from_labels([7, 3, 7, 9])
    assert g.K == 3 and g.p == 4
    np.testing.assert_array_equal(g.group_of, [1, 0, 1, 2])
    np.testing.assert_array_equal(g.sizes, [1, 2, 1])
    c = GroupStructure.contiguous([2, 3])
    np.testing.assert_array_equal(c.group_of, [0, 0, 1, 1, 1])
    np.testing.assert_allclose(c.group_norms(np.array([3.0, 4, 0, 0, 2])), [5, 2])
    assert GroupStructure.single(4).K == 1


def test_groups_roundtrip(tmp_path):
    d = Dataset(np.ones((2, 4)), np.zeros(2), ("a", "b", "c", "d"))
    g = GroupStructure.contiguous([1, 3])
    write_groups(tmp_path / "g.csv", g, d.names())
    g2 = load_groups(tmp_path / "g.csv", d)
    np.testing.assert_array_equal(g.group_of, g2.group_of)


def test_groups_missing_feature(tmp_path):
    d = Dataset(np.ones((2, 3)), np.zeros(2), ("a", "b", "c"))
    p = _write(tmp_path, "feature,group\na,1\nb,1\n", "g.csv")
    with pytest.raises(DataError, match="c"):
        load_groups(p, d)
