import numpy as np
import pytest

from feti_schur.matrix_core import SparseCsr, csr_to_dense
from feti_schur.mmio import read_csr, read_dense, write_csr, write_dense


def test_general_roundtrip(tmp_path, rng):
    d = rng.standard_normal((6, 4)) * (rng.random((6, 4)) < 0.5)
    a = SparseCsr.from_dense(d)
    write_csr(tmp_path / "a.mtx", a, comment="test")
    text = (tmp_path / "a.mtx").read_text()
    assert text.startswith("%%MatrixMarket matrix coordinate real general")
    assert read_csr(tmp_path / "a.mtx") == a


def test_symmetric_roundtrip(tmp_path, rng):
    d = rng.standard_normal((5, 5))
    d = d + d.T
    write_csr(tmp_path / "s.mtx", SparseCsr.from_dense(d), symmetric=True)
    text = (tmp_path / "s.mtx").read_text()
    assert "coordinate real symmetric" in text.splitlines()[0]
    # only the lower triangle is stored
    assert len([ln for ln in text.splitlines() if not ln.startswith("%")]) == 1 + 15
    np.testing.assert_array_equal(csr_to_dense(read_csr(tmp_path / "s.mtx")), d)


def test_one_based_indices(tmp_path):
    write_csr(tmp_path / "e.mtx", SparseCsr.from_coo(2, 3, [1], [2], [5.0]))
    body = [ln for ln in (tmp_path / "e.mtx").read_text().splitlines() if not ln.startswith("%")]
    assert body[0].split() == ["2", "3", "1"]
    assert body[1].split()[:2] == ["2", "3"]


def test_duplicate_entries_rejected(tmp_path):
    (tmp_path / "d.mtx").write_text(
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n")
    with pytest.raises(ValueError):
        read_csr(tmp_path / "d.mtx")


def test_dense_roundtrip(tmp_path, rng):
    d = rng.standard_normal((3, 4))
    write_dense(tmp_path / "x.mtx", d)
    assert (tmp_path / "x.mtx").read_text().startswith("%%MatrixMarket matrix array real general")
    np.testing.assert_array_equal(read_dense(tmp_path / "x.mtx"), d)


def test_empty_matrix_roundtrip(tmp_path):
    write_csr(tmp_path / "z.mtx", SparseCsr.empty(3, 0))
    assert read_csr(tmp_path / "z.mtx").shape == (3, 0)
