import struct

import numpy as np
import pytest

from quantlsh.dataio import load_dataset, read_bin, read_csv, write_bin, write_csv
from quantlsh.errors import DatasetFormatError


def test_bin_roundtrip(tmp_path):
    X = np.random.default_rng(0).standard_normal((5, 3))
    path = tmp_path / "x.bin"
    write_bin(path, X)
    raw = path.read_bytes()
    assert raw[:4] == b"LSHV"
    assert struct.unpack("<II", raw[4:12]) == (5, 3)
    assert np.frombuffer(raw[12:20], "<f8")[0] == X[0, 0]
    ids, back = read_bin(path)
    assert ids.tolist() == list(range(5))
    assert np.array_equal(back, X)


def test_bin_errors_name_offsets(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + bytes(8))
    with pytest.raises(DatasetFormatError, match="byte 0"):
        read_bin(path)
    path.write_bytes(b"LSHV" + struct.pack("<II", 3, 2) + bytes(8 * 4))
    with pytest.raises(DatasetFormatError, match="byte 44"):
        read_bin(path)
    path.write_bytes(b"LSH")
    with pytest.raises(DatasetFormatError, match="byte 3"):
        read_bin(path)


def test_csv_plain_and_id_column(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("# comment\n1.0,2.0\n\n3.5,-1\n")
    ids, X = read_csv(path)
    assert ids.tolist() == [0, 1]
    assert X.tolist() == [[1.0, 2.0], [3.5, -1.0]]
    path.write_text("10,1.0,2.0\n12,0,1\n")
    ids, X = read_csv(path, id_column=True)
    assert ids.tolist() == [10, 12]
    assert X.shape == (2, 2)


def test_csv_roundtrip(tmp_path):
    X = np.random.default_rng(1).standard_normal((4, 3))
    path = tmp_path / "x.csv"
    write_csv(path, X, ids=[7, 8, 9, 10])
    ids, back = read_csv(path, id_column=True)
    assert ids.tolist() == [7, 8, 9, 10]
    assert np.array_equal(back, X)


@pytest.mark.parametrize("text, row", [("1,2\n3\n", 2), ("1,2\n3,x\n", 2), ("", None)])
def test_csv_errors_name_rows(tmp_path, text, row):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DatasetFormatError, match=f"row {row}" if row else "no data rows"):
        read_csv(path)


def test_csv_rejects_binary_bytes(tmp_path):
    path = tmp_path / "x.csv"
    path.write_bytes(b"1,2\n\x88\xff,3\n")
    with pytest.raises(DatasetFormatError, match="UTF-8"):
        read_csv(path)


def test_dispatch(tmp_path):
    X = np.eye(2)
    write_csv(tmp_path / "a.csv", X)
    write_bin(tmp_path / "a.lshv", X)
    assert np.array_equal(load_dataset(tmp_path / "a.csv")[1], X)
    assert np.array_equal(load_dataset(tmp_path / "a.lshv")[1], X)
    assert np.array_equal(load_dataset(tmp_path / "a.lshv", "bin")[1], X)
