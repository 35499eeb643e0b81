import numpy as np
import pytest

from multdmd import KoopmanApprox, SnapshotSet, arc_dictionary, cycle_spectrum, fit_pod
from multdmd import io as mio
from multdmd.dictionary import Dictionary
from multdmd.exceptions import ParseError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestSnapshots:
    def test_roundtrip_uniform(self, tmp_path, rng):
        S = SnapshotSet(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
        mio.save_snapshots(S, tmp_path / "s.csv")
        T = mio.load_snapshots(tmp_path / "s.csv")
        assert np.array_equal(T.X, S.X) and np.array_equal(T.Y, S.Y)
        assert np.array_equal(T.weights, S.weights)
        assert (tmp_path / "s.csv").read_text().startswith("d=2,M=3,weighted=0\n")

    def test_roundtrip_weighted_bit_exact(self, tmp_path, rng):
        S = SnapshotSet(rng.normal(size=(40, 3)) * 1e5, rng.normal(size=(40, 3)) * 1e-7, rng.uniform(1, 3, 40))
        mio.save_snapshots(S, tmp_path / "s.csv", {"config": "abc"})
        T = mio.load_snapshots(tmp_path / "s.csv")
        assert np.array_equal(T.X, S.X) and np.array_equal(T.Y, S.Y)
        assert np.array_equal(T.weights, S.weights)

    def test_extra_header_keys(self, tmp_path):
        p = write(tmp_path / "s.csv", "d=1,M=1,weighted=0,config=deadbeef\n0.5,0.25\n")
        S = mio.load_snapshots(p)
        assert S.X[0, 0] == 0.5 and S.Y[0, 0] == 0.25

    def test_column_mismatch(self, tmp_path):
        p = write(tmp_path / "s.csv", "d=2,M=2,weighted=0\n1,2,3,4\n1,2,3\n")
        with pytest.raises(ParseError) as info:
            mio.load_snapshots(p)
        assert info.value.lineno == 3

    def test_non_numeric(self, tmp_path):
        p = write(tmp_path / "s.csv", "d=1,M=2,weighted=0\n1,2\n1,x\n")
        with pytest.raises(ParseError) as info:
            mio.load_snapshots(p)
        assert info.value.lineno == 3

    @pytest.mark.parametrize("text", ["", "1,2\n", "d=1,weighted=0\n1,2\n", "d=a,M=1,weighted=0\n1,2\n"])
    def test_bad_header(self, tmp_path, text):
        with pytest.raises(ParseError) as info:
            mio.load_snapshots(write(tmp_path / "s.csv", text))
        assert info.value.lineno == 1

    def test_row_count_mismatch(self, tmp_path):
        with pytest.raises(ParseError):
            mio.load_snapshots(write(tmp_path / "s.csv", "d=1,M=3,weighted=0\n1,2\n"))

    def test_pod_coefficient_pairing(self, tmp_path, rng):
        coeffs = rng.normal(size=(80, 3))
        mio.save_snapshots(SnapshotSet.from_trajectory(coeffs), tmp_path / "c.csv")
        S = mio.load_snapshots(tmp_path / "c.csv")
        assert (S.count, S.dim) == (79, 3)


def test_fields_roundtrip(tmp_path, rng):
    F = rng.normal(size=(6, 11))
    mio.save_fields(F, tmp_path / "f.csv")
    assert np.array_equal(mio.load_fields(tmp_path / "f.csv"), F)
    assert (tmp_path / "f.csv").read_text().startswith("D=11,T=6")


def test_dictionary_roundtrip(tmp_path, rng):
    D = Dictionary(rng.normal(size=(9, 4)))
    mio.save_dictionary(D, tmp_path / "d.csv")
    assert np.array_equal(mio.load_dictionary(tmp_path / "d.csv").centroids, D.centroids)


class TestOperator:
    def test_multdmd_roundtrip(self, tmp_path):
        K = KoopmanApprox("multdmd", sigma=[2, -1, 0, 0])
        mio.save_operator(K, tmp_path / "k.csv")
        text = (tmp_path / "k.csv").read_text().splitlines()
        assert text[0] == "N=4,variant=multdmd"
        assert text[1:] == ["0,2", "2,0", "3,0"]
        assert np.array_equal(mio.load_operator(tmp_path / "k.csv").sigma, K.sigma)

    def test_dense_roundtrip(self, tmp_path, rng):
        K = KoopmanApprox("dense", matrix=rng.normal(size=(5, 5)))
        mio.save_operator(K, tmp_path / "k.csv")
        assert np.array_equal(mio.load_operator(tmp_path / "k.csv").matrix, K.matrix)

    def test_duplicate_row_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            mio.load_operator(write(tmp_path / "k.csv", "N=2,variant=multdmd\n0,1\n0,0\n"))

    def test_unknown_variant(self, tmp_path):
        with pytest.raises(ParseError):
            mio.load_operator(write(tmp_path / "k.csv", "N=2,variant=mpedmd\n"))


def test_spectrum_file(tmp_path):
    R = cycle_spectrum(KoopmanApprox("multdmd", sigma=[1, 2, 0, 3]))
    mio.save_spectrum(R, tmp_path / "s.csv")
    cols = mio.load_spectrum(tmp_path / "s.csv")
    assert np.array_equal(cols["re"] + 1j * cols["im"], R.eigenvalues)
    assert np.array_equal(cols["cycle_length"], R.cycle_lengths)
    assert np.array_equal(cols["support_size"], R.support_sizes)
    assert np.all(np.isnan(cols["residual"]))


def test_eigenvector_file(tmp_path):
    D = arc_dictionary(4)
    R = cycle_spectrum(KoopmanApprox("multdmd", sigma=[1, 2, 3, 0]))
    mio.save_eigenvectors(R, D, tmp_path / "v.csv")
    rows = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    assert rows.shape == (4, 1 + 2 + 2 * 4)
    assert np.array_equal(rows[:, 1:3], D.centroids)
    V = rows[:, 3::2] + 1j * rows[:, 4::2]
    assert np.array_equal(V, R.eigvecs)


def test_pod_roundtrip(tmp_path, rng):
    B = fit_pod(rng.normal(size=(12, 7)), 3)
    mio.save_pod(B, tmp_path / "p.csv")
    C = mio.load_pod(tmp_path / "p.csv")
    assert np.array_equal(C.mean_field, B.mean_field)
    assert np.array_equal(C.modes, B.modes)
    assert np.array_equal(C.singular_values, B.singular_values)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "D=7,r=3" and len(lines) == 1 + 1 + 3 + 1
