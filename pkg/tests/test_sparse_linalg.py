import io

import numpy as np
import pytest

from pwqnewton import (
    LogisticSequence,
    MatrixMarketError,
    MatvecCounter,
    SparseMatrix,
    logistic_next,
    logistic_values,
    matvec,
    matvec_transpose,
    parse_matrix_market,
    row_sq_norms,
    serialize_matrix_market,
)
from oracles import random_sparse


def parse_text(text):
    return parse_matrix_market(io.StringIO(text))


class TestParse:
    def test_minimal_general(self):
        A = parse_text(
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 2\n"
            "1 1 3.0\n"
            "2 2 4.0\n"
        )
        assert (A.m, A.n, A.nz) == (2, 2, 2)
        assert np.array_equal(A.to_dense(), [[3.0, 0.0], [0.0, 4.0]])

    def test_afiro_dimensions(self, afiro_matrix):
        assert (afiro_matrix.m, afiro_matrix.n, afiro_matrix.nz) == (27, 51, 102)

    def test_symmetric_expansion(self):
        A = parse_text(
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "3 3 3\n"
            "1 1 2.0\n"
            "2 1 5.0\n"
            "3 2 -1.0\n"
        )
        dense = A.to_dense()
        assert np.array_equal(dense, dense.T)
        assert A.nz == 5
        assert dense[0, 1] == 5.0 and dense[1, 0] == 5.0

    def test_duplicates_summed(self):
        A = parse_text(
            "%%MatrixMarket matrix coordinate real general\n"
            "1 2 3\n"
            "1 1 2.0\n"
            "1 1 3.0\n"
            "1 2 1.0\n"
        )
        assert A.nz == 2
        assert np.array_equal(A.to_dense(), [[5.0, 1.0]])

    def test_comments_and_blank_lines(self):
        A = parse_text(
            "%%MatrixMarket matrix coordinate real general\n"
            "% a comment\n"
            "\n"
            "2 2 1\n"
            "% another\n"
            "2 1 7.5\n"
        )
        assert A.to_dense()[1, 0] == 7.5

    @pytest.mark.parametrize("text", [
        "not a header\n1 1 1\n1 1 1.0\n",
        "%%MatrixMarket matrix array real general\n2 2 4\n",
        "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n",
        "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 1\n",
        "%%MatrixMarket matrix coordinate real general\n1 1 1\n0 1 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 2 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 abc\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n",
        "%%MatrixMarket matrix coordinate real general\nx y z\n",
    ])
    def test_malformed_inputs(self, text):
        with pytest.raises(MatrixMarketError):
            parse_text(text)

    def test_scipy_cross_check(self, afiro_matrix):
        import pathlib

        import scipy.io

        path = pathlib.Path(__file__).parent / "fixtures" / "afiro.mtx"
        ref = scipy.io.mmread(str(path)).toarray()
        assert np.array_equal(afiro_matrix.to_dense(), ref)

    def test_round_trip_identical(self, afiro_matrix, rng):
        mats = [afiro_matrix, random_sparse(rng, 7, 11, density=0.4)[0]]
        for A in mats:
            buf = io.StringIO()
            serialize_matrix_market(A, buf)
            B = parse_matrix_market(io.StringIO(buf.getvalue()))
            assert (A.m, A.n, A.nz) == (B.m, B.n, B.nz)
            assert np.array_equal(A.indptr, B.indptr)
            assert np.array_equal(A.indices, B.indices)
            assert np.array_equal(A.data, B.data)


class TestConstruction:
    def test_invariants_rejected(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, 2, [0, 1, 2], [0, 2], [1.0, 1.0])  # col out of range
        with pytest.raises(ValueError):
            SparseMatrix(1, 3, [0, 2], [1, 1], [1.0, 2.0])  # not strictly increasing
        with pytest.raises(ValueError):
            SparseMatrix(1, 2, [0, 1], [0], [np.inf])  # non-finite

    def test_nz_counts_explicit_zeros(self):
        A = SparseMatrix.from_coo(2, 2, [0, 1], [0, 1], [0.0, 2.0])
        assert A.nz == 2

    def test_immutable(self):
        A = SparseMatrix.from_coo(1, 1, [0], [0], [1.0])
        with pytest.raises(ValueError):
            A.data[0] = 2.0


class TestKernels:
    def test_matvec_identity(self):
        A = SparseMatrix.from_dense(np.eye(3))
        assert np.array_equal(matvec(A, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_matvec_direct(self):
        A = SparseMatrix.from_dense([[1.0, 2.0], [0.0, 3.0]])
        assert np.array_equal(matvec(A, [1.0, 1.0]), [3.0, 3.0])

    def test_matvec_against_dense(self, rng):
        A, dense = random_sparse(rng, 5, 8, density=0.5)
        v = rng.standard_normal(8)
        got = matvec(A, v)
        ref = dense @ v
        assert np.all(np.abs(got - ref) <= 1e-15 * (1.0 + np.abs(ref)))

    def test_transpose_identity(self):
        A = SparseMatrix.from_dense(np.eye(3))
        assert np.array_equal(matvec_transpose(A, [4.0, 5.0, 6.0]), [4.0, 5.0, 6.0])

    def test_transpose_direct(self):
        A = SparseMatrix.from_dense([[1.0, 2.0], [0.0, 3.0]])
        assert np.array_equal(matvec_transpose(A, [1.0, 0.0]), [1.0, 2.0])

    def test_transpose_against_dense(self, rng):
        A, dense = random_sparse(rng, 6, 4, density=0.5)
        u = rng.standard_normal(6)
        got = matvec_transpose(A, u)
        ref = dense.T @ u
        assert np.all(np.abs(got - ref) <= 1e-15 * (1.0 + np.abs(ref)))

    def test_dimension_mismatch(self):
        A = SparseMatrix.from_dense(np.ones((2, 3)))
        with pytest.raises(ValueError):
            matvec(A, np.ones(2))
        with pytest.raises(ValueError):
            matvec_transpose(A, np.ones(3))

    def test_counter_semantics(self, rng):
        A, _ = random_sparse(rng, 4, 5)
        counter = MatvecCounter()
        matvec(A, np.ones(5), counter)
        matvec_transpose(A, np.ones(4), counter)
        matvec(A, np.ones(5))  # without a counter nothing is tallied
        assert counter.count == 2

    def test_adjoint_consistency(self, rng):
        for _ in range(20):
            m, n = rng.integers(1, 12, size=2)
            A, _ = random_sparse(rng, int(m), int(n), density=0.5)
            u = rng.standard_normal(A.m)
            v = rng.standard_normal(A.n)
            lhs = float(u @ matvec(A, v))
            rhs = float(matvec_transpose(A, u) @ v)
            assert abs(lhs - rhs) <= 1e-13 * (1.0 + abs(lhs) + abs(rhs))

    def test_determinism_bitwise(self, rng):
        A, _ = random_sparse(rng, 10, 14, density=0.6)
        v = rng.standard_normal(14)
        assert np.array_equal(matvec(A, v), matvec(A, v))


class TestRowSqNorms:
    def test_afiro_extremes(self, afiro_matrix):
        rowsq = row_sq_norms(afiro_matrix)
        assert rowsq.min() == pytest.approx(1.18490000, abs=1e-8)
        assert rowsq.max() == pytest.approx(44.9562810, abs=1e-6)

    def test_single_row(self):
        A = SparseMatrix.from_dense([[3.0, 4.0]])
        assert np.array_equal(row_sq_norms(A), [25.0])

    def test_null_row_is_zero(self):
        A = SparseMatrix.from_dense([[1.0, 0.0], [0.0, 0.0]])
        assert row_sq_norms(A)[1] == 0.0

    def test_matches_kernel_composition(self, rng):
        A, _ = random_sparse(rng, 6, 9, density=0.5)
        rowsq = row_sq_norms(A)
        for i in range(A.m):
            e = np.zeros(A.m)
            e[i] = 1.0
            via_kernels = matvec(A, matvec_transpose(A, e))[i]
            assert abs(rowsq[i] - via_kernels) <= 1e-15 * (1.0 + abs(via_kernels))


class TestLogistic:
    def test_first_steps(self):
        seq = LogisticSequence()
        assert seq.value == 0.4
        assert logistic_next(seq) == pytest.approx(0.68, abs=1e-15)
        assert logistic_next(seq) == pytest.approx(0.0752, abs=1e-15)

    def test_range_over_many_steps(self):
        seq = LogisticSequence()
        for _ in range(10**6):
            v = logistic_next(seq)
            assert -1.0 <= v <= 1.0

    def test_bitwise_determinism(self):
        a, b = LogisticSequence(), LogisticSequence()
        for _ in range(5000):
            assert logistic_next(a) == logistic_next(b)

    def test_values_helper(self):
        vals = logistic_values(3)
        assert vals[0] == 0.4
        assert vals[1] == 1.0 - 2.0 * 0.4 * 0.4
        assert vals[2] == 1.0 - 2.0 * vals[1] * vals[1]
