import math

import numpy as np
import pytest

from cdkalman.matrix import (
    Matrix,
    NotPositiveDefiniteError,
    ShapeError,
    cholesky_lower,
    frobenius_norm,
    mat_add,
    mat_exp,
    mat_mul,
    mat_scale,
    mat_sub,
    mat_transpose,
    solve_spd,
    symmetrize,
)
from helpers import assert_close, from_np, random_spd, rel_err, to_np


class TestConstruction:
    def test_data_length_must_match_shape(self):
        with pytest.raises(ShapeError):
            Matrix(2, 2, [1.0, 2.0, 3.0])

    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ShapeError):
            Matrix(0, 1, [])

    def test_rejects_non_finite_literals(self):
        with pytest.raises(ValueError):
            Matrix(1, 2, [1.0, float("nan")])
        with pytest.raises(ValueError):
            Matrix.from_rows([[1.0], [float("inf")]])

    def test_accessors(self):
        m = Matrix.from_rows([[1.0, 2.0], [3.0, 4.0]])
        assert m.shape == (2, 2)
        assert m.at(1, 0) == 3.0
        assert m[0, 1] == 2.0
        assert m.to_rows() == [[1.0, 2.0], [3.0, 4.0]]
        assert Matrix.column([5.0, 6.0]).column_values() == [5.0, 6.0]

    def test_identity_and_diag(self):
        assert Matrix.identity(2) == Matrix.from_rows([[1.0, 0.0], [0.0, 1.0]])
        assert Matrix.diag([2.0, 3.0]).at(1, 1) == 3.0


class TestMatMul:
    def test_identity_times_matrix(self):
        rng = np.random.default_rng(1)
        m = from_np(rng.standard_normal((3, 3)))
        assert mat_mul(Matrix.identity(3), m) == m

    def test_zero_annihilates(self):
        a = Matrix.from_rows([[1.0, 2.0], [3.0, 4.0]])
        z = Matrix.zeros(2, 2)
        assert mat_mul(a, z) == z

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((4, 3))
        # independent naive oracle
        expected = [[sum(a[i][k] * b[k][j] for k in range(4)) for j in range(3)]
                    for i in range(5)]
        got = mat_mul(from_np(a), from_np(b))
        assert_close(got, expected, rtol=1e-15)

    def test_dimension_mismatch_reports_both_shapes(self):
        with pytest.raises(ShapeError, match="2x3.*4x2"):
            mat_mul(Matrix.zeros(2, 3), Matrix.zeros(4, 2))

    def test_associativity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = from_np(rng.standard_normal((3, 4)))
            b = from_np(rng.standard_normal((4, 2)))
            c = from_np(rng.standard_normal((2, 5)))
            left = mat_mul(mat_mul(a, b), c)
            right = mat_mul(a, mat_mul(b, c))
            assert rel_err(left, to_np(right)) < 1e-12

    def test_transpose_of_product(self):
        rng = np.random.default_rng(4)
        a = from_np(rng.standard_normal((3, 4)))
        b = from_np(rng.standard_normal((4, 2)))
        lhs = mat_transpose(mat_mul(a, b))
        rhs = mat_mul(mat_transpose(b), mat_transpose(a))
        assert rel_err(lhs, to_np(rhs)) < 1e-14


class TestElementwise:
    def test_scale_by_one_is_identity(self):
        m = Matrix.from_rows([[1.5, -2.0], [0.25, 3.0]])
        assert mat_scale(m, 1.0) == m

    def test_additive_inverse(self):
        m = Matrix.from_rows([[1.5, -2.0], [0.25, 3.0]])
        assert mat_add(m, mat_scale(m, -1.0)) == Matrix.zeros(2, 2)

    def test_sub(self):
        m = Matrix.from_rows([[1.0, 2.0]])
        assert mat_sub(m, m) == Matrix.zeros(1, 2)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mat_add(Matrix.zeros(2, 2), Matrix.zeros(2, 3))

    def test_transpose_involution(self):
        rng = np.random.default_rng(5)
        m = from_np(rng.standard_normal((3, 5)))
        assert mat_transpose(mat_transpose(m)) == m

    def test_symmetrize(self):
        m = Matrix.from_rows([[1.0, 2.0], [4.0, 3.0]])
        assert symmetrize(m) == Matrix.from_rows([[1.0, 3.0], [3.0, 3.0]])


class TestCholesky:
    def test_identity(self):
        assert cholesky_lower(Matrix.identity(4)) == Matrix.identity(4)

    def test_known_2x2(self):
        lo = cholesky_lower(Matrix.from_rows([[4.0, 2.0], [2.0, 3.0]]))
        assert_close(lo, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], rtol=1e-15)

    def test_reconstruction(self):
        rng = np.random.default_rng(6)
        for n in (2, 3, 5, 8):
            a = random_spd(rng, n)
            lo = cholesky_lower(a)
            recon = mat_mul(lo, mat_transpose(lo))
            err = frobenius_norm(mat_sub(recon, a)) / frobenius_norm(a)
            assert err < 1e-12

    def test_strictly_lower_triangular_zeros(self):
        rng = np.random.default_rng(7)
        lo = cholesky_lower(random_spd(rng, 5))
        for i in range(5):
            for j in range(i + 1, 5):
                assert lo.at(i, j) == 0.0

    def test_indefinite_matrix_rejected_with_pivot_index(self):
        # eigenvalues of [[1, 2], [2, 1]] are 3 and -1
        with pytest.raises(NotPositiveDefiniteError) as exc:
            cholesky_lower(Matrix.from_rows([[1.0, 2.0], [2.0, 1.0]]))
        assert exc.value.pivot_index == 1

    def test_asymmetric_rejected(self):
        with pytest.raises(ShapeError, match="symmetric"):
            cholesky_lower(Matrix.from_rows([[1.0, 0.5], [0.2, 1.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError, match="square"):
            cholesky_lower(Matrix.zeros(2, 3))

    def test_jitter_clamps_tiny_negative_pivot(self):
        # trailing pivot just below zero but inside the slack band
        eps = 1e-12
        a = Matrix.from_rows([[1.0, 1.0], [1.0, 1.0 - eps]])
        lo = cholesky_lower(a)
        assert lo.at(1, 1) > 0.0

    def test_exact_zero_pivot_clamps(self):
        lo = cholesky_lower(Matrix.from_rows([[1.0, 0.0], [0.0, 0.0]]))
        assert lo.at(1, 1) > 0.0


class TestSolveSpd:
    def test_identity_system(self):
        b = Matrix.column([1.0, 2.0, 3.0])
        assert solve_spd(Matrix.identity(3), b) == b

    def test_diagonal_system(self):
        a = Matrix.from_rows([[2.0, 0.0], [0.0, 4.0]])
        b = Matrix.column([2.0, 4.0])
        assert_close(solve_spd(a, b), [[1.0], [1.0]], rtol=1e-15)

    def test_random_spd_residual(self):
        rng = np.random.default_rng(8)
        a = random_spd(rng, 4, jitter=1.0)
        b = from_np(rng.standard_normal((4, 2)))
        x = solve_spd(a, b)
        resid = frobenius_norm(mat_sub(mat_mul(a, x), b)) / frobenius_norm(b)
        assert resid < 1e-10

    def test_inverse_of_self_is_identity(self):
        rng = np.random.default_rng(9)
        for n in (2, 4, 6):
            a = random_spd(rng, n, jitter=1.0)
            x = solve_spd(a, a)
            err = frobenius_norm(mat_sub(x, Matrix.identity(n)))
            assert err < 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            solve_spd(Matrix.identity(3), Matrix.zeros(2, 1))


class TestMatExp:
    def test_exp_of_zero_is_identity(self):
        assert mat_exp(Matrix.zeros(3, 3)) == Matrix.identity(3)

    def test_diagonal(self):
        e = mat_exp(Matrix.diag([1.0, 2.0]))
        assert_close(e, [[math.e, 0.0], [0.0, math.e ** 2]], rtol=1e-12)

    def test_group_inverse(self):
        rng = np.random.default_rng(10)
        a = from_np(0.8 * rng.standard_normal((4, 4)))
        prod = mat_mul(mat_exp(a), mat_exp(mat_scale(a, -1.0)))
        assert rel_err(prod, np.eye(4)) < 1e-10

    def test_matches_scipy(self):
        from scipy.linalg import expm

        rng = np.random.default_rng(11)
        a = rng.standard_normal((5, 5))
        assert rel_err(mat_exp(from_np(a)), expm(a)) < 1e-12

    def test_block_diagonal(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((3, 3))
        block = np.zeros((5, 5))
        block[:2, :2] = a
        block[2:, 2:] = b
        ea = to_np(mat_exp(from_np(a)))
        eb = to_np(mat_exp(from_np(b)))
        expected = np.zeros((5, 5))
        expected[:2, :2] = ea
        expected[2:, 2:] = eb
        assert rel_err(mat_exp(from_np(block)), expected) < 1e-12

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            mat_exp(Matrix.zeros(2, 3))
