"""Dense double-precision matrix kernels.

Everything in this package (filters, models, benchmarks) runs on the small
dense :class:`Matrix` type defined here, so the benchmark harness measures
this package's own kernels rather than an external BLAS. Matrices are
row-major, immutable by convention (operations never mutate their inputs),
and small: the tuned regime is n <= ~10 with nothing optimized beyond
avoiding per-element allocations inside the kernels.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence


class ShapeError(ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky factorization hit a non-positive pivot outside the jitter slack.

    Attributes:
        pivot_index: zero-based diagonal index of the failing pivot.
        pivot_value: the offending pivot value.
    """

    def __init__(self, pivot_index: int, pivot_value: float):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot_index} = {pivot_value:.6e}"
        )


# Relative tolerance for the symmetry precondition of cholesky_lower.
SYMMETRY_RTOL = 1e-9
# Jitter policy: a pivot in (-PIVOT_SLACK*trace/n, 0] is clamped to
# +PIVOT_CLAMP*trace/n; anything below the slack fails.
PIVOT_SLACK = 1e-10
PIVOT_CLAMP = 1e-12


class Matrix:
    """Dense real matrix with row-major storage in a flat list of floats."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: Iterable[float]):
        rows = int(rows)
        cols = int(cols)
        if rows <= 0 or cols <= 0:
            raise ShapeError(f"matrix dimensions must be positive, got {rows}x{cols}")
        values = [float(v) for v in data]
        if len(values) != rows * cols:
            raise ShapeError(
                f"data length {len(values)} does not match shape {rows}x{cols}"
            )
        for v in values:
            if not math.isfinite(v):
                raise ValueError(f"matrix element is not finite: {v!r}")
        self.rows = rows
        self.cols = cols
        self.data = values

    @classmethod
    def _raw(cls, rows: int, cols: int, data: list) -> "Matrix":
        # Internal fast path for kernel results: skips validation and copying.
        m = object.__new__(cls)
        m.rows = rows
        m.cols = cols
        m.data = data
        return m

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Matrix":
        if not rows:
            raise ShapeError("from_rows requires at least one row")
        ncols = len(rows[0])
        flat: list = []
        for r in rows:
            if len(r) != ncols:
                raise ShapeError("from_rows requires rectangular input")
            flat.extend(r)
        return cls(len(rows), ncols, flat)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        if rows <= 0 or cols <= 0:
            raise ShapeError(f"matrix dimensions must be positive, got {rows}x{cols}")
        return cls._raw(rows, cols, [0.0] * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        m = cls.zeros(n, n)
        for i in range(n):
            m.data[i * n + i] = 1.0
        return m

    @classmethod
    def diag(cls, values: Sequence[float]) -> "Matrix":
        n = len(values)
        m = cls.zeros(n, n)
        for i, v in enumerate(values):
            m.data[i * n + i] = float(v)
        return m

    @classmethod
    def column(cls, values: Sequence[float]) -> "Matrix":
        return cls(len(values), 1, values)

    @classmethod
    def row(cls, values: Sequence[float]) -> "Matrix":
        return cls(1, len(values), values)

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    def at(self, i: int, j: int) -> float:
        return self.data[i * self.cols + j]

    def __getitem__(self, key) -> float:
        i, j = key
        return self.data[i * self.cols + j]

    def to_rows(self) -> list:
        c = self.cols
        return [self.data[i * c:(i + 1) * c] for i in range(self.rows)]

    def column_values(self) -> list:
        """Flat values of an n x 1 or 1 x n matrix."""
        if self.cols != 1 and self.rows != 1:
            raise ShapeError(f"not a vector: shape {self.rows}x{self.cols}")
        return list(self.data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.data == other.data
        )

    __hash__ = None  # unhashable, like lists

    def __repr__(self) -> str:
        body = ", ".join(str(r) for r in self.to_rows())
        return f"Matrix({self.rows}x{self.cols}, [{body}])"


def _require_square(a: Matrix, op: str) -> None:
    if a.rows != a.cols:
        raise ShapeError(f"{op} requires a square matrix, got {a.rows}x{a.cols}")


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product a @ b."""
    if a.cols != b.rows:
        raise ShapeError(
            f"mat_mul dimension mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}"
        )
    n, kdim, m = a.rows, a.cols, b.cols
    ad, bd = a.data, b.data
    out = [0.0] * (n * m)
    for i in range(n):
        ai = i * kdim
        oi = i * m
        for k in range(kdim):
            aik = ad[ai + k]
            if aik != 0.0:
                bk = k * m
                for j in range(m):
                    out[oi + j] += aik * bd[bk + j]
    return Matrix._raw(n, m, out)


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    """Element-wise sum a + b."""
    if a.rows != b.rows or a.cols != b.cols:
        raise ShapeError(
            f"mat_add shape mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )
    return Matrix._raw(a.rows, a.cols, [x + y for x, y in zip(a.data, b.data)])


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    """Element-wise difference a - b."""
    if a.rows != b.rows or a.cols != b.cols:
        raise ShapeError(
            f"mat_sub shape mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )
    return Matrix._raw(a.rows, a.cols, [x - y for x, y in zip(a.data, b.data)])


def mat_scale(a: Matrix, s: float) -> Matrix:
    """Scalar multiple s * a."""
    s = float(s)
    return Matrix._raw(a.rows, a.cols, [s * x for x in a.data])


def mat_transpose(a: Matrix) -> Matrix:
    """Transpose of a."""
    n, m = a.rows, a.cols
    ad = a.data
    out = [0.0] * (n * m)
    for i in range(n):
        base = i * m
        for j in range(m):
            out[j * n + i] = ad[base + j]
    return Matrix._raw(m, n, out)


def symmetrize(a: Matrix) -> Matrix:
    """Explicit symmetrization (a + a') / 2. Never applied implicitly."""
    _require_square(a, "symmetrize")
    n = a.rows
    ad = a.data
    out = [0.0] * (n * n)
    for i in range(n):
        for j in range(n):
            out[i * n + j] = 0.5 * (ad[i * n + j] + ad[j * n + i])
    return Matrix._raw(n, n, out)


def max_abs(a: Matrix) -> float:
    return max(abs(v) for v in a.data)


def frobenius_norm(a: Matrix) -> float:
    return math.sqrt(math.fsum(v * v for v in a.data))


def _require_symmetric(a: Matrix, op: str) -> None:
    n = a.rows
    ad = a.data
    scale = max_abs(a)
    tol = SYMMETRY_RTOL * scale
    for i in range(n):
        for j in range(i + 1, n):
            if abs(ad[i * n + j] - ad[j * n + i]) > tol:
                raise ShapeError(
                    f"{op} requires a symmetric matrix; "
                    f"|a[{i},{j}] - a[{j},{i}]| = "
                    f"{abs(ad[i * n + j] - ad[j * n + i]):.3e} exceeds tolerance"
                )


def cholesky_lower(a: Matrix) -> Matrix:
    """Lower-triangular L with L @ L' == a for symmetric positive definite a.

    Slightly indefinite inputs are tolerated: a pivot in
    (-1e-10 * trace/n, 0] is clamped to +1e-12 * trace/n and factorization
    continues (covariances drift marginally indefinite through Euler
    propagation). A pivot below the slack raises
    :class:`NotPositiveDefiniteError` with the failing pivot index.
    """
    _require_square(a, "cholesky_lower")
    _require_symmetric(a, "cholesky_lower")
    n = a.rows
    ad = a.data
    mean_diag = math.fsum(ad[i * n + i] for i in range(n)) / n
    neg_slack = -PIVOT_SLACK * mean_diag
    clamp = PIVOT_CLAMP * mean_diag
    lo = [0.0] * (n * n)
    for j in range(n):
        jb = j * n
        s = ad[jb + j]
        for k in range(j):
            ljk = lo[jb + k]
            s -= ljk * ljk
        if s <= 0.0:
            if neg_slack < s <= 0.0:
                s = clamp
            if s <= 0.0:
                raise NotPositiveDefiniteError(j, s)
        ljj = math.sqrt(s)
        lo[jb + j] = ljj
        for i in range(j + 1, n):
            ib = i * n
            acc = ad[ib + j]
            for k in range(j):
                acc -= lo[ib + k] * lo[jb + k]
            lo[ib + j] = acc / ljj
    return Matrix._raw(n, n, lo)


def solve_spd(a: Matrix, b: Matrix) -> Matrix:
    """Solve a @ x == b for symmetric positive definite a.

    Uses the Cholesky factor and two triangular solves per right-hand-side
    column; no explicit inverse is ever formed. Cholesky errors propagate.
    """
    if a.rows != b.rows:
        raise ShapeError(
            f"solve_spd shape mismatch: a is {a.rows}x{a.cols}, b is {b.rows}x{b.cols}"
        )
    lo = cholesky_lower(a).data
    n = a.rows
    m = b.cols
    bd = b.data
    out = [0.0] * (n * m)
    y = [0.0] * n
    for col in range(m):
        # forward substitution: L y = b[:, col]
        for i in range(n):
            ib = i * n
            acc = bd[i * m + col]
            for k in range(i):
                acc -= lo[ib + k] * y[k]
            y[i] = acc / lo[ib + i]
        # backward substitution: L' x = y
        for i in range(n - 1, -1, -1):
            acc = y[i]
            for k in range(i + 1, n):
                acc -= lo[k * n + i] * out[k * m + col]
            out[i * m + col] = acc / lo[i * n + i]
    return Matrix._raw(n, m, out)


def mat_exp(a: Matrix) -> Matrix:
    """Matrix exponential via scaling-and-squaring with a Taylor series.

    The argument is scaled so its infinity norm is at most 0.5, the series
    is summed to convergence at machine precision, and the result is
    repeatedly squared. Accurate to ~1e-12 relative on well-conditioned
    inputs.
    """
    _require_square(a, "mat_exp")
    n = a.rows
    nrm = 0.0
    for i in range(n):
        row_sum = math.fsum(abs(v) for v in a.data[i * n:(i + 1) * n])
        if row_sum > nrm:
            nrm = row_sum
    squarings = 0
    if nrm > 0.5:
        squarings = max(0, math.ceil(math.log2(nrm / 0.5)))
    b = mat_scale(a, 0.5 ** squarings) if squarings else a
    result = Matrix.identity(n)
    term = Matrix.identity(n)
    for k in range(1, 40):
        term = mat_scale(mat_mul(term, b), 1.0 / k)
        result = mat_add(result, term)
        if frobenius_norm(term) <= 1e-17 * frobenius_norm(result):
            break
    for _ in range(squarings):
        result = mat_mul(result, result)
    return result
