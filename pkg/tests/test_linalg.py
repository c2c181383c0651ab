import random
from fractions import Fraction

import pytest

from opdual.fields import Field, QQ, F2
from opdual.linalg import Matrix, Eliminator


def test_field_basics():
    assert QQ.of("2/3") == Fraction(2, 3)
    assert F2.of(5) == 1
    f5 = Field(5)
    assert f5.mul(3, 4) == 2
    assert f5.inv(3) == 2
    assert f5.of(Fraction(1, 2)) == 3
    with pytest.raises(ValueError):
        Field(6)


def _random_matrix(rng, field, m, n, density=0.4):
    mat = Matrix(field, m, n)
    for i in range(m):
        for j in range(n):
            if rng.random() < density:
                mat.add_entry(i, j, field.of(rng.randint(-3, 3)))
    return mat


def _dense_rank(mat):
    """Naive dense fraction-based rank oracle."""
    rows = [[Fraction(0)] * mat.ncols for _ in range(mat.nrows)]
    p = mat.field.char
    for (i, j), v in mat.data.items():
        rows[i][j] = Fraction(v)
    r = 0
    for c in range(mat.ncols):
        piv = None
        for i in range(r, mat.nrows):
            if (rows[i][c] % p if p else rows[i][c]) != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(mat.nrows):
            if i != r and rows[i][c] != 0:
                f = rows[i][c] / rows[r][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
                if p:
                    rows[i] = [Fraction(int(a.numerator * pow(a.denominator, -1, p)) % p)
                               if a != 0 else Fraction(0) for a in rows[i]]
        r += 1
    return r


@pytest.mark.parametrize("field", [QQ, F2, Field(5)])
def test_rank_against_dense_oracle(field):
    rng = random.Random(11)
    for _ in range(25):
        m = rng.randint(1, 7)
        n = rng.randint(1, 7)
        a = _random_matrix(rng, field, m, n)
        assert a.rank() == _dense_rank(a)


@pytest.mark.parametrize("field", [QQ, F2])
def test_nullspace(field):
    rng = random.Random(3)
    for _ in range(20):
        a = _random_matrix(rng, field, rng.randint(1, 6), rng.randint(1, 6))
        null = a.nullspace()
        assert len(null) == a.ncols - a.rank()
        for v in null:
            out = {}
            for j, c in v.items():
                for i, w in a.column(j).items():
                    out[i] = field.add(out.get(i, field.zero), field.mul(c, w))
            assert all(x == field.zero for x in out.values())


def test_solve():
    rng = random.Random(5)
    for _ in range(20):
        a = _random_matrix(rng, QQ, 5, 4)
        x = _random_matrix(rng, QQ, 4, 2)
        b = a @ x
        x2 = a.solve(b)
        assert a @ x2 == b
    a = Matrix(QQ, 2, 1, {(0, 0): Fraction(1)})
    with pytest.raises(ValueError):
        a.solve(Matrix(QQ, 2, 1, {(1, 0): Fraction(1)}))


def test_matrix_algebra():
    a = Matrix(QQ, 2, 2, {(0, 0): Fraction(1), (0, 1): Fraction(2)})
    b = Matrix(QQ, 2, 2, {(1, 0): Fraction(3)})
    assert (a + b) - b == a
    assert (a @ Matrix.identity(QQ, 2)) == a
    assert a.transpose().transpose() == a
    assert (-a) + a == Matrix.zero(QQ, 2, 2)
    assert a.scale(Fraction(0)).is_zero()


def test_eliminator_reduce_residual():
    # residual of reduce() always avoids pivot rows (cokernel projection)
    rng = random.Random(9)
    a = _random_matrix(rng, QQ, 6, 4)
    elim = Eliminator(QQ, 6)
    for j, col in enumerate(a.columns()):
        elim.add(col, tag=j)
    for i in range(6):
        res, comb = elim.reduce({i: Fraction(1)})
        assert not (set(res) & elim.pivot_row_set)
