"""Sparse exact matrices and Gaussian elimination over a Field.

Matrices are dicts keyed by (row, col); vectors are dicts keyed by row.
The Eliminator does incremental column reduction and backs every rank,
kernel, cokernel, and solve in the package.
"""
from __future__ import annotations

from .fields import Field


class Matrix:
    __slots__ = ("field", "nrows", "ncols", "data")

    def __init__(self, field: Field, nrows: int, ncols: int, data=None):
        self.field = field
        self.nrows = nrows
        self.ncols = ncols
        self.data = {}
        if data:
            for (i, j), v in data.items():
                if not (0 <= i < nrows and 0 <= j < ncols):
                    raise IndexError(f"entry ({i},{j}) outside {nrows}x{ncols}")
                if v != field.zero:
                    self.data[(i, j)] = v

    @classmethod
    def zero(cls, field, nrows, ncols):
        return cls(field, nrows, ncols)

    @classmethod
    def identity(cls, field, n):
        return cls(field, n, n, {(i, i): field.one for i in range(n)})

    def copy(self):
        m = Matrix(self.field, self.nrows, self.ncols)
        m.data = dict(self.data)
        return m

    def add_entry(self, i, j, v):
        F = self.field
        w = F.add(self.data.get((i, j), F.zero), v)
        if w == F.zero:
            self.data.pop((i, j), None)
        else:
            self.data[(i, j)] = w

    def __getitem__(self, ij):
        return self.data.get(ij, self.field.zero)

    def __add__(self, other):
        self._check_shape(other)
        m = self.copy()
        for ij, v in other.data.items():
            m.add_entry(ij[0], ij[1], v)
        return m

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        m = Matrix(self.field, self.nrows, self.ncols)
        m.data = {ij: self.field.neg(v) for ij, v in self.data.items()}
        return m

    def scale(self, c):
        F = self.field
        m = Matrix(F, self.nrows, self.ncols)
        if c != F.zero:
            m.data = {ij: F.mul(c, v) for ij, v in self.data.items()}
        return m

    def __matmul__(self, other):
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch in matmul")
        F = self.field
        out = Matrix(F, self.nrows, other.ncols)
        # group left entries by column for sparse product
        by_col = {}
        for (i, j), v in self.data.items():
            by_col.setdefault(j, []).append((i, v))
        for (k, j), w in other.data.items():
            for i, v in by_col.get(k, ()):
                out.add_entry(i, j, F.mul(v, w))
        return out

    def __eq__(self, other):
        return (isinstance(other, Matrix) and self.nrows == other.nrows
                and self.ncols == other.ncols and self.data == other.data)

    def __hash__(self):
        raise TypeError("matrices are mutable")

    def is_zero(self):
        return not self.data

    def transpose(self):
        m = Matrix(self.field, self.ncols, self.nrows)
        m.data = {(j, i): v for (i, j), v in self.data.items()}
        return m

    def column(self, j):
        return {i: v for (i, jj), v in self.data.items() if jj == j}

    def columns(self):
        cols = [dict() for _ in range(self.ncols)]
        for (i, j), v in self.data.items():
            cols[j][i] = v
        return cols

    def set_column(self, j, vec):
        for i, v in list(vec.items()):
            if v != self.field.zero:
                self.data[(i, j)] = v

    @classmethod
    def from_columns(cls, field, nrows, cols):
        m = cls(field, nrows, len(cols))
        for j, col in enumerate(cols):
            m.set_column(j, col)
        return m

    def rank(self):
        elim = Eliminator(self.field, self.nrows, track=False)
        for col in self.columns():
            elim.add(col)
        return elim.rank

    def nullspace(self):
        """Basis of the right kernel, as a list of column vectors (dicts)."""
        elim = Eliminator(self.field, self.nrows)
        out = []
        for j, col in enumerate(self.columns()):
            dep = elim.add(col, tag=j)
            if dep is not None:
                v = {j: self.field.one}
                _vec_sub(self.field, v, dep)
                out.append(v)
        return out

    def solve(self, rhs: "Matrix") -> "Matrix":
        """X with self @ X = rhs; raises ValueError if inconsistent."""
        if rhs.nrows != self.nrows:
            raise ValueError("shape mismatch in solve")
        elim = Eliminator(self.field, self.nrows)
        for j, col in enumerate(self.columns()):
            elim.add(col, tag=j)
        out = Matrix(self.field, self.ncols, rhs.ncols)
        for j, col in enumerate(rhs.columns()):
            res, comb = elim.reduce(col)
            if res:
                raise ValueError("inconsistent linear system")
            out.set_column(j, comb)
        return out

    def _check_shape(self, other):
        if self.nrows != other.nrows or self.ncols != other.ncols:
            raise ValueError("shape mismatch")

    def __repr__(self):
        return f"Matrix({self.field}, {self.nrows}x{self.ncols}, nnz={len(self.data)})"


def _vec_sub(F, a: dict, b: dict, c=None):
    """a -= c*b in place (c defaults to 1)."""
    for i, v in b.items():
        w = F.mul(c, v) if c is not None else v
        u = F.sub(a.get(i, F.zero), w)
        if u == F.zero:
            a.pop(i, None)
        else:
            a[i] = u


class Eliminator:
    """Incremental column reduction against an accumulating pivot set.

    Feed columns with add(); dependencies come back as combinations of
    previously added columns (by tag), which yields kernels and solves.
    reduce() leaves a residual supported away from the pivot rows, which
    yields cokernel projections.
    """

    def __init__(self, field: Field, nrows: int, track: bool = True):
        self.field = field
        self.nrows = nrows
        self.track = track
        self.reduced = []      # reduced columns, pivot entry normalized to 1
        self.pivot_rows = []   # pivot row of each reduced column
        self.combos = []       # tag-combination realizing each reduced column
        self.pivot_row_set = set()

    @property
    def rank(self):
        return len(self.reduced)

    def reduce(self, col: dict):
        """Return (residual, combo): col = A@combo + residual, residual
        having no support on pivot rows."""
        F = self.field
        res = dict(col)
        comb: dict = {}
        for k, r in enumerate(self.pivot_rows):
            c = res.get(r)
            if c is None or c == F.zero:
                continue
            _vec_sub(F, res, self.reduced[k], c)
            if self.track:
                for tag, v in self.combos[k].items():
                    u = F.add(comb.get(tag, F.zero), F.mul(c, v))
                    if u == F.zero:
                        comb.pop(tag, None)
                    else:
                        comb[tag] = u
        return res, comb

    def add(self, col: dict, tag=None):
        """Add a column. Returns None if independent, else the combo of
        earlier tags equaling this column."""
        F = self.field
        res, comb = self.reduce(col)
        if not res:
            return comb
        # prefer a +-1 pivot to avoid fraction growth
        pr = None
        for i, v in res.items():
            if F.is_unit_entry(v):
                pr = i
                break
        if pr is None:
            pr = min(res)
        pv = res[pr]
        inv = F.inv(pv)
        norm = {i: F.mul(inv, v) for i, v in res.items()}
        self.reduced.append(norm)
        self.pivot_rows.append(pr)
        self.pivot_row_set.add(pr)
        if self.track:
            tcomb = {t: F.neg(F.mul(inv, v)) for t, v in comb.items()}
            if tag is not None:
                tcomb[tag] = F.add(tcomb.get(tag, F.zero), inv)
            self.combos.append(tcomb)
        else:
            self.combos.append({})
        return None
