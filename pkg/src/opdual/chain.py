"""Finitely generated chain complexes over an exact field.

Complexes carry a named basis per degree; every constructor asserts
d^2 = 0 and every chain map asserts the chain-map law, so sign errors
anywhere upstream surface immediately.

Sign conventions (fixed once, verified by tests):
  tensor        d(a(x)b) = da(x)b + (-1)^|a| a(x)db
  shift by s    boundary scaled by (-1)^s
  dual          (d phi)(x) = -phi(dx); then dual(dual(A)) = A on the nose
  chain map     f d = (-1)^s d f for a map of degree s
"""
from __future__ import annotations

from .fields import Field
from .linalg import Matrix


class ChainComplex:
    def __init__(self, field: Field, basis: dict, diff: dict, check: bool = True):
        """basis: degree -> sequence of hashable labels (unique across all
        degrees); diff: degree k -> Matrix dim(k-1) x dim(k)."""
        self.field = field
        self.basis = {d: tuple(b) for d, b in basis.items() if len(b) > 0}
        self.diff = {}
        self._index = {}
        self.label_degree = {}
        for d, labels in self.basis.items():
            self._index[d] = {l: i for i, l in enumerate(labels)}
            for l in labels:
                if l in self.label_degree:
                    raise ValueError(f"duplicate basis label {l!r}")
                self.label_degree[l] = d
        for k, m in diff.items():
            if m.is_zero():
                continue
            if m.nrows != self.dim(k - 1) or m.ncols != self.dim(k):
                raise ValueError(f"boundary shape mismatch in degree {k}")
            self.diff[k] = m
        if check:
            for k in self.diff:
                lower = self.diff.get(k - 1)
                if lower is not None and not (lower @ self.diff[k]).is_zero():
                    raise ValueError(f"d^2 != 0 at degree {k}")

    @classmethod
    def from_rule(cls, field, basis, rule, check=True):
        """rule(degree, label) -> iterable of (label_in_degree-1, coeff)."""
        basis = {d: tuple(b) for d, b in basis.items() if len(b) > 0}
        index = {d: {l: i for i, l in enumerate(b)} for d, b in basis.items()}
        diff = {}
        for d, labels in basis.items():
            if d - 1 not in basis:
                continue
            m = Matrix(field, len(basis[d - 1]), len(labels))
            low = index[d - 1]
            for j, l in enumerate(labels):
                for l2, c in rule(d, l):
                    m.add_entry(low[l2], j, field.of(c))
            diff[d] = m
        return cls(field, basis, diff, check=check)

    def dim(self, k) -> int:
        return len(self.basis.get(k, ()))

    def degrees(self):
        return sorted(self.basis)

    def dims(self) -> dict:
        return {d: len(b) for d, b in self.basis.items()}

    def total_dim(self) -> int:
        return sum(len(b) for b in self.basis.values())

    def index(self, k) -> dict:
        return self._index.get(k, {})

    def d_matrix(self, k) -> Matrix:
        m = self.diff.get(k)
        if m is None:
            m = Matrix(self.field, self.dim(k - 1), self.dim(k))
        return m

    def boundary_of(self, label) -> dict:
        """d of a basis element as a label-keyed vector."""
        k = self.label_degree[label]
        col = self.d_matrix(k).column(self._index[k][label])
        low = self.basis.get(k - 1, ())
        return {low[i]: v for i, v in col.items()}

    def homology_table(self) -> dict:
        out = {}
        ranks = {k: self.d_matrix(k).rank() for k in self.diff}
        for k in self.degrees():
            h = self.dim(k) - ranks.get(k, 0) - ranks.get(k + 1, 0)
            if h:
                out[k] = h
        return out

    def euler_characteristic(self):
        return sum((-1) ** (k % 2) * self.dim(k) for k in self.degrees())

    def __eq__(self, other):
        return (isinstance(other, ChainComplex) and self.field == other.field
                and self.basis == other.basis and self.diff == other.diff)

    def __repr__(self):
        return f"ChainComplex({self.field}, dims={self.dims()})"


def zero_complex(field) -> ChainComplex:
    return ChainComplex(field, {}, {})


def k_complex(field, degree=0, label="1") -> ChainComplex:
    return ChainComplex(field, {degree: [label]}, {})


def interval(field) -> ChainComplex:
    """The interval H: g0, g1 in degree 0, g in degree 1, d(g) = g1 - g0."""
    return ChainComplex.from_rule(
        field, {0: ["g0", "g1"], 1: ["g"]},
        lambda d, l: [("g1", 1), ("g0", -1)] if l == "g" else [])


class ChainMap:
    def __init__(self, source: ChainComplex, target: ChainComplex, mats: dict,
                 degree: int = 0, check: bool = True):
        self.source = source
        self.target = target
        self.degree = degree
        self.mats = {}
        for k, m in mats.items():
            if m.is_zero():
                continue
            if m.nrows != target.dim(k + degree) or m.ncols != source.dim(k):
                raise ValueError(f"map shape mismatch in degree {k}")
            self.mats[k] = m
        if check:
            self.verify()

    def verify(self):
        s = self.degree
        sgn = self.source.field.of((-1) ** (s % 2))
        for k in set(self.source.degrees()) | {d + 1 for d in self.source.degrees()}:
            lhs = self.matrix(k - 1) @ self.source.d_matrix(k)
            rhs = (self.target.d_matrix(k + s) @ self.matrix(k)).scale(sgn)
            if lhs != rhs:
                raise ValueError(f"chain-map law fails at degree {k}")

    @classmethod
    def from_rule(cls, source, target, rule, degree=0, check=True):
        """rule(degree, source label) -> iterable of (target label, coeff)."""
        mats = {}
        for k in source.degrees():
            m = Matrix(source.field, target.dim(k + degree), source.dim(k))
            tix = target.index(k + degree)
            for j, l in enumerate(source.basis[k]):
                for l2, c in rule(k, l):
                    m.add_entry(tix[l2], j, source.field.of(c))
            mats[k] = m
        return cls(source, target, mats, degree=degree, check=check)

    @classmethod
    def zero(cls, source, target, degree=0):
        return cls(source, target, {}, degree=degree, check=False)

    @classmethod
    def identity(cls, c: ChainComplex):
        mats = {k: Matrix.identity(c.field, c.dim(k)) for k in c.degrees()}
        return cls(c, c, mats, check=False)

    def matrix(self, k) -> Matrix:
        m = self.mats.get(k)
        if m is None:
            m = Matrix(self.source.field, self.target.dim(k + self.degree),
                       self.source.dim(k))
        return m

    def apply(self, k, vec: dict) -> dict:
        """Apply to a label-keyed vector in source degree k."""
        F = self.source.field
        six = self.source.index(k)
        m = self.matrix(k)
        out = {}
        for l, c in vec.items():
            j = six[l]
            for i, v in m.column(j).items():
                w = F.add(out.get(i, F.zero), F.mul(c, v))
                if w == F.zero:
                    out.pop(i, None)
                else:
                    out[i] = w
        tl = self.target.basis.get(k + self.degree, ())
        return {tl[i]: v for i, v in out.items()}

    def then(self, other: "ChainMap") -> "ChainMap":
        """other compose self (self first)."""
        if other.source is not self.target and other.source != self.target:
            raise ValueError("composition mismatch")
        mats = {}
        for k in self.source.degrees():
            mats[k] = other.matrix(k + self.degree) @ self.matrix(k)
        return ChainMap(self.source, other.target, mats,
                        degree=self.degree + other.degree, check=False)

    def __add__(self, other):
        mats = {k: self.matrix(k) + other.matrix(k)
                for k in set(self.mats) | set(other.mats)}
        return ChainMap(self.source, self.target, mats, degree=self.degree,
                        check=False)

    def __sub__(self, other):
        return self + other.scale(self.source.field.of(-1))

    def __neg__(self):
        return self.scale(self.source.field.of(-1))

    def scale(self, c):
        mats = {k: m.scale(c) for k, m in self.mats.items()}
        return ChainMap(self.source, self.target, mats, degree=self.degree,
                        check=False)

    def __eq__(self, other):
        if not isinstance(other, ChainMap) or self.degree != other.degree:
            return False
        keys = set(self.mats) | set(other.mats)
        return all(self.matrix(k) == other.matrix(k) for k in keys)

    def is_zero(self):
        return all(m.is_zero() for m in self.mats.values())

    def is_iso(self):
        if self.degree != 0:
            ds = {k: self.source.dim(k) for k in self.source.degrees()}
            dt = {k - self.degree: self.target.dim(k) for k in self.target.degrees()}
            if ds != dt:
                return False
        for k in self.source.degrees():
            if self.source.dim(k) != self.target.dim(k + self.degree):
                return False
            if self.matrix(k).rank() != self.source.dim(k):
                return False
        return True

    def __repr__(self):
        return f"ChainMap(deg={self.degree}, {self.source!r} -> {self.target!r})"


def compose(g: ChainMap, f: ChainMap) -> ChainMap:
    return f.then(g)


def direct_sum(field, summands):
    """summands: list of (tag, ChainComplex). Returns (C, inclusions, projections)
    with labels (tag, original label)."""
    basis = {}
    for tag, c in summands:
        for d, labels in c.basis.items():
            basis.setdefault(d, []).extend((tag, l) for l in labels)
    lookup = {tag: c for tag, c in summands}

    def rule(d, lab):
        tag, l = lab
        return [((tag, l2), v) for l2, v in lookup[tag].boundary_of(l).items()]

    total = ChainComplex.from_rule(field, basis, rule, check=False)
    incs = {}
    projs = {}
    for tag, c in summands:
        incs[tag] = ChainMap.from_rule(
            c, total, lambda d, l, t=tag: [((t, l), 1)], check=False)
        projs[tag] = ChainMap.from_rule(
            total, c, lambda d, lab, t=tag: [(lab[1], 1)] if lab[0] == t else [],
            check=False)
    return total, incs, projs


def koszul_sign(field, degrees, positions):
    """Sign for reordering graded symbols: degrees[i] is the degree of the
    i-th source symbol, positions[i] its target slot. Sign is the product of
    (-1)^{d_i d_j} over inverted pairs."""
    exp = 0
    n = len(degrees)
    for i in range(n):
        for j in range(i + 1, n):
            if positions[i] > positions[j]:
                exp += degrees[i] * degrees[j]
    return field.one if exp % 2 == 0 else field.neg(field.one)


def tensor_many(field, factors, label_prefix=None):
    """Tensor product with basis labels = tuples of factor labels.

    An empty factor list gives the unit k[0] with label ()."""
    if any(f.total_dim() == 0 for f in factors):
        return zero_complex(field)
    combos = {(): 0}
    for f in factors:
        new = {}
        for tup, d in combos.items():
            for l, dl in f.label_degree.items():
                new[tup + (l,)] = d + dl
        combos = new
    basis = {}
    for tup, d in combos.items():
        basis.setdefault(d, []).append(tup)
    for d in basis:
        basis[d].sort(key=repr)

    fdeg = [f.label_degree for f in factors]

    def rule(d, tup):
        out = []
        sign = 1
        for i, f in enumerate(factors):
            dl = f.boundary_of(tup[i])
            for l2, c in dl.items():
                out.append((tup[:i] + (l2,) + tup[i + 1:], c if sign > 0 else field.neg(c)))
            if fdeg[i][tup[i]] % 2 == 1:
                sign = -sign
        return out

    return ChainComplex.from_rule(field, basis, rule)


def tensor_map_many(field, maps, source=None, target=None):
    """Tensor of chain maps. Sign rule: applying f_i to (a_1 (x) ... (x) a_k)
    picks up (-1)^{deg(f_i) * (|a_1|+...+|a_{i-1}|)}."""
    if source is None:
        source = tensor_many(field, [m.source for m in maps])
    if target is None:
        target = tensor_many(field, [m.target for m in maps])
    deg = sum(m.degree for m in maps)
    sdeg = [m.source.label_degree for m in maps]

    def rule(d, tup):
        terms = [((), field.one)]
        below = 0
        for i, m in enumerate(maps):
            k = sdeg[i][tup[i]]
            img = m.apply(k, {tup[i]: field.one})
            s = field.one
            if m.degree % 2 == 1 and below % 2 == 1:
                s = field.neg(s)
            new = []
            for tup0, c0 in terms:
                for l2, c2 in img.items():
                    new.append((tup0 + (l2,), field.mul(c0, field.mul(s, c2))))
            terms = new
            below += k
        return terms

    return ChainMap.from_rule(source, target, rule, degree=deg)


def permute_factors_map(field, factors, perm, source=None, target=None):
    """Chain iso reordering tensor factors: source = tensor(factors),
    target = tensor of factors in the order given by perm, where perm[i]
    is the target slot of source factor i. Koszul signs applied."""
    k = len(factors)
    if source is None:
        source = tensor_many(field, factors)
    ordered = [None] * k
    for i, p in enumerate(perm):
        ordered[p] = factors[i]
    if target is None:
        target = tensor_many(field, ordered)
    fdeg = [f.label_degree for f in factors]

    def rule(d, tup):
        degs = [fdeg[i][tup[i]] for i in range(k)]
        sign = koszul_sign(field, degs, perm)
        out = [None] * k
        for i, p in enumerate(perm):
            out[p] = tup[i]
        return [(tuple(out), sign)]

    return ChainMap.from_rule(source, target, rule)


def shift(c: ChainComplex, s: int) -> ChainComplex:
    basis = {d + s: labels for d, labels in c.basis.items()}
    sgn = c.field.of((-1) ** (s % 2))
    diff = {k + s: c.diff[k].scale(sgn) for k in c.diff}
    return ChainComplex(c.field, basis, diff)


def linear_dual(c: ChainComplex) -> ChainComplex:
    """Degree k basis = duals of degree -k; (d phi)(x) = -phi(dx)."""
    basis = {-d: [("dual", l) for l in labels] for d, labels in c.basis.items()}
    diff = {}
    for k in c.diff:
        # boundary on duals in degree -k+1, target degree -k
        m = c.diff[k].transpose().scale(c.field.of(-1))
        diff[-k + 1] = m
    return ChainComplex(c.field, basis, diff)


def dual_map(f: ChainMap) -> ChainMap:
    """Dual of a degree-0 chain map: dual(target) -> dual(source)."""
    if f.degree != 0:
        raise ValueError("dual_map needs degree 0")
    src = linear_dual(f.target)
    tgt = linear_dual(f.source)
    mats = {-k: f.matrix(k).transpose() for k in f.mats}
    return ChainMap(src, tgt, mats)


def dual_pairing(a: ChainComplex, b: ChainComplex) -> ChainMap:
    """Iso dual(a) (x) dual(b) -> dual(a (x) b); sign-free under the
    constant-sign dual convention."""
    field = a.field
    src = tensor_many(field, [linear_dual(a), linear_dual(b)])
    tgt = linear_dual(tensor_many(field, [a, b]))

    def rule(d, tup):
        (_, la), (_, lb) = tup
        return [(("dual", (la, lb)), 1)]

    return ChainMap.from_rule(src, tgt, rule)


def double_dual_iso(c: ChainComplex) -> ChainMap:
    """Canonical iso c -> dual(dual(c)); identity matrices."""
    tgt = linear_dual(linear_dual(c))
    return ChainMap.from_rule(c, tgt, lambda d, l: [(("dual", ("dual", l)), 1)])


def cone(f: ChainMap) -> ChainComplex:
    """Mapping cone of a degree-0 map: C_k = src_{k-1} + tgt_k,
    d(x, y) = (-dx, f(x) + dy)."""
    if f.degree != 0:
        raise ValueError("cone needs a degree-0 map")
    field = f.source.field
    basis = {}
    for d, labels in f.source.basis.items():
        basis.setdefault(d + 1, []).extend(("c0", l) for l in labels)
    for d, labels in f.target.basis.items():
        basis.setdefault(d, []).extend(("c1", l) for l in labels)

    def rule(d, lab):
        side, l = lab
        if side == "c1":
            return [(("c1", l2), v) for l2, v in f.target.boundary_of(l).items()]
        out = [(("c0", l2), field.neg(v))
               for l2, v in f.source.boundary_of(l).items()]
        k = f.source.label_degree[l]
        out.extend((("c1", l2), v)
                   for l2, v in f.apply(k, {l: field.one}).items())
        return out

    return ChainComplex.from_rule(field, basis, rule)


def is_quasi_iso(f: ChainMap) -> bool:
    return not cone(f).homology_table()


def is_acyclic(c: ChainComplex) -> bool:
    return not c.homology_table()


def hom_complex(a: ChainComplex, b: ChainComplex) -> ChainComplex:
    """Mapping complex: degree-s basis = pairs ("h", la, lb) with
    |lb| - |la| = s, representing la -> lb. Differential realizes
    (df)(x) = d(f(x)) - (-1)^{|f|} f(dx); cycles of degree s are exactly
    chain maps of degree s."""
    field = a.field
    basis = {}
    for la, da in a.label_degree.items():
        for lb, db in b.label_degree.items():
            basis.setdefault(db - da, []).append(("h", la, lb))
    for d in basis:
        basis[d].sort(key=repr)

    # transpose of a's boundary: for each la, which la' have la in d(la')
    up = {}
    for k in a.diff:
        labels_hi = a.basis[k]
        labels_lo = a.basis[k - 1]
        for (i, j), v in a.diff[k].data.items():
            up.setdefault(labels_lo[i], []).append((labels_hi[j], v))

    def rule(s, lab):
        _, la, lb = lab
        out = [(("h", la, l2), v) for l2, v in b.boundary_of(lb).items()]
        sgn = field.of(-((-1) ** (s % 2)))
        for la2, v in up.get(la, ()):
            out.append((("h", la2, lb), field.mul(sgn, v)))
        return out

    return ChainComplex.from_rule(field, basis, rule)


def hom_elem_to_map(h: ChainComplex, vec: dict, a: ChainComplex,
                    b: ChainComplex, degree: int, check=True) -> ChainMap:
    """Convert a degree-`degree` element of hom_complex(a, b) (label-keyed
    vector) into a ChainMap; valid iff the element is a cycle."""
    field = a.field
    table = {}
    for lab, c in vec.items():
        _, la, lb = lab
        table.setdefault(la, []).append((lb, c))
    return ChainMap.from_rule(a, b, lambda d, l: table.get(l, ()),
                              degree=degree, check=check)


def map_to_hom_elem(f: ChainMap) -> dict:
    """Inverse of hom_elem_to_map on chain maps."""
    field = f.source.field
    vec = {}
    for k in f.source.degrees():
        m = f.matrix(k)
        src_labels = f.source.basis[k]
        tgt_labels = f.target.basis.get(k + f.degree, ())
        for (i, j), v in m.data.items():
            vec[("h", src_labels[j], tgt_labels[i])] = v
    return vec


def hom_postcompose(homab: ChainComplex, psi: ChainMap,
                    homab2: ChainComplex) -> ChainMap:
    """hom(A,B) -> hom(A,B') given psi: B -> B' of degree 0."""
    field = psi.source.field

    def rule(s, lab):
        _, la, lb = lab
        k = psi.source.label_degree[lb]
        return [(("h", la, lb2), v)
                for lb2, v in psi.apply(k, {lb: field.one}).items()]

    return ChainMap.from_rule(homab, homab2, rule)


def hom_precompose(homab: ChainComplex, phi: ChainMap,
                   homa2b: ChainComplex) -> ChainMap:
    """hom(A,B) -> hom(A',B) given phi: A' -> A of degree 0 (f -> f phi)."""
    field = phi.source.field
    # for each la in A, the A'-elements mapping onto it
    pre = {}
    for k in phi.source.degrees():
        m = phi.matrix(k)
        src_labels = phi.source.basis[k]
        tgt_labels = phi.target.basis.get(k, ())
        for (i, j), v in m.data.items():
            pre.setdefault(tgt_labels[i], []).append((src_labels[j], v))

    def rule(s, lab):
        _, la, lb = lab
        return [(("h", la2, lb), v) for la2, v in pre.get(la, ())]

    return ChainMap.from_rule(homab, homa2b, rule)


def hom_tensor_interchange(homab, homcd, a, b, c, d, target=None) -> ChainMap:
    """hom(A,B) (x) hom(C,D) -> hom(A(x)C, B(x)D), the map realizing
    (f (x) g)(x (x) y) = (-1)^{|g||x|} f(x) (x) g(y)."""
    field = a.field
    src = tensor_many(field, [homab, homcd])
    if target is None:
        target = hom_complex(tensor_many(field, [a, c]),
                             tensor_many(field, [b, d]))

    def rule(s, tup):
        (_, la, lb), (_, lc, ld) = tup
        g_deg = d.label_degree[ld] - c.label_degree[lc]
        x_deg = a.label_degree[la]
        sign = -1 if (g_deg * x_deg) % 2 == 1 else 1
        return [(("h", (la, lc), (lb, ld)), sign)]

    return ChainMap.from_rule(src, target, rule)


def kernel_complex(f: ChainMap):
    """Kernel of a degree-0 chain map with its inclusion. Labels ("ker",k,i)."""
    if f.degree != 0:
        raise ValueError("kernel needs degree 0")
    field = f.source.field
    null = {}
    for k in f.source.degrees():
        null[k] = f.matrix(k).nullspace()
    basis = {k: [("ker", k, i) for i in range(len(v))] for k, v in null.items() if v}
    incl_mats = {}
    for k, vecs in null.items():
        m = Matrix.from_columns(field, f.source.dim(k), vecs)
        incl_mats[k] = m
    diff = {}
    for k in basis:
        if k - 1 not in basis:
            if not (f.source.d_matrix(k) @ incl_mats[k]).is_zero():
                raise AssertionError("kernel not preserved by boundary")
            continue
        img = f.source.d_matrix(k) @ incl_mats[k]
        diff[k] = incl_mats[k - 1].solve(img)
    ker = ChainComplex(field, basis, diff, check=True)
    incl = ChainMap(ker, f.source, {k: incl_mats[k] for k in basis}, check=True)
    return ker, incl


def cokernel_complex(f: ChainMap):
    """Cokernel of a degree-0 chain map.

    Returns (C, proj, sect) where proj: target -> C is a chain map and
    sect: degree -> Matrix is a degreewise section of proj (not a chain
    map in general). Cokernel labels are ("cok", k, target label)."""
    if f.degree != 0:
        raise ValueError("cokernel needs degree 0")
    from .linalg import Eliminator
    field = f.source.field
    elims = {}
    kept = {}
    for k in f.target.degrees():
        elim = Eliminator(field, f.target.dim(k), track=False)
        for col in f.matrix(k - 0).columns() if f.source.dim(k) else []:
            elim.add(col)
        elims[k] = elim
        kept[k] = [i for i in range(f.target.dim(k)) if i not in elim.pivot_row_set]
    basis = {k: [("cok", k, f.target.basis[k][i]) for i in rows]
             for k, rows in kept.items() if rows}
    pos = {k: {i: r for r, i in enumerate(rows)} for k, rows in kept.items()}
    proj_mats = {}
    for k in f.target.degrees():
        m = Matrix(field, len(kept.get(k, ())), f.target.dim(k))
        for j in range(f.target.dim(k)):
            res, _ = elims[k].reduce({j: field.one})
            for i, v in res.items():
                m.add_entry(pos[k][i], j, v)
        proj_mats[k] = m
    sect = {}
    for k, rows in kept.items():
        m = Matrix(field, f.target.dim(k), len(rows))
        for r, i in enumerate(rows):
            m.add_entry(i, r, field.one)
        sect[k] = m
    diff = {}
    for k in basis:
        if k - 1 in basis:
            diff[k] = proj_mats[k - 1] @ (f.target.d_matrix(k) @ sect[k])
    cok = ChainComplex(field, basis, diff, check=True)
    proj = ChainMap(f.target, cok, proj_mats, check=True)
    return cok, proj, sect


def kernel_cokernel(f: ChainMap):
    ker, _ = kernel_complex(f)
    cok, _, _ = cokernel_complex(f)
    return ker, cok
