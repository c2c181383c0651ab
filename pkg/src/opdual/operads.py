"""Symmetric sequences, operads, cooperads and pre-cooperads.

Everything is reduced: the arity-1 term is the unit complex. Symmetric
group actions are stored through their adjacent transpositions and
composed on demand as left actions (act(s)act(t) = act(st)). Operads
store the partial compositions circ(m, i, n): term(m) (x) term(n) ->
term(m+n-1) in the consecutive-block convention matching trees.graft:
the grafted inputs become the block {i..i+n-1}.

Tree-shaped tensors p(T) = (x)_{vertices} term(arity) and their edge
contractions are derived from circ and the actions; pre-cooperads store
the dual tree-indexed data (expansions and grafting multiplications).
"""
from __future__ import annotations

import itertools

from .chain import (
    ChainComplex, ChainMap, dual_map, k_complex, linear_dual,
    permute_factors_map, tensor_many, tensor_map_many, zero_complex,
    is_quasi_iso, koszul_sign,
)
from .trees import (
    Tree, adjacent_transposition, enumerate_trees, fragments, graft,
    perm_to_adjacents,
)


def _token_image(tok, sigma):
    if isinstance(tok, int):
        return sigma[tok]
    return frozenset(sigma[l] for l in tok)


def graft_perm(sigma: dict, j: int, tau: dict) -> dict:
    """The permutation rho of {1..m+n-1} with
    graft(t, j, u).relabel(rho) = graft(t.relabel(sigma), sigma(j), u.relabel(tau))
    for sigma a permutation of t's m leaves and tau of u's n leaves."""
    m, n = len(sigma), len(tau)
    i = sigma[j]

    def embed(y):
        return y if y < i else y + n - 1

    rho = {}
    for x in range(1, m + n):
        if x < j:
            rho[x] = embed(sigma[x])
        elif x < j + n:
            rho[x] = i + tau[x - j + 1] - 1
        else:
            rho[x] = embed(sigma[x - n + 1])
    return rho


class SymSeq:
    """Arity-indexed chain complexes with symmetric group actions,
    truncated at a fixed maximum arity N."""

    def __init__(self, field, N, terms, adjacents, name=""):
        if N < 1:
            raise ValueError("max arity must be >= 1")
        self.field = field
        self.N = N
        self.name = name
        self._terms = dict(terms)
        self._adjacents = dict(adjacents)
        one = self._terms.get(1)
        if one is None or one.dims() != {0: 1}:
            raise ValueError("reduced: the arity-1 term must be the unit")
        self._act_cache = {}
        self._tree_cache = {}

    @property
    def unit_label(self):
        return self.term(1).basis[0][0]

    def term(self, n) -> ChainComplex:
        if not 1 <= n <= self.N:
            raise ValueError(f"arity {n} out of range 1..{self.N}")
        c = self._terms.get(n)
        return c if c is not None else zero_complex(self.field)

    def sigma_adj(self, n, i) -> ChainMap:
        f = self._adjacents.get((n, i))
        if f is None:
            t = self.term(n)
            if t.total_dim() == 0:
                return ChainMap.zero(t, t)
            raise ValueError(f"missing action of s_{i} in arity {n}")
        return f

    def act(self, n, perm) -> ChainMap:
        key = (n, tuple(perm[k] for k in range(1, n + 1)))
        f = self._act_cache.get(key)
        if f is None:
            f = ChainMap.identity(self.term(n))
            for j in perm_to_adjacents(perm):
                f = f.then(self.sigma_adj(n, j))
            self._act_cache[key] = f
        return f

    def tree_complex(self, t: Tree) -> ChainComplex:
        """(x)_{vertices of t} term(arity), factors in global vertex order,
        basis labels = tuples aligned with t.vertices()."""
        c = self._tree_cache.get(t)
        if c is None:
            c = tensor_many(self.field,
                            [self.term(t.arity_of(v)) for v in t.vertices()])
            self._tree_cache[t] = c
        return c

    def tree_relabel(self, t: Tree, sigma) -> ChainMap:
        """The action tree_complex(t) -> tree_complex(sigma_* t): relabel
        each factor through its local leaf permutation and reorder the
        factors with Koszul signs."""
        t2 = t.relabel(sigma)
        vs = t.vertices()
        ws = t2.vertices()
        per_factor = []
        perm = []
        for v in vs:
            v2 = frozenset(sigma[l] for l in v)
            ch = t.children(v)
            ch2 = t2.children(v2)
            loc = {k: ch2.index(_token_image(tok, sigma)) + 1
                   for k, tok in enumerate(ch, start=1)}
            per_factor.append(self.act(len(ch), loc))
            perm.append(ws.index(v2))
        step1 = tensor_map_many(self.field, per_factor,
                                source=self.tree_complex(t),
                                target=self.tree_complex(t))
        step2 = permute_factors_map(
            self.field, [self.term(t.arity_of(v)) for v in vs], perm,
            source=self.tree_complex(t), target=self.tree_complex(t2))
        return step1.then(step2)


class Operad(SymSeq):
    def __init__(self, field, N, terms, adjacents, circ_builder, name=""):
        super().__init__(field, N, terms, adjacents, name=name)
        self._circ_builder = circ_builder
        self._circ_cache = {}
        self._compose_cache = {}

    def circ(self, m, i, n) -> ChainMap:
        """term(m) (x) term(n) -> term(m+n-1), grafting at input i."""
        if not (1 <= i <= m and m + n - 1 <= self.N):
            raise ValueError(f"circ({m},{i},{n}) out of range")
        key = (m, i, n)
        f = self._circ_cache.get(key)
        if f is None:
            src = tensor_many(self.field, [self.term(m), self.term(n)])
            tgt = self.term(m + n - 1)
            if src.total_dim() == 0 or tgt.total_dim() == 0:
                f = ChainMap.zero(src, tgt)
            else:
                f = self._circ_builder(self, m, i, n)
            self._circ_cache[key] = f
        return f

    def circ_el(self, m, i, n, xvec, yvec):
        """Apply circ to homogeneous label vectors x, y."""
        F = self.field
        dx = {self.term(m).label_degree[l] for l in xvec}
        dy = {self.term(n).label_degree[l] for l in yvec}
        if not xvec or not yvec:
            return {}
        assert len(dx) == 1 and len(dy) == 1, "inputs must be homogeneous"
        vec = {(lx, ly): F.mul(cx, cy)
               for lx, cx in xvec.items() for ly, cy in yvec.items()}
        return self.circ(m, i, n).apply(dx.pop() + dy.pop(), vec)

    def contract_map(self, t: Tree, e) -> ChainMap:
        """tree_complex(t) -> tree_complex(t/e): compose the two factors
        meeting at e and resort the merged vertex's inputs."""
        t2 = t.contract(e)
        v = t.parent(e)
        ch = t.children(v)
        j = ch.index(e) + 1
        a, b = len(ch), t.arity_of(e)
        merged = t2.children(v)
        spliced = ch[:j - 1] + t.children(e) + ch[j:]
        pi = {pos: merged.index(tok) + 1 for pos, tok in enumerate(spliced, 1)}
        pair = self.circ(a, j, b).then(self.act(a + b - 1, pi))

        vs = t.vertices()
        order = []
        for w in t2.vertices():
            order.extend([v, e] if w == v else [w])
        perm = [order.index(w) for w in vs]
        factors = [self.term(t.arity_of(w)) for w in vs]
        s1 = permute_factors_map(self.field, factors, perm,
                                 source=self.tree_complex(t))
        k = order.index(v)
        tgt = self.tree_complex(t2)
        ta, tb = self.term(a), self.term(b)
        F = self.field

        def rule(d, tup):
            x, y = tup[k], tup[k + 1]
            img = pair.apply(ta.label_degree[x] + tb.label_degree[y],
                             {(x, y): F.one})
            return [(tup[:k] + (l,) + tup[k + 2:], c) for l, c in img.items()]

        s2 = ChainMap.from_rule(s1.target, tgt, rule)
        return s1.then(s2)

    def compose_along_tree(self, t: Tree) -> ChainMap:
        """tree_complex(t) -> term(arity): contract every edge (order
        independent by associativity, which the tests certify)."""
        f = self._compose_cache.get(t)
        if f is not None:
            return f
        cur = t
        g = ChainMap.identity(self.tree_complex(t))
        while cur.edges():
            e = cur.edges()[0]
            g = g.then(self.contract_map(cur, e))
            cur = cur.contract(e)
        flat = ChainMap.from_rule(self.tree_complex(cur), self.term(t.n),
                                  lambda d, l: [(l[0], 1)])
        f = g.then(flat)
        self._compose_cache[t] = f
        return f


class Cooperad(SymSeq):
    def __init__(self, field, N, terms, adjacents, cocirc_builder, name=""):
        super().__init__(field, N, terms, adjacents, name=name)
        self._cocirc_builder = cocirc_builder
        self._cocirc_cache = {}

    def cocirc(self, m, i, n) -> ChainMap:
        """term(m+n-1) -> term(m) (x) term(n), de-grafting at input i."""
        if not (1 <= i <= m and m + n - 1 <= self.N):
            raise ValueError(f"cocirc({m},{i},{n}) out of range")
        key = (m, i, n)
        f = self._cocirc_cache.get(key)
        if f is None:
            src = self.term(m + n - 1)
            tgt = tensor_many(self.field, [self.term(m), self.term(n)])
            if src.total_dim() == 0 or tgt.total_dim() == 0:
                f = ChainMap.zero(src, tgt)
            else:
                f = self._cocirc_builder(self, m, i, n)
            self._cocirc_cache[key] = f
        return f


# -- built-in operads -----------------------------------------------------

def _identity_adjacents(terms, N):
    out = {}
    for n in range(2, N + 1):
        for i in range(1, n):
            out[(n, i)] = ChainMap.identity(terms[n])
    return out


def builtin_operad(name, field, N) -> Operad:
    if name == "com":
        terms = {n: k_complex(field, 0, "e") for n in range(1, N + 1)}

        def circ_builder(p, m, i, n):
            return ChainMap.from_rule(
                tensor_many(field, [p.term(m), p.term(n)]), p.term(m + n - 1),
                lambda d, tup: [("e", 1)])

        return Operad(field, N, terms, _identity_adjacents(terms, N),
                      circ_builder, name="com")
    if name == "ass":
        terms = {n: ChainComplex(
            field, {0: sorted(itertools.permutations(range(1, n + 1)))}, {})
            for n in range(1, N + 1)}
        adjacents = {}
        for n in range(2, N + 1):
            for i in range(1, n):
                s = adjacent_transposition(n, i)
                adjacents[(n, i)] = ChainMap.from_rule(
                    terms[n], terms[n],
                    lambda d, w, s=s: [(tuple(s[x] for x in w), 1)])

        def circ_builder(p, m, i, n):
            def splice(tup):
                w, v = tup
                out = []
                for a in w:
                    if a < i:
                        out.append(a)
                    elif a == i:
                        out.extend(x + i - 1 for x in v)
                    else:
                        out.append(a + n - 1)
                return tuple(out)

            return ChainMap.from_rule(
                tensor_many(field, [p.term(m), p.term(n)]), p.term(m + n - 1),
                lambda d, tup: [(splice(tup), 1)])

        return Operad(field, N, terms, adjacents, circ_builder, name="ass")
    raise ValueError(f"unknown built-in operad {name!r}")


def trivial_operad(a: SymSeq) -> Operad:
    """The operad on a symmetric sequence with zero compositions (apart
    from the forced unit identifications)."""
    terms = {n: a.term(n) for n in range(1, a.N + 1)}
    adjacents = {(n, i): a.sigma_adj(n, i)
                 for n in range(2, a.N + 1) for i in range(1, n)
                 if a.term(n).total_dim()}

    def circ_builder(p, m, i, n):
        src = tensor_many(p.field, [p.term(m), p.term(n)])
        if n == 1:
            return ChainMap.from_rule(src, p.term(m), lambda d, tup: [(tup[0], 1)])
        if m == 1:
            return ChainMap.from_rule(src, p.term(n), lambda d, tup: [(tup[1], 1)])
        return ChainMap.zero(src, p.term(m + n - 1))

    return Operad(a.field, a.N, terms, adjacents, circ_builder,
                  name=f"trivial({a.name})" if a.name else "trivial")


def free_operad(a: SymSeq, N) -> Operad:
    """Free operad: term(n) = sum over trees of the tree-shaped tensors
    of a, composition by grafting, actions by relabeling."""
    field = a.field
    terms = {}
    for n in range(1, N + 1):
        basis = {}
        diff_rule = {}
        for t in enumerate_trees(n):
            c = a.tree_complex(t)
            for l, d in c.label_degree.items():
                basis.setdefault(d, []).append((t, l))
        for d in basis:
            basis[d].sort(key=repr)

        def rule(d, lab):
            t, l = lab
            c = a.tree_complex(t)
            return [((t, l2), v) for l2, v in c.boundary_of(l).items()]

        terms[n] = ChainComplex.from_rule(field, basis, rule)

    def relabel_rule(n, sigma):
        def rule(d, lab):
            t, l = lab
            t2 = t.relabel(sigma)
            f = a.tree_relabel(t, sigma)
            img = f.apply(d, {l: field.one})
            return [((t2, l2), v) for l2, v in img.items()]
        return rule

    adjacents = {}
    for n in range(2, N + 1):
        if terms[n].total_dim() == 0:
            continue
        for i in range(1, n):
            s = adjacent_transposition(n, i)
            adjacents[(n, i)] = ChainMap.from_rule(
                terms[n], terms[n], relabel_rule(n, s))

    def circ_builder(p, m, i, n):
        src = tensor_many(field, [p.term(m), p.term(n)])
        tgt = p.term(m + n - 1)

        def rule(d, pair):
            (t, lx), (u, ly) = pair
            v = graft(t, i, u)
            if u.n == 1:
                return [((t, lx), 1)]
            if t.n == 1:
                return [((u, ly), 1)]
            exp = {w: _expand_vertex(w, i, u.n) for w in t.vertices()}
            shf = {w: frozenset(l + i - 1 for l in w) for w in u.vertices()}
            vs = v.vertices()
            src_factors = [(exp[w], xl) for w, xl in zip(t.vertices(), lx)] + \
                          [(shf[w], yl) for w, yl in zip(u.vertices(), ly)]
            degs = [a.term(len(v.children(w))).label_degree[l]
                    for w, l in src_factors]
            pos = [vs.index(w) for w, _ in src_factors]
            sgn = koszul_sign(field, degs, pos)
            out = [None] * len(vs)
            for (w, l), pp in zip(src_factors, pos):
                out[pp] = l
            return [((v, tuple(out)), sgn)]

        return ChainMap.from_rule(src, tgt, rule)

    return Operad(field, N, terms, adjacents, circ_builder,
                  name=f"free({a.name})" if a.name else "free")


def _expand_vertex(c, i, m):
    out = set()
    for l in c:
        if l == i:
            out.update(range(i, i + m))
        elif l > i:
            out.add(l + m - 1)
        else:
            out.add(l)
    return frozenset(out)


def truncate(p: Operad, n: int, mode: str = "<=") -> Operad:
    """Arity truncation: mode "<=" zeroes the terms above n, mode "="
    keeps only arity n (plus the unit) with trivial structure."""
    if not 1 <= n <= p.N:
        raise ValueError("truncation arity out of range")
    if mode == "<=":
        keep = set(range(1, n + 1))
    elif mode == "=":
        keep = {1, n}
    else:
        raise ValueError(f"unknown truncation mode {mode!r}")
    terms = {k: p.term(k) if k in keep else zero_complex(p.field)
             for k in range(1, p.N + 1)}
    adjacents = {(k, i): p.sigma_adj(k, i)
                 for k in keep if k >= 2 for i in range(1, k)}

    def circ_builder(q, m, i, k):
        src = tensor_many(q.field, [q.term(m), q.term(k)])
        tgt = q.term(m + k - 1)
        alive = m in keep and k in keep and (m + k - 1) in keep
        if mode == "=" and m >= 2 and k >= 2:
            alive = False
        if not alive:
            return ChainMap.zero(src, tgt)
        return ChainMap(src, tgt, p.circ(m, i, k).mats, check=False)

    return Operad(p.field, p.N, terms, adjacents, circ_builder,
                  name=f"{p.name}|{mode}{n}")


# -- axiom checking -------------------------------------------------------

def _basis_with_degrees(c: ChainComplex):
    return [(l, d) for d, labels in sorted(c.basis.items()) for l in labels]


def check_operad_axioms(p: Operad, N=None) -> list:
    """All operad identities up to arity N; returns the list of failing
    identity names (empty = pass)."""
    N = N or p.N
    F = p.field
    fails = []

    if p.term(1).dims() != {0: 1}:
        fails.append("unit term")
    u = p.unit_label

    for n in range(2, N + 1):
        if p.term(n).total_dim() == 0:
            continue
        gens = [p.sigma_adj(n, i) for i in range(1, n)]
        ident = ChainMap.identity(p.term(n))
        for i, s in enumerate(gens):
            if s.then(s) != ident:
                fails.append(f"involution s_{i + 1} arity {n}")
            if i + 1 < len(gens):
                t = gens[i + 1]
                if s.then(t).then(s) != t.then(s).then(t):
                    fails.append(f"braid s_{i + 1} arity {n}")
            for jj in range(i + 2, len(gens)):
                t = gens[jj]
                if s.then(t) != t.then(s):
                    fails.append(f"commuting s_{i + 1} s_{jj + 1} arity {n}")

    for m in range(1, N + 1):
        for lab, d in _basis_with_degrees(p.term(m)):
            x = {lab: F.one}
            for i in range(1, m + 1):
                if p.circ_el(m, i, 1, x, {u: F.one}) != x:
                    fails.append(f"right unit circ({m},{i},1)")
            if p.circ_el(1, 1, m, {u: F.one}, x) != x:
                fails.append(f"left unit circ(1,1,{m})")

    def vec_circ(m, i, n, xv, yv):
        out = {}
        for lx, cx in xv.items():
            for ly, cy in yv.items():
                img = p.circ_el(m, i, n, {lx: F.one}, {ly: F.one})
                for l, c in img.items():
                    w = F.add(out.get(l, F.zero), F.mul(F.mul(cx, cy), c))
                    if w == F.zero:
                        out.pop(l, None)
                    else:
                        out[l] = w
        return out

    for m, n, q in itertools.product(range(2, N + 1), repeat=3):
        if m + n + q - 2 > N:
            continue
        tm, tn, tq = p.term(m), p.term(n), p.term(q)
        for (lx, dx), (ly, dy), (lz, dz) in itertools.product(
                _basis_with_degrees(tm), _basis_with_degrees(tn),
                _basis_with_degrees(tq)):
            x, y, z = {lx: F.one}, {ly: F.one}, {lz: F.one}
            for i in range(1, m + 1):
                for j in range(1, n + 1):
                    lhs = vec_circ(m + n - 1, i + j - 1, q,
                                   p.circ_el(m, i, n, x, y), z)
                    rhs = p.circ_el(m, i, n + q - 1, x,
                                    p.circ_el(n, j, q, y, z))
                    if lhs != rhs:
                        fails.append(f"sequential associativity ({m},{i},{n},{j},{q})")
            for i in range(1, m + 1):
                for k in range(i + 1, m + 1):
                    lhs = vec_circ(m + n - 1, k + n - 1, q,
                                   p.circ_el(m, i, n, x, y), z)
                    rhs = vec_circ(m + q - 1, i, n,
                                   p.circ_el(m, k, q, x, z), y)
                    if (dy * dz) % 2:
                        rhs = {l: F.neg(c) for l, c in rhs.items()}
                    if lhs != rhs:
                        fails.append(f"parallel associativity ({m},{i},{k})")

    for m in range(2, N + 1):
        for n in range(2, N + 1):
            if m + n - 1 > N:
                continue
            perms_m = [dict(zip(range(1, m + 1), pp))
                       for pp in itertools.permutations(range(1, m + 1))]
            perms_n = [dict(zip(range(1, n + 1), pp))
                       for pp in itertools.permutations(range(1, n + 1))]
            for sigma, tau in itertools.product(perms_m, perms_n):
                for j in range(1, m + 1):
                    i = sigma[j]
                    rho = graft_perm(sigma, j, tau)
                    lhs = p.circ(m, j, n).then(p.act(m + n - 1, rho))
                    rhs = tensor_map_many(
                        F, [p.act(m, sigma), p.act(n, tau)],
                        source=lhs.source, target=lhs.source).then(
                            p.circ(m, i, n))
                    if lhs != rhs:
                        fails.append(f"equivariance ({m},{j},{n})")
    return sorted(set(fails))


# -- dualization ----------------------------------------------------------

def _inverse_perm(perm):
    return {v: k for k, v in perm.items()}


def dualize(x, N=None):
    """Operad -> Cooperad or Cooperad -> Operad by linear duality; the
    structure maps are transposes routed through the (sign-free) pairing
    dual(A) (x) dual(B) = dual(A (x) B)."""
    N = N or x.N
    field = x.field
    terms = {n: linear_dual(x.term(n)) for n in range(1, N + 1)}
    adjacents = {}
    for n in range(2, N + 1):
        if terms[n].total_dim() == 0:
            continue
        for i in range(1, n):
            s = adjacent_transposition(n, i)
            adjacents[(n, i)] = dual_map(x.act(n, _inverse_perm(s)))

    if isinstance(x, Operad):
        def cocirc_builder(q, m, i, n):
            f = dual_map(x.circ(m, i, n))
            # relabel dual-of-tensor as tensor-of-duals
            tgt = tensor_many(field, [q.term(m), q.term(n)])
            unpair = ChainMap.from_rule(
                f.target, tgt,
                lambda d, lab: [((("dual", lab[1][0]), ("dual", lab[1][1])), 1)])
            return f.then(unpair)

        return Cooperad(field, N, terms, adjacents, cocirc_builder,
                        name=f"dual({x.name})" if x.name else "dual")

    if isinstance(x, Cooperad):
        def circ_builder(q, m, i, n):
            src = tensor_many(field, [q.term(m), q.term(n)])
            f = dual_map(x.cocirc(m, i, n))
            pair = ChainMap.from_rule(
                src, f.source,
                lambda d, lab: [(("dual", (lab[0][1], lab[1][1])), 1)])
            return pair.then(f)

        return Operad(field, N, terms, adjacents, circ_builder,
                      name=f"dual({x.name})" if x.name else "dual")
    raise TypeError("dualize needs an operad or cooperad")


# -- pre-cooperads --------------------------------------------------------

class PreCooperad:
    """Tree-indexed complexes with relabeling maps, expansion maps along
    covers, and grafting multiplications. Subclasses override _term,
    _relabel_map, _cover_map and _m_map."""

    def __init__(self, field, N, name=""):
        self.field = field
        self.N = N
        self.name = name
        self._term_cache = {}
        self._exp_cache = {}

    def term(self, t: Tree) -> ChainComplex:
        c = self._term_cache.get(t)
        if c is None:
            c = self._term(t)
            self._term_cache[t] = c
        return c

    def relabel_map(self, t: Tree, sigma) -> ChainMap:
        return self._relabel_map(t, sigma)

    def cover_map(self, t: Tree, u: Tree, e) -> ChainMap:
        """Q(t) -> Q(u) for the single-edge expansion u with u/e = t."""
        assert u.contract(e) == t
        return self._cover_map(t, u, e)

    def expansion_map(self, t: Tree, u: Tree) -> ChainMap:
        """Q(t) -> Q(u) for any t <= u, composed along a deterministic
        chain of covers (functoriality makes the choice irrelevant)."""
        if not t.leq(u):
            raise ValueError("expansion_map needs t <= u")
        key = (t, u)
        f = self._exp_cache.get(key)
        if f is None:
            if t == u:
                f = ChainMap.identity(self.term(t))
            else:
                e = sorted(u.clusters - t.clusters,
                           key=lambda c: tuple(sorted(c)))[0]
                u1 = u.contract(e)
                f = self.expansion_map(t, u1).then(self.cover_map(u1, u, e))
            self._exp_cache[key] = f
        return f

    def m_map(self, t: Tree, i: int, u: Tree) -> ChainMap:
        """Q(t) (x) Q(u) -> Q(graft(t, i, u))."""
        return self._m_map(t, i, u)


class ExtendedCooperad(PreCooperad):
    """The pre-cooperad of a cooperad: Q(T) = (x)_vertices q(arity),
    expansions by de-composition, all m maps isomorphisms."""

    def __init__(self, q: Cooperad):
        super().__init__(q.field, q.N,
                         name=f"extend({q.name})" if q.name else "extend")
        self.q = q

    def _term(self, t):
        return self.q.tree_complex(t)

    def _relabel_map(self, t, sigma):
        return self.q.tree_relabel(t, sigma)

    def _cover_map(self, t, u, e):
        """Split the merged factor with cocirc; inverse route of the
        operad-side edge contraction."""
        q = self.q
        F = self.field
        v = u.parent(e)
        ch = u.children(v)
        j = ch.index(e) + 1
        a, b = len(ch), u.arity_of(e)
        merged = t.children(v)
        spliced = ch[:j - 1] + u.children(e) + ch[j:]
        pi = {pos: merged.index(tok) + 1 for pos, tok in enumerate(spliced, 1)}
        pair = q.act(a + b - 1, _inverse_perm(pi)).then(q.cocirc(a, j, b))

        order = []
        for w in t.vertices():
            order.extend([v, e] if w == v else [w])
        k = order.index(v)
        mid = tensor_many(F, [q.term(len(u.children(w))) for w in order])
        tm = q.term(a + b - 1)

        def rule(d, tup):
            img = pair.apply(tm.label_degree[tup[k]], {tup[k]: F.one})
            return [(tup[:k] + pl + tup[k + 1:], c) for pl, c in img.items()]

        s1 = ChainMap.from_rule(self.term(t), mid, rule)
        perm = [order.index(w) for w in u.vertices()]
        s2 = permute_factors_map(
            F, [q.term(len(u.children(w))) for w in order],
            [perm.index(x) for x in range(len(order))],
            source=mid, target=self.term(u))
        return s1.then(s2)

    def _m_map(self, t, i, u):
        F = self.field
        v = graft(t, i, u)
        src = tensor_many(F, [self.term(t), self.term(u)])
        tgt = self.term(v)
        if t.n == 1 or u.n == 1:
            keep = 1 if t.n == 1 else 0
            return ChainMap.from_rule(src, tgt, lambda d, pr: [(pr[keep], 1)])
        exp = {w: _expand_vertex(w, i, u.n) for w in t.vertices()}
        shf = {w: frozenset(l + i - 1 for l in w) for w in u.vertices()}
        vs = v.vertices()
        slots = [vs.index(exp[w]) for w in t.vertices()] + \
                [vs.index(shf[w]) for w in u.vertices()]
        degs_of = [self.q.term(len(v.children(vs[s]))).label_degree
                   for s in slots]

        def rule(d, pr):
            labels = list(pr[0]) + list(pr[1])
            degs = [degs_of[k][l] for k, l in enumerate(labels)]
            sgn = koszul_sign(F, degs, slots)
            out = [None] * len(vs)
            for l, s in zip(labels, slots):
                out[s] = l
            return [(tuple(out), sgn)]

        return ChainMap.from_rule(src, tgt, rule)


def extend_cooperad(q: Cooperad) -> PreCooperad:
    return ExtendedCooperad(q)


class FreePreCooperad(PreCooperad):
    """The free pre-cooperad on a tree-indexed family supported either on
    corollas only ("zero" mode) or constant along expansions ("constant"
    mode, value a(n) on every n-leaf tree)."""

    def __init__(self, a: SymSeq, N, mode="zero"):
        if mode not in ("zero", "constant"):
            raise ValueError("mode must be 'zero' or 'constant'")
        super().__init__(a.field, N, name=f"F({a.name})" if a.name else "F")
        self.a = a
        self.mode = mode

    def _value(self, t: Tree) -> ChainComplex:
        """The input family A(T)."""
        if self.mode == "zero" and not t.is_corolla():
            return zero_complex(self.field)
        return self.a.term(t.n)

    def _component(self, t, u):
        """(x)_{u-vertices} A(T_u) for u <= t, local fragment trees."""
        frs = fragments(t, u)
        return tensor_many(self.field,
                           [self._value(frs[v].tree) for v in u.vertices()])

    def _term(self, t):
        comps = {u: self._component(t, u) for u in enumerate_trees(t.n)
                 if u.leq(t)}
        basis = {}
        for u, c in comps.items():
            for l, d in c.label_degree.items():
                basis.setdefault(d, []).append((u, l))
        for d in basis:
            basis[d].sort(key=repr)

        def rule(d, lab):
            u, l = lab
            return [((u, l2), v) for l2, v in comps[u].boundary_of(l).items()]

        return ChainComplex.from_rule(self.field, basis, rule)

    def _cover_map(self, t, u2, e):
        # component U <= t maps to component U <= u2 through the family
        # maps A(T_u) -> A((u2)_u); zero unless every fragment is
        # unchanged (zero mode) or always the identity transport
        # (constant mode, where A is constant along expansions)
        F = self.field

        def rule(d, lab):
            u, l = lab
            if self.mode == "zero":
                # fragments must already be fully expanded: only u = t = u2/e
                # keeps nonzero values, and then the new edge grows a
                # fragment, killing the term
                return []
            # constant mode: same labels, reindexed by the new fragments
            return [((u, l), 1)]

        return ChainMap.from_rule(self.term(t), self.term(u2), rule)

    def _relabel_map(self, t, sigma):
        t2 = t.relabel(sigma)
        F = self.field

        def rule(d, lab):
            u, l = lab
            u2 = u.relabel(sigma)
            frs = fragments(t, u)
            vs = u.vertices()
            ws = u2.vertices()
            degs = []
            perm = []
            factor_imgs = []
            for k, v in enumerate(vs):
                ch = u.children(v)
                v2 = frozenset(sigma[x] for x in v)
                ch2 = u2.children(v2)
                loc = {kk: ch2.index(_token_image(tok, sigma)) + 1
                       for kk, tok in enumerate(ch, start=1)}
                val = self._value(frs[v].tree)
                dk = val.label_degree[l[k]]
                degs.append(dk)
                factor_imgs.append(
                    self.a.act(len(ch), loc).apply(dk, {l[k]: F.one}))
                perm.append(ws.index(v2))
            sgn = koszul_sign(F, degs, perm)
            res = []
            for combo in itertools.product(
                    *[list(img.items()) for img in factor_imgs]):
                c = sgn
                tup = [None] * len(vs)
                for k, (l2, c2) in enumerate(combo):
                    c = F.mul(c, c2)
                    tup[perm[k]] = l2
                res.append(((u2, tuple(tup)), c))
            return res

        return ChainMap.from_rule(self.term(t), self.term(t2), rule)

    def _m_map(self, t, i, u):
        F = self.field
        v = graft(t, i, u)
        src = tensor_many(F, [self.term(t), self.term(u)])
        tgt = self.term(v)

        def rule(d, pr):
            (ut, lt), (uu, lu) = pr
            uv = graft(ut, i, uu)
            exp = {w: _expand_vertex(w, i, uu.n) for w in ut.vertices()}
            shf = {w: frozenset(x + i - 1 for x in w) for w in uu.vertices()}
            vs = uv.vertices()
            slots = [vs.index(exp[w]) for w in ut.vertices()] + \
                    [vs.index(shf[w]) for w in uu.vertices()]
            labels = list(lt) + list(lu)
            frs_t = fragments(t, ut)
            frs_u = fragments(u, uu)
            degs = [self._value(frs_t[w].tree).label_degree[l]
                    for w, l in zip(ut.vertices(), lt)] + \
                   [self._value(frs_u[w].tree).label_degree[l]
                    for w, l in zip(uu.vertices(), lu)]
            sgn = koszul_sign(F, degs, slots)
            out = [None] * len(vs)
            for l, s in zip(labels, slots):
                out[s] = l
            return [((uv, tuple(out)), sgn)]

        return ChainMap.from_rule(src, tgt, rule)


def free_precooperad(a: SymSeq, N, mode="zero") -> PreCooperad:
    return FreePreCooperad(a, N, mode=mode)


def is_quasi_cooperad(q: PreCooperad, N):
    """True when every grafting multiplication in range is a
    quasi-isomorphism; witnesses list the failures."""
    witnesses = []
    for m in range(2, N + 1):
        for n in range(2, N + 1):
            if m + n - 1 > N:
                continue
            for t in enumerate_trees(m):
                for u in enumerate_trees(n):
                    for i in range(1, m + 1):
                        f = q.m_map(t, i, u)
                        if not is_quasi_iso(f):
                            witnesses.append((t.encode(), i, u.encode()))
    return not witnesses, witnesses


def dual_compose(a1: SymSeq, a0: SymSeq, n: int) -> ChainComplex:
    """Direct sum over partitions of {1..n} of a1(#blocks) tensored with
    the a0 terms of the block sizes (blocks in sorted order)."""
    from .trees import _partitions
    field = a1.field
    comps = {}
    for part in _partitions(list(range(1, n + 1))):
        blocks = tuple(sorted((tuple(sorted(b)) for b in part)))
        c = tensor_many(field, [a1.term(len(blocks))] +
                        [a0.term(len(b)) for b in blocks])
        comps[blocks] = c
    basis = {}
    for blocks, c in comps.items():
        for l, d in c.label_degree.items():
            basis.setdefault(d, []).append((blocks, l))
    for d in basis:
        basis[d].sort(key=repr)

    def rule(d, lab):
        blocks, l = lab
        return [((blocks, l2), v) for l2, v in comps[blocks].boundary_of(l).items()]

    return ChainComplex.from_rule(field, basis, rule)


def symseq_from_degrees(field, N, gens, name="a") -> SymSeq:
    """Symmetric sequence with term(n) freely spanned in the degrees
    gens[n] (a list, possibly with repeats), trivial actions, unit in
    arity 1."""
    terms = {1: k_complex(field, 0, "u")}
    for n in range(2, N + 1):
        degs = gens.get(n, ())
        if degs:
            basis = {}
            for k, d in enumerate(degs):
                basis.setdefault(d, []).append(f"a{n}_{k}")
            terms[n] = ChainComplex(field, basis, {})
    adjacents = {(n, i): ChainMap.identity(terms[n])
                 for n in terms if n >= 2 for i in range(1, n)}
    return SymSeq(field, N, terms, adjacents, name=name)
