"""Linear-dual Koszul duality: K = dual of the bar construction, the
double-dual comparison, and the full verification pipeline."""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

from .chain import (
    ChainMap, dual_map, koszul_sign, linear_dual, tensor_many,
)
from .cubes import _expand_cluster
from .trees import Tree, enumerate_trees, graft
from .operads import (
    Cooperad, Operad, PreCooperad, dualize, extend_cooperad,
)
from .barcobar import (
    CobarOperad, _wbar_top, bar, cobar, cobar_map, theta,
)


def koszul_dual(p: Operad, N) -> Operad:
    """The dual of the bar cooperad, with the dual operad structure."""
    return dualize(bar(p, N))


# -- the dual of an operad, as a pre-cooperad -----------------------------

def _graft_split(p: Operad, t: Tree, i: int, u: Tree) -> ChainMap:
    """The reordering iso p(graft(t, i, u)) -> p(t) (x) p(u)."""
    field = p.field
    v = graft(t, i, u)
    src = p.tree_complex(v)
    tgt = tensor_many(field, [p.tree_complex(t), p.tree_complex(u)])
    t_img = [_expand_cluster(w, i, u.n) for w in t.vertices()]
    u_img = [frozenset(l + i - 1 for l in w) for w in u.vertices()]
    vv = v.vertices()
    # source factor feeding each target slot, and the inverse assignment
    order = [vv.index(g) for g in t_img + u_img]
    pos = [order.index(k) for k in range(len(order))]
    nt = len(t_img)

    def rule(d, lab):
        degs = [p.term(len(v.children(w))).label_degree[x]
                for w, x in zip(vv, lab)]
        s = koszul_sign(field, degs, pos)
        picked = [lab[k] for k in order]
        return [((tuple(picked[:nt]), tuple(picked[nt:])), s)]

    return ChainMap.from_rule(src, tgt, rule)


class OperadDualPreCooperad(PreCooperad):
    """Termwise linear dual of an operad; covers dualize contractions
    and the grafting multiplications dualize the reordering isos."""

    def __init__(self, p: Operad):
        super().__init__(p.field, p.N,
                         name=f"dual({p.name})" if p.name else "dual")
        self.p = p

    def _term(self, t):
        return linear_dual(self.p.tree_complex(t))

    def _cover_map(self, t, u, e):
        return dual_map(self.p.contract_map(u, e))

    def _relabel_map(self, t, sigma):
        inv = {v: k for k, v in sigma.items()}
        t2 = t.relabel(sigma)
        return dual_map(self.p.tree_relabel(t2, inv))

    def _m_map(self, t, i, u):
        field = self.field
        f = dual_map(_graft_split(self.p, t, i, u))
        src = tensor_many(field, [self.term(t), self.term(u)])
        pair = ChainMap.from_rule(
            src, f.source,
            lambda d, lab: [(("dual", (lab[0][1], lab[1][1])), 1)])
        return pair.then(f)


def dual_precooperad(p: Operad) -> OperadDualPreCooperad:
    return OperadDualPreCooperad(p)


# -- KP = C(dual P) -------------------------------------------------------

def kp_iso(p: Operad, N, kp: Operad | None = None,
           cdp: CobarOperad | None = None):
    """The currying iso from the cobar of the dual pre-cooperad to the
    dual of the bar: evaluate an end element on the top cell of each
    tree. Returns (kp, cdp, per-arity isos)."""
    field = p.field
    if kp is None:
        kp = koszul_dual(p, N)
    if cdp is None:
        cdp = cobar(dual_precooperad(p), N)
    out = {}
    for n in range(1, N + 1):
        end = cdp.ends[n]
        if n == 1:
            ul = kp.term(1).basis[0][0]
            out[1] = ChainMap.from_rule(cdp.term(1), kp.term(1),
                                        lambda d, l: [(ul, 1)])
            continue

        def rule(d, klab, end=end):
            res = []
            for (T, hl), c in end.incl.apply(d, {klab: field.one}).items():
                if hl[1] != _wbar_top(T):
                    continue
                x = hl[2][1]
                dx = sum(p.term(len(T.children(w))).label_degree[xi]
                         for w, xi in zip(T.vertices(), x))
                V = T.num_vertices
                if (V * (V - 1) // 2 + V * dx) % 2:
                    c = field.neg(c)
                res.append((("dual", (T, x)), c))
            return res

        out[n] = ChainMap.from_rule(cdp.term(n), kp.term(n), rule)
    return kp, cdp, out


# -- the double-dual comparison -------------------------------------------

def double_dual_map(q: Cooperad, N=None):
    """The evaluation map from a cooperad into the dual of its dual
    operad, per tree. Returns (extended q, dual pre-cooperad, family)."""
    N = N or q.N
    field = q.field
    eq = extend_cooperad(q)
    ddq = dual_precooperad(dualize(q, N))
    fam = {}
    for n in range(1, N + 1):
        for t in enumerate_trees(n):
            def rule(d, lab):
                inner = tuple(("dual", x) for x in lab)
                return [(("dual", inner), 1)]

            fam[t] = ChainMap.from_rule(eq.term(t), ddq.term(t), rule)
    return eq, ddq, fam


def cb_to_kk(p: Operad, N, cb: CobarOperad | None = None):
    """Cobar applied to the double-dual comparison of the bar cooperad,
    composed with the currying iso. Returns (cb, kkp, per-arity maps)."""
    bq = bar(p, N)
    if cb is None:
        cb = cobar(extend_cooperad(bq), N)
    _, ddq, fam = double_dual_map(bq, N)
    ckk = cobar(ddq, N)
    cm = cobar_map(cb, ckk, fam, N)
    kp = dualize(bq, N)
    kkp, _, iso = kp_iso(kp, N, cdp=ckk)
    out = {n: cm[n].then(iso[n]) for n in range(1, N + 1)}
    return cb, kkp, out


# -- the verification pipeline --------------------------------------------

@dataclass
class DualityReport:
    """Dimension tables and flags for the double-dual comparison."""
    operad: str
    max_arity: int
    dims_p: dict = dc_field(default_factory=dict)
    dims_bar: dict = dc_field(default_factory=dict)
    dims_k: dict = dc_field(default_factory=dict)
    dims_kk: dict = dc_field(default_factory=dict)
    cb_to_kk_iso: bool = False
    composite_iso: bool = False
    homology_match: bool = False

    def passed(self) -> bool:
        return self.cb_to_kk_iso and self.composite_iso and \
            self.homology_match

    def to_dict(self) -> dict:
        def tab(d):
            return {str(n): {str(k): v for k, v in sorted(t.items())}
                    for n, t in sorted(d.items())}

        return {
            "operad": self.operad,
            "max_arity": self.max_arity,
            "dims": {"p": tab(self.dims_p), "bar": tab(self.dims_bar),
                     "k": tab(self.dims_k), "kk": tab(self.dims_kk)},
            "checks": {"cb_to_kk_iso": self.cb_to_kk_iso,
                       "composite_iso": self.composite_iso,
                       "homology_match": self.homology_match},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def verify_kk(p: Operad, N) -> DualityReport:
    """Check that the double dual of the bar construction recovers the
    operad: the comparison maps are bijective and homology agrees."""
    rep = DualityReport(operad=p.name or "operad", max_arity=N)
    bq = bar(p, N)
    kp = dualize(bq, N)
    kkq = bar(kp, N)
    kkp = dualize(kkq, N)
    wp, cb, th = theta(p, N)
    _, _, dd = cb_to_kk(p, N, cb=cb)
    rep.cb_to_kk_iso = all(dd[n].is_iso() for n in range(1, N + 1))
    comp = {n: th[n].then(dd[n]) for n in range(1, N + 1)}
    rep.composite_iso = all(comp[n].is_iso() for n in range(1, N + 1))
    hom_ok = True
    for n in range(1, N + 1):
        rep.dims_p[n] = p.term(n).dims()
        rep.dims_bar[n] = bq.term(n).dims()
        rep.dims_k[n] = kp.term(n).dims()
        rep.dims_kk[n] = kkp.term(n).dims()
        if kkp.term(n).homology_table() != p.term(n).homology_table():
            hom_ok = False
    rep.homology_match = hom_ok
    return rep
