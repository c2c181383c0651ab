"""Cellular chain models of the cubes attached to trees.

A cube has one coordinate per edge token; a cell assigns each token a
value 0, 1 or * and its degree is the number of stars. Orientations are
wedges of the starred coordinates taken in the fixed global token order
(root first, then clusters sorted by cluster_key), so every sign below
is a Koszul reshuffle against that order.

Four families of complexes:
  delta_cube(t)      the full cube on the internal edges of t
  wbar(t)            the quotient cube with root pinned at * and any
                     coordinate at 1 (or root at 0) collapsed to zero
  rel_delta(u, t)    the cube on the edges of u not in t (t <= u)
  wbar_family(t, u)  tensor of wbar over the fragments of t above the
                     vertices of u (zero complex unless u <= t)

plus the structure maps between them: face inclusions, the grafting
maps nu and mu, the interval maps h and r, and the assembly map theta.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

from .chain import (
    ChainComplex, ChainMap, interval, koszul_sign, tensor_many, zero_complex,
)
from .trees import ROOT, Tree, fragments, graft, grafted_edge

STAR = "*"


def _cube_complex(field, tokens, allowed):
    """Cellular chains of a product of intervals, one per token, with
    cells failing `allowed` collapsed to zero (the killed cells form a
    subcomplex in every use below)."""
    cells = [c for c in itertools.product((0, 1, STAR), repeat=len(tokens))
             if allowed(c)]
    basis = {}
    for c in cells:
        basis.setdefault(sum(1 for v in c if v == STAR), []).append(c)

    def rule(d, cell):
        out = []
        stars_before = 0
        for pos, val in enumerate(cell):
            if val != STAR:
                continue
            sgn = (-1) ** stars_before
            for new, s2 in ((1, 1), (0, -1)):
                face = cell[:pos] + (new,) + cell[pos + 1:]
                if allowed(face):
                    out.append((face, sgn * s2))
            stars_before += 1
        return out

    return ChainComplex.from_rule(field, basis, rule)


@lru_cache(maxsize=None)
def delta_cube(field, t: Tree) -> ChainComplex:
    """Chains of the cube on the internal edges of t; contractible."""
    return _cube_complex(field, t.edges(), lambda c: True)


def _wbar_tokens(t: Tree):
    return (ROOT,) + t.edges()


@lru_cache(maxsize=None)
def wbar(field, t: Tree) -> ChainComplex:
    """Chains of the quotient cube: root coordinate always *, internal
    edges in {0, *}; any coordinate at 1 or the root at 0 is zero.

    For the 1-leaf tree this degenerates to the field in degree 0."""
    if t.n == 1:
        return ChainComplex(field, {0: [()]}, {})
    return _cube_complex(
        field, _wbar_tokens(t),
        lambda c: c[0] == STAR and all(v != 1 for v in c))


@lru_cache(maxsize=None)
def rel_delta(field, u: Tree, t: Tree) -> ChainComplex:
    """The cube on the edges of u missing from t; needs t <= u."""
    if not t.leq(u):
        raise ValueError("rel_delta needs t <= u")
    toks = tuple(sorted(u.clusters - t.clusters, key=lambda c: tuple(sorted(c))))
    return _cube_complex(field, toks, lambda c: True)


def _rel_tokens(u: Tree, t: Tree):
    return tuple(sorted(u.clusters - t.clusters, key=lambda c: tuple(sorted(c))))


@lru_cache(maxsize=None)
def wbar_family(field, t: Tree, u: Tree) -> ChainComplex:
    """Tensor of wbar over the fragments of t sitting above the vertices
    of u (in global vertex order); the zero complex when u is not a
    contraction of t."""
    frs = fragments(t, u)
    if frs is None:
        return zero_complex(field)
    return tensor_many(field, [wbar(field, frs[v].tree) for v in u.vertices()])


def _subcube_inclusion(field, src, tgt, src_tokens, tgt_tokens, token_map=None):
    """Signed inclusion of a cube face: extend cells by 0 on the new
    coordinates. With the global token order the sign is always +1."""
    if token_map is None:
        token_map = {tok: tok for tok in src_tokens}
    tgt_pos = {tok: i for i, tok in enumerate(tgt_tokens)}

    def rule(d, cell):
        out = [0] * len(tgt_tokens)
        for tok, val in zip(src_tokens, cell):
            out[tgt_pos[token_map[tok]]] = val
        return [(tuple(out), 1)]

    return ChainMap.from_rule(src, tgt, rule)


def face_inclusion(field, kind: str, src, tgt) -> ChainMap:
    """The signed face inclusions between cube complexes.

    kind "delta": src = t, tgt = t' with t <= t', new edges pinned to 0.
    kind "wbar":  the same on the quotient cubes.
    kind "i":     src = (u, t), tgt = (u', t) with u <= u'.
    kind "j":     src = (u, t), tgt = (u, t') with t' <= t.
    """
    if kind == "delta":
        t, t2 = src, tgt
        if not t.leq(t2):
            raise ValueError("face_inclusion needs t <= t'")
        return _subcube_inclusion(field, delta_cube(field, t),
                                  delta_cube(field, t2), t.edges(), t2.edges())
    if kind == "wbar":
        t, t2 = src, tgt
        if not t.leq(t2):
            raise ValueError("face_inclusion needs t <= t'")
        return _subcube_inclusion(field, wbar(field, t), wbar(field, t2),
                                  _wbar_tokens(t), _wbar_tokens(t2))
    if kind == "i":
        (u, t), (u2, t2) = src, tgt
        if t != t2 or not u.leq(u2):
            raise ValueError("kind 'i' needs src = (u, t), tgt = (u', t), u <= u'")
        return _subcube_inclusion(field, rel_delta(field, u, t),
                                  rel_delta(field, u2, t),
                                  _rel_tokens(u, t), _rel_tokens(u2, t))
    if kind == "j":
        (u, t), (u2, t2) = src, tgt
        if u != u2 or not t2.leq(t):
            raise ValueError("kind 'j' needs src = (u, t), tgt = (u, t'), t' <= t")
        return _subcube_inclusion(field, rel_delta(field, u, t),
                                  rel_delta(field, u, t2),
                                  _rel_tokens(u, t), _rel_tokens(u, t2))
    raise ValueError(f"unknown face inclusion kind {kind!r}")


def _expand_cluster(c, i, m):
    """Image of a cluster of t inside graft(t, i, u) with |u| = m."""
    out = set()
    for l in c:
        if l == i:
            out.update(range(i, i + m))
        elif l > i:
            out.add(l + m - 1)
        else:
            out.add(l)
    return frozenset(out)


def graft_decompose(field, t: Tree, i: int, u: Tree):
    """The two grafting maps for v = graft(t, i, u):

    nu: wbar(v) -> wbar(t) (x) wbar(u), grafted-edge coordinate becoming
        the root of the u factor (zero when that coordinate is 0);
    mu: delta(t) (x) delta(u) -> delta(v), new edge pinned to 1.

    Signs are Koszul reshuffles of the starred coordinates."""
    if t.n < 2 or u.n < 2:
        raise ValueError("graft_decompose needs both trees of arity >= 2")
    v = graft(t, i, u)
    g = grafted_edge(t, i, u)
    m = u.n

    exp = {c: _expand_cluster(c, i, m) for c in t.edges()}
    shf = {c: frozenset(l + i - 1 for l in c) for c in u.edges()}

    # -- nu ---------------------------------------------------------------
    wv = wbar(field, v)
    wt = wbar(field, t)
    wu = wbar(field, u)
    target = tensor_many(field, [wt, wu])
    v_toks = _wbar_tokens(v)
    t_toks = _wbar_tokens(t)
    u_toks = _wbar_tokens(u)
    # each target coordinate, as the source token it reads
    t_src = [ROOT] + [exp[c] for c in t.edges()]
    u_src = [g] + [shf[c] for c in u.edges()]

    def nu_rule(d, cell):
        val = dict(zip(v_toks, cell))
        if val[g] == 0:
            return []
        cell_t = tuple(val[s] for s in t_src)
        cell_u = tuple(val[s] for s in u_src)
        src_stars = [tok for tok in v_toks if val[tok] == STAR]
        tgt_stars = [s for s in t_src if val[s] == STAR] + \
                    [s for s in u_src if val[s] == STAR]
        pos = [tgt_stars.index(tok) for tok in src_stars]
        sgn = koszul_sign(field, [1] * len(pos), pos)
        return [((cell_t, cell_u), sgn)]

    nu = ChainMap.from_rule(wv, target, nu_rule)

    # -- mu ---------------------------------------------------------------
    dt = delta_cube(field, t)
    du = delta_cube(field, u)
    source = tensor_many(field, [dt, du])
    dv = delta_cube(field, v)
    v_edges = v.edges()

    def mu_rule(d, pair):
        cell_t, cell_u = pair
        val = {g: 1}
        for c, x in zip(t.edges(), cell_t):
            val[exp[c]] = x
        for c, x in zip(u.edges(), cell_u):
            val[shf[c]] = x
        src_stars = [exp[c] for c, x in zip(t.edges(), cell_t) if x == STAR] + \
                    [shf[c] for c, x in zip(u.edges(), cell_u) if x == STAR]
        tgt_stars = [e for e in v_edges if val[e] == STAR]
        pos = [tgt_stars.index(tok) for tok in src_stars]
        sgn = koszul_sign(field, [1] * len(pos), pos)
        return [(tuple(val[e] for e in v_edges), sgn)]

    mu = ChainMap.from_rule(source, dv, mu_rule)
    return nu, mu


def family_inclusion(field, t: Tree, t2: Tree, u: Tree) -> ChainMap:
    """wbar_family(t, u) -> wbar_family(t2, u) for u <= t <= t2: on each
    fragment the face inclusion pinning the new local edges to 0. Both
    fragments order their shared edges the same way, so the sign is +1."""
    if not (t.leq(t2) and u.leq(t)):
        raise ValueError("family_inclusion needs u <= t <= t2")
    frs = fragments(t, u)
    frs2 = fragments(t2, u)
    u_vertices = u.vertices()
    # position of each shared local edge inside the finer fragment
    layout = []
    for v in u_vertices:
        small, big = frs[v].tree, frs2[v].tree
        pos = {e: i for i, e in enumerate(big.edges())}
        layout.append((len(big.edges()), [pos[e] for e in small.edges()]))

    def rule(d, cells):
        out = []
        for cell, (width, slots) in zip(cells, layout):
            coords = [STAR] + [0] * width
            for val, i in zip(cell[1:], slots):
                coords[1 + i] = val
            out.append(tuple(coords))
        return [(tuple(out), 1)]

    return ChainMap.from_rule(wbar_family(field, t, u),
                              wbar_family(field, t2, u), rule)


def h_map(field) -> ChainMap:
    """The interval contraction H (x) H -> H with corner values
    h(g1 (x) g0) = g1 and g0 at the other three corners; the degree-1
    values are the unique ones making it a chain map."""
    H = interval(field)
    table = {
        ("g0", "g0"): [("g0", 1)], ("g0", "g1"): [("g0", 1)],
        ("g1", "g1"): [("g0", 1)], ("g1", "g0"): [("g1", 1)],
        ("g", "g0"): [("g", 1)], ("g", "g1"): [],
        ("g0", "g"): [], ("g1", "g"): [("g", -1)],
        ("g", "g"): [],
    }
    return ChainMap.from_rule(tensor_many(field, [H, H]), H,
                              lambda d, tup: table[tup])


def r_map(field) -> ChainMap:
    """The interval flip: swaps the endpoints and negates the 1-cell."""
    H = interval(field)
    table = {"g0": [("g1", 1)], "g1": [("g0", 1)], "g": [("g", -1)]}
    return ChainMap.from_rule(H, H, lambda d, l: table[l])


def theta_cells(field, t: Tree, u: Tree) -> ChainMap:
    """The assembly map delta(t) (x) wbar(u) -> wbar_family(t, u).

    Built one target coordinate at a time. For the fragment above a
    vertex of u: internal fragment edges read the delta coordinate of
    the matching t-edge directly (value 1 kills the term); the fragment
    root over an internal u-edge applies the h table to the (delta,
    wbar) pair at that cluster, so only (*, 0) and (1, *) survive, the
    latter with a minus sign; the fragment root at the u-root applies r
    to the root coordinate, contributing a minus sign. The total sign
    also reshuffles the consumed degree-1 coordinates into target order.

    The zero map (into the zero complex) when u is not a contraction
    of t."""
    source = tensor_many(field, [delta_cube(field, t), wbar(field, u)])
    target = wbar_family(field, t, u)
    frs = fragments(t, u)
    if frs is None:
        return ChainMap.zero(source, target)
    u_vertices = u.vertices()
    u_root = u.root_cluster
    t_edges = t.edges()
    u_toks = _wbar_tokens(u)
    frag_edge_src = {v: [frs[v].to_global[e] for e in frs[v].tree.edges()]
                     for v in u_vertices}

    def rule(d, pair):
        dcell, wcell = pair
        dval = dict(zip(t_edges, dcell))
        wval = dict(zip(u_toks, wcell))
        sgn = 1
        consumed = []
        out_cells = []
        for v in u_vertices:
            coords = []
            if v == u_root:
                coords.append(STAR)
                sgn = -sgn
                consumed.append(("w", ROOT))
            else:
                a, b = dval[v], wval[v]
                if (a, b) == (STAR, 0):
                    coords.append(STAR)
                    consumed.append(("d", v))
                elif (a, b) == (1, STAR):
                    coords.append(STAR)
                    sgn = -sgn
                    consumed.append(("w", v))
                else:
                    return []
            for c in frag_edge_src[v]:
                a = dval[c]
                if a == 1:
                    return []
                coords.append(a)
                if a == STAR:
                    consumed.append(("d", c))
            out_cells.append(tuple(coords))
        src_syms = [("d", e) for e in t_edges if dval[e] == STAR] + \
                   [("w", ROOT)] + \
                   [("w", e) for e in u.edges() if wval[e] == STAR]
        pos = [consumed.index(s) for s in src_syms]
        sgn2 = koszul_sign(field, [1] * len(pos), pos)
        coef = field.one if sgn > 0 else field.neg(field.one)
        return [(tuple(out_cells), field.mul(coef, sgn2))]

    return ChainMap.from_rule(source, target, rule)
