import json

from opdual.fields import QQ
from opdual.chain import ChainMap, dual_map
from opdual.trees import canonical_form, corolla, enumerate_trees
from opdual.operads import (
    builtin_operad, check_operad_axioms, free_operad, symseq_from_degrees,
    trivial_operad, truncate,
)
from opdual.barcobar import bar, precooperad_diagram
from opdual.koszul import (
    cb_to_kk, double_dual_map, dual_precooperad, koszul_dual, kp_iso,
    verify_kk,
)

BIN3 = canonical_form([[1, 2], 3])


def com(N):
    return builtin_operad("com", QQ, N)


def ass(N):
    return builtin_operad("ass", QQ, N)


def test_koszul_dual_census_com():
    kp = koszul_dual(com(3), 3)
    assert kp.term(2).dims() == {-1: 1}
    assert kp.term(3).dims() == {-2: 3, -1: 1}
    assert kp.term(3).homology_table() == {-2: 2}
    assert check_operad_axioms(kp) == []


def test_koszul_dual_reverses_degrees():
    for p in (com(3), ass(3),
              free_operad(symseq_from_degrees(QQ, 3, {2: [1]}), 3)):
        bq = bar(p, 3)
        kp = koszul_dual(p, 3)
        for n in (1, 2, 3):
            bd = bq.term(n).dims()
            assert kp.term(n).dims() == {-k: v for k, v in bd.items()}


def test_koszul_dual_trivial_matches_free_on_shifted_dual():
    # binary generator in degree 0
    a = symseq_from_degrees(QQ, 3, {2: [0]})
    kp = koszul_dual(trivial_operad(a), 3)
    assert kp.term(2).dims() == {-1: 1}
    assert kp.term(3).dims() == {-2: 3}
    f = free_operad(symseq_from_degrees(QQ, 3, {2: [-1]}), 3)
    for n in (2, 3):
        assert kp.term(n).homology_table() == f.term(n).dims()


def test_koszul_dual_trivial_two_generators():
    # binary generators in degrees 0 and 1
    a = symseq_from_degrees(QQ, 3, {2: [0, 1]})
    kp = koszul_dual(trivial_operad(a), 3)
    assert kp.term(3).dims() == {-2: 3, -3: 6, -4: 3}
    f = free_operad(symseq_from_degrees(QQ, 3, {2: [-1, -2]}), 3)
    for n in (2, 3):
        assert kp.term(n).homology_table() == f.term(n).dims()


def test_koszul_dual_free_matches_trivial_on_shifted_dual():
    a = symseq_from_degrees(QQ, 3, {2: [0]})
    kp = koszul_dual(free_operad(a, 3), 3)
    assert kp.term(2).homology_table() == {-1: 1}
    assert kp.term(3).homology_table() == {}


def test_dual_precooperad_diagrams():
    for p in (com(3), ass(3),
              free_operad(symseq_from_degrees(QQ, 3, {2: [1]}), 3)):
        dp = dual_precooperad(p)
        for n in (2, 3):
            precooperad_diagram(dp, n, validate=True)


def test_dual_precooperad_term_dims():
    dp = dual_precooperad(ass(3))
    assert dp.term(corolla(3)).dims() == {0: 6}
    assert dp.term(BIN3).dims() == {0: 4}


def test_kp_iso():
    # the dual of the bar agrees with the cobar of the dual, as matrices
    for p in (com(3), ass(3),
              free_operad(symseq_from_degrees(QQ, 3, {2: [0, 1]}), 3)):
        kp, cdp, iso = kp_iso(p, 3)
        for n in (1, 2, 3):
            assert iso[n].is_iso()
            assert cdp.term(n).dims() == kp.term(n).dims()


def test_double_dual_map_iso():
    for p in (com(3), ass(3)):
        eq, ddq, fam = double_dual_map(bar(p, 3), 3)
        for n in (1, 2, 3):
            for t in enumerate_trees(n):
                assert fam[t].is_iso()


def test_cb_to_kk_com():
    cb, kkp, out = cb_to_kk(com(3), 3)
    assert kkp.term(3).dims() == {0: 4, 1: 3}
    assert all(out[n].is_iso() for n in (1, 2, 3))
    assert kkp.term(3).homology_table() == {0: 1}


def test_cb_to_kk_ass():
    cb, kkp, out = cb_to_kk(ass(3), 3)
    assert all(out[n].is_iso() for n in (1, 2, 3))
    assert kkp.term(2).homology_table() == {0: 2}
    assert kkp.term(3).homology_table() == {0: 6}


def test_verify_kk_reports():
    for p, dim3 in ((com(3), 1), (ass(3), 6)):
        rep = verify_kk(p, 3)
        assert rep.passed()
        assert rep.cb_to_kk_iso and rep.composite_iso and rep.homology_match
        blob = json.loads(rep.to_json())
        assert blob["checks"]["homology_match"] is True
        assert blob["dims"]["p"]["3"] == {"0": dim3}


def test_truncation_tower():
    # killing the arity-3 generator is a quotient of bar complexes, so
    # its dual includes one Koszul dual into the other, degreewise split
    p = com(3)
    p2 = truncate(p, 2, "<=")
    b3 = bar(p, 3).term(3)
    b2 = bar(p2, 3).term(3)

    def rule(d, lab):
        t, x = lab
        return [((t, x), 1)] if t.num_vertices == 2 else []

    proj = ChainMap.from_rule(b3, b2, rule)
    for k in b2.degrees():
        assert proj.matrix(k).rank() == b2.dim(k)
    inc = dual_map(proj)
    for k in inc.source.degrees():
        assert inc.matrix(k).rank() == inc.source.dim(k)
    killed = sum(1 for (t, x), _ in
                 ((l, None) for d in b3.basis.values() for l in d)
                 if t.num_vertices == 1)
    assert b3.total_dim() == b2.total_dim() + killed
