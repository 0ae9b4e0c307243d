from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from math import isqrt

import pytest

from k2design import formula as fm
from k2design.catalog import Catalog, SubgroupCase, load_builtin_catalog, loads, with_numeric_value
from k2design.lemmas import replay_evidence
from k2design.polyarith import IntPoly, poly_eval
from k2design.verifier import (
    diophantine_solutions,
    double_check,
    replay_enumeration,
    run_theorem,
    subfield_intermediate,
    valuation_candidates,
    verify_case,
    verify_numeric,
    verify_p_power_subdegree,
    verify_parabolic_valuation,
)


@pytest.fixture(scope="module")
def cat():
    return load_builtin_catalog()


@pytest.fixture(scope="module")
def report(cat):
    return run_theorem(cat)


def _kinds(v):
    return [ev.kind for ev in v.trace]


def test_every_builtin_case_is_excluded(report):
    assert report.ok
    t = report.totals
    assert t["excluded"] == t["total"] == 71
    assert t["survivors"] == t["missing_data"] == t["errors"] == 0


def test_every_evidence_record_replays(report):
    for v in report.verdicts:
        for ev in v.trace:
            assert replay_evidence(ev), (v.case_id, ev.kind)


def test_crossovers_are_honest(report):
    seen = 0
    for v in report.verdicts:
        for ev in v.trace:
            if ev.kind != "crossover":
                continue
            d = ev.data
            V, D, S = (IntPoly(d[k]) for k in ("V", "D", "scale"))
            W = V - S * D * D
            qs = d["q_star"]
            assert poly_eval(W, qs) > 0 and poly_eval(W, qs) == int(d["W_at_q_star"])
            if qs > 2:
                assert poly_eval(W, qs - 1) == int(d["W_at_q_star_minus_1"])
            else:
                assert d["W_at_q_star_minus_1"] is None
            seen += 1
    assert seen > 50


def test_enumerations_replay(report):
    for v in report.verdicts:
        for ev in v.trace:
            if ev.kind == "enumeration":
                assert replay_enumeration(ev.data), v.case_id


def test_numeric_case_g2_4_a1_13(cat):
    # v = 230400 = 480^2 but 481 does not divide |G_x|
    v = verify_case(cat, "G2.A1(13)")
    assert v.status == "Excluded" and v.reason == "DivisibilityFail"


def test_numeric_mutated_to_a_square_survives(cat):
    n = cat.numeric("G2(4).J2")
    # v = 4 gives k+1 = 3, prime to p = 2 and dividing the stabilizer order
    X = n.order * n.v
    mutated = with_numeric_value(cat, "G2(4).J2", 4)
    mutated = replace(mutated, numerics=tuple(replace(m, order=X // 4) if m.id == n.id else m
                                              for m in mutated.numerics))
    v = verify_numeric(mutated.numeric("G2(4).J2"), mutated)
    assert v.status == "Survivors"


def test_subfield_2b2_uses_constant_20(cat):
    v = verify_case(cat, "SUBFIELD.2B2")
    consts = [ev.data["constant"] for ev in v.trace if ev.kind == "xgcd"]
    assert 20 in consts
    assert subfield_intermediate(v) == []


def test_subfield_e6_intermediates(cat):
    assert subfield_intermediate(verify_case(cat, "SUBFIELD.E6.r2")) == [4]
    assert subfield_intermediate(verify_case(cat, "SUBFIELD.E6.r3")) == [8]
    assert subfield_intermediate(verify_case(cat, "SUBFIELD.E7.r2")) == [4, 9, 16, 25]


def test_3d4_g2_congruences_in_trace(cat):
    v = verify_case(cat, "3D4.G2q")
    assert v.excluded
    facts = {(tuple(ev.data["modulus"]), ev.data["residue"]) for ev in v.trace if ev.kind == "congruence"}
    assert ((-1, 0, 1), 2) in facts


def test_diophantine_solutions_are_solutions():
    for A in (Fraction(1), Fraction(3), Fraction(5), Fraction(1, 2)):
        for eps in (1, -1):
            sols, mcap = diophantine_solutions(A, eps, 27)
            for m, xs in sols:
                x = int(xs)
                # m(k+1) = A(x-eps) and 2k^2 = x(x+eps)
                k1 = A * (x - eps) / m
                assert 2 * (k1 - 1) ** 2 == x * (x + eps)
            # nothing is missed below the cap
            for m in range(1, mcap):
                for x in range(27, 2000):
                    k1 = A * (x - eps) / m
                    if 2 * (k1 - 1) ** 2 == x * (x + eps):
                        assert (m, str(x)) in sols


def test_g2_sl3_case_has_no_solutions(cat):
    v = verify_case(cat, "G2.A2eps")
    assert v.status == "Excluded" and v.reason == "DiophantineEmpty"


def test_valuation_candidates():
    assert valuation_candidates(2) == [(2, 1)]
    assert valuation_candidates(3) == [(1, 0)]
    for p in (5, 7, 11):
        assert valuation_candidates(p) == []
    for p in (2, 3, 5, 7):
        for m in range(1, 12):
            for j in range(0, 12):
                if p ** m - 2 == p ** j:
                    assert (m, j) in valuation_candidates(p)


def test_parabolic_valuation_cases(cat):
    for fam in ("2B2", "2G2"):
        v = verify_parabolic_valuation(fam, cat)
        assert v.status == "Excluded" and v.reason == "ValuationImpossible"


def test_missing_p_power_formula_is_reported():
    extra = loads("case id=X.P family=G2 stab=P order=q^6*(q^2-1)*(q-1) route=PARABOLIC_PPOWER\n")
    cat = load_builtin_catalog().merged(extra)
    v = verify_case(cat, "X.P")
    assert v.status == "MissingData"
    assert not run_theorem(cat).ok


def test_p_power_route_with_supplied_formula(cat):
    # in G2(q), v-1 for this parabolic is q*(q^4+q^3+q^2+q+1); its q-part is q
    case = SubgroupCase("X.P", "G2", "P", fm.parse_formula("q^6*(q^2-1)*(q-1)"),
                        load_builtin_catalog().cases[0].cond, "PARABOLIC_PPOWER", {})
    v = verify_p_power_subdegree(case, "q", cat)
    assert v.status == "Excluded"


def test_empty_catalog_reports_ok():
    r = run_theorem(Catalog())
    assert r.ok and r.totals["total"] == 0


def test_double_check_adds_evidence(cat):
    v = double_check(verify_case(cat, "3D4.G2q"), 2000)
    assert "qmax-check" in _kinds(v) and v.excluded


def test_audit_mismatch_does_not_change_the_verdict(report):
    bad = [v for v in report.verdicts if not v.audits_ok]
    assert [v.case_id for v in bad] == ["E7.E6T1"]
    assert bad[0].excluded


def test_verdict_json_shape(report):
    d = report.verdicts[0].to_json()
    assert set(d) >= {"case_id", "family", "stabilizer", "route", "verdict", "reason", "survivors", "audits_ok"}
    assert "trace" in report.verdicts[0].to_json(with_trace=True)


def test_perfect_square_points_are_exact(report):
    for v in report.verdicts:
        for ev in v.trace:
            if ev.kind == "square":
                n = int(ev.data["v"])
                assert ev.data["square"] == (isqrt(n) ** 2 == n)
