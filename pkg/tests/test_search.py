import math

import pytest
import sympy

from sigmaeq.bounds import BoundInputs
from sigmaeq.numbers import cyclotomic_value
from sigmaeq.quadfield import field_invariants
from sigmaeq.search import (
    InconsistencyError,
    SearchConfig,
    SolutionRecord,
    class_index,
    count_vs_bound,
    enumerate_solutions,
    gap_check,
    lemma41_verify,
    lpf_scan,
    solve_exponents,
    verify_exponent_bounds,
)


def _brute(q, A, ms, xmax, prime_only=False):
    """Full factorisation of every value with sympy."""
    out = []
    for x in range(2, xmax + 1):
        if prime_only and not sympy.isprime(x):
            continue
        v = cyclotomic_value(x, q)
        if v % A:
            continue
        fac = sympy.factorint(v // A)
        ok = all(any(m % p == 0 for m in ms) for p in fac)
        if not ok:
            continue
        w, es = v // A, []
        for m in ms:
            k = 0
            while w % m == 0:
                w //= m
                k += 1
            es.append(k)
        if w == 1:
            out.append((x, tuple(es)))
    return out


def test_search_q3_m7():
    res = enumerate_solutions(SearchConfig(3, 1, (7,), x_max=10**4))
    assert [(r.x, r.exponents) for r in res.records] == [(2, (1,)), (18, (3,))]
    assert res.undecided == []


def test_search_eq14_q5():
    res = enumerate_solutions(SearchConfig(5, 1, (11,), x_max=10**4, prime_only=True))
    assert [(r.x, r.exponents) for r in res.records] == [(3, (2,))]


def test_search_with_A():
    res = enumerate_solutions(SearchConfig(3, 3, (7,), x_max=10**3))
    assert (4, (1,)) in [(r.x, r.exponents) for r in res.records]


@pytest.mark.parametrize("q,A,ms,prime_only", [
    (3, 1, (7, 13), False), (3, 3, (7, 13, 19), False), (5, 1, (11, 31), False),
    (7, 1, (29, 43), True), (3, 1, (7, 13, 19, 31, 37, 43), True), (5, 5, (11, 41, 61), False),
])
def test_search_matches_brute_force(q, A, ms, prime_only):
    res = enumerate_solutions(SearchConfig(q, A, ms, x_max=3000, prime_only=prime_only), with_bound=False)
    assert [(r.x, r.exponents) for r in res.records] == _brute(q, A, ms, 3000, prime_only)
    for r in res.records:
        assert r.check() and r.factorization.value == r.value and r.factorization.complete


def test_deterministic_across_workers():
    bodies = set()
    for w in (1, 3, 4):
        res = enumerate_solutions(SearchConfig(3, 1, (7, 13), x_max=20000, workers=w))
        bodies.add("".join(r.to_json() + "\n" for r in res.records))
    assert len(bodies) == 1


def test_solve_exponents_non_coprime():
    sols, ok = solve_exponents(64, [2, 4, 8])
    want = sorted((a, b, c) for a in range(7) for b in range(4) for c in range(3) if a + 2 * b + 3 * c == 6)
    assert ok and sols == want
    assert solve_exponents(12, [2, 4]) == ([], True)
    assert solve_exponents(7**5, [7]) == ([(5,)], True)
    sols, ok = solve_exponents(2**200, [2, 4, 8, 16], cap=50)
    assert not ok


def test_undecided_reported():
    # overlapping m with a tiny node cap: x = 18 cannot be settled
    res = enumerate_solutions(SearchConfig(3, 1, (7, 49), x_max=30, node_cap=2), with_bound=False)
    assert 18 in res.undecided
    res = enumerate_solutions(SearchConfig(3, 1, (7, 49), x_max=30), with_bound=False)
    assert res.undecided == [] and [(r.x, r.exponents) for r in res.records] == [
        (2, (1, 0)), (18, (1, 1)), (18, (3, 0))]


def test_class_index_exact():
    assert class_index(343, [7], [3]) == 1
    # m_1^(2*1) = 49 < 121 <= 11^2
    assert class_index(121 * 49, [7, 11], [2, 2]) == 2
    assert class_index(100, [3, 10], [0, 2]) == 2
    assert class_index(10**6, [10, 1000], [0, 1]) == 2  # 1000^2 = 10^6 tie
    assert class_index(21, [7], [1]) is None  # A = 3 soaks up the rest


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(4, 1, (7,))
    with pytest.raises(ValueError):
        SearchConfig(3, 1, ())
    with pytest.raises(ValueError):
        SearchConfig(3, 1, (7,), x_min=1)
    assert SearchConfig(3, 2, (7,), prime_only=True).is_extension


def test_verify_exponent_bounds():
    inv = field_invariants(3)
    res = enumerate_solutions(SearchConfig(3, 1, (7,), x_max=100))
    rep = verify_exponent_bounds(res.records, BoundInputs.from_field(3, 1, (7,), inv))
    assert rep["ok"] and rep["max_ratio_e_over_U"] < 1e-15 and rep["bhm_checked"] == 1
    assert verify_exponent_bounds([], BoundInputs.from_field(3, 1, (7,), inv))["ok"]


def test_verify_exponent_bounds_flags_violation():
    inv = field_invariants(3)
    fake = SolutionRecord(2, 3, 1, (7,), (10**30,), 7, None)
    with pytest.raises(InconsistencyError) as exc:
        verify_exponent_bounds([fake], BoundInputs.from_field(3, 1, (7,), inv))
    assert exc.value.witness["violations"]


def test_lpf_examples():
    rows, s = lpf_scan(3, [18])
    assert rows[0].P == 7 and rows[0].rhs == pytest.approx(math.log(math.log(18)) / 3)
    rows, s = lpf_scan(7, [10**4])
    assert rows[0].P >= 29 and rows[0].margin > 0
    assert rows[0].rhs == pytest.approx(2.221, abs=1e-3)
    with pytest.raises(ValueError):
        lpf_scan(3, [2])


def test_lpf_against_sympy():
    rows, s = lpf_scan(5, range(3, 400))
    for r in rows:
        assert r.complete
        assert r.P == max(sympy.factorint(cyclotomic_value(r.x, 5)))
    assert s["undecided"] == [] and s["nonpositive"] == []


def test_lpf_incomplete_is_lower_bound():
    rows, s = lpf_scan(7, range(9000, 9100), budget=1, trial_limit=500)
    for r in rows:
        true_P = max(sympy.factorint(cyclotomic_value(r.x, 7)))
        assert r.P <= true_P
        if not r.complete:
            assert r.P >= 500


def test_lemma_examples():
    from sigmaeq.search import _lemma_holds

    H1, H2, lhs, ok = _lemma_holds(7, 1, 2, 11, math.gcd(3, 6))
    assert (H1, H2, lhs) == pytest.approx((2.807, 0.811, 1.709), abs=1e-3) and ok
    assert pow(2, 3, 7) == 1 and pow(11, 3, 7) == 1
    H1, H2, lhs, ok = _lemma_holds(5, 1, 2, 3, 4)
    assert lhs == pytest.approx(2.55, abs=0.01) and ok
    assert pow(3, 3, 7) != 1


def test_lemma_counterexamples():
    # 2^3 | 3^2 - 1 and 5^2 - 1, but (3/4) H1 H2 = 1.83 > gcd(2, 1)
    bad, s = lemma41_verify(8, 2, 5)
    assert any((w.p0, w.e, w.q, w.p1, w.p2) == (2, 3, 2, 3, 5) for w in bad)
    # odd p0: 3^2 | 2^6 - 1 and 5^6 - 1, lhs 3.25 > gcd(6, 2)
    bad, s = lemma41_verify(9, 6, 5)
    w = [w for w in bad if (w.p0, w.e, w.q) == (3, 2, 6)][0]
    assert w.lhs == pytest.approx(3.2457, abs=1e-3) and w.rhs == 2 and not w.holds


def test_lemma_sweep_brute_force_small():
    bad, s = lemma41_verify(200, 12, 40)
    ref = set()
    hyp = 0
    ps = list(sympy.primerange(2, 41))
    for p0 in sympy.primerange(2, 201):
        e = 1
        while p0**e <= 200:
            M = p0**e
            for q in range(1, 13):
                for i, p1 in enumerate(ps):
                    for p2 in ps[i + 1:]:
                        if p0 in (p1, p2) or pow(p1, q, M) != 1 or pow(p2, q, M) != 1:
                            continue
                        hyp += 1
                        lhs = 0.75 * (e * math.log(p0)) ** 2 / (math.log(p1) * math.log(p2))
                        if lhs > math.gcd(q, p0 - 1):
                            ref.add((p0, e, q, p1, p2))
            e += 1
    assert {(w.p0, w.e, w.q, w.p1, w.p2) for w in bad} == ref
    assert s["hypothesis_met"] == hyp


def test_lemma_parallel_matches_serial():
    a, sa = lemma41_verify(3000, 20, 60)
    b, sb = lemma41_verify(3000, 20, 60, workers=3)
    assert a == b and sa["hypothesis_met"] == sb["hypothesis_met"]


def _records(q, xs, m):
    out = []
    for x, e in xs:
        v = cyclotomic_value(x, q)
        out.append(SolutionRecord(x, q, 1, (m,), (e,), v, None, class_index(v, [m], [e])))
    return out


def test_gap_check():
    res = enumerate_solutions(SearchConfig(5, 1, (11,), x_max=1000, prime_only=True))
    rep = gap_check(res.records, 5, 1)
    assert rep["ok"] and rep["pairs"] == 0
    assert gap_check([], 5, 1)["ok"]
    # synthetic class {2, 3}: log 3 > 3*16/20 log 2 fails
    recs = [SolutionRecord(2, 5, 1, (31,), (1,), 31, None, 1), SolutionRecord(3, 5, 1, (31,), (1,), 121, None, 1)]
    with pytest.raises(InconsistencyError):
        gap_check(recs, 5, 1)
    rep = gap_check(recs, 5, 1, raise_on_violation=False)
    assert not rep["ok"] and rep["sqrt_q_form_applies"]


def test_count_vs_bound():
    res = enumerate_solutions(SearchConfig(5, 1, (11,), x_max=10**4, prime_only=True))
    rep = count_vs_bound(res.records, 5, 1, (11,), res.bound.U)
    assert rep["ok"] and rep["applicable"] and rep["count"] == 1
    assert rep["bound_value"] == pytest.approx(38.75, abs=0.01)
    rep = count_vs_bound([], 3, 1, (7,))
    assert not rep["applicable"] and rep["ok"] and rep["note"]


def test_jsonl_fields():
    res = enumerate_solutions(SearchConfig(3, 1, (7,), x_max=100))
    import json

    d = json.loads(res.records[1].to_json())
    assert set(d) == {"x", "q", "A", "m", "e", "value_digits", "class_index", "bound_ok"}
    assert d["x"] == "18" and d["e"] == [3] and d["value_digits"] == 3 and d["bound_ok"] is True
