import math
import random
from decimal import Decimal, localcontext

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from sigmaeq.cyclotomic import eval_f, eval_g, half_split
from sigmaeq.numbers import primes_up_to
from sigmaeq.quadfield import (
    FieldDescriptor,
    FieldInvariants,
    QuadInt,
    class_number,
    coprimality_condition,
    decompose_solution,
    field_invariants,
    fundamental_unit,
    norm_equation,
    reduced_forms_definite,
    sanity_limit,
    split_prime,
)

PRIMES = [p for p in primes_up_to(300) if p > 2]


def test_field_q5():
    inv = field_invariants(5)
    assert inv.D == 5 and inv.h == 1 and inv.torsion_order == 2
    assert (inv.eps.a, inv.eps.b) == (1, 1)
    assert inv.R == pytest.approx(0.4812118250596034, abs=1e-15)


def test_field_q3():
    inv = field_invariants(3)
    assert inv.D == -3 and inv.h == 1 and inv.torsion_order == 6 and inv.R == 0 and inv.eps is None


def test_field_q23_forms():
    assert field_invariants(23).h == 3
    assert sorted(reduced_forms_definite(-23)) == sorted([(1, 1, 6), (2, 1, 3), (2, -1, 3)])


@pytest.mark.parametrize("q,h", [(23, 3), (47, 5), (5, 1), (13, 1), (229, 3), (401, 5), (7, 1), (71, 7)])
def test_class_number_spot_values(q, h):
    assert field_invariants(q).h == h


def test_imaginary_class_numbers_two_oracles():
    for q in PRIMES:
        if q % 4 == 3:
            h = field_invariants(q).h
            assert h == oracles.naive_class_number_imag(-q) == oracles.analytic_class_number_imag(-q), q


def test_real_class_numbers_analytic():
    for q in PRIMES:
        if q % 4 == 1:
            inv = field_invariants(q)
            assert inv.h * inv.R == pytest.approx(oracles.analytic_hR_real(q), rel=1e-9), q


def test_real_units_brute_force():
    for q in PRIMES:
        if q % 4 == 1 and q < 150:
            eps = fundamental_unit(q)
            assert (eps.a, eps.b) == oracles.brute_fundamental_unit(q), q
            assert abs(eps.norm()) == 1 and eps.is_positive()


def test_regulator_high_precision():
    inv = field_invariants(229)
    with localcontext() as c:
        c.prec = 40
        R = ((Decimal(inv.eps.a) + inv.eps.b * Decimal(229).sqrt()) / 2).ln()
    assert inv.R == pytest.approx(float(R), rel=1e-15)


def test_unit_norm_minus_one_for_prime_discriminants():
    # for prime D = 1 mod 4 the fundamental unit always has norm -1
    for q in PRIMES:
        if q % 4 == 1:
            assert fundamental_unit(q).norm() == -1, q
            h, hp = class_number(q)
            assert h == hp


def test_narrow_vs_wide():
    # D = 21: eps = (5 + sqrt 21)/2 has norm +1, narrow class number is 2
    assert fundamental_unit(21) == QuadInt(5, 1, 21)
    assert class_number(21) == (1, 2)


def test_sanity_bound_all_q_below_500():
    for q in primes_up_to(500)[1:]:
        inv = field_invariants(q)
        lim = sanity_limit(q)
        assert inv.h <= lim and inv.R <= lim


def test_field_rejects():
    for q in (2, 4, 9, 1):
        with pytest.raises(ValueError):
            field_invariants(q)


def test_invariants_roundtrip():
    for q in (5, 7, 229):
        inv = field_invariants(q)
        back = FieldInvariants.from_dict(inv.as_dict())
        assert (back.h, back.R, back.eps, back.torsion_order) == (inv.h, inv.R, inv.eps, inv.torsion_order)


@pytest.mark.parametrize("p,D,b", [(11, 5, 7), (7, -3, 5)])
def test_split_prime_examples(p, D, b):
    rep = split_prime(p, FieldDescriptor(D))
    assert rep.b == b
    assert min(c for c in range(1, 2 * p) if (c * c - D) % (4 * p) == 0) == b
    assert rep.conjugate().b == -b


@pytest.mark.parametrize("p,D", [(13, 5), (5, 5), (2, -7), (9, 5)])
def test_split_prime_rejects(p, D):
    with pytest.raises(ValueError):
        split_prime(p, FieldDescriptor(D))


def test_norm_equation_examples():
    assert [z.as_tuple() for z in norm_equation(FieldDescriptor(-7), 8)] == [(5, 1)]
    assert [z.as_tuple() for z in norm_equation(FieldDescriptor(-3), 1)] == [(2, 0)]
    assert (7, 1) in [z.as_tuple() for z in norm_equation(FieldDescriptor(5), 11)]
    assert norm_equation(FieldDescriptor(5), 2) == []
    assert len(norm_equation(FieldDescriptor(-7), 8, mode="one")) == 1


def _conj_torsion_orbit(D, a, b):
    orbit = set()
    for z in (QuadInt(a, b, D), QuadInt(a, -b, D)):
        w = QuadInt(2, 0, D)
        gen = QuadInt(1, 1, D) if D == -3 else QuadInt(-2, 0, D)
        for _ in range(6):
            orbit.add((z * w).as_tuple())
            w = w * gen
    return frozenset(orbit)


def test_norm_equation_exhaustive_imaginary():
    for D in (-3, -7, -11, -19, -23, -31, -43, -47):
        fd = FieldDescriptor(D)
        for N in range(1, 10**4 + 1, 7):
            got = {_conj_torsion_orbit(D, *z.as_tuple()) for z in norm_equation(fd, N)}
            want = set()
            for a, b in oracles.naive_norm_solutions_imag(D, N):
                if QuadInt(a, b, D).is_primitive():
                    want.add(_conj_torsion_orbit(D, a, b))
            assert got == want, (D, N)


def test_norm_equation_exhaustive_real():
    for D in (5, 13, 17, 29, 37, 41):
        fd = FieldDescriptor(D)
        eps = fundamental_unit(D)
        for N in range(1, 2000, 13):
            got = norm_equation(fd, N)
            for z in got:
                assert abs(z.norm()) == N and z.is_primitive()
                assert z.is_positive() and abs(z.conj().to_mpf()) <= z.to_mpf()
                # z / eps falls outside the domain, so z is the orbit's smallest member
                w = z * eps.unit_inverse()
                assert not (w.a >= 0 and w.b >= 0)
                assert z.to_mpf() < eps.to_mpf() * math.sqrt(N) * 1.0000001
            # every naive solution is a unit multiple of a listed one
            for a in range(0, 200):
                for b in range(0, 60):
                    if (a - b) % 2 or abs(a * a - D * b * b) != 4 * N:
                        continue
                    w = QuadInt(a, b, D)
                    if not w.is_primitive():
                        continue
                    assert any(
                        (w.exact_div(z) is not None and abs(w.exact_div(z).norm()) == 1) for z in got
                    ), (D, N, a, b)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([-3, -7, -23, 5, 13, 229]), st.integers(-10**6, 10**6), st.integers(-10**6, 10**6),
       st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_norm_multiplicative(D, a, b, c, d):
    if (a - b) % 2:
        b += 1
    if (c - d) % 2:
        d += 1
    x, y = QuadInt(a, b, D), QuadInt(c, d, D)
    assert (x * y).norm() == x.norm() * y.norm()
    assert (x * y).a % 2 == (x * y).b % 2


def test_norm_multiplicative_bulk():
    rng = random.Random(0)
    for _ in range(10**4):
        D = rng.choice([-3, -7, 5, 13, 41])
        a, c = rng.randrange(-10**9, 10**9), rng.randrange(-10**9, 10**9)
        b, d = a + 2 * rng.randrange(-10**8, 10**8), c + 2 * rng.randrange(-10**8, 10**8)
        x, y = QuadInt(a, b, D), QuadInt(c, d, D)
        assert (x * y).norm() == x.norm() * y.norm()


def test_parity_enforced():
    with pytest.raises(ValueError):
        QuadInt(1, 2, 5)


@pytest.mark.parametrize("X,Y,D,ok", [(5, 1, -7, True), (7, 7, -7, True), (6, 2, 5, False),
                                      (14, 0, -7, True), (4, 0, -7, False), (4, 2, -7, True), (10, 2, 5, False)])
def test_coprimality(X, Y, D, ok):
    assert coprimality_condition(X, Y, FieldDescriptor(D)) is ok


def test_coprimality_rejects_parity():
    with pytest.raises(ValueError):
        coprimality_condition(14, 7, FieldDescriptor(-7))


def test_coprimality_matches_ideal_test():
    # brute force: is there a prime p != q with p | (X + Y sqrt D)/2 in O?
    for D in (-7, -3, 5, 13):
        q = abs(D)
        for X in range(-30, 31):
            for Y in range(-30, 31):
                if (X - Y) % 2 or (X, Y) == (0, 0):
                    continue
                z = QuadInt(X, Y, D)
                bad = any(p != q and z.exact_div(QuadInt(2 * p, 0, D)) is not None
                          for p in primes_up_to(70))
                # split primes: an ideal above p divides both conjugates iff p divides z
                assert coprimality_condition(X, Y, FieldDescriptor(D)) == (not bad), (D, X, Y)


def test_coprimality_on_cyclotomic_values():
    for q in (3, 5, 7, 11, 13, 17, 19, 23, 29):
        hs = half_split(q)
        fd = FieldDescriptor.for_prime(q)
        rng = random.Random(q)
        for _ in range(20):
            x = rng.randrange(2, 10**6)
            assert coprimality_condition(eval_f(hs, x), eval_g(hs, x), fd)


def test_decompose_q3():
    inv = field_invariants(3)
    dec = decompose_solution(5, 1, inv.descriptor, 1, [7], [1], inv)
    assert dec.alpha_prime == QuadInt(2, 0, -3)
    assert abs(dec.mu_list[0].norm()) == 7 and dec.product() == QuadInt(5, 1, -3)


def test_decompose_q5():
    inv = field_invariants(5)
    dec = decompose_solution(23, 3, inv.descriptor, 1, [11], [2], inv)
    mu = dec.mu_list[0]
    assert mu.norm() == -11 or mu.norm() == 11
    assert dec.u_list == (2,) and dec.v_list == (0,)
    assert dec.product() == QuadInt(23, 3, 5)


def test_decompose_trivial():
    inv = field_invariants(5)
    dec = decompose_solution(2, 0, inv.descriptor, 1, [], [], inv)
    assert dec.alpha_prime == QuadInt(2, 0, 5) and dec.mu_list == ()


def test_decompose_class_number_three():
    # x = 2, q = 23: 2^23 - 1 = 47 * 178481, h = 3 so everything goes to alpha'
    inv = field_invariants(23)
    hs = half_split(23)
    X, Y = eval_f(hs, 2), eval_g(hs, 2)
    dec = decompose_solution(X, Y, inv.descriptor, 1, [47, 178481], [1, 1], inv)
    assert dec.v_list == (1, 1) and dec.a_prime == 2**23 - 1
    assert dec.product() == QuadInt(X, Y, -23)


def test_decompose_witnesses_many():
    for q in (3, 5, 7, 13, 29):
        hs = half_split(q)
        inv = field_invariants(q)
        for x in range(2, 40):
            from sigmaeq.numbers import factorize, cyclotomic_value

            fac = factorize(cyclotomic_value(x, q))
            if not fac.complete or max(p for p, _ in fac.factors) > 10**7:
                continue
            ms = [p for p, _ in fac.factors if p != q]
            es = [k for p, k in fac.factors if p != q]
            A = q ** fac.exponent(q)
            dec = decompose_solution(eval_f(hs, x), eval_g(hs, x), inv.descriptor, A, ms, es, inv)
            assert dec.product() == QuadInt(eval_f(hs, x), eval_g(hs, x), inv.D)
            for mu in dec.mu_list:
                assert mu.norm() in {m ** inv.h for m in ms} | {-(m ** inv.h) for m in ms}


def test_decompose_rejects_non_coprime():
    inv = field_invariants(5)
    with pytest.raises(ValueError):
        decompose_solution(23, 3, inv.descriptor, 11, [11], [1], inv)
