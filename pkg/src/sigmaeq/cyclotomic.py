"""Splitting Phi_q over the quadratic subfield of Q(zeta_q).

P+(x) = prod over quadratic residues m of (x - zeta**m) is built exactly in
the group ring Z[C_q] (vectors of length q indexed by exponents of zeta),
then each coefficient is read off in the basis {1, eta+, eta-} of Gauss
periods and rewritten as (a + b*sqrt(D))/2 using sqrt(D) = eta+ - eta-.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

from .numbers import cyclotomic_value, is_odd_prime, jacobi
from .quadfield import QuadInt

DEGREE_CAP = 2000


class CyclotomicConsistencyError(ArithmeticError):
    """A projected coefficient left the quadratic subfield's integer ring."""


class InequalityViolation(ArithmeticError):
    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class HalfSplit:
    q: int
    D: int
    a_coeffs: Tuple[QuadInt, ...]
    f_coeffs: Tuple[int, ...]
    g_coeffs: Tuple[int, ...]

    def conj_coeffs(self) -> Tuple[QuadInt, ...]:
        return tuple(a.conj() for a in self.a_coeffs)

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "D": self.D,
            "f": [str(c) for c in self.f_coeffs],
            "g": [str(c) for c in self.g_coeffs],
            "a": [[str(a.a), str(a.b)] for a in self.a_coeffs],
        }


def _residues(q: int) -> List[int]:
    return [m for m in range(1, q) if jacobi(m, q) == 1]


def half_split(q: int, cap: int = DEGREE_CAP) -> HalfSplit:
    """Exact coefficients of P+, f = P+ + P- and g = (P+ - P-)/sqrt(D).

    g is normalised to leading coefficient +1 by swapping P+ and P- (this
    replaces sqrt(D) by -sqrt(D) and leaves f unchanged).
    """
    if not is_odd_prime(q):
        raise ValueError(f"q must be an odd prime, got {q}")
    if q > cap:
        raise ValueError(f"q={q} exceeds degree cap {cap}")
    D = q if q % 4 == 1 else -q
    n = (q - 1) // 2
    # coeffs[i] is the group-ring element multiplying x**(deg - i)
    coeffs: List[List[int]] = [[1] + [0] * (q - 1)]
    for m in _residues(q):
        new = [c[:] for c in coeffs] + [[0] * q]
        for i, c in enumerate(coeffs):
            tgt = new[i + 1]
            # subtract zeta**m * c
            for k, v in enumerate(c):
                if v:
                    tgt[(k + m) % q] -= v
        coeffs = new
    qr = set(_residues(q))
    a_coeffs = []
    for c in coeffs:
        alpha = c[0]
        beta = {c[k] for k in qr}
        gamma = {c[k] for k in range(1, q) if k not in qr}
        if len(beta) != 1 or len(gamma) != 1:
            raise CyclotomicConsistencyError(f"q={q}: coefficient not fixed by the square classes")
        (beta,), (gamma,) = beta, gamma
        # alpha + beta*eta+ + gamma*eta-, eta+- = (-1 +- sqrt(D))/2
        a_coeffs.append(QuadInt(2 * alpha - beta - gamma, beta - gamma, D))
    if len(a_coeffs) != n + 1 or a_coeffs[0] != QuadInt(2, 0, D):
        raise CyclotomicConsistencyError(f"q={q}: P+ is not monic of degree {n}")
    f = [a.a for a in a_coeffs]
    g = [a.b for a in a_coeffs[1:]]
    if g[0] < 0:
        a_coeffs = [a.conj() for a in a_coeffs]
        g = [-b for b in g]
    if abs(g[0]) != 1:
        raise CyclotomicConsistencyError(f"q={q}: leading coefficient of g is {g[0]}")
    hs = HalfSplit(q, D, tuple(a_coeffs), tuple(f), tuple(g))
    _check_identity(hs)
    return hs


def _poly_mul(p: List[int], r: List[int]) -> List[int]:
    out = [0] * (len(p) + len(r) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(r):
                out[i + j] += x * y
    return out


def identity_residual(hs: HalfSplit) -> List[int]:
    """Coefficients of f^2 - D*g^2 - 4*Phi_q, highest degree first."""
    f2 = _poly_mul(list(hs.f_coeffs), list(hs.f_coeffs))
    g2 = _poly_mul(list(hs.g_coeffs), list(hs.g_coeffs))
    g2 = [0, 0] + g2  # deg g^2 = deg f^2 - 2
    return [a - hs.D * b - 4 for a, b in zip(f2, g2)]


def _check_identity(hs: HalfSplit) -> None:
    if any(identity_residual(hs)):
        raise CyclotomicConsistencyError(f"q={hs.q}: 4*Phi_q != f^2 - D*g^2")


def _horner(coeffs, x: int) -> int:
    acc = 0
    for c in coeffs:
        acc = acc * x + c
    return acc


def eval_f(hs: HalfSplit, x: int) -> int:
    return _horner(hs.f_coeffs, x)


def eval_g(hs: HalfSplit, x: int) -> int:
    return _horner(hs.g_coeffs, x)


def _log_ratio(num: int, den: int) -> float:
    if num == 0:
        return -math.inf
    return math.log(num) - math.log(den)


def growth_check(hs: HalfSplit, x: int, raise_on_violation: bool = True) -> dict:
    """|g(x)| <= 2 x^((q-3)/2) and |g(x)| < 2 Phi_q(x)^((q-3)/(2(q-1))).

    Valid for x >= q^(3/2); margins are natural-log gaps (positive = slack).
    """
    q = hs.q
    if x * x < q**3:
        raise ValueError(f"x={x} is below q^(3/2)")
    g = abs(eval_g(hs, x))
    k = (q - 3) // 2
    bound1 = 2 * x**k
    ok1 = g <= bound1
    phi = cyclotomic_value(x, q)
    # |g| < 2 phi^((q-3)/(2(q-1)))  <=>  |g|^(2(q-1)) < 2^(2(q-1)) * phi^(q-3)
    if q == 3:
        ok2 = g < 2
        margin2 = math.log(2) - (math.log(g) if g else -math.inf)
    else:
        margin2 = math.log(2) + (q - 3) / (2 * (q - 1)) * math.log(phi) - (math.log(g) if g else -math.inf)
        if abs(margin2) > 1e-6:
            ok2 = margin2 > 0
        else:
            ok2 = g ** (2 * (q - 1)) < 2 ** (2 * (q - 1)) * phi ** (q - 3)
    report = {
        "q": q,
        "x": x,
        "g": str(g),
        "ok_linear": ok1,
        "ok_condition": ok2,
        "margin_linear": _log_ratio(bound1, g) if g else math.inf,
        "margin_condition": margin2,
    }
    if raise_on_violation and not (ok1 and ok2):
        raise InequalityViolation(f"growth bound fails at q={q}, x={x}", report)
    return report


def _embedding_abs_ok(a: QuadInt, bound: int) -> Tuple[bool, float]:
    """Does |a| <= bound hold under every embedding?  Returns (ok, log ratio)."""
    A, B, D = abs(a.a), abs(a.b), a.D
    if D > 0:
        # max embedding = (|A| + |B| sqrt(D)) / 2
        lhs2 = 2 * bound - A
        ok = lhs2 >= 0 and D * B * B <= lhs2 * lhs2
        size = (A + B * math.sqrt(D)) / 2 if max(A, B) < 1e150 else None
    else:
        ok = A * A - D * B * B <= 4 * bound * bound
        size = math.sqrt(A * A - D * B * B) / 2 if max(A, B) < 1e150 else None
    if size is None:
        size_log = math.log(A + B * math.isqrt(abs(D)) + B) - math.log(2)
    else:
        size_log = math.log(size) if size > 0 else -math.inf
    return ok, size_log - math.log(bound)


def coefficient_bounds_check(hs: HalfSplit, raise_on_violation: bool = True) -> dict:
    """|a_i| <= C((q-1)/2, i) <= q^i and |b_i| <= q^(i + 1/2) / 2, b_0 = +-1.

    Worst ratios are reported as logs (<= 0 means the bound holds).
    """
    q = hs.q
    n = (q - 1) // 2
    worst_a = -math.inf
    worst_binom = -math.inf
    ok = True
    for i, a in enumerate(hs.a_coeffs):
        ok_q, r_q = _embedding_abs_ok(a, q**i)
        ok_b, r_b = _embedding_abs_ok(a, math.comb(n, i))
        ok = ok and ok_q and ok_b
        worst_a = max(worst_a, r_q)
        worst_binom = max(worst_binom, r_b)
    worst_b = -math.inf
    ratios = []
    for i, b in enumerate(hs.g_coeffs):
        # |b_i| <= q^(i+1/2)/2  <=>  4 b_i^2 <= q^(2i+1)
        ok = ok and 4 * b * b <= q ** (2 * i + 1)
        if b:
            worst_b = max(worst_b, math.log(2 * abs(b)) - (i + 0.5) * math.log(q))
        a_next = hs.a_coeffs[i + 1]
        _, size = _embedding_abs_ok(a_next, 1)
        if b and size > -math.inf:
            # observed |b_i| * 2 sqrt(q) / |a_{i+1}|, kept for inspection
            ratios.append(math.exp(math.log(abs(b)) + math.log(2 * math.sqrt(q)) - size))
    b0_ok = abs(hs.g_coeffs[0]) == 1
    ok = ok and b0_ok
    report = {
        "q": q,
        "ok": ok,
        "b0": hs.g_coeffs[0],
        "worst_log_ratio_a_vs_q_power": worst_a,
        "worst_log_ratio_a_vs_binomial": worst_binom,
        "worst_log_ratio_b": worst_b,
        "b_over_a_ratios": ratios,
    }
    if raise_on_violation and not ok:
        raise InequalityViolation(f"coefficient bounds fail for q={q}", report)
    return report

