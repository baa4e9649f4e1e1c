"""Outward-rounded evaluation of the explicit exponent and count bounds.

All real arithmetic goes through a private mpmath interval context, so each
quantity is an enclosure [lo, hi] of the true value.  Upper bounds are read
from ``hi``, lower bounds from ``lo``.  Magnitudes are kept as logs so that
constants such as c2(s+2) for large s stay comfortable to print and compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from mpmath.ctx_iv import MPIntervalContext
from mpmath.libmp import to_float, to_int

from .numbers import is_odd_prime, is_prime
from .quadfield import FieldInvariants, QuadInt

DEFAULT_PREC = 128
Number = Union[int, float, Fraction]


def make_ctx(prec: int = DEFAULT_PREC) -> MPIntervalContext:
    if prec < 64:
        raise ValueError("precision must be at least 64 bits")
    ctx = MPIntervalContext()
    ctx.prec = prec
    return ctx


def _iv(ctx, x):
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / x.denominator
    if isinstance(x, UpperReal):
        return ctx.exp(x.log)
    return ctx.mpf(x)


def _angle(ctx, x):
    """<x> = max(x, 2) on an enclosure."""
    two = ctx.mpf(2)
    lo = x.a if x.a > 2 else two
    hi = x.b if x.b > 2 else two
    return ctx.mpf([lo, hi])


def _lo(x) -> mpmath.mpf:
    """Exact lower endpoint as a plain mpf."""
    return mpmath.mp.make_mpf(x._mpi_[0])


def _hi(x) -> mpmath.mpf:
    return mpmath.mp.make_mpf(x._mpi_[1])


def _imax(ctx, xs):
    lo = max(_lo(x) for x in xs)
    hi = max(_hi(x) for x in xs)
    return ctx.mpf([lo, hi])


@dataclass(frozen=True)
class UpperReal:
    """A positive quantity stored as an enclosure of its natural log.

    ``upper_log`` is the certified upper end (use for upper bounds),
    ``lower_log`` the certified lower end (use for lower bounds).
    """

    log: object  # ivmpf enclosure of log(value)
    prec: int = DEFAULT_PREC

    @classmethod
    def from_value(cls, ctx, value) -> "UpperReal":
        if not value.a > 0:
            raise ValueError("UpperReal needs a strictly positive enclosure")
        return cls(ctx.log(value), ctx.prec)

    @classmethod
    def from_log(cls, ctx, log_value) -> "UpperReal":
        return cls(log_value, ctx.prec)

    @property
    def upper_log(self) -> float:
        """Upper end of the log enclosure, rounded up to a double."""
        return to_float(self.log._mpi_[1], rnd="c")

    @property
    def lower_log(self) -> float:
        return to_float(self.log._mpi_[0], rnd="f")

    @property
    def width(self) -> float:
        return to_float(self.log.delta._mpi_[1], rnd="c")

    def upper_value(self) -> float:
        return math.exp(self.upper_log)

    def certainly_below(self, x: Number) -> bool:
        """value < x for every point of the enclosure."""
        ctx = make_ctx(self.prec)
        return bool(self.log.b < ctx.log(_iv(ctx, x)).a)

    def certainly_above(self, x: Number) -> bool:
        """value > x for every point of the enclosure."""
        if x <= 0:
            return True
        ctx = make_ctx(self.prec)
        return bool(self.log.a > ctx.log(_iv(ctx, x)).b)

    def certainly_le(self, other: "UpperReal") -> bool:
        return bool(self.log.b <= other.log.a)

    def sci(self, digits: int = 12, upper: bool = True) -> str:
        """Decimal scientific string of the upper (or lower) value."""
        ctx = make_ctx(max(self.prec, 128))
        L = ctx.mpf(self.log.b if upper else self.log.a)
        ln10 = ctx.log(10)
        e10 = to_int((L / ln10)._mpi_[0], rnd="f")
        mant = ctx.exp(L - e10 * ln10)
        m = _hi(mant) if upper else _lo(mant)
        return f"{mpmath.nstr(m, digits)}e{e10}"

    def as_dict(self) -> dict:
        return {
            "log_lower": mpmath.nstr(_lo(self.log), 30),
            "log_upper": mpmath.nstr(_hi(self.log), 30),
            "value_upper": self.sci(),
        }


# ---------------------------------------------------------------------------
# constants


def c2_exact(m: int) -> int:
    """1500 * 38^(m+1) * (m+1)^(3m+9)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return 1500 * 38 ** (m + 1) * (m + 1) ** (3 * m + 9)


def c2(m: int, prec: int = DEFAULT_PREC) -> UpperReal:
    ctx = make_ctx(prec)
    # log form directly, so large m never builds a huge mantissa
    L = ctx.log(1500) + (m + 1) * ctx.log(38) + (3 * m + 9) * ctx.log(m + 1)
    return UpperReal.from_log(ctx, L)


def c7() -> int:
    return 2**12 * 38**2 * 1500**2


def angle(x: float) -> float:
    return max(x, 2)


# ---------------------------------------------------------------------------
# inputs and results


@dataclass(frozen=True)
class BoundInputs:
    q: int
    A: int
    m_list: Tuple[int, ...]
    h: int
    R: float = 0.0
    eps: Optional[QuadInt] = None

    def __post_init__(self):
        if not self.m_list:
            raise ValueError("m_list must be non-empty")
        if any(m < 2 for m in self.m_list):
            raise ValueError("every m_i must be >= 2")
        if any(a >= b for a, b in zip(self.m_list, self.m_list[1:])):
            raise ValueError("m_list must be strictly ascending")
        if self.h < 1 or self.A < 1:
            raise ValueError("h and A must be positive")

    @property
    def s(self) -> int:
        return len(self.m_list)

    @classmethod
    def from_field(cls, q: int, A: int, m_list: Sequence[int], inv: FieldInvariants) -> "BoundInputs":
        return cls(q, A, tuple(m_list), inv.h, inv.R, inv.eps)

    def R_enclosure(self, ctx):
        """Regulator enclosure: exact from eps when known, else the float widened."""
        if self.eps is not None:
            e = self.eps
            return ctx.log((ctx.mpf(e.a) + e.b * ctx.sqrt(e.D)) / 2)
        if self.R == 0:
            return ctx.mpf(0)
        r = ctx.mpf(self.R)
        slack = abs(self.R) * 2.0**-50
        return ctx.mpf([r.a - slack, r.b + slack])


@dataclass
class BoundResult:
    U: UpperReal
    U_stated: UpperReal
    branch: int
    branch_name: str
    case_tag: str
    branches: List[UpperReal]
    intermediates: Dict[str, object] = field(default_factory=dict)

    def as_dict(self) -> dict:
        inter = {}
        for k, v in self.intermediates.items():
            inter[k] = v.as_dict() if isinstance(v, UpperReal) else (str(v) if isinstance(v, int) else v)
        return {
            "U": self.U.as_dict(),
            "U_stated": self.U_stated.as_dict(),
            "branch": self.branch,
            "branch_name": self.branch_name,
            "case": self.case_tag,
            "branches": [b.as_dict() for b in self.branches],
            "intermediates": inter,
        }


def a_prime_worst(inputs: BoundInputs) -> int:
    """A * prod(m_i^(h-1)): the largest A' any v_i <= h-1 can produce."""
    out = inputs.A
    for m in inputs.m_list:
        out *= m ** (inputs.h - 1)
    return out


def a_prime_actual(A: int, m_list: Sequence[int], v_list: Sequence[int]) -> int:
    out = A
    for m, v in zip(m_list, v_list):
        out *= m**v
    return out


def _pick(ctx, vals: Sequence, names: Sequence[str]):
    best = _imax(ctx, vals)
    i = max(range(len(vals)), key=lambda k: (_hi(vals[k]), _lo(vals[k])))
    return best, i, names[i]


def _evaluate(ctx, *, real: bool, D_abs, c0, c1, A_prime: int, m_list, h: int, R, tag: str):
    """Shared body of both theorems; c0, c1 and sqrt|D| are enclosures."""
    s = len(m_list)
    logs = [ctx.log(m) for m in m_list]
    log_m1 = logs[0]
    logA = ctx.log(A_prime)
    inter: Dict[str, object] = {"A_prime": A_prime}
    if real:
        prod = ctx.mpf(1)
        for L in logs[1:]:
            prod = prod * (L + 2 * R)
        C = 16 * ctx.exp(c2(s + 2, ctx.prec).log) / c1 * _angle(ctx, R) * (1 + 2 * R / log_m1) * prod
        t1 = h * h * ctx.log(2 * c0 * ctx.sqrt(m_list[-1])) / (c1 * log_m1)
        t2 = ctx.log(c0 * ctx.sqrt(D_abs)) / (c1 * log_m1)
        t3 = C * _angle(ctx, logA + 2 * R) * ctx.log(2 * s * (s + 2) * C / h)
        vals, names = [t1, t2, t3], ["class_number", "discriminant", "baker"]
        inter["C_real"] = UpperReal.from_value(ctx, C)
    else:
        prod = ctx.mpf(1)
        for L in logs[1:]:
            prod = prod * L
        C = 64 * ctx.exp(c2(s + 1, ctx.prec).log) / (c1 * ctx.log(7)) * prod
        t1 = ctx.log(c0 * ctx.sqrt(D_abs)) / (c1 * log_m1)
        t2 = C * _angle(ctx, logA) * ctx.log((s + 1) * C / h)
        vals, names = [t1, t2], ["discriminant", "baker"]
        inter["C_imag"] = UpperReal.from_value(ctx, C)
    best, i, name = _pick(ctx, vals, names)
    # the (h - 1) tail belongs to the imaginary statement; it is added in the
    # real case as well since the derivation only gives max e_i <= h*u + h - 1
    stated = best if real else best + (h - 1)
    conservative = best + (h - 1)
    branches = [UpperReal.from_value(ctx, v) if v.a > 0 else UpperReal.from_value(ctx, ctx.mpf([1e-300, 1e-300])) for v in vals]
    return BoundResult(
        U=UpperReal.from_value(ctx, conservative),
        U_stated=UpperReal.from_value(ctx, stated),
        branch=i,
        branch_name=name,
        case_tag=tag,
        branches=branches,
        intermediates=inter,
    )


def theorem1_bound(inputs: BoundInputs, prec: int = DEFAULT_PREC,
                   v_list: Optional[Sequence[int]] = None) -> BoundResult:
    """Upper bound U for every exponent in (x^q-1)/(x-1) = A m_1^e_1 ... m_s^e_s.

    Real case (q = 1 mod 4) uses C0 and the regulator; imaginary case uses C1.
    A' is the worst case A * prod m_i^(h-1) unless ``v_list`` is supplied.
    """
    q = inputs.q
    if not is_odd_prime(q):
        raise ValueError("q must be an odd prime")
    ctx = make_ctx(prec)
    A_prime = a_prime_worst(inputs) if v_list is None else a_prime_actual(inputs.A, inputs.m_list, v_list)
    real = q % 4 == 1
    R = inputs.R_enclosure(ctx) if real else ctx.mpf(0)
    res = _evaluate(ctx, real=real, D_abs=ctx.mpf(q), c0=ctx.mpf(2), c1=ctx.mpf(1) / q,
                    A_prime=A_prime, m_list=inputs.m_list, h=inputs.h, R=R,
                    tag="real" if real else "imaginary")
    key = "C0" if real else "C1"
    res.intermediates[key] = res.intermediates.pop("C_real" if real else "C_imag")
    return res


def theorem2_bound(D: int, A: int, c0: Number, c1: Number, m_list: Sequence[int], h: int,
                   R: float = 0.0, prec: int = DEFAULT_PREC, eps: Optional[QuadInt] = None,
                   v_list: Optional[Sequence[int]] = None) -> BoundResult:
    """Exponent bound for X^2 - D Y^2 = 4 A prod m_i^e_i with |Y| < c0 N^(1/2 - c1)."""
    if D % 4 != 1:
        raise ValueError("D must be 1 mod 4")
    if not (0 < c1 < Fraction(1, 2)):
        raise ValueError("c1 must lie in (0, 1/2)")
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    ctx = make_ctx(prec)
    inputs = BoundInputs(abs(D), A, tuple(m_list), h, R, eps)
    A_prime = a_prime_worst(inputs) if v_list is None else a_prime_actual(A, m_list, v_list)
    real = D > 0
    Rv = inputs.R_enclosure(ctx) if real else ctx.mpf(0)
    res = _evaluate(ctx, real=real, D_abs=ctx.mpf(abs(D)), c0=_iv(ctx, c0), c1=_iv(ctx, c1),
                    A_prime=A_prime, m_list=tuple(m_list), h=h, R=Rv,
                    tag="real" if real else "imaginary")
    key = "C2" if real else "C3"
    res.intermediates[key] = res.intermediates.pop("C_real" if real else "C_imag")
    return res


def simple_log_U(q: int, s: int, m_list: Sequence[int], prec: int = DEFAULT_PREC) -> UpperReal:
    """log c7 + 2s log 38 + (6s+4) log(s+2) + 3 sum_{i>=2} log log m_i + 5 log q."""
    if len(m_list) != s:
        raise ValueError("s must equal len(m_list)")
    ctx = make_ctx(prec)
    L = ctx.log(c7()) + 2 * s * ctx.log(38) + (6 * s + 4) * ctx.log(s + 2) + 5 * ctx.log(q)
    for m in m_list[1:]:
        L = L + 3 * ctx.log(ctx.log(m))
    return UpperReal.from_log(ctx, L)


def theorem4_count_bound(q: int, s: int, m_list: Sequence[int],
                         prec: int = DEFAULT_PREC) -> Tuple[UpperReal, bool]:
    """s * ((log c7 + 19 s log(s+2) + 3 sum log log m_i) / log q + 7), and
    whether q is a prime exceeding (16/9) e s^4."""
    if len(m_list) != s:
        raise ValueError("s must equal len(m_list)")
    ctx = make_ctx(prec)
    num = ctx.log(c7()) + 19 * s * ctx.log(s + 2)
    for m in m_list[1:]:
        num = num + 3 * ctx.log(ctx.log(m))
    val = s * (num / ctx.log(q) + 7)
    threshold = ctx.mpf(16) / 9 * ctx.e * s**4
    applicable = bool(is_prime(q) and q > threshold.b)
    return UpperReal.from_value(ctx, val), applicable


def count_threshold(s: int) -> float:
    return 16 / 9 * math.e * s**4


@dataclass
class Prop1Report:
    m: int
    k: int
    B_log: float
    threshold_log: object  # enclosure of log of the (2.2) right-hand side
    cond_B: bool
    cond_k: bool
    lhs_k: object
    log_k: object

    @property
    def applicable(self) -> bool:
        return self.cond_B and self.cond_k

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "log_B": self.B_log,
            "log_threshold_B": float(self.threshold_log.b),
            "cond_B": self.cond_B,
            "cond_k": self.cond_k,
            "applicable": self.applicable,
        }


def prop1_lower_bound(m: int, k: int, h_list: Sequence[Number], B: Optional[Number] = None,
                      log_B: Optional[Number] = None,
                      prec: int = DEFAULT_PREC) -> Tuple[UpperReal, Prop1Report]:
    """log of the lower bound exp(-c2(m) k^(m+2) h_1...h_m log(2mB/h_m)).

    Returned as an enclosure; take ``lower_log`` for the certified value.
    The report states whether B >= h_m exp(4(m+1)(7 + 3 log(m+1))) and
    7 + 3 log(m+1) >= log k hold.  Pass ``log_B`` for astronomically large B.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if len(h_list) != m:
        raise ValueError("need exactly m heights")
    ctx = make_ctx(prec)
    if (B is None) == (log_B is None):
        raise ValueError("give exactly one of B, log_B")
    LB = ctx.log(_iv(ctx, B)) if log_B is None else _iv(ctx, log_B)
    if LB.b < ctx.log(3).a:
        raise ValueError("B must be >= 3")
    hs = [_iv(ctx, h) for h in h_list]
    if any(h.b < 1 / ctx.mpf(k) for h in hs):
        raise ValueError("every h_i must be >= 1/k")
    inner = 7 + 3 * ctx.log(m + 1)
    thr = ctx.log(hs[-1]) + 4 * (m + 1) * inner
    cond_B = bool(LB.a >= thr.b)
    cond_k = bool(inner.a >= ctx.log(k).b)
    prod = ctx.mpf(1)
    for h in hs:
        prod = prod * h
    L = ctx.exp(c2(m, prec).log) * ctx.mpf(k) ** (m + 2) * prod * (ctx.log(2 * m) + LB - ctx.log(hs[-1]))
    if not L.a > 0:
        raise ValueError("log(2mB/h_m) must be positive")
    out = UpperReal.from_log(ctx, ctx.mpf([-L.b, -L.a]))
    return out, Prop1Report(m, k, float(LB.a), thr, cond_B, cond_k, inner, ctx.log(k))


def theorem3_rhs(q: int, eps: float, x: float) -> float:
    """((q-1)/6 - eps) * log log x."""
    if x < 3:
        raise ValueError("x must be >= 3")
    lim = (q - 1) / 6
    if eps < 0 or eps > lim:
        raise ValueError(f"eps must lie in [0, {lim}]")
    return ((q - 1) / 6 - eps) * math.log(math.log(x))


def bhm_comparator(q: int, prec: int = DEFAULT_PREC) -> UpperReal:
    """9000 q^2 (log q)^4."""
    if q < 3:
        raise ValueError("q must be >= 3")
    ctx = make_ctx(prec)
    return UpperReal.from_value(ctx, 9000 * ctx.mpf(q) ** 2 * ctx.log(q) ** 4)


def per_class_count_bound(q: int, s: int, U: UpperReal, prec: int = DEFAULT_PREC) -> UpperReal:
    """2 log(s q U / (q-1)) / log q + 1, the bound on the size of one class."""
    ctx = make_ctx(prec)
    v = 2 * (ctx.log(s * ctx.mpf(q) / (q - 1)) + U.log) / ctx.log(q) + 1
    return UpperReal.from_value(ctx, v)


# ---------------------------------------------------------------------------
# grid checks


def default_grid() -> List[Tuple[int, Tuple[int, ...]]]:
    """q in {3,5,7,11,13} times s in {1..4}; m = the first s primes = 1 (mod q)
    that are >= 7.  (q=5, m={11}) is on it."""
    from .numbers import primes_in_ap

    out = []
    for q in (3, 5, 7, 11, 13):
        ps = [p for p in primes_in_ap(2000, q, 1) if p >= 7]
        for s in (1, 2, 3, 4):
            out.append((q, tuple(ps[:s])))
    return out


def grid_rows(grid: Optional[Sequence[Tuple[int, Tuple[int, ...]]]] = None,
              prec: int = DEFAULT_PREC) -> List[dict]:
    """Per grid point: log U, the simplified log bound, and the gap between
    the two evaluators (theorem 1 vs theorem 2 at c0 = 2, c1 = 1/q)."""
    from .quadfield import field_invariants

    rows = []
    for q, ms in grid or default_grid():
        inv = field_invariants(q)
        r1 = theorem1_bound(BoundInputs.from_field(q, 1, ms, inv), prec)
        D = q if q % 4 == 1 else -q
        r2 = theorem2_bound(D, 1, 2, Fraction(1, q), ms, inv.h, inv.R, prec, eps=inv.eps)
        simple = simple_log_U(q, len(ms), ms, prec)
        gap = max(abs(_hi(r1.U.log) - _hi(r2.U.log)), abs(_lo(r1.U.log) - _lo(r2.U.log)))
        rows.append({
            "q": q,
            "m": list(ms),
            "s": len(ms),
            "h": inv.h,
            "log_U": r1.U.upper_log,
            "log_U_stated": r1.U_stated.upper_log,
            "branch": r1.branch_name,
            "simple_log_U": simple.lower_log,
            "dominated": r1.U.certainly_le(simple),
            "evaluator_gap": float(gap),
            "evaluators_agree": gap <= mpmath.mpf(2) ** -60,
        })
    return rows
