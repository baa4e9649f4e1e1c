"""The quadratic field Q(sqrt(D)), D = (-1)**((q-1)/2) * q.

Elements of the ring of integers are stored as ``(a + b*sqrt(D)) / 2`` with
``a = b (mod 2)``; this is exact for every D = 1 (mod 4).  Class numbers come
from reduced binary quadratic forms, fundamental units from the continued
fraction of (1 + sqrt(D)) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import mpmath

from .numbers import is_odd_prime, jacobi, sqrt_mod_prime


class DataError(ArithmeticError):
    """Computed invariants violate a known a-priori bound."""


class NotPrincipalError(ArithmeticError):
    pass


class ReconciliationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FieldDescriptor:
    D: int

    def __post_init__(self):
        if self.D % 4 != 1:
            raise ValueError(f"D must be 1 mod 4, got {self.D}")

    @classmethod
    def for_prime(cls, q: int) -> "FieldDescriptor":
        if not is_odd_prime(q):
            raise ValueError("q must be an odd prime")
        return cls(q if q % 4 == 1 else -q)

    @property
    def real(self) -> bool:
        return self.D > 0

    @property
    def sign(self) -> str:
        return "real" if self.D > 0 else "imaginary"


@dataclass(frozen=True)
class QuadInt:
    """(a + b*sqrt(D)) / 2 in the maximal order of Q(sqrt(D))."""

    a: int
    b: int
    D: int

    def __post_init__(self):
        if (self.a - self.b) % 2:
            raise ValueError(f"parity violated: ({self.a} + {self.b}*sqrt({self.D}))/2")

    @classmethod
    def from_int(cls, n: int, D: int) -> "QuadInt":
        return cls(2 * n, 0, D)

    def __add__(self, other: "QuadInt") -> "QuadInt":
        return QuadInt(self.a + other.a, self.b + other.b, self.D)

    def __sub__(self, other: "QuadInt") -> "QuadInt":
        return QuadInt(self.a - other.a, self.b - other.b, self.D)

    def __neg__(self) -> "QuadInt":
        return QuadInt(-self.a, -self.b, self.D)

    def __mul__(self, other: "QuadInt") -> "QuadInt":
        if isinstance(other, int):
            return QuadInt(self.a * other, self.b * other, self.D)
        a = (self.a * other.a + self.D * self.b * other.b) // 2
        b = (self.a * other.b + self.b * other.a) // 2
        return QuadInt(a, b, self.D)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "QuadInt":
        if k < 0:
            inv = self.unit_inverse()
            return inv ** (-k)
        out, base = QuadInt(2, 0, self.D), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> "QuadInt":
        return QuadInt(self.a, -self.b, self.D)

    def norm(self) -> int:
        return (self.a * self.a - self.D * self.b * self.b) // 4

    def trace(self) -> int:
        return self.a

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def unit_inverse(self) -> "QuadInt":
        n = self.norm()
        if n not in (1, -1):
            raise ValueError(f"{self} is not a unit")
        return self.conj() * n

    def exact_div(self, other: "QuadInt") -> Optional["QuadInt"]:
        """self / other if the quotient is integral, else None."""
        n = other.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero element")
        num = self * other.conj()
        if num.a % n or num.b % n:
            return None
        a, b = num.a // n, num.b // n
        if (a - b) % 2:
            return None
        return QuadInt(a, b, self.D)

    def is_positive(self) -> bool:
        """Sign of the real number (a + b*sqrt(D))/2, real fields only."""
        a, b = self.a, self.b
        if a >= 0 and b >= 0:
            return not (a == 0 and b == 0)
        if a <= 0 and b <= 0:
            return False
        # mixed signs: compare a**2 with D*b**2
        return (a * a > self.D * b * b) == (a > 0)

    def is_primitive(self) -> bool:
        """Not divisible by any rational integer n > 1."""
        g = math.gcd(self.a, self.b)
        if g == 0:
            return False
        while g % 2 == 0:
            g //= 2
        if g > 1:
            return False
        if self.a % 2 == 0 and self.b % 2 == 0:
            return (self.a // 2 - self.b // 2) % 2 != 0
        return True

    def to_mpf(self, prec: int = 128):
        with mpmath.workprec(prec):
            return (mpmath.mpf(self.a) + self.b * mpmath.sqrt(self.D)) / 2

    def as_tuple(self) -> Tuple[int, int]:
        return (self.a, self.b)

    def __str__(self):
        return f"({self.a}{'+' if self.b >= 0 else '-'}{abs(self.b)}*sqrt({self.D}))/2"


@dataclass(frozen=True)
class PrimeIdealRep:
    """The ideal (p, (b + sqrt(D))/2); its conjugate uses -b."""

    p: int
    b: int
    D: int

    def conjugate(self) -> "PrimeIdealRep":
        return PrimeIdealRep(self.p, -self.b, self.D)


@dataclass(frozen=True)
class FieldInvariants:
    descriptor: FieldDescriptor
    h: int
    R: float
    eps: Optional[QuadInt]
    torsion_order: int
    h_narrow: Optional[int] = None

    @property
    def D(self) -> int:
        return self.descriptor.D

    def as_dict(self) -> dict:
        D = self.descriptor.D
        return {
            "q": abs(D),
            "D": D,
            "h": self.h,
            "R": self.R,
            "eps": None if self.eps is None else [str(self.eps.a), str(self.eps.b)],
            "eps_norm": None if self.eps is None else self.eps.norm(),
            "torsion_order": self.torsion_order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FieldInvariants":
        fd = FieldDescriptor(int(d["D"]))
        eps = None
        if d.get("eps") is not None:
            eps = QuadInt(int(d["eps"][0]), int(d["eps"][1]), fd.D)
        return cls(fd, int(d["h"]), float(d["R"]), eps, int(d["torsion_order"]))


# ---------------------------------------------------------------------------
# binary quadratic forms


def reduced_forms_definite(D: int) -> List[Tuple[int, int, int]]:
    """Reduced positive definite forms (a, b, c) with b*b - 4ac = D < 0."""
    out = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            num = b * b - D
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a:
                continue
            if c == a and b < 0:
                continue
            if math.gcd(math.gcd(a, b), c) == 1:
                out.append((a, b, c))
        a += 1
    return out


def _is_reduced_indefinite(a: int, b: int, D: int) -> bool:
    # sqrt(D) - b < 2|a| < sqrt(D) + b, with 0 < b < sqrt(D)
    t = 2 * abs(a)
    if (t + b) ** 2 <= D:
        return False
    return t - b <= 0 or (t - b) ** 2 < D


def reduced_forms_indefinite(D: int) -> List[Tuple[int, int, int]]:
    r = math.isqrt(D)
    out = []
    for b in range(1, r + 1):
        if (b - D) % 2:
            continue
        n = (D - b * b) // 4  # = -a*c > 0
        for d in range(1, math.isqrt(n) + 1):
            if n % d:
                continue
            for a in {d, n // d}:
                for sa in (a, -a):
                    c = -n // sa
                    if _is_reduced_indefinite(sa, b, D) and math.gcd(math.gcd(sa, b), c) == 1:
                        out.append((sa, b, c))
    return sorted(set(out))


def _rho(form: Tuple[int, int, int], D: int) -> Tuple[int, int, int]:
    _, b, c = form
    m = 2 * abs(c)
    # largest b' < sqrt(D) with b' = -b (mod 2|c|)
    b2 = -b + m * ((math.isqrt(D) + b) // m)
    return (c, b2, (b2 * b2 - D) // (4 * c))


def narrow_class_number(D: int) -> int:
    """Number of rho-cycles of reduced indefinite forms, D > 0."""
    forms = reduced_forms_indefinite(D)
    seen = set()
    cycles = 0
    for f in forms:
        if f in seen:
            continue
        cycles += 1
        g = f
        while g not in seen:
            seen.add(g)
            g = _rho(g, D)
    return cycles


# ---------------------------------------------------------------------------
# units


def fundamental_unit(D: int) -> QuadInt:
    """Smallest unit > 1 via convergents of omega = (1 + sqrt(D))/2.

    A convergent p/k with |N(p - k*omega)| = 1 gives the unit
    p - k*conj(omega) = (2p - k + k*sqrt(D))/2; the first one is fundamental.
    """
    if D <= 1:
        raise ValueError("real quadratic fields only")
    r = math.isqrt(D)
    P, Q = 1, 2  # omega = (P + sqrt(D)) / Q
    p_prev, p = 0, 1
    k_prev, k = 1, 0
    for _ in range(20 * D + 100):
        a = (P + r) // Q
        p_prev, p = p, a * p + p_prev
        k_prev, k = k, a * k + k_prev
        u = QuadInt(2 * p - k, k, D)
        if u.norm() in (1, -1):
            return u
        P = a * Q - P
        Q = (D - P * P) // Q
    raise RuntimeError(f"no unit found for D={D}")


def regulator(eps: QuadInt, prec: int = 128) -> float:
    with mpmath.workprec(prec):
        return float(mpmath.log(eps.to_mpf(prec)))


def class_number(D: int, eps: Optional[QuadInt] = None) -> Tuple[int, Optional[int]]:
    """(wide class number, narrow class number or None)."""
    if D < 0:
        return len(reduced_forms_definite(D)), None
    hp = narrow_class_number(D)
    if eps is None:
        eps = fundamental_unit(D)
    h = hp if eps.norm() == -1 else hp // 2
    return h, hp


def sanity_limit(q: int) -> float:
    return math.sqrt(q) * math.log(4 * q)


def field_invariants(q: int) -> FieldInvariants:
    """Class number, regulator, fundamental unit and torsion of Q(sqrt(+-q))."""
    fd = FieldDescriptor.for_prime(q)
    D = fd.D
    if D > 0:
        eps = fundamental_unit(D)
        h, hp = class_number(D, eps)
        R = regulator(eps)
        torsion = 2
    else:
        eps, hp, R = None, None, 0.0
        h, _ = class_number(D)
        torsion = 6 if D == -3 else 2
    lim = sanity_limit(q)
    if h > lim or R > lim:
        raise DataError(f"q={q}: h={h}, R={R} exceed sqrt(q)*log(4q)={lim:.4f}")
    return FieldInvariants(fd, h, R, eps, torsion, hp)


# ---------------------------------------------------------------------------
# primes and norm equations


def split_prime(p: int, fd: FieldDescriptor) -> PrimeIdealRep:
    """Smallest b in (0, 2p) with b*b = D (mod 4p) for a split odd prime p."""
    D = fd.D
    if p == 2 or not is_odd_prime(p):
        raise ValueError(f"p must be an odd prime, got {p}")
    if D % p == 0:
        raise ValueError(f"{p} is ramified in Q(sqrt({D}))")
    if jacobi(D, p) != 1:
        raise ValueError(f"{p} is inert in Q(sqrt({D}))")
    r = sqrt_mod_prime(D, p)
    cands = [b for b in (r, p - r, r + p, 2 * p - r) if 0 < b < 2 * p and b % 2 == 1]
    b = min(cands)
    assert (b * b - D) % (4 * p) == 0
    return PrimeIdealRep(p, b, D)


def _torsion_generator(D: int) -> QuadInt:
    if D == -3:
        return QuadInt(1, 1, D)  # primitive sixth root of unity
    return QuadInt(-2, 0, D)


def _torsion(D: int) -> List[QuadInt]:
    w = _torsion_generator(D)
    out, x = [], QuadInt(2, 0, D)
    for _ in range(6 if D == -3 else 2):
        out.append(x)
        x = x * w
    return out


def canonical_imaginary(alpha: QuadInt) -> QuadInt:
    """Torsion-orbit representative: largest a, then largest b."""
    return max((alpha * t for t in _torsion(alpha.D)), key=lambda z: (z.a, z.b))


def canonical_real(alpha: QuadInt, eps: QuadInt) -> QuadInt:
    """Representative of alpha * <-1, eps> with |conj| <= alpha < eps*sqrt|N|.

    Inside the domain alpha > 0 and |conj(alpha)| <= alpha, i.e. a, b >= 0.
    """
    if alpha.is_zero():
        raise ValueError("zero has no orbit")
    if not alpha.is_positive():
        alpha = -alpha
    inv = eps.unit_inverse()
    while not (alpha.a >= 0 and alpha.b >= 0):
        alpha = alpha * eps
    while True:
        smaller = alpha * inv
        if smaller.a >= 0 and smaller.b >= 0:
            alpha = smaller
        else:
            return alpha


def _scan_bound_real(eps: QuadInt, N: int) -> int:
    D = eps.D
    eps_up = (eps.a + eps.b * (math.isqrt(D) + 1) + 1) // 2 + 1
    return math.isqrt((4 * eps_up * N) // D + 1) + 1


MAX_SCAN = 5_000_000


def _raw_solutions(fd: FieldDescriptor, N: int, eps: Optional[QuadInt]):
    D = fd.D
    if D < 0:
        bmax = math.isqrt(4 * N // -D)
        for b in range(bmax + 1):
            rem = 4 * N + D * b * b
            a = math.isqrt(rem)
            if a * a == rem and (a - b) % 2 == 0:
                yield a, b
    else:
        bmax = _scan_bound_real(eps, N)
        if bmax > MAX_SCAN:
            raise OverflowError(f"norm scan for N={N} would need {bmax} steps")
        for b in range(bmax + 1):
            base = D * b * b
            for rem in (base + 4 * N, base - 4 * N):
                if rem < 0:
                    continue
                a = math.isqrt(rem)
                if a * a == rem and (a - b) % 2 == 0:
                    yield a, b


def all_generators(fd: FieldDescriptor, N: int, eps: Optional[QuadInt] = None,
                   primitive: bool = True) -> List[QuadInt]:
    """Unit-orbit representatives of every element with |norm| = N.

    Unlike :func:`norm_equation`, conjugate orbits are kept separately in the
    imaginary case, so each principal ideal of norm N appears once.
    """
    D = fd.D
    if D > 0 and eps is None:
        eps = fundamental_unit(D)
    reps = set()
    for a, b in _raw_solutions(fd, N, eps):
        for sa in {a, -a}:
            for sb in {b, -b}:
                z = QuadInt(sa, sb, D)
                if primitive and not z.is_primitive():
                    continue
                reps.add(canonical_real(z, eps) if D > 0 else canonical_imaginary(z))
    return sorted(reps, key=lambda z: (z.a, z.b))


def norm_equation(fd: FieldDescriptor, N: int, mode: str = "all_primitive",
                  eps: Optional[QuadInt] = None) -> List[QuadInt]:
    """Primitive solutions of |a*a - D*b*b| = 4N up to units (and conjugation
    when D < 0).  ``mode="one"`` returns at most the first of them."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if mode not in ("all_primitive", "one"):
        raise ValueError(f"unknown mode {mode!r}")
    gens = all_generators(fd, N, eps)
    if fd.D < 0:
        reps = set()
        for z in gens:
            reps.add(min(z, canonical_imaginary(z.conj()), key=lambda w: (w.b < 0, w.a, w.b)))
        gens = sorted(reps, key=lambda z: (z.a, z.b))
    return gens[:1] if mode == "one" else gens


def coprimality_condition(X: int, Y: int, fd: FieldDescriptor) -> bool:
    """True iff every prime ideal dividing both (X +- Y*sqrt(D))/2 lies over q.

    Such an ideal divides X and Y*sqrt(D); away from q it lies over a rational
    prime p that then divides (X + Y*sqrt(D))/2 in the ring of integers.  For
    odd p that is p | gcd(X, Y); for p = 2 it also needs X/2 = Y/2 (mod 2).
    """
    if (X - Y) % 2:
        raise ValueError(f"(X, Y) = ({X}, {Y}) has inconsistent parity")
    g = math.gcd(X, Y)
    if g == 0:
        return False
    q = abs(fd.D)
    while g % q == 0:
        g //= q
    while g % 2 == 0:
        g //= 2
    if g > 1:
        return False
    if X % 2 == 0 and Y % 2 == 0 and (X // 2 - Y // 2) % 2 == 0:
        return False
    return True


@dataclass(frozen=True)
class Decomposition:
    """(X + Y*sqrt(D))/2 = sign * alpha_prime * unit**u0 * prod(mu_i**u_i)."""

    alpha_prime: QuadInt
    mu_list: Tuple[QuadInt, ...]
    u0: int
    u_list: Tuple[int, ...]
    v_list: Tuple[int, ...]
    unit: QuadInt
    sign: int = 1

    def product(self) -> QuadInt:
        out = self.alpha_prime * (self.unit ** self.u0) * self.sign
        for mu, u in zip(self.mu_list, self.u_list):
            out = out * mu**u
        return out

    @property
    def a_prime(self) -> int:
        return abs(self.alpha_prime.norm())


def _unit_log_index(eta: QuadInt, eps: QuadInt) -> Tuple[int, int]:
    """(sign, k) with eta = sign * eps**k, eta a unit of a real field."""
    sign = 1 if eta.is_positive() else -1
    x = eta * sign
    with mpmath.workprec(256):
        k = int(mpmath.nint(mpmath.log(x.to_mpf(256)) / mpmath.log(eps.to_mpf(256))))
    if eps**k * sign != eta:
        raise ReconciliationError(f"{eta} is not +-eps**k")
    return sign, k


def decompose_solution(X: int, Y: int, fd: FieldDescriptor, A: int, m_list: Sequence[int],
                       e_list: Sequence[int], invariants: FieldInvariants) -> Decomposition:
    """Split (X + Y*sqrt(D))/2 into alpha' * unit * prod(mu_i**u_i).

    e_i = h*u_i + v_i with 0 <= v_i < h; (mu_i) = m_i^h for the ideal m_i
    of norm m_i dividing the element.  The m_i must be pairwise coprime and
    coprime to A so that choice is unique.
    """
    D = fd.D
    total = A
    for m, e in zip(m_list, e_list):
        total *= m**e
    if X * X - D * Y * Y != 4 * total:
        raise ValueError("X^2 - D*Y^2 != 4*A*prod(m_i^e_i)")
    if not coprimality_condition(X, Y, fd):
        raise ValueError("coprimality condition fails")
    ms = list(m_list) + [A]
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            if math.gcd(ms[i], ms[j]) != 1:
                raise ValueError("m_i and A must be pairwise coprime")
    h = invariants.h
    xi = QuadInt(X, Y, D)
    u_list = tuple(e // h for e in e_list)
    v_list = tuple(e % h for e in e_list)
    mus = []
    for m, e, u in zip(m_list, e_list, u_list):
        cands = all_generators(fd, m**h, invariants.eps)
        if not cands:
            raise NotPrincipalError(f"no element of norm {m}^{h} (internal error)")
        chosen = cands[0]
        if e > 0:
            target = xi if u > 0 else xi**h
            power = max(u, 1)
            hits = [c for c in cands if target.exact_div(c**power) is not None]
            if not hits:
                raise ReconciliationError(f"no generator of norm {m}^{h} divides the element")
            chosen = hits[0]
        mus.append(chosen)
    denom = QuadInt(2, 0, D)
    for mu, u in zip(mus, u_list):
        denom = denom * mu**u
    alpha = xi.exact_div(denom)
    if alpha is None:
        raise ReconciliationError("prod(mu_i^u_i) does not divide the element")
    if D > 0:
        eps = invariants.eps
        alpha = canonical_real(alpha, eps)
        eta = xi.exact_div(alpha * denom)
        if eta is None or abs(eta.norm()) != 1:
            raise ReconciliationError("quotient is not a unit")
        sign, u0 = _unit_log_index(eta, eps)
        unit = eps
    else:
        alpha = canonical_imaginary(alpha)
        eta = xi.exact_div(alpha * denom)
        w = _torsion_generator(D)
        sign, u0, unit = 1, None, w
        for k, t in enumerate(_torsion(D)):
            if t == eta:
                u0 = k
        if u0 is None:
            raise ReconciliationError("quotient is not a root of unity")
    out = Decomposition(alpha, tuple(mus), u0, u_list, v_list, unit, sign)
    if out.product() != xi:
        raise ReconciliationError("witness does not multiply back")
    return out
