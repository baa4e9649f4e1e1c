"""Exact integer plumbing: repunit quotients, primality, smooth factoring, sieves.

Everything here works on Python ints, so nothing overflows.  Functions are
pure and safe to call from worker processes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

# Bases 2..37 make Miller-Rabin deterministic below 3.3e24, which covers 2**64.
_DET_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_DET_LIMIT = 3317044064679887385961981
# 64 rounds total above the deterministic range: error <= 4**-64 = 2**-128.
_EXTRA_ROUNDS = 64 - len(_DET_BASES)

SIEVE_CAP = 10**8

_SMALL_PRIMES: List[int] = []


class SieveLimitError(MemoryError):
    """Requested sieve would exceed the configured memory cap."""


@dataclass(frozen=True)
class Factorization:
    """A partial factorization: ``prod(p**k for p, k in factors) * cofactor``.

    ``factors`` is sorted by strictly increasing prime.  The cofactor is 1
    or free of primes below the trial-division limit that produced it.
    """

    factors: Tuple[Tuple[int, int], ...] = ()
    cofactor: int = 1

    @property
    def value(self) -> int:
        out = self.cofactor
        for p, k in self.factors:
            out *= p**k
        return out

    @property
    def complete(self) -> bool:
        return self.cofactor == 1

    def exponent(self, p: int) -> int:
        for r, k in self.factors:
            if r == p:
                return k
        return 0

    def as_dict(self) -> dict:
        return {
            "factors": [[str(p), k] for p, k in self.factors],
            "cofactor": str(self.cofactor),
        }


def is_odd_prime(q: int) -> bool:
    return q > 2 and is_prime(q)


def repunit_quotient(x: int, q: int) -> int:
    """(x**q - 1) // (x - 1) for x >= 2 and q an odd prime."""
    if x < 2:
        raise ValueError(f"x must be >= 2, got {x}")
    if not is_odd_prime(q):
        raise ValueError(f"q must be an odd prime, got {q}")
    return (x**q - 1) // (x - 1)


def cyclotomic_value(x: int, q: int) -> int:
    """Phi_q(x) = 1 + x + ... + x**(q-1) for any integer x (x = 1 gives q)."""
    if x == 1:
        return q
    return (x**q - 1) // (x - 1)


def _mr_round(n: int, d: int, s: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(n: int) -> bool:
    """Miller-Rabin primality test.

    Deterministic for n < 3.3e24 (in particular every n < 2**64).  Above
    that, 64 rounds with bases drawn from a generator seeded by n itself,
    so the answer is reproducible and wrong with probability <= 2**-128.
    """
    if n < 2:
        return False
    for p in _DET_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if not all(_mr_round(n, d, s, a) for a in _DET_BASES):
        return False
    if n < _DET_LIMIT:
        return True
    rng = random.Random(n)
    return all(_mr_round(n, d, s, rng.randrange(2, n - 1)) for _ in range(_EXTRA_ROUNDS))


def prime_sieve(limit: int) -> bytearray:
    """Eratosthenes flags for 0..limit inclusive."""
    if limit > SIEVE_CAP:
        raise SieveLimitError(f"sieve limit {limit} exceeds cap {SIEVE_CAP}")
    if limit < 2:
        return bytearray(max(limit + 1, 0))
    flags = bytearray(b"\x01") * (limit + 1)
    flags[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = bytes(len(range(p * p, limit + 1, p)))
    return flags


def primes_up_to(limit: int) -> List[int]:
    flags = prime_sieve(limit)
    return [i for i in range(len(flags)) if flags[i]]


def primes_in_ap(limit: int, modulus: int, residue: int) -> List[int]:
    """All primes p <= limit with p = residue (mod modulus), ascending.

    ``residue == 0`` (or ``modulus == 1``) means every prime.
    """
    if modulus < 1:
        raise ValueError("modulus must be positive")
    if residue != 0 and modulus > 1 and math.gcd(modulus, residue) != 1:
        raise ValueError(f"gcd({modulus}, {residue}) != 1")
    flags = prime_sieve(limit)
    if residue == 0 or modulus == 1:
        return [i for i in range(len(flags)) if flags[i]]
    r = residue % modulus
    return [p for p in range(r, limit + 1, modulus) if flags[p]]


def _small_primes(limit: int) -> List[int]:
    global _SMALL_PRIMES
    if not _SMALL_PRIMES or _SMALL_PRIMES[-1] < limit:
        _SMALL_PRIMES = primes_up_to(max(limit, 1 << 16))
    if _SMALL_PRIMES[-1] <= limit:
        return _SMALL_PRIMES
    import bisect

    return _SMALL_PRIMES[: bisect.bisect_right(_SMALL_PRIMES, limit)]


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n."""
    if n <= 0 or n % 2 == 0:
        raise ValueError(f"n must be odd and positive, got {n}")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def sqrt_mod_prime(a: int, p: int) -> int:
    """A square root of a modulo the odd prime p (Tonelli-Shanks)."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        raise ValueError(f"{a} is not a square mod {p}")
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


def _divide_out(n: int, p: int) -> Tuple[int, int]:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return n, k


def _merge(found: dict) -> Tuple[Tuple[int, int], ...]:
    return tuple(sorted((p, k) for p, k in found.items() if k))


def smooth_factor(n: int, allowed: Iterable[int] = (), trial_limit: int = 0) -> Factorization:
    """Strip the primes in ``allowed`` and every prime below ``trial_limit``.

    ``allowed`` primes go first since they dominate in the equations we
    care about.  Whatever is left becomes the cofactor.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    found: dict = {}
    for p in sorted(set(allowed)):
        if not is_prime(p):
            raise ValueError(f"allowed entry {p} is not prime")
        n, k = _divide_out(n, p)
        if k:
            found[p] = k
        if n == 1:
            return Factorization(_merge(found), 1)
    if trial_limit > 1 and n > 1:
        for p in _small_primes(trial_limit - 1):
            if p >= trial_limit or n == 1:
                break
            if p * p > n:
                # n itself is prime (no smaller divisors remain)
                if n < trial_limit:
                    found[n] = found.get(n, 0) + 1
                    n = 1
                break
            if n % p == 0:
                n, k = _divide_out(n, p)
                found[p] = found.get(p, 0) + k
    return Factorization(_merge(found), n)


def _brent_rho(n: int, budget: int, seed: int) -> Tuple[Optional[int], int]:
    """(nontrivial factor of composite n or None, iterations spent)."""
    if n % 2 == 0:
        return 2, 1
    rng = random.Random(seed)
    spent = 0
    while spent < budget:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g, r, qq = 1, 1, 1
        x = ys = y
        while g == 1 and spent < budget:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    qq = qq * abs(x - y) % n
                g = math.gcd(qq, n)
                k += m
            spent += r
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if 1 < g < n:
            return g, spent
    return None, spent


def factorize(n: int, allowed: Iterable[int] = (), trial_limit: int = 10**4,
              budget: int = 200_000) -> Factorization:
    """Trial division then Brent's rho under an iteration budget.

    Cofactor is 1 when complete; otherwise it is the product of the pieces
    rho could not split.
    """
    base = smooth_factor(n, allowed, trial_limit)
    found = dict(base.factors)
    stack = [base.cofactor] if base.cofactor > 1 else []
    left = 1
    remaining = budget
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            found[m] = found.get(m, 0) + 1
            continue
        r = math.isqrt(m)
        if r * r == m:
            stack.extend((r, r))
            continue
        if remaining <= 0:
            left *= m
            continue
        d, spent = _brent_rho(m, remaining, seed=m & 0xFFFFFFFF)
        remaining -= spent
        if d is None:
            left *= m
        else:
            stack.extend((d, m // d))
    return Factorization(_merge(found), left)


def largest_prime_factor(n: int, trial_limit: int = 10**4, budget: int = 200_000,
                         allowed: Sequence[int] = ()) -> Tuple[int, bool, int]:
    """Return ``(P, complete, cofactor)``.

    When complete, P is the largest prime factor of n.  Otherwise P is a
    lower bound: every prime in the unsplit cofactor is >= trial_limit, so
    P >= max(largest prime found, trial_limit).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    fac = factorize(n, allowed, trial_limit, budget)
    best = fac.factors[-1][0] if fac.factors else 0
    if fac.complete:
        return best, True, 1
    return max(best, trial_limit), False, fac.cofactor
