"""Desk-scale scans: solutions of (x^q-1)/(x-1) = A prod m_i^e_i, largest
prime factor margins, the two-prime congruence lemma and the gap/count checks.

Parallel work is split into contiguous chunks; results are merged and sorted,
so the output never depends on the worker count or scheduling.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .bounds import (
    BoundInputs,
    BoundResult,
    UpperReal,
    bhm_comparator,
    count_threshold,
    per_class_count_bound,
    theorem1_bound,
    theorem3_rhs,
    theorem4_count_bound,
)
from .numbers import (
    Factorization,
    cyclotomic_value,
    factorize,
    is_odd_prime,
    is_prime,
    prime_sieve,
    primes_in_ap,
    primes_up_to,
)
from .quadfield import FieldInvariants, field_invariants

DFS_NODE_CAP = 100_000


class InconsistencyError(ArithmeticError):
    """A computed bound or lemma was contradicted by an explicit witness."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class SearchConfig:
    q: int
    A: int = 1
    m_list: Tuple[int, ...] = ()
    x_min: int = 2
    x_max: int = 10**3
    prime_only: bool = False
    trial_limit: int = 10**4
    budget: int = 200_000
    workers: int = 1
    chunk: int = 0  # 0 = split evenly across workers
    node_cap: int = DFS_NODE_CAP  # search effort per x when the m_i share factors

    def __post_init__(self):
        if not is_odd_prime(self.q):
            raise ValueError("q must be an odd prime")
        if self.x_min < 2:
            raise ValueError("x_min must be >= 2")
        if self.x_max < self.x_min:
            raise ValueError("x_max must be >= x_min")
        if not self.m_list:
            raise ValueError("m_list must be non-empty")
        if any(m < 2 for m in self.m_list):
            raise ValueError("every m_i must be >= 2")
        if any(a >= b for a, b in zip(self.m_list, self.m_list[1:])):
            raise ValueError("m_list must be strictly ascending")
        if self.A < 1:
            raise ValueError("A must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def s(self) -> int:
        return len(self.m_list)

    @property
    def is_extension(self) -> bool:
        """Prime-only scans with A != 1 go beyond the stated equation."""
        return self.prime_only and self.A != 1


@dataclass
class SolutionRecord:
    x: int
    q: int
    A: int
    m_list: Tuple[int, ...]
    exponents: Tuple[int, ...]
    value: int
    factorization: Factorization
    class_index: Optional[int] = None
    U_used: Optional[UpperReal] = None
    bound_ok: Optional[bool] = None

    def check(self) -> bool:
        prod = self.A
        for m, e in zip(self.m_list, self.exponents):
            prod *= m**e
        return prod == self.value == cyclotomic_value(self.x, self.q)

    def to_json(self) -> str:
        """One JSONL line; exact integers go out as decimal strings."""
        body = {
            "x": str(self.x),
            "q": self.q,
            "A": str(self.A),
            "m": [str(m) for m in self.m_list],
            "e": list(self.exponents),
            "value_digits": len(str(self.value)),
            "class_index": self.class_index,
            "bound_ok": self.bound_ok,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))


@dataclass
class SearchResult:
    config: SearchConfig
    records: List[SolutionRecord]
    undecided: List[int]
    scanned: int
    bound: Optional[BoundResult] = None
    elapsed: float = 0.0

    def summary(self) -> dict:
        return {
            "q": self.config.q,
            "A": str(self.config.A),
            "m": [str(m) for m in self.config.m_list],
            "x_min": str(self.config.x_min),
            "x_max": str(self.config.x_max),
            "prime_only": self.config.prime_only,
            "extension": self.config.is_extension,
            "scanned": self.scanned,
            "solutions": len(self.records),
            "undecided": [str(x) for x in self.undecided],
            "elapsed_s": round(self.elapsed, 3),
        }


def solve_exponents(w: int, m_list: Sequence[int], cap: int = DFS_NODE_CAP) -> Tuple[List[Tuple[int, ...]], bool]:
    """All exponent vectors with prod m_i^e_i == w.  Returns (solutions, complete).

    Pairwise coprime m_i give at most one vector and are solved greedily.
    Otherwise a depth-first search over m_i in descending order is used,
    which stops (complete=False) after ``cap`` nodes.
    """
    coprime = all(math.gcd(a, b) == 1 for i, a in enumerate(m_list) for b in m_list[i + 1:])
    if coprime:
        es = []
        for m in m_list:
            k = 0
            while w % m == 0:
                w //= m
                k += 1
            es.append(k)
        return ([tuple(es)] if w == 1 else []), True
    order = sorted(range(len(m_list)), key=lambda i: -m_list[i])
    out: List[Tuple[int, ...]] = []
    nodes = 0
    es = [0] * len(m_list)

    def dfs(pos: int, rest: int) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > cap:
            return False
        if pos == len(order):
            if rest == 1:
                out.append(tuple(es))
            return True
        m = m_list[order[pos]]
        powers = [rest]
        while powers[-1] % m == 0:
            powers.append(powers[-1] // m)
        for k in range(len(powers) - 1, -1, -1):
            es[order[pos]] = k
            if not dfs(pos + 1, powers[k]):
                return False
        es[order[pos]] = 0
        return True

    complete = dfs(0, w)
    return sorted(out), complete


def class_index(value: int, m_list: Sequence[int], exponents: Sequence[int]) -> Optional[int]:
    """Smallest i (1-based) with m_i^(e_i s) >= value, or None."""
    s = len(m_list)
    for i, (m, e) in enumerate(zip(m_list, exponents), start=1):
        # compare logs first, exact only near the boundary
        lhs = e * s * math.log(m) if e else 0.0
        rhs = math.log(value)
        if lhs > rhs + 1e-9:
            return i
        if lhs >= rhs - 1e-9 and m ** (e * s) >= value:
            return i
    return None


def _candidates(start: int, end: int, prime_only: bool) -> Sequence[int]:
    if not prime_only:
        return range(start, end + 1)
    flags = prime_sieve(end)
    return [x for x in range(start, end + 1) if flags[x]]


def _scan_chunk(q: int, A: int, m_list: Tuple[int, ...], start: int, end: int,
                prime_only: bool, node_cap: int) -> Tuple[List[Tuple[int, Tuple[int, ...]]], List[int], int]:
    hits: List[Tuple[int, Tuple[int, ...]]] = []
    undecided: List[int] = []
    xs = _candidates(start, end, prime_only)
    for x in xs:
        v = cyclotomic_value(x, q)
        if v % A:
            continue
        sols, complete = solve_exponents(v // A, m_list, node_cap)
        if not complete:
            undecided.append(x)
        for e in sols:
            hits.append((x, e))
    return hits, undecided, len(xs)


def _split(lo: int, hi: int, parts: int) -> List[Tuple[int, int]]:
    n = hi - lo + 1
    parts = max(1, min(parts, n))
    size = -(-n // parts)
    return [(a, min(a + size - 1, hi)) for a in range(lo, hi + 1, size)]


def _factor_value(A: int, m_list: Sequence[int], exponents: Sequence[int],
                  trial_limit: int, budget: int) -> Factorization:
    merged: Dict[int, int] = {}
    cof = 1
    parts = [(A, 1)] + [(m, e) for m, e in zip(m_list, exponents) if e]
    for n, k in parts:
        if n == 1:
            continue
        f = factorize(n, trial_limit=trial_limit, budget=budget)
        for p, j in f.factors:
            merged[p] = merged.get(p, 0) + j * k
        cof *= f.cofactor**k
    return Factorization(tuple(sorted(merged.items())), cof)


def enumerate_solutions(cfg: SearchConfig, inv: Optional[FieldInvariants] = None,
                        with_bound: bool = True) -> SearchResult:
    """Scan x in [x_min, x_max] (primes only in prime_only mode)."""
    t0 = time.perf_counter()
    parts = cfg.workers if cfg.chunk <= 0 else max(1, -(-(cfg.x_max - cfg.x_min + 1) // cfg.chunk))
    chunks = _split(cfg.x_min, cfg.x_max, parts)
    args = [(cfg.q, cfg.A, cfg.m_list, a, b, cfg.prime_only, cfg.node_cap) for a, b in chunks]
    if cfg.workers == 1:
        results = [_scan_chunk(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_scan_chunk, *zip(*args)))
    hits = sorted(h for r in results for h in r[0])
    undecided = sorted(x for r in results for x in r[1])
    scanned = sum(r[2] for r in results)

    bound = None
    if with_bound:
        inv = inv or field_invariants(cfg.q)
        bound = theorem1_bound(BoundInputs.from_field(cfg.q, cfg.A, cfg.m_list, inv))
    records = []
    for x, e in hits:
        value = cyclotomic_value(x, cfg.q)
        rec = SolutionRecord(
            x=x, q=cfg.q, A=cfg.A, m_list=cfg.m_list, exponents=e, value=value,
            factorization=_factor_value(cfg.A, cfg.m_list, e, cfg.trial_limit, cfg.budget),
            class_index=class_index(value, cfg.m_list, e),
        )
        if not rec.check():
            raise InconsistencyError("record fails to re-multiply", {"x": str(x), "e": list(e)})
        if bound is not None:
            rec.U_used = bound.U
            rec.bound_ok = all(k == 0 or bound.U.certainly_above(k) for k in e)
        records.append(rec)
    return SearchResult(cfg, records, undecided, scanned, bound, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# reconciliation against the bounds


def verify_exponent_bounds(records: Sequence[SolutionRecord], inputs: BoundInputs,
                           bound: Optional[BoundResult] = None, raise_on_violation: bool = True) -> dict:
    """Every e_i < U; with s = 1, A = 1 and prime e also e <= 9000 q^2 log^4 q."""
    bound = bound or theorem1_bound(inputs)
    U = bound.U
    worst = 0.0
    violations = []
    comparator = bhm_comparator(inputs.q)
    bhm_checked = 0
    for rec in records:
        if (rec.q, rec.A, tuple(rec.m_list)) != (inputs.q, inputs.A, tuple(inputs.m_list)):
            raise ValueError("record does not belong to these inputs")
        for i, e in enumerate(rec.exponents):
            if e and not U.certainly_above(e):
                violations.append({"x": str(rec.x), "i": i + 1, "e": e, "log_U": U.upper_log})
            if e:
                worst = max(worst, math.exp(math.log(e) - U.lower_log))
        if inputs.s == 1 and inputs.A == 1 and is_prime(rec.exponents[0]):
            bhm_checked += 1
            if not comparator.certainly_above(rec.exponents[0]):
                violations.append({"x": str(rec.x), "e": rec.exponents[0], "comparator": comparator.sci()})
    report = {
        "ok": not violations,
        "records": len(records),
        "log_U": U.upper_log,
        "branch": bound.branch_name,
        "max_ratio_e_over_U": worst,
        "bhm_checked": bhm_checked,
        "bhm_value": comparator.sci(),
        "violations": violations,
    }
    if raise_on_violation and violations:
        raise InconsistencyError("exponent exceeds the computed bound", report)
    return report


@dataclass(frozen=True)
class LpfRow:
    x: int
    P: int
    complete: bool
    rhs: float
    margin: float

    @property
    def decided(self) -> bool:
        # an incomplete P is a lower bound, good enough once it beats rhs
        return self.complete or self.margin > 0


def lpf_scan(q: int, xs: Sequence[int], eps: float = 0.0, trial_limit: int = 2000,
             budget: int = 20_000) -> Tuple[List[LpfRow], dict]:
    """Largest prime factor of Phi_q(x) against ((q-1)/6 - eps) log log x.

    Only q and primes = 1 (mod q) can divide Phi_q(x), so trial division
    runs over those alone.  When rho gives up, every prime of the leftover
    cofactor is above ``trial_limit`` and P >= trial_limit is reported.
    """
    allowed = [q] + primes_in_ap(trial_limit, q, 1)
    rows = []
    for x in xs:
        if x < 3:
            raise ValueError("x must be >= 3")
        n = cyclotomic_value(x, q)
        fac = factorize(n, allowed, trial_limit=0, budget=budget)
        best = fac.factors[-1][0] if fac.factors else 0
        P = best if fac.complete else max(best, trial_limit)
        rhs = theorem3_rhs(q, eps, x)
        rows.append(LpfRow(x, P, fac.complete, rhs, P - rhs))
    summary = {
        "q": q,
        "eps": eps,
        "count": len(rows),
        "min_margin": min((r.margin for r in rows), default=None),
        "argmin_x": min(rows, key=lambda r: r.margin).x if rows else None,
        "incomplete": sum(not r.complete for r in rows),
        "undecided": [r.x for r in rows if not r.decided],
        "nonpositive": [r.x for r in rows if r.margin <= 0],
        "stronger_than_stated": eps == 0,
    }
    return rows, summary


# ---------------------------------------------------------------------------
# two-prime congruence lemma


@dataclass(frozen=True)
class LemmaWitness:
    p0: int
    e: int
    q: int
    p1: int
    p2: int
    H1: float
    H2: float
    lhs: float
    rhs: int
    holds: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _lemma_holds(p0: int, e: int, p1: int, p2: int, rhs: int) -> Tuple[float, float, float, bool]:
    H1 = e * math.log(p0) / math.log(p1)
    H2 = e * math.log(p0) / math.log(p2)
    lhs = 0.75 * H1 * H2
    if abs(lhs - rhs) > 1e-9 * max(1.0, rhs):
        return H1, H2, lhs, lhs <= rhs
    # near-tie: 3 e^2 log^2 p0 <= 4 rhs log p1 log p2, at 200 bits
    import mpmath

    with mpmath.workprec(200):
        L0 = mpmath.log(p0)
        exact = 3 * e * e * L0 * L0 <= 4 * rhs * mpmath.log(p1) * mpmath.log(p2)
    return H1, H2, lhs, bool(exact)


def _lemma_chunk(p0_list: Sequence[int], p0e_max: int, q_max: int,
                 primes: Sequence[int]) -> Tuple[List[LemmaWitness], int, int]:
    bad: List[LemmaWitness] = []
    tested = hyp = 0
    for p0 in p0_list:
        others = [p for p in primes if p != p0]
        M, e = p0, 1
        while M <= p0e_max:
            # incremental powers p^q mod M for q = 1..q_max
            cur = [1] * len(others)
            for q in range(1, q_max + 1):
                cur = [c * p % M for c, p in zip(cur, others)]
                hits = [p for c, p in zip(cur, others) if c == 1]
                g = math.gcd(q, p0 - 1)
                n = len(others)
                tested += n * (n - 1) // 2
                for i, p1 in enumerate(hits):
                    for p2 in hits[i + 1:]:
                        hyp += 1
                        H1, H2, lhs, ok = _lemma_holds(p0, e, p1, p2, g)
                        if not ok:
                            bad.append(LemmaWitness(p0, e, q, p1, p2, H1, H2, lhs, g, False))
            M *= p0
            e += 1
    return bad, tested, hyp


def lemma41_verify(p0e_max: int, q_max: int, p_max: int, workers: int = 1) -> Tuple[List[LemmaWitness], dict]:
    """Exhaustive sweep: p0^e <= p0e_max, 1 <= q <= q_max, primes p1 < p2 <= p_max.

    Whenever p_i^q = 1 (mod p0^e) for both i, the claim (3/4) H1 H2 <= gcd(q, p0-1)
    is tested; every failure is returned as a witness.
    """
    t0 = time.perf_counter()
    p0s = primes_up_to(p0e_max)
    primes = primes_up_to(p_max)
    if workers <= 1:
        parts = [(p0s, p0e_max, q_max, primes)]
        results = [_lemma_chunk(*a) for a in parts]
    else:
        # interleave so each worker gets a mix of small and large p0
        groups = [p0s[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_lemma_chunk, groups, [p0e_max] * workers, [q_max] * workers,
                                  [primes] * workers))
    bad = sorted((w for r in results for w in r[0]), key=lambda w: (w.p0, w.e, w.q, w.p1, w.p2))
    summary = {
        "p0e_max": p0e_max,
        "q_max": q_max,
        "p_max": p_max,
        "pairs_tested": sum(r[1] for r in results),
        "hypothesis_met": sum(r[2] for r in results),
        "violations": len(bad),
        "elapsed_s": round(time.perf_counter() - t0, 3),
    }
    return bad, summary


# ---------------------------------------------------------------------------
# gaps and counts in the prime-only equation


def partition_classes(records: Sequence[SolutionRecord]) -> Dict[int, List[SolutionRecord]]:
    out: Dict[int, List[SolutionRecord]] = {}
    for r in records:
        if r.class_index is not None:
            out.setdefault(r.class_index, []).append(r)
    for v in out.values():
        v.sort(key=lambda r: r.x)
    return out


def gap_check(records: Sequence[SolutionRecord], q: int, s: int, raise_on_violation: bool = True) -> dict:
    """Within each class: log r_{j+1} > 3(q-1)^2/(4 q s^2) log r_j, and
    log r_{j+1} > sqrt(q) log r_j when q > (16/9) e s^4."""
    classes = partition_classes(records)
    c_lemma = 3 * (q - 1) ** 2 / (4 * q * s * s)
    strong = q > count_threshold(s)
    margins = []
    violations = []
    for i, rs in sorted(classes.items()):
        for a, b in zip(rs, rs[1:]):
            la, lb = math.log(a.x), math.log(b.x)
            m1 = lb - c_lemma * la
            entry = {"class": i, "r_j": str(a.x), "r_next": str(b.x), "margin_lemma": m1}
            if m1 <= 0:
                violations.append(entry)
            if strong:
                m2 = lb - math.sqrt(q) * la
                entry["margin_sqrt_q"] = m2
                if m2 <= 0:
                    violations.append(entry)
            margins.append(entry)
    report = {
        "q": q,
        "s": s,
        "classes": {str(i): [str(r.x) for r in rs] for i, rs in sorted(classes.items())},
        "unclassified": [str(r.x) for r in records if r.class_index is None],
        "pairs": len(margins),
        "sqrt_q_form_applies": strong,
        "margins": margins,
        "ok": not violations,
        "violations": violations,
    }
    if raise_on_violation and violations:
        raise InconsistencyError("gap inequality fails", report)
    return report


def count_vs_bound(records: Sequence[SolutionRecord], q: int, s: int, m_list: Sequence[int],
                   U: Optional[UpperReal] = None, raise_on_violation: bool = True) -> dict:
    """Total count against the closed-form count bound (when applicable), and
    per-class counts against 2 log(s q U/(q-1))/log q + 1."""
    total_bound, applicable = theorem4_count_bound(q, s, m_list)
    n = len(records)
    ok_total = (not applicable) or total_bound.certainly_above(n) or n == 0
    per_class = {}
    ok_classes = True
    if U is not None:
        pc = per_class_count_bound(q, s, U)
        for i, rs in sorted(partition_classes(records).items()):
            ok = pc.certainly_above(len(rs))
            ok_classes = ok_classes and ok
            per_class[str(i)] = {"count": len(rs), "bound": pc.sci(), "ok": ok}
    report = {
        "q": q,
        "s": s,
        "count": n,
        "bound": total_bound.sci(),
        "bound_value": total_bound.upper_value(),
        "applicable": applicable,
        "threshold": count_threshold(s),
        "note": None if applicable else "bound not applicable: q <= (16/9) e s^4",
        "ok": ok_total and ok_classes,
        "per_class": per_class,
    }
    if raise_on_violation and not report["ok"]:
        raise InconsistencyError("solution count exceeds the bound", report)
    return report
