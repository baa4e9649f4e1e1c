"""Command line entry point.

Exit codes: 0 success, 2 usage or validation error, 3 mathematical
inconsistency (a bound or identity was contradicted), 4 incomplete run
under --strict.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .bounds import (
    BoundInputs,
    DEFAULT_PREC,
    bhm_comparator,
    grid_rows,
    prop1_lower_bound,
    simple_log_U,
    theorem1_bound,
    theorem4_count_bound,
)
from .cyclotomic import InequalityViolation, coefficient_bounds_check, eval_f, eval_g, half_split, identity_residual
from .numbers import cyclotomic_value, factorize, is_odd_prime, primes_up_to
from .quadfield import (
    DataError,
    FieldDescriptor,
    FieldInvariants,
    decompose_solution,
    field_invariants,
    regulator,
    sanity_limit,
)
from .search import (
    InconsistencyError,
    SearchConfig,
    count_vs_bound,
    enumerate_solutions,
    gap_check,
    lemma41_verify,
    lpf_scan,
    verify_exponent_bounds,
)

log = logging.getLogger("sigmaeq")

EXIT_OK, EXIT_USAGE, EXIT_MATH, EXIT_INCOMPLETE = 0, 2, 3, 4
CACHE_ENV = "SIGMAEQ_CACHE"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cache and manifest


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class FieldCache:
    """q -> serialized FieldInvariants in one JSON file.

    Entries are re-validated on load; anything that fails is recomputed.
    """

    def __init__(self, path: Optional[Path] = None):
        if path is None:
            env = os.environ.get(CACHE_ENV)
            path = Path(env) if env else Path.home() / ".cache" / "sigmaeq" / "fields.json"
        self.path = Path(path)
        self._data: Dict[str, dict] = {}
        self._dirty = False
        try:
            raw = json.loads(self.path.read_text(encoding="utf-8"))
            if isinstance(raw, dict):
                self._data = raw
        except (OSError, ValueError):
            self._data = {}

    @staticmethod
    def _valid(q: int, d: dict) -> Optional[FieldInvariants]:
        try:
            inv = FieldInvariants.from_dict(d)
        except (KeyError, TypeError, ValueError):
            return None
        lim = sanity_limit(q)
        D = q if q % 4 == 1 else -q
        if inv.D != D or not (1 <= inv.h <= lim) or not (0 <= inv.R <= lim):
            return None
        if D > 0:
            e = inv.eps
            if e is None or abs(e.norm()) != 1 or not e.is_positive() or e.b <= 0:
                return None
            if abs(regulator(e) - inv.R) > 1e-12 * max(1.0, inv.R):
                return None
        elif inv.R != 0 or inv.eps is not None or inv.torsion_order != (6 if D == -3 else 2):
            return None
        return inv

    def get(self, q: int) -> FieldInvariants:
        d = self._data.get(str(q))
        inv = self._valid(q, d) if isinstance(d, dict) else None
        if inv is None:
            inv = field_invariants(q)
            self._data[str(q)] = inv.as_dict()
            self._dirty = True
        return inv

    def flush(self) -> None:
        if not self._dirty:
            return
        try:
            _atomic_write(self.path, json.dumps(self._data, sort_keys=True, indent=1))
            self._dirty = False
        except OSError as exc:  # cache is an optimisation only
            log.warning("could not write cache %s: %s", self.path, exc)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: str
    params: dict
    version: str = __version__
    started: str = ""
    finished: str = ""
    input_hash: str = ""
    outputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256

    def start(self) -> None:
        self.started = datetime.now(timezone.utc).isoformat()
        canon = json.dumps({"command": self.command, "params": self.params}, sort_keys=True)
        self.input_hash = _sha256(canon.encode("utf-8"))

    def add_output(self, path: Path) -> None:
        self.outputs[str(path)] = _sha256(path.read_bytes())

    def write(self, path: Path) -> None:
        self.finished = datetime.now(timezone.utc).isoformat()
        _atomic_write(path, json.dumps(asdict(self), sort_keys=True, indent=1) + "\n")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=1, default=str) + "\n")


# ---------------------------------------------------------------------------
# validation


def _check_q(q: int) -> None:
    if not is_odd_prime(q):
        raise UsageError("q must be an odd prime")


def _check_m(q: int, m_list: Sequence[int], allow_q: bool) -> List[str]:
    """Each m_i must be composed of primes = 1 (mod q); q itself only with allow_q."""
    warnings = []
    if not m_list:
        raise UsageError("at least one --m is required")
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise UsageError("--m values must be strictly ascending")
    for m in m_list:
        if m < 2:
            raise UsageError(f"m={m} must be >= 2")
        fac = factorize(m)
        if not fac.complete:
            raise UsageError(f"m={m} could not be fully factored for validation")
        for p, _ in fac.factors:
            if p == q:
                if not allow_q:
                    raise UsageError(f"m={m} is divisible by q={q} (use --allow-q-divisor)")
                warnings.append(f"m={m} contains the prime q={q}")
            elif p % q != 1:
                raise UsageError(f"m={m} has prime factor {p} not = 1 mod {q}")
    return warnings


# ---------------------------------------------------------------------------
# commands


def cmd_field(args, cache: FieldCache) -> int:
    _check_q(args.q)
    inv = cache.get(args.q)
    _emit(inv.as_dict())
    return EXIT_OK


def cmd_bound(args, cache: FieldCache) -> int:
    _check_q(args.q)
    warnings = _check_m(args.q, args.m, args.allow_q_divisor)
    if args.A < 1:
        raise UsageError("A must be positive")
    inv = cache.get(args.q)
    inputs = BoundInputs.from_field(args.q, args.A, tuple(args.m), inv)
    res = theorem1_bound(inputs, args.precision)
    simple = simple_log_U(args.q, inputs.s, inputs.m_list, args.precision)
    count, applicable = theorem4_count_bound(args.q, inputs.s, inputs.m_list, args.precision)
    out = {
        "q": args.q,
        "A": str(args.A),
        "m": [str(m) for m in args.m],
        "h": inv.h,
        "R": inv.R,
        "precision_bits": args.precision,
        "a_prime_mode": "worst",
        "bound": res.as_dict(),
        "log_U": res.U.upper_log,
        "simple_log_U": simple.as_dict(),
        "dominated_by_simple": res.U.certainly_le(simple),
        "count_bound": count.as_dict(),
        "count_bound_applicable": applicable,
        "bhm_comparator": bhm_comparator(args.q, args.precision).as_dict(),
        "warnings": warnings,
    }
    if args.with_decomposition is not None:
        x = args.with_decomposition
        hs = half_split(args.q)
        X, Y = eval_f(hs, x), eval_g(hs, x)
        v = cyclotomic_value(x, args.q)
        w, e = v, []
        if w % args.A:
            raise UsageError(f"x={x} is not a solution for these A, m")
        w //= args.A
        for m in args.m:
            k = 0
            while w % m == 0:
                w //= m
                k += 1
            e.append(k)
        if w != 1:
            raise UsageError(f"x={x} is not a solution for these A, m")
        dec = decompose_solution(X, Y, FieldDescriptor.for_prime(args.q), args.A, args.m, e, inv)
        tight = theorem1_bound(inputs, args.precision, v_list=dec.v_list)
        out["decomposition"] = {
            "x": str(x),
            "e": e,
            "v": list(dec.v_list),
            "u": list(dec.u_list),
            "alpha_prime": [str(dec.alpha_prime.a), str(dec.alpha_prime.b)],
            "A_prime": str(dec.a_prime),
            "bound": tight.as_dict(),
        }
    _emit(out)
    return EXIT_OK


def cmd_cyclo(args, cache: FieldCache) -> int:
    _check_q(args.q)
    hs = half_split(args.q, args.degree_cap)
    out = hs.as_dict()
    out["identity_ok"] = not any(identity_residual(hs))
    rep = coefficient_bounds_check(hs, raise_on_violation=False)
    out["coefficient_bounds"] = {k: v for k, v in rep.items() if k != "b_over_a_ratios"}
    _emit(out)
    return EXIT_OK


def cmd_search(args, cache: FieldCache) -> int:
    _check_q(args.q)
    prime_only = args.equation == "eq14"
    A = args.A
    if prime_only and A != 1 and not args.extension:
        raise UsageError("eq14 has A = 1; pass --extension to scan primes with general A")
    warnings = _check_m(args.q, args.m, args.allow_q_divisor)
    try:
        cfg = SearchConfig(args.q, A, tuple(args.m), args.x_min, args.x_max, prime_only,
                           args.trial_limit, args.budget, args.workers, args.chunk, args.node_cap)
    except ValueError as exc:
        raise UsageError(str(exc))
    params = {k: (str(v) if isinstance(v, int) and abs(v) > 2**53 else v)
              for k, v in vars(args).items() if k not in ("func",)}
    manifest = RunManifest(f"search {args.equation}", params)
    manifest.start()
    inv = cache.get(args.q)
    res = enumerate_solutions(cfg, inv)
    inputs = BoundInputs.from_field(args.q, A, tuple(args.m), inv)
    status = EXIT_OK
    summary = res.summary()
    summary["warnings"] = warnings
    try:
        summary["exponent_bounds"] = verify_exponent_bounds(res.records, inputs, res.bound)
        if prime_only:
            summary["gaps"] = gap_check(res.records, args.q, cfg.s)
            summary["count"] = count_vs_bound(res.records, args.q, cfg.s, cfg.m_list, res.bound.U)
    except InconsistencyError as exc:
        summary["inconsistency"] = {"message": str(exc), "witness": exc.witness}
        status = EXIT_MATH
    body = "".join(r.to_json() + "\n" for r in res.records)
    if args.out:
        out = Path(args.out)
        _atomic_write(out, body)
        manifest.add_output(out)
        summ_path = out.with_name(out.name + ".summary.json")
        _atomic_write(summ_path, json.dumps(summary, sort_keys=True, indent=1, default=str) + "\n")
        manifest.add_output(summ_path)
        manifest.write(out.with_name(out.name + ".manifest.json"))
    else:
        sys.stdout.write(body)
    sys.stderr.write(json.dumps(summary, sort_keys=True, default=str) + "\n")
    if status == EXIT_OK and args.strict and res.undecided:
        status = EXIT_INCOMPLETE
    return status


def _suite_cyclo(q_max: int) -> dict:
    checks = []
    for q in primes_up_to(q_max):
        if q < 3:
            continue
        hs = half_split(q)
        ident = not any(identity_residual(hs))
        rep = coefficient_bounds_check(hs, raise_on_violation=False)
        checks.append({"q": q, "identity": ident, "coefficient_bounds": rep["ok"], "b0": rep["b0"],
                       "worst_log_ratio_b": rep["worst_log_ratio_b"]})
    return {"name": "cyclo", "ok": all(c["identity"] and c["coefficient_bounds"] for c in checks),
            "failed": [c for c in checks if not (c["identity"] and c["coefficient_bounds"])],
            "checked": len(checks)}


def _suite_lemma41(p0e_max: int, q_max: int, p_max: int, workers: int) -> dict:
    bad, summ = lemma41_verify(p0e_max, q_max, p_max, workers)
    summ["name"] = "lemma41"
    summ["ok"] = not bad
    summ["witnesses"] = [w.as_dict() for w in bad[:50]]
    return summ


def _suite_prop1() -> dict:
    points = [(2, 2, [1, 1], 10**9), (2, 2, [1, 1], None), (3, 4, [1.5, 2, 3], None)]
    rows = []
    ok = True
    for m, k, hs, B in points:
        kwargs = {"B": B} if B is not None else {"log_B": 130 if m == 2 else 200}
        lo, rep = prop1_lower_bound(m, k, hs, **kwargs)
        lo2, _ = prop1_lower_bound(m, k, hs, prec=2 * DEFAULT_PREC, **kwargs)
        # a finer run may only tighten the enclosure
        refine = lo2.lower_log >= lo.lower_log and lo2.upper_log <= lo.upper_log
        bumped, _ = prop1_lower_bound(m, k, [hs[0] * 1.01] + hs[1:], **kwargs)
        mono = bumped.upper_log < lo.lower_log
        ok = ok and refine and mono
        rows.append({"m": m, "k": k, "h": hs, "log_bound": lo.as_dict(), "preconditions": rep.as_dict(),
                     "refines": refine, "monotone": mono})
    return {"name": "prop1", "ok": ok, "points": rows}


def _suite_bounds() -> dict:
    rows = grid_rows()
    return {"name": "bounds", "ok": all(r["dominated"] and r["evaluators_agree"] for r in rows),
            "rows": rows}


def _suite_fields(q_max: int) -> dict:
    bad = []
    n = 0
    for q in primes_up_to(q_max):
        if q < 3:
            continue
        n += 1
        try:
            field_invariants(q)
        except DataError as exc:
            bad.append({"q": q, "error": str(exc)})
    return {"name": "fields", "ok": not bad, "checked": n, "failed": bad}


def _suite_lpf(x_max: int) -> dict:
    out = {"name": "lpf", "ok": True, "scans": []}
    for q in (3, 5, 7):
        _, summ = lpf_scan(q, range(3, x_max + 1))
        out["scans"].append(summ)
        out["ok"] = out["ok"] and not summ["nonpositive"] and not summ["undecided"]
    return out


def cmd_verify(args, cache: FieldCache) -> int:
    small = args.small
    suites = []
    want = args.suite
    if want in ("cyclo", "all"):
        suites.append(_suite_cyclo(43 if small else args.q_max))
    if want in ("lemma41", "all"):
        p0e, qm, pm = (1000, 12, 30) if small else (args.p0e_max, args.lemma_q_max, args.p_max)
        suites.append(_suite_lemma41(p0e, qm, pm, args.workers))
    if want in ("prop1", "all"):
        suites.append(_suite_prop1())
    if want in ("bounds", "all"):
        suites.append(_suite_bounds())
    if want in ("fields", "all"):
        suites.append(_suite_fields(100 if small else 500))
    if want in ("lpf", "all"):
        suites.append(_suite_lpf(200 if small else args.x_max))
    _emit({"suites": suites, "ok": all(s["ok"] for s in suites),
           "results": {s["name"]: ("pass" if s["ok"] else "fail") for s in suites}})
    return EXIT_OK if all(s["ok"] for s in suites) else EXIT_MATH


# ---------------------------------------------------------------------------


def _int(s: str) -> int:
    """Integers, also written as 10**6 or 1e6."""
    s = s.strip().replace("_", "")
    try:
        if "**" in s:
            b, e = s.split("**")
            return int(b) ** int(e)
        if "e" in s.lower():
            m, e = s.lower().split("e")
            return int(m) * 10 ** int(e)
        return int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigmaeq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--cache", type=Path, default=None, help=f"field cache path (env {CACHE_ENV})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("field", help="class number, regulator and unit of Q(sqrt(+-q))")
    f.add_argument("--q", type=_int, required=True)
    f.set_defaults(func=cmd_field)

    b = sub.add_parser("bound", help="exponent bound U and related estimates")
    b.add_argument("--q", type=_int, required=True)
    b.add_argument("--A", type=_int, default=1)
    b.add_argument("--m", type=_int, nargs="+", required=True)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--worst-aprime", action="store_true", help="A' = A prod m_i^(h-1) (default)")
    g.add_argument("--with-decomposition", type=_int, metavar="X", default=None,
                   help="also report U with A' taken from the decomposition of solution x = X")
    b.add_argument("--precision", type=int, default=DEFAULT_PREC)
    b.add_argument("--allow-q-divisor", action="store_true")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("cyclo", help="f, g coefficients for q")
    c.add_argument("--q", type=_int, required=True)
    c.add_argument("--degree-cap", type=int, default=2000)
    c.set_defaults(func=cmd_cyclo)

    s = sub.add_parser("search", help="enumerate solutions")
    s.add_argument("equation", choices=["eq11", "eq14"])
    s.add_argument("--q", type=_int, required=True)
    s.add_argument("--A", type=_int, default=1)
    s.add_argument("--m", type=_int, nargs="+", required=True)
    s.add_argument("--x-min", type=_int, default=2)
    s.add_argument("--x-max", type=_int, required=True)
    s.add_argument("--trial-limit", type=_int, default=10**4)
    s.add_argument("--budget", type=_int, default=200_000)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--chunk", type=_int, default=0, help="x per work unit (0 = one per worker)")
    s.add_argument("--node-cap", type=_int, default=100_000,
                   help="exponent-search effort per x when the m_i share factors")
    s.add_argument("--out", default=None, help="JSONL output (summary and manifest alongside)")
    s.add_argument("--strict", action="store_true", help="exit 4 if any x stays undecided")
    s.add_argument("--allow-q-divisor", action="store_true")
    s.add_argument("--extension", action="store_true", help="allow A != 1 with eq14")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", choices=["cyclo", "lemma41", "prop1", "bounds", "fields", "lpf", "all"])
    v.add_argument("--small", action="store_true", help="bounded-time smoke scale")
    v.add_argument("--q-max", type=_int, default=199)
    v.add_argument("--p0e-max", type=_int, default=10**5)
    v.add_argument("--lemma-q-max", type=_int, default=50)
    v.add_argument("--p-max", type=_int, default=100)
    v.add_argument("--x-max", type=_int, default=10**4)
    v.add_argument("--workers", type=int, default=1)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    cache = FieldCache(args.cache)
    try:
        code = args.func(args, cache)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (InequalityViolation, InconsistencyError) as exc:
        sys.stderr.write(f"inconsistency: {exc}\n{json.dumps(exc.witness, default=str)}\n")
        return EXIT_MATH
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_MATH
    finally:
        cache.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
