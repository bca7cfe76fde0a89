"""Field separation on the example system u = x*y, y = x, u = 2 (so x^2 = 2).

Reports, for the matrix built as printed (A1 and A3 only) and for the strictly
normalized system (A1, A2 and A3):

* solvability and exhaustive minrank over GF(2), GF(3), GF(5) (and GF(7) on
  request, which takes minutes);
* the exact rank over Q at the integer point found over GF(5);
* 15-term expansions of the tensor over GF(7) and over Q(sqrt 2).

Usage: python3 scripts/field_separation.py [--with-gf7] [--strict-gf5] [--json]
"""

from __future__ import annotations

import argparse
import json
import time

from rankred.fields import FieldSpec, matrix_rank
from rankred.minrank import build_matrix, evaluate_matrix, minrank_bruteforce, propagate_copies
from rankred.syslang import STRUCTURAL, Equation, QuadraticSystem, normalize, solve_bruteforce
from rankred.tensorize import build_tensor, expansion_from_assignment, verify_expansion

E = Equation
SYSTEM = QuadraticSystem(("u", "x", "y"), (E.mul("u", "x", "y"), E.copy("y", "x"), E.const("u", 2)))


def minrank_row(A, s, F):
    t = time.perf_counter()
    res = minrank_bruteforce(A, F)
    return {
        "field": F.flag,
        "solvable": solve_bruteforce(s, F) is not None,
        "minrank": res.minrank,
        "floor": 2 * A.m,
        "witness": res.witness,
        "seconds": round(time.perf_counter() - t, 2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--with-gf7", action="store_true", help="also run the 7^9 exhaustive scan")
    ap.add_argument("--strict-gf5", action="store_true", help="also run the 5^12 scan on the strict system")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    printed = build_matrix(SYSTEM, STRUCTURAL)
    primes = (2, 3, 5, 7) if args.with_gf7 else (2, 3, 5)
    out = {"printed": [minrank_row(printed, SYSTEM, FieldSpec.gf(p)) for p in primes]}

    # the GF(5) witness consists of small integers; evaluate the same point over Q
    Q = FieldSpec.rationals()
    w5 = out["printed"][2]["witness"]
    out["rank_over_Q_at_gf5_witness"] = matrix_rank(evaluate_matrix(printed, w5, Q))
    B = build_tensor(printed, Q)
    out["expansion_over_Q_terms"] = len(expansion_from_assignment(printed, B, w5, Q))

    for F, sigma in (
        (FieldSpec.gf(7), {"u": 2, "x": 3, "y": 3}),
        (FieldSpec.qsqrt(2), {"u": 2, "x": FieldSpec.qsqrt(2).sqrt_d(), "y": FieldSpec.qsqrt(2).sqrt_d()}),
    ):
        B = build_tensor(printed, F)
        Ex = expansion_from_assignment(printed, B, propagate_copies(printed, sigma), F)
        out[f"expansion_{F.flag}"] = {"terms": len(Ex), "verified": verify_expansion(B.tensor, Ex), "target": B.rank_target}

    strict = normalize(SYSTEM)
    S = build_matrix(strict)
    out["strict_system"] = [str(e) for e in strict.equations]
    out["strict"] = [minrank_row(S, strict, FieldSpec.gf(p)) for p in ((2, 3, 5) if args.strict_gf5 else (2, 3))]

    if args.json:
        print(json.dumps(out, indent=2, default=str))
        return
    for name in ("printed", "strict"):
        print(f"{name} matrix:")
        for r in out[name]:
            print(
                f"  {r['field']:>4}: solvable={r['solvable']!s:5} minrank={r['minrank']} "
                f"(2m={r['floor']}) [{r['seconds']}s]"
            )
    print(f"strict system: {'; '.join(out['strict_system'])}")
    print(f"rank over Q at the GF(5) witness {w5}: {out['rank_over_Q_at_gf5_witness']}")
    print(f"expansion over Q from that point: {out['expansion_over_Q_terms']} terms")
    for key in ("expansion_gf7", "expansion_qsqrt2"):
        print(f"{key}: {out[key]}")


if __name__ == "__main__":
    main()
