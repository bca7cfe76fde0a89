"""Sweep the minrank = 2m iff solvable equivalence on random small systems.

Two populations are compared:

* strict systems satisfying A1, A2 and A3 (the equivalence should hold always);
* systems that satisfy A1 and A3 but break A2 (two equations sharing two
  variables), where the equivalence can fail in the direction "minrank = 2m
  but unsolvable".

Usage: python3 scripts/lemma_sweep.py [--count N] [--seed S] [--fields 2,3,5]
"""

from __future__ import annotations

import argparse
import json
import random
import time

from rankred.fields import FieldSpec
from rankred.generators import SystemConfig, random_normalized_system
from rankred.minrank import build_matrix, minrank_bruteforce
from rankred.syslang import STRUCTURAL, Equation, QuadraticSystem, check_assumptions, solve_bruteforce


def a2_violating_system(rng: random.Random, cfg: SystemConfig) -> QuadraticSystem:
    """Rejection-sample a system with only A2 violations."""
    pool = [f"x{i}" for i in range(cfg.max_vars)]
    while True:
        c, a, b = rng.sample(pool, 3)
        base = [Equation.mul(c, a, b), Equation.copy(b, a)]
        for _ in range(rng.randint(0, cfg.max_m - 2)):
            kind = rng.choice(("ADD", "CONST", "COPY"))
            if kind == "CONST":
                base.append(Equation.const(rng.choice(pool), rng.randint(0, cfg.max_const)))
            elif kind == "COPY":
                x, y = rng.sample(pool, 2)
                base.append(Equation.copy(x, y))
            else:
                base.append(Equation.add(*rng.sample(pool, 3)))
        rng.shuffle(base)
        used = {v for e in base for v in e.slots()}
        s = QuadraticSystem(tuple(v for v in pool if v in used), tuple(base))
        if check_assumptions(s, STRUCTURAL) or not check_assumptions(s):
            continue
        if build_matrix(s, STRUCTURAL).n > cfg.max_matrix_vars:
            continue
        return s


def sweep(systems, fields, require):
    rows = {"agree": 0, "total": 0, "low_rank_unsolvable": [], "below_floor": 0}
    for s in systems:
        A = build_matrix(s, require)
        for F in fields:
            mr = minrank_bruteforce(A, F).minrank
            solvable = solve_bruteforce(s, F) is not None
            rows["total"] += 1
            rows["below_floor"] += mr < 2 * A.m
            if solvable == (mr == 2 * A.m):
                rows["agree"] += 1
            elif not solvable:
                rows["low_rank_unsolvable"].append({"field": F.flag, "system": "; ".join(str(e) for e in s.equations)})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--fields", default="2,3,5")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    fields = [FieldSpec.gf(int(p)) for p in args.fields.split(",")]
    cfg = SystemConfig()
    rng = random.Random(args.seed)
    t = time.perf_counter()
    strict = [random_normalized_system(rng, cfg) for _ in range(args.count)]
    loose = [a2_violating_system(rng, cfg) for _ in range(args.count)]
    result = {
        "strict": sweep(strict, fields, ("A1", "A2", "A3")),
        "a2_violating": sweep(loose, fields, STRUCTURAL),
        "seconds": round(time.perf_counter() - t, 2),
    }
    if args.json:
        print(json.dumps(result, indent=2))
        return
    for name in ("strict", "a2_violating"):
        r = result[name]
        print(
            f"{name:>13}: {r['agree']}/{r['total']} agree, "
            f"{len(r['low_rank_unsolvable'])} reach rank 2m while unsolvable, {r['below_floor']} below 2m"
        )
        for ex in r["low_rank_unsolvable"][:5]:
            print(f"               {ex['field']}: {ex['system']}")
    print(f"({result['seconds']}s)")


if __name__ == "__main__":
    main()
