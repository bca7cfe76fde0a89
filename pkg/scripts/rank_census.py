"""Rank histogram of all tensors of a small format over GF(p).

Every tensor is decided by the canonical search and, with --check, also by
the naive sumset enumerator.

Usage: python3 scripts/rank_census.py [--p 2] [--dims 2,2,2] [--check]
"""

from __future__ import annotations

import argparse
import collections
import itertools
import time

from rankred.fields import FieldSpec
from rankred.ranklab import tensor_rank, tensor_rank_leq_naive
from rankred.tensorize import Tensor


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--dims", default="2,2,2")
    ap.add_argument("--check", action="store_true", help="cross-check each rank with the naive enumerator")
    args = ap.parse_args(argv)
    F = FieldSpec.gf(args.p)
    dims = tuple(int(x) for x in args.dims.split(","))
    size = dims[0] * dims[1] * dims[2]
    t = time.perf_counter()
    hist = collections.Counter()
    mismatches = 0
    for entries in itertools.product(range(args.p), repeat=size):
        T = Tensor(dims, F, entries)
        r = tensor_rank(T)
        hist[r] += 1
        if args.check:
            mismatches += not tensor_rank_leq_naive(T, r) or (r > 0 and tensor_rank_leq_naive(T, r - 1))
    total = args.p**size
    print(f"{total} tensors of format {'x'.join(map(str, dims))} over {F.flag}")
    for r in sorted(hist):
        print(f"  rank {r}: {hist[r]}")
    if args.check:
        print(f"naive enumerator mismatches: {mismatches}")
    print(f"({time.perf_counter() - t:.1f}s)")


if __name__ == "__main__":
    main()
