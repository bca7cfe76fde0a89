"""Command-line driver: ``python -m rankred <command> ...``.

Exit codes: 0 success or yes, 1 the checked property fails (no / empty /
unverified), 2 usage error, 3 budget exceeded, 4 malformed input.

Frontal-slice indices on the command line and in files are 0-based.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any

from .errors import AssumptionError, BudgetExceeded, FieldError, MalformedInput, ParseError
from .fields import FieldSpec, matrix_rank
from .minrank import (
    SymbolicMatrix,
    build_matrix,
    evaluate_matrix,
    minrank_bruteforce,
    minrank_witness_search,
    propagate_copies,
    verify_observation,
)
from .ranklab import (
    DEFAULT_NODE_BUDGET,
    SliceFamily,
    absorb_slices,
    eig0,
    realization_space,
    tensor_rank_leq,
    witness_family,
)
from .syslang import ASSUMPTIONS, DEFAULT_BUDGET, STRUCTURAL, QuadraticSystem, normalize, parse_source, quadratize, solve_bruteforce
from .tensorize import Expansion, build_tensor, expansion_from_assignment, read_tensor, verify_expansion

OK, REFUTED, USAGE, BUDGET, MALFORMED = 0, 1, 2, 3, 4
EMITS = ("system", "matrix", "tensor", "bundle", "expansion", "slices")
DEFAULT_EMITS = ("system", "matrix", "tensor", "bundle")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# reports and files
# ---------------------------------------------------------------------------


@dataclass
class Report:
    command: str
    data: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"command": self.command, **self.data}
        if self.stages:
            out["stages"] = self.stages
        return out

    def text(self) -> str:
        lines = []
        for st in self.stages:
            parts = [f"{k}={_fmt(v)}" for k, v in st.items() if k not in ("stage", "seconds")]
            lines.append(f"[{st['stage']}] " + " ".join(parts) + f" ({st['seconds']:.3f}s)")
        for k, v in self.data.items():
            lines.append(f"{k}: {_fmt(v)}")
        return "\n".join(lines)


def _fmt(v: Any) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def dump_json(obj: Any, path: str) -> None:
    """Deterministic serialization: sorted keys, compact separators, trailing newline."""
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: not JSON ({exc})") from exc


def _field_arg(flag: str | None) -> FieldSpec | None:
    if flag is None:
        return None
    try:
        return FieldSpec.parse(flag)
    except FieldError as exc:
        raise UsageError(str(exc)) from exc


def _resolve_field(flag: str | None, recorded: FieldSpec | None, what: str) -> FieldSpec:
    """Concrete artifacts must match the requested field exactly."""
    F = _field_arg(flag)
    if recorded is None and F is None:
        raise UsageError(f"{what} records no field; pass --field")
    if F is not None and recorded is not None and F != recorded:
        raise UsageError(f"{what} is over {recorded}, but --field asks for {F}")
    return F or recorded


def matrix_document(A: SymbolicMatrix, s: QuadraticSystem, F: FieldSpec, require) -> dict:
    return {**A.to_json(), "field": F.to_json(), "assumptions": list(require), "system": s.to_json()}


def load_matrix(path: str) -> tuple[SymbolicMatrix, QuadraticSystem | None, FieldSpec | None]:
    """Load a symbolic matrix; if it embeds its system, rebuild and compare."""
    obj = load_json(path)
    A = SymbolicMatrix.from_json(obj)
    F = FieldSpec.from_json(obj["field"]) if isinstance(obj, dict) and "field" in obj else None
    s = None
    if isinstance(obj, dict) and "system" in obj:
        s = QuadraticSystem.from_json(obj["system"])
        require = tuple(obj.get("assumptions", ASSUMPTIONS))
        try:
            rebuilt = build_matrix(s, require)
        except AssumptionError as exc:
            raise MalformedInput(f"{path}: embedded system is invalid: {exc}") from exc
        if rebuilt.to_json() != SymbolicMatrix.to_json(A):
            raise MalformedInput(f"{path}: matrix does not match its embedded system")
    return A, s, F


def load_system(path: str) -> tuple[QuadraticSystem, FieldSpec | None]:
    obj = load_json(path)
    s = QuadraticSystem.from_json(obj)
    F = FieldSpec.from_json(obj["field"]) if "field" in obj else None
    return s, F


def load_tensor(path: str, flag: str | None):
    try:
        T = read_tensor(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    _resolve_field(flag, T.field, path)
    return T


def load_expansion(path: str, F: FieldSpec) -> Expansion:
    E = Expansion.from_json(load_json(path))
    if E.field != F:
        raise UsageError(f"{path} is over {E.field}, but the tensor is over {F}")
    return E


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _stage(report: Report, name: str, t0: float, **info) -> float:
    now = time.perf_counter()
    report.stages.append({"stage": name, "status": "ok", **info, "seconds": round(now - t0, 6)})
    return now


def cmd_compile(args) -> tuple[int, Report]:
    F = _field_arg(args.field) or FieldSpec.rationals()
    emits = _parse_emits(args.emit)
    require = ASSUMPTIONS if args.normalize == "full" else STRUCTURAL
    try:
        with open(args.source, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.source}: {exc.strerror}") from exc
    report = Report("compile", {"field": F.flag, "normalize": args.normalize})
    t = time.perf_counter()
    formula = parse_source(text)
    t = _stage(report, "parse", t, equations=len(formula.equations), variables=len(formula.variables))
    q = quadratize(formula)
    t = _stage(report, "quadratize", t, m=q.m, variables=len(q.variables))
    s = normalize(q, fix_a2=args.normalize == "full")
    introduced = list(s.variables[len(q.variables):])
    t = _stage(report, "normalize", t, m=s.m, variables=len(s.variables), introduced=introduced)
    A = build_matrix(s, require)
    obs = verify_observation(A)
    t = _stage(report, "build-matrix", t, m=A.m, n=A.n, dims=[A.dim, A.dim], observation=list(obs))
    B = build_tensor(A, F)
    t = _stage(
        report, "build-tensor", t, m=B.m, n=B.n, dims=list(B.tensor.dims), rank_target=B.rank_target,
    )

    os.makedirs(args.out, exist_ok=True)
    paths = {}

    def write(kind: str, obj: Any):
        path = os.path.join(args.out, f"{kind}.json")
        dump_json(obj, path)
        paths[kind] = path

    if "system" in emits:
        write("system", {**s.to_json(), "field": F.to_json(), "assumptions": list(require)})
    if "matrix" in emits:
        write("matrix", matrix_document(A, s, F, require))
    if "tensor" in emits:
        write("tensor", B.tensor.to_json())
    if "bundle" in emits:
        write("bundle", B.metadata())
    if {"expansion", "slices"} & set(emits):
        if not F.is_prime_field:
            raise UsageError("expansion/slices need a witness; brute force needs --field gf<p>")
        sol = solve_bruteforce(s, F, budget=args.budget)
        if sol is None:
            report.data["witness"] = None
        else:
            sigma = propagate_copies(A, sol)
            report.data["witness"] = {v: F.encode(F.elem(x)) for v, x in sigma.items()}
            E = expansion_from_assignment(A, B, sigma, F)
            if "expansion" in emits:
                write("expansion", E.to_json())
            if "slices" in emits:
                write("slices", witness_family(A, B, sigma, F).to_json())
        t = _stage(report, "witness", t, solvable=sol is not None)
    report.data["rank_target"] = B.rank_target
    report.data["artifacts"] = paths
    ok = all(obs)
    return (OK if ok else REFUTED), report


def _parse_emits(spec: str) -> tuple[str, ...]:
    emits = tuple(x.strip() for x in spec.split(",") if x.strip())
    bad = [x for x in emits if x not in EMITS]
    if bad:
        raise UsageError(f"unknown --emit value(s) {bad}; choose from {', '.join(EMITS)}")
    return emits


def cmd_minrank(args) -> tuple[int, Report]:
    A, s, recorded = load_matrix(args.matrix)
    F = _field_arg(args.field) or recorded
    if F is None:
        raise UsageError("matrix records no field; pass --field")
    if not F.is_prime_field:
        raise UsageError("minrank search needs --field gf<p>")
    report = Report("minrank", {"field": F.flag, "mode": args.mode, "m": A.m, "n": A.n, "floor": 2 * A.m})
    if recorded is not None and recorded != F:
        report.data["compiled_for"] = recorded.flag
    t = time.perf_counter()
    if args.mode == "full":
        res = minrank_bruteforce(A, F, budget=args.budget, workers=args.workers)
        report.data.update(
            minrank=res.minrank,
            witness=res.witness,
            assignments_checked=res.assignments_checked,
            attains_floor=res.minrank == 2 * A.m,
        )
        code = OK
    else:
        if args.system:
            s, _ = load_system(args.system)
        if s is None:
            raise UsageError("witness mode needs the system (embedded in the matrix file or --system)")
        w = minrank_witness_search(A, s, F, budget=args.budget)
        report.data["witness"] = None if w is None else {v: F.encode(x) for v, x in w.items()}
        report.data["rank"] = None if w is None else matrix_rank(evaluate_matrix(A, w, F))
        report.data["rank_is_2m"] = w is not None
        code = OK if w is not None else REFUTED
    report.data["seconds"] = round(time.perf_counter() - t, 6)
    return code, report


def cmd_rank(args) -> tuple[int, Report]:
    T = load_tensor(args.tensor, args.field)
    t = time.perf_counter()
    d = tensor_rank_leq(T, args.leq, budget=args.budget, workers=args.workers)
    path = None
    if d.verdict:
        path = args.out or os.path.splitext(args.tensor)[0] + f".rank{args.leq}.expansion.json"
        dump_json(d.certificate.to_json(), path)
    report = Report("rank", {"field": T.field.flag, "dims": list(T.dims), **d.to_json(path)})
    report.data["seconds"] = round(time.perf_counter() - t, 6)
    return (OK if d.verdict else REFUTED), report


def cmd_certify(args) -> tuple[int, Report]:
    T = load_tensor(args.tensor, args.field)
    E = load_expansion(args.expansion, T.field)
    try:
        ok = verify_expansion(T, E)
    except ValueError as exc:
        raise MalformedInput(str(exc)) from exc
    report = Report(
        "certify",
        {
            "field": T.field.flag,
            "dims": list(T.dims),
            "terms": len(E),
            "verified": ok,
            "digest_match": E.target_digest == T.digest() if E.target_digest else None,
        },
    )
    return (OK if ok else REFUTED), report


def cmd_realize(args) -> tuple[int, Report]:
    T = load_tensor(args.tensor, args.field)
    S = SliceFamily.from_json(load_json(args.slices))
    if S.field != T.field:
        raise UsageError(f"{args.slices} is over {S.field}, but the tensor is over {T.field}")
    r = args.r if args.r is not None else len(S)
    if r != len(S):
        raise UsageError(f"-r {r} but the family has {len(S)} members")
    try:
        R = realization_space(T, S, r)
    except ValueError as exc:
        raise MalformedInput(str(exc)) from exc
    F = T.field
    data = {"field": F.flag, "r": r, "unknowns": r * T.dims[2], "status": R.space.status}
    if R.nonempty:
        data["dimension"] = R.space.dimension
        data["particular"] = [[F.encode(x) for x in w] for w in R.split(R.space.particular)]
        if args.out:
            dump_json(
                {
                    "field": F.to_json(),
                    "r": r,
                    "d3": T.dims[2],
                    "particular": [F.encode(x) for x in R.space.particular],
                    "basis": [[F.encode(x) for x in b] for b in R.space.basis],
                },
                args.out,
            )
            data["solution_path"] = args.out
    return (OK if R.nonempty else REFUTED), Report("realize", data)


def cmd_eig0(args) -> tuple[int, Report]:
    T = load_tensor(args.tensor, args.field)
    try:
        res = eig0(T, budget=args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return (OK if res.verdict else REFUTED), Report("eig0", {"field": T.field.flag, **res.to_json()})


def cmd_absorb(args) -> tuple[int, Report]:
    T = load_tensor(args.tensor, args.field)
    E = load_expansion(args.expansion, T.field)
    try:
        H = [int(x) for x in args.slices.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --slices {args.slices!r}") from exc
    if any(not 0 <= h < T.dims[2] for h in H):
        raise UsageError(f"slice indices must lie in 0..{T.dims[2] - 1}")
    if not verify_expansion(T, E):
        return REFUTED, Report("absorb", {"verified": False, "error": "input expansion does not sum to the tensor"})
    try:
        out = absorb_slices(T, E, H)
    except ValueError as exc:
        return REFUTED, Report("absorb", {"verified": True, "error": str(exc)})
    path = args.out or os.path.splitext(args.expansion)[0] + ".absorbed.json"
    dump_json(out.to_json(), path)
    return OK, Report("absorb", {"field": T.field.flag, "pinned": H, "terms": len(out), "expansion": path})


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rankred", description="Reduction compiler and exact rank laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, field_help="gf<p>, q or qsqrt<d>"):
        p.add_argument("--field", help=field_help)
        p.add_argument("--json", action="store_true", help="print the report as JSON")
        return p

    p = common(sub.add_parser("compile", help="source -> system, matrix, tensor"), "field for tensor entries (default q)")
    p.add_argument("source")
    p.add_argument("--out", default="out")
    p.add_argument("--emit", default=",".join(DEFAULT_EMITS), help=f"comma list from {', '.join(EMITS)}")
    p.add_argument(
        "--normalize", choices=("full", "structural"), default="full",
        help="full enforces A1-A3; structural enforces A1 and A3 only",
    )
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="brute-force budget for witnesses")
    p.set_defaults(func=cmd_compile)

    p = common(sub.add_parser("minrank", help="minimum rank of a symbolic matrix over GF(p)"))
    p.add_argument("matrix")
    p.add_argument("--mode", choices=("full", "witness"), default="full")
    p.add_argument("--system", help="system file for witness mode")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_minrank)

    p = common(sub.add_parser("rank", help="decide tensor rank <= r over GF(p)"))
    p.add_argument("tensor")
    p.add_argument("--leq", type=int, required=True)
    p.add_argument("--out", help="certificate path")
    p.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET, help="search-node cap")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_rank)

    p = common(sub.add_parser("certify", help="check that an expansion sums to a tensor"))
    p.add_argument("tensor")
    p.add_argument("expansion")
    p.set_defaults(func=cmd_certify)

    p = common(sub.add_parser("realize", help="realization space of a slice family"))
    p.add_argument("tensor")
    p.add_argument("slices")
    p.add_argument("-r", type=int)
    p.add_argument("--out", help="write the solution space as JSON")
    p.set_defaults(func=cmd_realize)

    p = common(sub.add_parser("eig0", help="does a cubical tensor have eigenvalue 0"))
    p.add_argument("tensor")
    p.add_argument("--budget", type=int, default=1 << 26)
    p.set_defaults(func=cmd_eig0)

    p = common(sub.add_parser("absorb", help="pin rank-one frontal slices as leading terms"))
    p.add_argument("tensor")
    p.add_argument("expansion")
    p.add_argument("--slices", required=True, help="comma list of 0-based frontal indices")
    p.add_argument("--out")
    p.set_defaults(func=cmd_absorb)
    return ap


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers: list[tuple[type, int]] = [
        (UsageError, USAGE),
        (BudgetExceeded, BUDGET),
        (ParseError, MALFORMED),
        (MalformedInput, MALFORMED),
        (AssumptionError, MALFORMED),
    ]
    try:
        code, report = args.func(args)
    except tuple(h for h, _ in handlers) as exc:
        code = next(c for h, c in handlers if isinstance(exc, h))
        if args.json:
            print(json.dumps({"command": args.command, "error": str(exc), "exit": code}, sort_keys=True), file=out)
        else:
            print(f"error: {exc}", file=err)
        return code
    if args.json:
        print(json.dumps(report.to_json(), sort_keys=True, indent=2), file=out)
    else:
        print(report.text(), file=out)
    return code


if __name__ == "__main__":
    sys.exit(main())
