# src/ppcfkit/cli.py
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .ast import Label, Term, TyCtx, labels
from .config import RunConfig, build_config, read_config_file
from .contexts import builtin_contexts, load_contexts
from .errors import PpcfError, PreconditionError
from .explore import enumerate as enumerate_tapes
from .explore import expect_label_operational, summarize
from .log import note, set_verbose, warn
from .machine import AcceptZero, OutOfFuel, Reject, RunOutcome, State, format_tape, run_lc, run_lc_shuffle, run_tape
from .metrics import tamed_distance_estimate
from .parse import format_rat, parse, parse_multitape, parse_rat, parse_tape, parse_type, pretty, pretty_type
from .relational import SearchBounds, clique_check, format_judgment, infer_points, support_match
from .reports import (
    DISTANCE_HEADER, ENUM_HEADER, SWEEP_HEADER, distance_rows, enum_rows, format_cell, sweep_rows, write_csv,
)
from .sampling import estimate_prob
from .scalar import EXACT, FLOAT, primal
from .semantics import Expectation, Finite, expect_label_semantic, prob_zero
from .transform import lcof, mark_all, spy, strip, tamed
from .typecheck import typecheck

__all__ = ["main", "build_parser"]

_DOMAIN_ERROR = 1
_IO_ERROR = 2


@dataclass
class Output:
    """What a command produced: text for humans, data for --json, an optional table."""
    lines: List[str] = field(default_factory=list)
    data: Dict[str, Any] = field(default_factory=dict)
    header: Optional[Sequence[str]] = None
    rows: Optional[List[tuple]] = None


# ---------- helpers ----------

def _read(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return p.read_text(encoding="utf-8")


def _load(path: str) -> Term:
    return parse(_read(path))


def _sole_label(term: Term, given: Optional[str]) -> Label:
    if given:
        return Label(given)
    ls = sorted(labels(term))
    if not ls:
        raise PreconditionError("term has no labels; the expected count would be 0/0")
    if len(ls) > 1:
        raise PreconditionError(f"several labels ({', '.join(l.name for l in ls)}); pick one with --label")
    return ls[0]


def format_outcome(out: RunOutcome) -> str:
    if isinstance(out, AcceptZero):
        return f"accept {out.weight.numerator}/{out.weight.denominator} {out.labels}"
    if isinstance(out, Reject):
        return f"reject {out.reason}"
    assert isinstance(out, OutOfFuel)
    return f"out-of-fuel {out.steps}"


def _outcome_data(out: RunOutcome) -> Dict[str, Any]:
    if isinstance(out, AcceptZero):
        return {
            "outcome": "accept", "weight": format_cell(out.weight),
            "labels": {l.name: c for l, c in out.labels.items}, "steps": out.steps,
        }
    if isinstance(out, Reject):
        return {"outcome": "reject", "reason": out.reason, "steps": out.steps}
    return {"outcome": "out-of-fuel", "steps": out.steps}


def _expectation_value(e: Expectation) -> float:
    if isinstance(e, Finite):
        return e.value
    return math.inf if e.infinite else math.nan


def parse_grid(spec: str) -> List[Fraction]:
    """start:stop:step, stop included when the grid hits it."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise PreconditionError(f"grid must be start:stop:step, got {spec!r}")
    start, stop, step = (parse_rat(p) for p in parts)
    if step <= 0:
        raise PreconditionError("grid step must be > 0")
    out: List[Fraction] = []
    q = start
    while q <= stop:
        out.append(q)
        q += step
    return out


def _parse_rates(text: str) -> Dict[Label, Fraction]:
    out: Dict[Label, Fraction] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise PreconditionError(f"rate must be label=probability, got {item!r}")
        out[Label(name.strip())] = parse_rat(value.strip())
    return out


# ---------- commands ----------

def cmd_check(args, cfg: RunConfig) -> Output:
    ty = typecheck(TyCtx(), _load(args.file))
    return Output([pretty_type(ty)], {"type": pretty_type(ty)})


def cmd_run(args, cfg: RunConfig) -> Output:
    term = _load(args.file)
    tape = parse_tape(args.tape)
    state = State.initial(term)
    if args.label_tapes is not None:
        mtapes = parse_multitape(args.label_tapes)
        if args.shuffle:
            merged = run_lc_shuffle(state, tape, mtapes, cfg.fuel)
            text = "none" if merged is None else format_tape(merged)
            return Output([text], {"shuffle": None if merged is None else text})
        out = run_lc(state, tape, mtapes, cfg.fuel)
    else:
        out = run_tape(state, tape, cfg.fuel)
    return Output([format_outcome(out)], _outcome_data(out))


def cmd_sample(args, cfg: RunConfig) -> Output:
    term = strip(_load(args.file))
    est, err, timeouts = estimate_prob(term, cfg.samples, cfg.seed, cfg.fuel)
    line = f"estimate {format_cell(est)} stderr {format_cell(err)} timeouts {format_cell(timeouts)}"
    return Output([line], {"estimate": est, "stderr": err, "timeout_fraction": timeouts, "samples": cfg.samples})


def cmd_enum(args, cfg: RunConfig) -> Output:
    term = _load(args.file)
    if args.summaries:
        res = summarize(term, rounds=args.rounds, segment_fuel=cfg.fuel)
    else:
        res = enumerate_tapes(State.initial(term), cfg.fuel, cfg.max_tape)
    note(f"accept {res.accept_total} reject {res.reject_total} residual {res.residual}")
    rows = enum_rows(res)
    data = {
        "accept": format_cell(res.accept_total), "reject": format_cell(res.reject_total),
        "residual": format_cell(res.residual),
        "table": [{"labels": mu, "mass": f"{n}/{d}"} for mu, n, d in rows[:-2]],
    }
    return Output([], data, ENUM_HEADER, rows)


def cmd_prob(args, cfg: RunConfig) -> Output:
    term = strip(_load(args.file))
    params = cfg.sem_params(EXACT if args.exact else FLOAT)
    p = prob_zero(term, params)
    return Output([format_cell(p)], {"prob_zero": format_cell(p)})


def cmd_expect(args, cfg: RunConfig) -> Output:
    term = _load(args.file)
    l = _sole_label(term, args.label)
    out = Output()
    op_value = sem_value = None
    if args.mode in ("op", "both"):
        lower, acc, residual = expect_label_operational(
            term, l, fuel=cfg.fuel, max_tape=cfg.max_tape, strategy=args.strategy, rounds=args.rounds,
        )
        op_value = float(lower / acc) if acc else math.nan
        out.lines.append(
            f"operational lower {format_cell(float(lower))} accept {format_cell(float(acc))} "
            f"residual {format_cell(float(residual))} expectation {format_cell(op_value)}"
        )
        out.data["operational"] = {
            "lower": float(lower), "accept": float(acc), "residual": float(residual), "expectation": op_value,
        }
    if args.mode in ("sem", "both"):
        e = expect_label_semantic(term, l, cfg.sem_params())
        if isinstance(e, Finite):
            sem_value = e.value
            out.lines.append(f"semantic {format_cell(e.value)}")
            out.data["semantic"] = e.value
        else:
            out.lines.append(f"semantic diverged ({e.reason})")
            out.data["semantic"] = {"diverged": e.reason}
    if op_value is not None and sem_value is not None and not math.isnan(op_value):
        gap = abs(op_value - sem_value)
        out.lines.append(f"gap {format_cell(gap)}")
        out.data["gap"] = gap
    return out


def cmd_sweep(args, cfg: RunConfig) -> Output:
    template = _read(args.file)
    placeholder = "{" + args.param + "}"
    if placeholder not in template:
        raise PreconditionError(f"template has no {placeholder} placeholder")
    params = cfg.sem_params()
    rows = []
    for q in parse_grid(args.grid):
        term = parse(template.replace(placeholder, format_rat(q)))
        l = _sole_label(term, args.label)
        p = primal(prob_zero(strip(term), params))
        e = _expectation_value(expect_label_semantic(term, l, params))
        note(f"{args.param}={format_rat(q)}: prob {p:.12g} expectation {e}")
        rows.append((float(q), p, e))
    data = {"rows": [{args.param: q, "prob_zero": p, "expectation": e} for q, p, e in rows]}
    header = (args.param,) + SWEEP_HEADER[1:]
    return Output([], data, header, sweep_rows(rows))


def cmd_dist(args, cfg: RunConfig) -> Output:
    m1, m2 = strip(_load(args.file1)), strip(_load(args.file2))
    contexts = builtin_contexts()
    if args.contexts:
        contexts += load_contexts(Path(args.contexts))
    rep = tamed_distance_estimate(m1, m2, parse_rat(args.p), contexts, cfg.sem_params())
    summary = (
        f"distance {format_cell(rep.distance)} bound {format_cell(rep.bound)} "
        f"empirical {format_cell(rep.empirical)} holds {'yes' if rep.holds else 'no'}"
    )
    if not rep.holds:
        warn(f"⚠ empirical gap {rep.empirical:.12g} exceeds the bound {rep.bound:.12g}")
    data = {
        "p": format_cell(rep.p), "distance": rep.distance, "bound": rep.bound,
        "empirical": rep.empirical, "holds": rep.holds,
        "rows": [dict(zip(DISTANCE_HEADER, r)) for r in distance_rows(rep)],
    }
    return Output([summary], data, DISTANCE_HEADER, distance_rows(rep))


def cmd_rel(args, cfg: RunConfig) -> Output:
    term = _load(args.file)
    bounds = SearchBounds(
        max_multiset_size=args.max_multiset, max_numeral=args.max_numeral, max_depth=args.max_depth,
    )
    if args.clique:
        rep = clique_check(term, bounds, cfg.fuel)
        lines = [format_judgment(j) for j in rep.judgments]
        lines.append(f"clique size {rep.size}")
        lines.append(f"machine {'agrees' if rep.matches else 'disagrees'}")
        data = {"judgments": lines[:-2], "size": rep.size, "matches": rep.matches, "truncated": rep.truncated}
        return Output(lines, data)
    if args.support:
        sup = support_match(term, bounds, cfg.fuel, cfg.max_tape)
        rel_s = " ".join(str(n) for n in sorted(sup.relational))
        op_s = " ".join(str(n) for n in sorted(sup.operational))
        verdict = ("matches" if sup.ok else "differs") if sup.conclusive else "inconclusive"
        lines = [f"relational {{{rel_s}}}", f"machine {{{op_s}}}", f"support {verdict}"]
        if sup.truncated:
            lines.insert(0, "search truncated")
        data = {
            "relational": sorted(sup.relational), "machine": sorted(sup.operational),
            "matches": sup.ok, "complete": sup.complete, "truncated": sup.truncated,
        }
        return Output(lines, data)
    ty = typecheck(TyCtx(), term)
    res = infer_points(TyCtx(), term, ty, bounds)
    lines = [format_judgment(j) for j in res.judgments]
    if res.truncated:
        lines.append("search truncated")
    return Output(lines, {"judgments": [format_judgment(j) for j in res.judgments], "truncated": res.truncated})


def cmd_transform(args, cfg: RunConfig) -> Output:
    term = _load(args.file)
    op = args.op
    if op == "strip":
        out = strip(term)
    elif op == "mark-all":
        out = mark_all(term, Label(args.label or "l"))
    elif op == "lcof":
        out = lcof(term, _parse_rates(args.rates or ""))
    elif op == "spy":
        out = spy(term)
    elif op == "tamed":
        if args.p is None:
            raise PreconditionError("tamed needs -p")
        out = tamed(term, parse_rat(args.p), parse_type(args.sigma))
    else:
        raise PreconditionError(f"unknown transform {op!r}")
    text = pretty(out)
    return Output([text], {"term": text})


# ---------- argument parsing ----------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("limits and numerics")
    g.add_argument("--fuel", type=int, default=None, help="Machine transition budget (default 10000)")
    g.add_argument("--max-tape", type=int, default=None, help="Longest tape explored by enumeration (default 64)")
    g.add_argument("--trunc", type=int, default=None, help="Truncation K: numerals 0..K-1 are represented (default 64)")
    g.add_argument("--fix-tol", type=float, default=None, help="Fixpoint tolerance (default 1e-12)")
    g.add_argument("--fix-iters", type=int, default=None, help="Fixpoint sweep limit (default 100000)")
    g.add_argument("--tangent-tol", type=float, default=None, help="Tangent tolerance (default 1e-9)")
    g.add_argument("--seed", type=int, default=None, help="Sampler seed (default 0)")
    g.add_argument("--samples", type=int, default=None, help="Number of samples (default 10000)")
    o = p.add_argument_group("output")
    o.add_argument("--json", action="store_true", help="Print machine-readable JSON")
    o.add_argument("--out", default=None, help="Write the CSV table to this file")
    o.add_argument("--config", default=None, help="key = value file with defaults for the options above")
    o.add_argument("-v", "--verbose", action="store_true", help="Progress notes on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppcfkit",
        description="Run, enumerate and analyse probabilistic PCF programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, fn: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=fn)
        _common(p)
        return p

    p = command("check", cmd_check, "Parse and typecheck a program")
    p.add_argument("file", help="Program file")

    p = command("run", cmd_run, "Run the machine on one tape")
    p.add_argument("file", help="Program file")
    p.add_argument("--tape", default="", help="Coin bits, e.g. 0110 (default empty)")
    p.add_argument("--label-tapes", default=None, help="Label tapes for labeled coins, e.g. l:01,m:")
    p.add_argument("--shuffle", action="store_true", help="Print the merged tape instead of the outcome")

    p = command("sample", cmd_sample, "Monte Carlo estimate of the probability of 0")
    p.add_argument("file", help="Program file")

    p = command("enum", cmd_enum, "Exact outcome masses as CSV")
    p.add_argument("file", help="Program file")
    p.add_argument("--summaries", action="store_true", help="Use call summaries instead of tape paths")
    p.add_argument("--rounds", type=int, default=200, help="Summary rounds (default 200)")

    p = command("prob", cmd_prob, "Probability of 0 from the denotation")
    p.add_argument("file", help="Program file")
    p.add_argument("--exact", action="store_true", help="Exact rational arithmetic")

    p = command("expect", cmd_expect, "Expected uses of a label given convergence")
    p.add_argument("file", help="Labeled program file")
    p.add_argument("--label", default=None, help="Label (default: the only label of the program)")
    p.add_argument("--mode", choices=("op", "sem", "both"), default="both", help="Route (default both)")
    p.add_argument("--strategy", choices=("paths", "summaries"), default="summaries",
                   help="Operational enumeration strategy (default summaries)")
    p.add_argument("--rounds", type=int, default=200, help="Summary rounds (default 200)")

    p = command("sweep", cmd_sweep, "Probability and expectation over a parameter grid, as CSV")
    p.add_argument("file", help="Template program with a {q} placeholder")
    p.add_argument("--param", default="q", help="Placeholder name (default q)")
    p.add_argument("--grid", default="0:1:1/20", help="start:stop:step (default 0:1:1/20)")
    p.add_argument("--label", default=None, help="Label (default: the only label of the program)")

    p = command("dist", cmd_dist, "Tamed observational distance against its denotational bound")
    p.add_argument("file1", help="First nat program")
    p.add_argument("file2", help="Second nat program")
    p.add_argument("-p", required=True, help="Taming probability in [0,1), e.g. 1/2")
    p.add_argument("--contexts", default=None, help="Directory of extra *.ppcf contexts of type nat -> nat")

    p = command("rel", cmd_rel, "Relational points as typing judgments")
    p.add_argument("file", help="Program file")
    p.add_argument("--clique", action="store_true", help="Spy a deterministic labeled program and count its points")
    p.add_argument("--support", action="store_true", help="Compare derivable numerals with the machine's support")
    p.add_argument("--max-multiset", type=int, default=3, help="Largest multiset in a point (default 3)")
    p.add_argument("--max-numeral", type=int, default=6, help="Largest numeral (default 6)")
    p.add_argument("--max-depth", type=int, default=8, help="Fixpoint rounds (default 8)")

    p = command("transform", cmd_transform, "Source-to-source translations")
    p.add_argument("file", help="Program file")
    p.add_argument("--op", required=True, choices=("strip", "mark-all", "lcof", "spy", "tamed"))
    p.add_argument("--label", default=None, help="Label for mark-all (default l)")
    p.add_argument("--rates", default=None, help="lcof probabilities, e.g. l=1/2,m=1")
    p.add_argument("-p", default=None, help="Taming probability for tamed")
    p.add_argument("--sigma", default="nat", help="Argument type for tamed (default nat)")
    return parser


# ---------- entry ----------

def _config(args) -> RunConfig:
    file_values = read_config_file(Path(args.config)) if args.config else {}
    flags = {
        "fuel": args.fuel, "max_tape": args.max_tape, "trunc": args.trunc, "fix_tol": args.fix_tol,
        "fix_iters": args.fix_iters, "tangent_tol": args.tangent_tol, "seed": args.seed,
        "samples": args.samples,
    }
    return build_config(file_values, flags)


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Fraction):
        return format_cell(v)
    if isinstance(v, float) and not math.isfinite(v):
        return format_cell(v)
    return v


def _emit(args, out: Output) -> None:
    if out.rows is not None and args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_csv(f, out.header or (), out.rows)
    if args.json:
        print(json.dumps(_jsonable(out.data), indent=2, ensure_ascii=False))
        return
    for line in out.lines:
        print(line)
    if out.rows is not None and not args.out:
        buf = io.StringIO()
        write_csv(buf, out.header or (), out.rows)
        sys.stdout.write(buf.getvalue())


def _fail(message: str, code: int) -> None:
    sys.stderr.write(f"✖ {message}\n")
    raise SystemExit(code)


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verbose(args.verbose)
    try:
        cfg = _config(args)
        out = args.func(args, cfg)
        _emit(args, out)
    except OSError as e:
        _fail(str(e), _IO_ERROR)
    except (PpcfError, ValueError) as e:
        _fail(str(e), _DOMAIN_ERROR)


if __name__ == "__main__":
    main()
