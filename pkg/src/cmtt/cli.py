"""Command-line driver: ``cmtt check|nf|eq``.

Exit codes: 0 ok, 1 semantic failure, 2 parse error, 3 I/O error,
4 fuel exhausted, 5 the engine and the oracle disagree.
"""
from __future__ import annotations

import argparse
import json
import sys
import threading
from dataclasses import dataclass

from . import errors as err
from .equality import eq_closure
from .evaluator import CClo, Fuel, default_fuel, normalize
from .frontend import (
    NameEnv, ResolvedConst, ResolvedDirective, ResolvedMeta, parse_signature,
    parse_term, print_expression, resolve, resolve_signature,
)
from .oracle import beta_normalize, declarative_check, equal_beta_eta, eta_normalize
from .syntax import (
    App, Cons, Expression, Lam, Pi, SubClo, TYPE, Universe, count_allocations,
    is_neutral, is_normal,
)
from .typechecker import Checker, ConstEntry, MetaEntry, check_signature

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_IO, EXIT_FUEL, EXIT_DIVERGE = range(6)


class EngineDivergence(err.CmttError):
    """The lazy engine and the eager oracle gave different answers."""


class Mismatch(err.CmttError):
    """A comparison came out negative (exit 1, not an error in the input)."""


@dataclass
class Loaded:
    path: str
    decls: list
    signature: dict
    delta: tuple
    names: NameEnv


# --- loading and checking ------------------------------------------------------------

def load(path: str, fuel: int, jobs: int = 1) -> Loaded:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    surface = parse_signature(text, path)
    decls, names = resolve_signature(surface)
    entries = []
    for d in decls:
        if isinstance(d, ResolvedConst):
            entries.append(ConstEntry(d.name, d.classifier))
        elif isinstance(d, ResolvedMeta):
            entries.append(MetaEntry(d.name, d.context, d.type))
    signature, delta = check_signature(entries, Fuel(fuel), jobs=jobs)
    return Loaded(path, decls, signature, delta, names)


def _checker(loaded: Loaded, names: NameEnv, fuel: Fuel) -> Checker:
    return Checker(loaded.signature, loaded.delta[:len(names.metas)], fuel)


def check_type(loaded: Loaded, names: NameEnv, a: Expression, fuel: Fuel) -> None:
    if is_normal(a):
        _checker(loaded, names, fuel).check_sort((), a, Universe.TYPE)
    elif not declarative_check(loaded.signature, loaded.delta[:len(names.metas)], (), a, TYPE, fuel):
        raise err.NotAType(f"{print_expression(a, names)} is not a type")


def check_term(loaded: Loaded, names: NameEnv, m: Expression, a: Expression, fuel: Fuel) -> None:
    """Normal terms go through the bidirectional checker; anything else
    (redexes, closures) through the declarative oracle."""
    if is_normal(m):
        _checker(loaded, names, fuel).check_normal((), m, CClo(a))
        return
    trace: list = []
    if not declarative_check(loaded.signature, loaded.delta[:len(names.metas)], (), m, a, fuel, trace):
        raise err.TypeMismatch(
            f"{print_expression(m, names)} does not have type {print_expression(a, names)}", trace)


def type_of(loaded: Loaded, names: NameEnv, m: Expression, a: Expression | None, fuel: Fuel) -> Expression:
    """Check ``m`` at ``a``, or infer its type when ``a`` is None."""
    if a is not None:
        check_type(loaded, names, a, fuel)
        check_term(loaded, names, m, a, fuel)
        return a
    if not is_neutral(m):
        raise err.TypeCheckError(
            f"cannot infer a type for {print_expression(m, names)}; add a type annotation")
    inferred = _checker(loaded, names, fuel).infer_neutral((), m)
    return normalize(inferred.body, fuel, inferred.env, inferred.menv)


def first_difference(a: Expression, b: Expression, path: str = "") -> tuple[str, Expression, Expression] | None:
    """Leftmost position where two expressions differ."""
    if a == b:
        return None
    if type(a) is type(b):
        pairs = []
        if isinstance(a, Lam):
            pairs = [("body", a.body, b.body)]
        elif isinstance(a, Pi):
            pairs = [("domain", a.domain, b.domain), ("codomain", a.codomain, b.codomain)]
        elif isinstance(a, App):
            pairs = [("head", a.head, b.head), ("arg", a.arg, b.arg)]
        elif isinstance(a, SubClo) and a.body == b.body:
            sa, sb, i = a.subst, b.subst, 0
            while isinstance(sa, Cons) and isinstance(sb, Cons):
                pairs.append((f"entry{i}", sa.head, sb.head))
                sa, sb, i = sa.tail, sb.tail, i + 1
            if sa != sb and not pairs:
                return (path or "root", a, b)
        for step, x, y in pairs:
            found = first_difference(x, y, f"{path}.{step}" if path else step)
            if found:
                return found
    return (path or "root", a, b)


def compare(loaded: Loaded, names: NameEnv, m: Expression, n: Expression, fuel: Fuel,
            oracle: bool) -> dict:
    equal = eq_closure(CClo(m), CClo(n), fuel)
    result = {"equal": equal}
    if oracle:
        expected = equal_beta_eta(m, n, fuel)
        result["oracle_equal"] = expected
        if expected != equal:
            raise EngineDivergence(
                f"engine says {'equal' if equal else 'different'}, oracle says"
                f" {'equal' if expected else 'different'}")
    if not equal:
        left = eta_normalize(beta_normalize(m, fuel))
        right = eta_normalize(beta_normalize(n, fuel))
        where = first_difference(left, right)
        if where:
            result["locus"] = {
                "path": where[0],
                "left": print_expression(where[1], names),
                "right": print_expression(where[2], names),
            }
    return result


def normal_forms(m: Expression, fuel: Fuel, engine: bool, oracle: bool, stats: bool) -> dict:
    out: dict = {}
    if engine:
        with count_allocations() as counter:
            out["engine"] = normalize(m, fuel)
        if stats:
            out["allocations"] = counter.count
    if oracle:
        with count_allocations() as counter:
            out["oracle"] = beta_normalize(m, fuel)
        if stats:
            out["oracle_allocations"] = counter.count
    return out


# --- commands -------------------------------------------------------------------------

def _error_record(e: Exception, loaded_positions: dict | None = None) -> dict:
    record: dict = {"kind": type(e).__name__, "message": getattr(e, "message", str(e))}
    if isinstance(e, err.ParseError):
        record.update(line=e.line, col=e.col, file=e.filename)
    if isinstance(e, err.TypeCheckError):
        record["trace"] = e.trace
        name = getattr(e, "declaration", None)
        if name is not None:
            record["declaration"] = name
            if loaded_positions and name in loaded_positions:
                record["line"], record["col"] = loaded_positions[name]
    if isinstance(e, err.FuelExhausted):
        record["steps"] = e.steps
    return record


def cmd_check(args, out: dict) -> int:
    fuel = args.fuel
    loaded = load(args.file, fuel, args.jobs)
    out["declarations"] = [
        {"name": d.name, "sort": "mvar" if isinstance(d, ResolvedMeta) else "const",
         "type": print_expression(d.classifier if isinstance(d, ResolvedConst) else d.type,
                                  NameEnv(locals=d.context_names) if isinstance(d, ResolvedMeta) else NameEnv()),
         "status": "ok"}
        for d in loaded.decls if not isinstance(d, ResolvedDirective)
    ]
    out["directives"] = []
    for d in loaded.decls:
        if isinstance(d, ResolvedDirective):
            record = {"kind": d.kind, "line": d.line, "col": d.col,
                      "terms": [print_expression(t, d.names) for t in d.terms]}
            out["directives"].append(record)
            try:
                run_directive(loaded, d, Fuel(fuel), args.oracle, record)
            except err.CmttError as e:
                e.position = (d.line, d.col)
                raise
    return EXIT_OK


def run_directive(loaded: Loaded, d: ResolvedDirective, fuel: Fuel, oracle: bool, record: dict) -> None:
    names = d.names
    a = type_of(loaded, names, d.terms[0], d.type, fuel)
    record["type"] = print_expression(a, names)
    if d.kind == "eq":
        check_term(loaded, names, d.terms[1], a, fuel)
        result = compare(loaded, names, d.terms[0], d.terms[1], fuel, oracle)
        record.update(result)
        if not result["equal"]:
            locus = result.get("locus")
            where = f" (differ at {locus['path']}: {locus['left']} vs {locus['right']})" if locus else ""
            raise err.EqualityFailed(f"terms are not equal{where}")
    else:
        forms = normal_forms(d.terms[0], fuel, True, oracle, False)
        record["normal_form"] = print_expression(forms["engine"], names)
        if oracle:
            record["oracle_normal_form"] = print_expression(forms["oracle"], names)
            if forms["oracle"] != forms["engine"]:
                raise EngineDivergence("engine and oracle normal forms differ")


def _file_names(args) -> tuple[Loaded, NameEnv]:
    loaded = load(args.file, args.fuel, args.jobs)
    return loaded, loaded.names


def cmd_nf(args, out: dict) -> int:
    loaded, names = _file_names(args)
    fuel = Fuel(args.fuel)
    m = resolve(parse_term(args.term), names)
    if args.at is not None:
        a = resolve(parse_term(args.at, "<type>"), names)
        check_type(loaded, names, a, fuel)
        check_term(loaded, names, m, a, fuel)
    both = args.oracle and args.diff
    forms = normal_forms(m, fuel, engine=not args.oracle or both, oracle=args.oracle, stats=args.stats)
    for key in ("engine", "oracle"):
        if key in forms:
            out[key] = print_expression(forms[key], names)
    for key in ("allocations", "oracle_allocations"):
        if key in forms:
            out[key] = forms[key]
    out["normal_form"] = out["oracle"] if args.oracle and not both else out["engine"]
    if both and forms["engine"] != forms["oracle"]:
        out["match"] = False
        return EXIT_FAIL
    if both:
        out["match"] = True
    return EXIT_OK


def cmd_eq(args, out: dict) -> int:
    loaded, names = _file_names(args)
    fuel = Fuel(args.fuel)
    m = resolve(parse_term(args.left), names)
    n = resolve(parse_term(args.right), names)
    a = None if args.at is None else resolve(parse_term(args.at, "<type>"), names)
    a = type_of(loaded, names, m, a, fuel)
    check_term(loaded, names, n, a, fuel)
    out["type"] = print_expression(a, names)
    out.update(compare(loaded, names, m, n, fuel, args.oracle))
    return EXIT_OK if out["equal"] else EXIT_FAIL


# --- reporting ------------------------------------------------------------------------------

def _render_text(args, out: dict, code: int) -> None:
    error = out.get("error")
    if error is not None:
        where = args.file
        if "line" in error:
            where = f"{error.get('file', args.file)}:{error['line']}:{error['col']}"
        who = f" in {error['declaration']}" if "declaration" in error else ""
        print(f"{where}: {error['kind']}{who}: {error['message']}", file=sys.stderr)
        if args.trace:
            for step in error.get("trace", []):
                print(f"  in {step}", file=sys.stderr)
        return
    if args.command == "check":
        print(f"{len(out['declarations'])} declarations OK")
        for d in out["directives"]:
            if d["kind"] == "nf":
                print(f"#nf {d['terms'][0]} ==> {d['normal_form']}")
            else:
                print(f"#eq {d['terms'][0]} == {d['terms'][1]} : {d['type']}")
    elif args.command == "nf":
        if "engine" in out and "oracle" in out:
            print(f"engine: {out['engine']}")
            print(f"oracle: {out['oracle']}")
            if not out["match"]:
                print("normal forms differ")
        else:
            print(out["normal_form"])
        for key in ("allocations", "oracle_allocations"):
            if key in out:
                print(f"{key.replace('_', ' ')}: {out[key]}")
    elif args.command == "eq":
        if out["equal"]:
            print("equal")
        else:
            locus = out.get("locus")
            print("not equal" + (f": differ at {locus['path']}: {locus['left']} vs {locus['right']}"
                                 if locus else ""))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fuel", type=int, default=None, help="step budget (default: $CMTT_FUEL or 10^6)")
    common.add_argument("--oracle", action="store_true", help="cross-check with the eager oracle")
    common.add_argument("--diff", action="store_true", help="with --oracle, show both engines' results")
    common.add_argument("--stats", action="store_true", help="report Expression allocations")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--trace", action="store_true", help="print the judgment trace on failure")
    common.add_argument("--jobs", type=int, default=1, help="check declarations concurrently")
    common.add_argument("--at", default=None, metavar="TYPE", help="type to check terms against")

    parser = argparse.ArgumentParser(prog="cmtt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="check a signature file")
    p.add_argument("file")
    p = sub.add_parser("nf", parents=[common], help="normalize a term")
    p.add_argument("file")
    p.add_argument("term")
    p = sub.add_parser("eq", parents=[common], help="compare two terms")
    p.add_argument("file")
    p.add_argument("left")
    p.add_argument("right")
    return parser


COMMANDS = {"check": cmd_check, "nf": cmd_nf, "eq": cmd_eq}


# Every stage recurses on term structure.  Commands run on a thread with a
# large stack so that deep terms end in RecursionError (exit 4), not a crash.
STACK_SIZE = 512 * 1024 * 1024
RECURSION_LIMIT = 50_000


def run_deep(fn, *args):
    """Call ``fn(*args)`` on a big-stack thread and return its result."""
    result: dict = {}

    def target():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(RECURSION_LIMIT)
        try:
            result["value"] = fn(*args)
        except BaseException as e:  # re-raised on the calling thread
            result["error"] = e
        finally:
            sys.setrecursionlimit(old)

    previous = threading.stack_size(STACK_SIZE)
    try:
        worker = threading.Thread(target=target)
        worker.start()
    finally:
        threading.stack_size(previous)
    worker.join()
    if "error" in result:
        raise result["error"]
    return result["value"]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.fuel is None:
        args.fuel = default_fuel()
    out: dict = {"command": args.command, "file": args.file}
    try:
        code = run_deep(COMMANDS[args.command], args, out)
    except OSError as e:
        code, out["error"] = EXIT_IO, {"kind": "IOError", "message": f"{e.strerror}: {e.filename}"}
    except err.ParseError as e:
        code, out["error"] = EXIT_PARSE, _error_record(e)
    except err.FuelExhausted as e:
        code, out["error"] = EXIT_FUEL, _error_record(e)
    except RecursionError:
        code, out["error"] = EXIT_FUEL, {"kind": "FuelExhausted", "message": "recursion too deep"}
    except EngineDivergence as e:
        code, out["error"] = EXIT_DIVERGE, _error_record(e)
    except err.CmttError as e:
        code = EXIT_FAIL
        out["error"] = _error_record(e, _positions_of(args))
        position = getattr(e, "position", None)
        if position and "line" not in out["error"]:
            out["error"]["line"], out["error"]["col"] = position
    out["exit_code"] = code
    out["status"] = "ok" if code == EXIT_OK else "error"
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        _render_text(args, out, code)
    return code


def _positions_of(args) -> dict:
    try:
        with open(args.file, encoding="utf-8") as f:
            surface = parse_signature(f.read(), args.file)
    except (OSError, err.ParseError):
        return {}
    return {d.name: (d.line, d.col) for d in surface if hasattr(d, "name")}


if __name__ == "__main__":
    sys.exit(main())
