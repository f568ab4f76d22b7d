"""``kc``: compile, count, generate and cross-check constraint systems."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import networkx as nx

from .core import ConstraintSystem, ContractError, brute_force_count, parse_system, serialize_system
from .treedecomp import read_td, write_td


def _load(args) -> tuple[ConstraintSystem, object]:
    F = parse_system(Path(args.input).read_text())
    td = read_td(Path(args.td).read_text()) if getattr(args, "td", None) else None
    return F, td


def cmd_compile(args) -> int:
    from .compile import compile_system
    from .sdnnf import count_dsdnnf, write_map, write_nnf, write_vtree

    F, td = _load(args)
    D, stats = compile_system(F, td, validate=args.validate)
    Path(args.output).write_text(write_nnf(D, F.num_vars))
    if args.vtree:
        if D.vtree is None:
            print("c circuit is constant; no vtree written", file=sys.stderr)
        else:
            Path(args.vtree).write_text(write_vtree(D.vtree))
    if args.map and D.vtree is not None:
        Path(args.map).write_text(write_map(D))
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats.to_dict(), indent=2) + "\n")
    print(f"c gates {D.num_gates} models {count_dsdnnf(D, F.variables())}")
    return 0


def cmd_count(args) -> int:
    F, td = _load(args)
    t0 = time.perf_counter()
    extra = ""
    if args.engine == "brute":
        n = brute_force_count(F)
    elif args.engine == "compiled":
        from .compile import compile_system
        from .sdnnf import count_dsdnnf

        D, st = compile_system(F, td)
        n = count_dsdnnf(D, F.variables())
        extra = f" td_width={st.td_width} cnf_td_width={st.td_h_width} gates={st.circuit_gates}"
    else:
        from .dpcount import dp_count

        join = args.join or ("naive" if args.engine == "dp" else "auto")
        n = dp_count(F, td, join_mode=join.replace("-", "_"))
        extra = f" join={join}"
    print(n)
    print(f"c engine={args.engine} seconds={time.perf_counter() - t0:.3f}{extra}")
    return 0


def cmd_gen(args) -> int:
    from .toolkit import clique_instance, gen_random_system

    if args.what == "clique":
        if args.n is None or args.k is None:
            raise ContractError("gen clique needs --n and --k")
        inst = clique_instance(nx.complete_graph(range(1, args.n + 1)), args.k)
        text = serialize_system(inst.system)
        if args.td:
            nv = inst.system.num_vars + len(inst.system)
            Path(args.td).write_text(write_td(inst.td, nv))
    else:
        mix = tuple(k.strip() for k in args.mix.split(",") if k.strip())
        F = gen_random_system(args.seed, args.vars, args.cons, mix, max_arity=args.max_arity)
        text = serialize_system(F)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_check(args) -> int:
    from .toolkit import ENGINES, check_all

    F, td = _load(args)
    engines = ENGINES if args.engines == "all" else tuple(e.strip() for e in args.engines.split(","))
    v = check_all(F, td, engines)
    print(v.summary())
    return 0 if v.agree else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kc", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", help="compile a system into a d-SDNNF circuit")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("-t", "--td")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--vtree")
    c.add_argument("--map", help="gate to vtree-node map file")
    c.add_argument("--stats")
    c.add_argument("--validate", action="store_true", help="check every intermediate decomposition")
    c.set_defaults(func=cmd_compile)

    n = sub.add_parser("count", help="exact model count")
    n.add_argument("-i", "--input", required=True)
    n.add_argument("-t", "--td")
    n.add_argument("--engine", choices=("compiled", "dp", "dp-fast", "brute"), default="compiled")
    n.add_argument("--join", choices=("naive", "onesided", "clause-modulo", "auto"))
    n.set_defaults(func=cmd_count)

    g = sub.add_parser("gen", help="generate instances")
    g.add_argument("what", choices=("clique", "random"))
    g.add_argument("--n", type=int, help="complete graph size")
    g.add_argument("--k", type=int)
    g.add_argument("--td", help="write the emitted decomposition here (clique)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--vars", type=int, default=8)
    g.add_argument("--cons", type=int, default=5)
    g.add_argument("--mix", default="clause,xor")
    g.add_argument("--max-arity", type=int, default=5)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    k = sub.add_parser("check", help="run every engine and compare counts")
    k.add_argument("-i", "--input", required=True)
    k.add_argument("-t", "--td")
    k.add_argument("--engines", default="all")
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, ValueError, OSError) as e:
        print(f"kc: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
