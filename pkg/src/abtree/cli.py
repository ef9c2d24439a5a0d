"""Command-line entry point: ``abtree <subcommand> --kernel FILE ...``.

Every report is a JSON object carrying the kernel hash, seed and sample
count; identical arguments give byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from .analysis import (
    is_reversible,
    matrix_tree_check,
    principal_minor_det,
    reversed_kernel,
    stationary_distribution,
    tree_weight,
)
from .golf import (
    GolfConfig,
    decompose_truncated_heap,
    free_hole,
    golf_config_for_tree,
    golf_heap_encode,
    is_golf_sequence,
    stochastic_golf,
)
from .graph import (
    KernelError,
    MarkovKernel,
    RootedTree,
    check_path,
    first_entrance_tree,
    format_scalar,
    kernel_hash,
    last_exit_tree,
    parse_kernel,
    reverse_path,
)
from .heaps import (
    cycle_decomposition,
    heap_cycles_weight_sum,
    heap_decode,
    heap_encode,
    prefix_remove,
    trivial_signed_sum,
    tree_heap,
)
from .oracle import (
    ExactDistribution,
    compare,
    exact_fet_distribution,
    stationary_joint_distribution,
    theorem_distribution,
    tv_between,
    tv_between_batches,
)
from .rng import RandomSource
from .samplers import (
    DEFAULT_BUDGET,
    SampleBatch,
    all_rooted_trees,
    csr_tables,
    run_tree_chain,
    sample_batch,
    verify_tree_chain_stationarity,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2
EXIT_IO = 3

ANALYSIS_COMMANDS = {
    "stationary", "reverse", "tree-weight", "mtt-check", "exact-dist",
    "heap-decompose", "inversion-check", "tree-chain-check",
}


class UsageError(ValueError):
    pass


class Parser(argparse.ArgumentParser):
    # argparse would exit with 2, which is reserved for failed checks
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID)


class Context:
    """Parsed kernel plus the provenance fields every report carries."""

    def __init__(self, args, kernel: MarkovKernel, khash: str):
        self.args = args
        self.M = kernel
        self.hash = khash

    @property
    def labels(self) -> tuple:
        return self.M.labels

    def vertex(self, label: str) -> int:
        try:
            return self.M.index(label)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"unknown vertex label {label!r}") from exc

    def report(self, **fields) -> dict:
        out = {
            "command": self.args.command,
            "kernel_hash": self.hash,
            "seed": self.args.seed,
            "samples": self.args.samples,
            "arithmetic": "exact" if self.M.exact else "float",
        }
        out.update(fields)
        return out


def read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def load_kernel(args) -> Context:
    text = read_text(args.kernel)
    mode = args.arith
    if mode is None:
        mode = "exact" if args.command in ANALYSIS_COMMANDS else "float"
    # the hash always comes from the exact reading so it ignores --float
    try:
        exact = parse_kernel(text, "exact")
    except KernelError:
        if mode == "exact":
            raise
        M = parse_kernel(text, "float")
        return Context(args, _labelled(M), kernel_hash(_labelled(M)))
    exact = _labelled(exact)
    return Context(args, exact if mode == "exact" else exact.to_float(), kernel_hash(exact))


def _labelled(M: MarkovKernel) -> MarkovKernel:
    if M.labels:
        return M
    return MarkovKernel(M.rows, tuple(str(i + 1) for i in range(M.n)), M.exact)


def parse_tree(ctx: Context, root: str, parents: str) -> RootedTree:
    """``parents`` is ``child:parent`` label pairs separated by commas."""
    mapping = {}
    for item in filter(None, (s.strip() for s in parents.split(","))):
        if ":" not in item:
            raise UsageError(f"tree edge {item!r} is not of the form child:parent")
        child, par = item.split(":", 1)
        mapping[ctx.vertex(child)] = ctx.vertex(par)
    return RootedTree.from_parents(ctx.vertex(root), mapping, ctx.M.n)


def parse_labels(ctx: Context, text: str) -> list:
    return [ctx.vertex(s.strip()) for s in text.split(",") if s.strip()]


def tree_obj(t: RootedTree, labels) -> dict:
    return {"root": labels[t.root], "parents": t.label_parents(labels)}


def cycles_obj(cycles, labels) -> list:
    return [[labels[v] for v in c.vertices] for c in cycles]


def common_denominator(values) -> list:
    """Exact values as ``p/q`` strings sharing one ``q``; floats pass through."""
    if not all(isinstance(x, Fraction) for x in values):
        return [format_scalar(x) for x in values]
    q = math.lcm(*(x.denominator for x in values))
    return [f"{x.numerator * (q // x.denominator)}/{q}" for x in values]


def float_close(a, b, tol=1e-9) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(float(a)), abs(float(b)))


def equal(a, b, exact: bool) -> bool:
    return a == b if exact else float_close(a, b)


# subcommands ---------------------------------------------------------------


def cmd_stationary(args):
    ctx = load_kernel(args)
    rho = stationary_distribution(ctx.M)
    return ctx.report(labels=list(ctx.labels), rho=common_denominator(rho)), True


def cmd_reverse(args):
    ctx = load_kernel(args)
    R = reversed_kernel(ctx.M)
    obj = R.to_json_obj()
    obj["labels"] = list(ctx.labels)
    return ctx.report(reversible=is_reversible(ctx.M), **obj), True


def cmd_tree_weight(args):
    ctx = load_kernel(args)
    t = parse_tree(ctx, args.root, args.parents)
    if not t.is_spanning():
        raise UsageError("tree does not span the kernel's vertices")
    for u, p in t.edges():
        if not ctx.M.in_support(u, p):
            raise UsageError(f"edge {ctx.labels[u]}->{ctx.labels[p]} is not in the support")
    R = reversed_kernel(ctx.M)
    return ctx.report(
        tree=tree_obj(t, ctx.labels),
        weight_M=format_scalar(tree_weight(t, ctx.M)),
        weight_Mrev=format_scalar(tree_weight(t, R)),
    ), True


def cmd_mtt_check(args):
    ctx = load_kernel(args)
    R = reversed_kernel(ctx.M)
    roots = [ctx.vertex(args.root)] if args.root is not None else range(ctx.M.n)
    checks = []
    for r in roots:
        res = matrix_tree_check(ctx.M, r, R)
        res["root"] = ctx.labels[r]
        checks.append(res)
    ok = all(c["pass"] for c in checks)
    if args.root is not None:
        return ctx.report(**checks[0]), ok
    return ctx.report(checks=checks, **{"pass": ok}), ok


def _sample(args, kind):
    ctx = load_kernel(args)
    root = None if args.root is None else ctx.vertex(args.root)
    K = ctx.M
    if kind == "wilson":
        if root is None:
            raise UsageError("sample-wilson needs --root")
        if not args.unreversed:
            K = reversed_kernel(ctx.M)
    batch = sample_batch(K, args.samples, seed=args.seed, root=root, kind=kind,
                         workers=args.workers, budget=args.max_steps)
    batch.kernel_hash = ctx.hash
    batch.labels = ctx.labels
    obj = batch.to_json_obj()
    obj["root"] = None if root is None else ctx.labels[root]
    if kind == "wilson":
        obj["weights"] = "M" if args.unreversed else "Mrev"
    return ctx.report(**obj), True


def cmd_sample_ab(args):
    return _sample(args, "let" if args.last_exit else "fet")


def cmd_sample_wilson(args):
    return _sample(args, "wilson")


def cmd_exact_dist(args):
    ctx = load_kernel(args)
    if args.stationary:
        dist = stationary_joint_distribution(ctx.M)
    else:
        if args.root is None:
            raise UsageError("exact-dist needs --root (or --stationary)")
        r = ctx.vertex(args.root)
        dist = exact_fet_distribution(ctx.M, r) if args.method == "dp" else theorem_distribution(ctx.M, r)
    dist.kernel_hash = ctx.hash
    dist.labels = ctx.labels
    obj = dist.to_json_obj()
    obj["method"] = "stationary-joint" if args.stationary else args.method
    return ctx.report(**obj), True


def _load_json(path):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc


def cmd_compare(args):
    exp_obj = _load_json(args.expected)
    obs_obj = _load_json(args.observed)
    if exp_obj.get("kernel_hash") and obs_obj.get("kernel_hash") and exp_obj["kernel_hash"] != obs_obj["kernel_hash"]:
        raise UsageError("expected and observed reports come from different kernels")
    try:
        expected = ExactDistribution.from_json_obj(exp_obj)
        observed = SampleBatch.from_json_obj(obs_obj) if "tree_counts" in obs_obj else ExactDistribution.from_json_obj(obs_obj)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed report: missing {exc}") from exc
    rep = compare(expected, observed)
    obj = rep.to_json_obj(args.threshold)
    out = {
        "command": args.command,
        "kernel_hash": exp_obj.get("kernel_hash", ""),
        "seed": obs_obj.get("seed"),
        "samples": obs_obj.get("samples"),
    }
    out.update(obj)
    return out, obj["pass"]


def cmd_heap_decompose(args):
    ctx = load_kernel(args)
    labels = ctx.labels
    path = check_path(parse_labels(ctx, args.path), ctx.M)
    n = ctx.M.n
    R = reversed_kernel(ctx.M)
    H = heap_encode(path, n)
    out, inn = H.passport()
    checks = {"round_trip": heap_decode(H, path[0]) == path}
    fields = {
        "path": [labels[v] for v in path],
        "heap": H.to_json_obj(labels),
        "passport": {"out": list(out), "in": list(inn)},
        "weight_Mrev": format_scalar(H.weight(R)),
    }
    if len(set(path)) == n:
        t = first_entrance_tree(path, n, strict=True)
        T = prefix_remove(H, tree_heap(t))
        f = path[-1]
        fields["tree"] = tree_obj(t, labels)
        fields["truncated_heap"] = T.to_json_obj(labels)
        fields["final"] = labels[f]
        if n >= 2 and f in t.leaves():
            cfg = golf_config_for_tree(t)
            wit = decompose_truncated_heap(T, cfg, f)
            seq_obj = wit.sequence.to_json_obj(cfg, labels)
            fields["golf"] = seq_obj
            fields["golf_heap"] = wit.golf_part.to_json_obj(labels)
            fields["cycle_heap"] = wit.cycle_part.to_json_obj(labels)
            fields["cycles"] = cycles_obj(cycle_decomposition(wit.cycle_part), labels)
            checks["recompose"] = wit.recompose() == T
            checks["golf_encoding"] = golf_heap_encode(wit.sequence, n) == wit.golf_part
            checks["weight_factorization"] = equal(
                T.weight(R), wit.golf_part.weight(R) * wit.cycle_part.weight(R), R.exact)
            checks["free_hole"] = free_hole(wit.sequence, cfg) == f
    ok = all(checks.values())
    return ctx.report(checks=checks, **fields, **{"pass": ok}), ok


def cmd_golf_sim(args):
    ctx = load_kernel(args)
    if args.parents is not None:
        if args.root is None:
            raise UsageError("--parents needs --root")
        t = parse_tree(ctx, args.root, args.parents)
        cfg = golf_config_for_tree(t)
    elif args.holes is not None:
        starts = parse_labels(ctx, args.starts) if args.starts else []
        cfg = GolfConfig(frozenset(parse_labels(ctx, args.holes)), tuple(sorted(starts)))
    else:
        raise UsageError("golf-sim needs --root/--parents or --holes/--starts")
    R = reversed_kernel(ctx.M)
    one_free = len(cfg.holes) == cfg.nb + 1
    counts = {}
    valid = True
    example = None
    for i in range(args.samples):
        seq = stochastic_golf(R, cfg, RandomSource(args.seed, i), args.max_steps)
        valid = valid and is_golf_sequence(seq.paths, cfg, R)
        if example is None:
            example = seq.to_json_obj(cfg, ctx.labels)
        if one_free:
            f = free_hole(seq, cfg)
            counts[f] = counts.get(f, 0) + 1
    fields = {
        "holes": [ctx.labels[h] for h in sorted(cfg.holes)],
        "starts": [ctx.labels[s] for s in cfg.starts],
        "example": example,
        "all_valid": valid,
    }
    ok = valid
    if one_free:
        total = sum(counts.values())
        fields["free_counts"] = {ctx.labels[h]: counts.get(h, 0) for h in sorted(cfg.holes)}
        fields["free_frequencies"] = {ctx.labels[h]: counts.get(h, 0) / args.samples for h in sorted(cfg.holes)}
        fields["frequency_sum"] = format_scalar(Fraction(total, args.samples))
        ok = ok and total == args.samples
    return ctx.report(**fields, **{"pass": ok}), ok


def cmd_inversion_check(args):
    ctx = load_kernel(args)
    K = ctx.M if args.weights == "M" else reversed_kernel(ctx.M)
    verts = [ctx.vertex(args.vertex)] if args.vertex is not None else range(ctx.M.n)
    checks = []
    for f in verts:
        det = principal_minor_det(K, f)
        signed = trivial_signed_sum(K, f)
        partial = heap_cycles_weight_sum(K, f, args.max_edges)
        limit = 1 / det
        gap = limit - partial
        ok = equal(signed, det, K.exact) and float(gap) >= -1e-9
        entry = {
            "vertex": ctx.labels[f],
            "det": format_scalar(det),
            "trivial_signed_sum": format_scalar(signed),
            "heap_sum": format_scalar(partial),
            "heap_sum_float": float(partial),
            "inverse_det": format_scalar(limit),
            "gap": float(gap),
        }
        if args.tolerance is not None:
            ok = ok and float(gap) <= args.tolerance
        entry["pass"] = ok
        checks.append(entry)
    ok = all(c["pass"] for c in checks)
    return ctx.report(weights=args.weights, max_edges=args.max_edges, tolerance=args.tolerance,
                      checks=checks, **{"pass": ok}), ok


def cmd_tree_chain_check(args):
    ctx = load_kernel(args)
    res = verify_tree_chain_stationarity(ctx.M)
    fields = dict(res)
    ok = res["pass"]
    if args.steps > 0:
        R = reversed_kernel(ctx.M)
        states = all_rooted_trees(ctx.M)
        w = {t: float(tree_weight(t, R)) for t in states}
        z = sum(w.values())
        occ = run_tree_chain(R, states[0], args.steps, seed=args.seed)
        freq = {t: c / args.steps for t, c in occ.items()}
        fields["steps"] = args.steps
        fields["occupation_tv"] = tv_between({t: x / z for t, x in w.items()}, freq)
    return ctx.report(**fields), ok


def cmd_duality_check(args):
    ctx = load_kernel(args)
    n = ctx.M.n
    indptr, indices, cum = csr_tables(ctx.M)
    mismatches = 0
    for i in range(args.paths):
        rng = RandomSource(args.seed, i)
        v = int(rng.next_u64() % n)
        length = int(rng.next_u64() % (4 * n + 1))
        path = [v]
        for _ in range(length):
            v = int(indices[rng.pick(cum, int(indptr[v]), int(indptr[v + 1]))])
            path.append(v)
        if first_entrance_tree(path, n) != last_exit_tree(reverse_path(path), n):
            mismatches += 1
    fields = {"paths": args.paths, "mismatches": mismatches}
    ok = mismatches == 0
    if args.samples > 0:
        fet = sample_batch(ctx.M, args.samples, args.seed, None, "fet", args.workers, args.max_steps)
        let = sample_batch(ctx.M, args.samples, args.seed + 1, None, "let", args.workers, args.max_steps)
        # roots differ by construction (start vs final vertex), so the law
        # comparison is on undirected trees
        tv = tv_between_batches(fet, let, unrooted=True)
        fields["cover_law_tv"] = tv
        fields["cover_law_tv_rooted"] = tv_between_batches(fet, let)
        fields["cover_law_threshold"] = args.threshold
        ok = ok and tv < args.threshold
    return ctx.report(**fields, **{"pass": ok}), ok


COMMANDS = {
    "stationary": (cmd_stationary, "stationary distribution of the kernel"),
    "reverse": (cmd_reverse, "time-reversed kernel"),
    "tree-weight": (cmd_tree_weight, "edge-weight product of a rooted tree under M and its reversal"),
    "mtt-check": (cmd_mtt_check, "matrix tree identities for both kernels"),
    "sample-ab": (cmd_sample_ab, "first-entrance (or last-exit) trees of cover walks"),
    "sample-wilson": (cmd_sample_wilson, "loop-erased walk trees with the reversed kernel"),
    "exact-dist": (cmd_exact_dist, "exact first-entrance tree law"),
    "compare": (cmd_compare, "distance between an exact law and a batch"),
    "heap-decompose": (cmd_heap_decompose, "heap encoding and golf/cycle split of a walk"),
    "golf-sim": (cmd_golf_sim, "simulate stochastic golf and tally the free hole"),
    "inversion-check": (cmd_inversion_check, "signed cycle sums and the heap-of-cycles series"),
    "tree-chain-check": (cmd_tree_chain_check, "balance of the root-move chain on rooted trees"),
    "duality-check": (cmd_duality_check, "first-entrance / last-exit duality on random paths"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=100000)
    arith = common.add_mutually_exclusive_group()
    arith.add_argument("--exact", dest="arith", action="store_const", const="exact")
    arith.add_argument("--float", dest="arith", action="store_const", const="float")
    common.set_defaults(arith=None)
    common.add_argument("--max-edges", type=int, default=40)
    common.add_argument("--workers", type=int, default=0, help="0 means all cores")
    common.add_argument("--max-steps", type=int, default=DEFAULT_BUDGET)
    common.add_argument("--output", "-o", default="-")

    parser = Parser(prog="abtree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    subs = {}
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=helptext, description=helptext)
        if name != "compare":
            p.add_argument("--kernel", required=True)
        subs[name] = p

    for name in ("mtt-check", "sample-ab", "sample-wilson", "exact-dist", "tree-weight", "golf-sim"):
        subs[name].add_argument("--root")
    subs["tree-weight"].add_argument("--parents", required=True, help="child:parent pairs, e.g. 2:1,3:1")
    subs["sample-ab"].add_argument("--last-exit", action="store_true",
                                   help="tally last-exit trees at cover time instead")
    subs["sample-wilson"].add_argument("--unreversed", action="store_true",
                                       help="walk with M itself instead of its reversal")
    subs["exact-dist"].add_argument("--method", choices=("theorem", "dp"), default="theorem")
    subs["exact-dist"].add_argument("--stationary", action="store_true")
    subs["compare"].add_argument("--expected", required=True)
    subs["compare"].add_argument("--observed", required=True)
    subs["compare"].add_argument("--threshold", type=float, default=0.01)
    subs["heap-decompose"].add_argument("--path", required=True, help="comma-separated vertex labels")
    subs["golf-sim"].add_argument("--parents")
    subs["golf-sim"].add_argument("--holes")
    subs["golf-sim"].add_argument("--starts")
    subs["inversion-check"].add_argument("--vertex")
    subs["inversion-check"].add_argument("--weights", choices=("Mrev", "M"), default="Mrev")
    subs["inversion-check"].add_argument("--tolerance", type=float)
    subs["tree-chain-check"].add_argument("--steps", type=int, default=0)
    subs["duality-check"].add_argument("--paths", type=int, default=1000)
    subs["duality-check"].add_argument("--threshold", type=float, default=0.015)
    return parser


def write_report(obj: dict, path: str) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.samples < 0 or args.max_edges < 0 or args.max_steps <= 0:
        print("abtree: error: counts must be nonnegative", file=sys.stderr)
        return EXIT_INVALID
    handler = COMMANDS[args.command][0]
    try:
        report, ok = handler(args)
        write_report(report, args.output)
    except OSError as exc:
        print(f"abtree: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"abtree: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
