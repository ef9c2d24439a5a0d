"""Exact tree laws and sample-vs-law comparison.

:func:`exact_fet_distribution` follows the chain itself: it never touches the
reversed kernel, determinants or tree weights, so it can check
:func:`theorem_distribution` independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from scipy import stats

from .analysis import (
    enumerate_rooted_spanning_trees,
    principal_minor_det,
    reversed_kernel,
    stationary_distribution,
    tree_weight,
)
from .graph import MarkovKernel, RootedTree, format_scalar, kernel_hash
from .linalg import inverse_exact
from .samplers import SampleBatch, all_rooted_trees

MAX_DP_N = 5
MAX_THEOREM_N = 8
MAX_JOINT_N = 6


class OracleGuardError(ValueError):
    pass


@dataclass
class ExactDistribution:
    probs: dict  # RootedTree -> probability
    root: int | None = None
    normalizer: object = None
    kernel_hash: str = ""
    labels: tuple = field(default_factory=tuple)

    def total(self):
        return sum(self.probs.values())

    def to_json_obj(self) -> dict:
        labels = self.labels
        trees = []
        for t in sorted(self.probs):
            trees.append({
                "root": labels[t.root],
                "parents": t.label_parents(labels),
                "prob": format_scalar(self.probs[t]),
            })
        return {
            "kernel_hash": self.kernel_hash,
            "root": None if self.root is None else labels[self.root],
            "labels": list(labels),
            "trees": trees,
            "normalizer": None if self.normalizer is None else format_scalar(self.normalizer),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExactDistribution":
        labels = tuple(obj["labels"])
        index = {lab: i for i, lab in enumerate(labels)}
        n = len(labels)
        probs = {}
        for entry in obj["trees"]:
            parents = {index[u]: index[p] for u, p in entry["parents"].items()}
            t = RootedTree.from_parents(index[entry["root"]], parents, n)
            probs[t] = _parse_prob(entry["prob"])
        root = None if obj.get("root") is None else index[obj["root"]]
        norm = obj.get("normalizer")
        return cls(probs, root, None if norm is None else Fraction(norm), obj.get("kernel_hash", ""), labels)


def _parse_prob(s: str):
    return float(s) if any(c in s for c in ".eEn") else Fraction(s)


def _exit_green(M: MarkovKernel, visited: tuple):
    """Green's function of the chain killed on leaving ``visited``."""
    a = [[Fraction(int(i == j)) - M[i, j] for j in visited] for i in visited]
    return inverse_exact(a)


def exact_fet_distribution(M: MarkovKernel, r: int) -> ExactDistribution:
    """Law of the first-entrance tree of a cover walk started at ``r``.

    Forward dynamic program over (partial tree, current vertex). From a
    state with visited set ``V'`` the chain wanders inside ``V'`` and leaves
    through the edge ``(u', v)`` with probability ``G[u][u'] * M[u'][v]``,
    where ``G = (Id - M_{V'})^{-1}``; that exit attaches ``v`` under ``u'``.
    """
    if M.n > MAX_DP_N:
        raise OracleGuardError(f"first-entrance DP limited to n <= {MAX_DP_N}")
    if not M.exact:
        raise ValueError("exact_fet_distribution needs an exact kernel")
    n = M.n
    green_cache = {}
    frontier = {(tuple([-1] * n), r): Fraction(1)}
    for _ in range(n - 1):
        nxt = {}
        for (parent, u), prob in frontier.items():
            visited = tuple(v for v in range(n) if v == r or parent[v] >= 0)
            if visited not in green_cache:
                green_cache[visited] = _exit_green(M, visited)
            green = green_cache[visited]
            pos = {v: i for i, v in enumerate(visited)}
            row = green[pos[u]]
            for u2 in visited:
                g = row[pos[u2]]
                if g == 0:
                    continue
                for v in M.neighbors(u2):
                    if v in pos:
                        continue
                    p = list(parent)
                    p[v] = u2
                    key = (tuple(p), v)
                    nxt[key] = nxt.get(key, 0) + prob * g * M[u2, v]
        frontier = nxt
    probs = {}
    for (parent, _), prob in frontier.items():
        t = RootedTree(r, parent)
        probs[t] = probs.get(t, 0) + prob
    return ExactDistribution(dict(sorted(probs.items())), r, None, kernel_hash(M), M.labels)


def theorem_distribution(M: MarkovKernel, r: int, weight_kernel: MarkovKernel | None = None) -> ExactDistribution:
    """Tree law proportional to the reversed-kernel tree weights at root ``r``.

    The normalizer is ``det(Id - Mrev^(r))``. Passing ``weight_kernel=M``
    gives the classical (reversible-case) formula instead.
    """
    if M.n > MAX_THEOREM_N:
        raise OracleGuardError(f"tree enumeration limited to n <= {MAX_THEOREM_N}")
    K = reversed_kernel(M) if weight_kernel is None else weight_kernel
    z = principal_minor_det(K, r)
    ens = enumerate_rooted_spanning_trees(M, r, weight_kernel=K)
    probs = {t: w / z for t, w in zip(ens.trees, ens.weights)}
    return ExactDistribution(dict(sorted(probs.items())), r, z, kernel_hash(M), M.labels)


def stationary_joint_distribution(M: MarkovKernel) -> ExactDistribution:
    """Law of the (tree, root) pair under a stationary start."""
    if M.n > MAX_JOINT_N:
        raise OracleGuardError(f"joint law limited to n <= {MAX_JOINT_N}")
    Mrev = reversed_kernel(M)
    z = sum(principal_minor_det(M, x) for x in range(M.n))
    probs = {t: tree_weight(t, Mrev) / z for t in all_rooted_trees(M)}
    return ExactDistribution(dict(sorted(probs.items())), None, z, kernel_hash(M), M.labels)


def root_marginal(dist: ExactDistribution, n: int) -> list:
    out = [0] * n
    for t, p in dist.probs.items():
        out[t.root] += p
    return out


@dataclass
class ComparisonReport:
    tv_distance: object
    chi_square: float | None
    dof: int | None
    p_value: float | None
    max_abs_diff: object
    table: list

    def to_json_obj(self, threshold: float | None = None) -> dict:
        out = {
            "tv_distance": _json_scalar(self.tv_distance),
            "chi_square": self.chi_square,
            "dof": self.dof,
            "p_value": self.p_value,
            "max_abs_diff": _json_scalar(self.max_abs_diff),
            "table": self.table,
        }
        if threshold is not None:
            out["tv_threshold"] = threshold
            out["pass"] = float(self.tv_distance) < threshold
        return out


def _json_scalar(x):
    # rationals stay exact strings, floats become JSON numbers
    return format_scalar(x) if isinstance(x, Fraction) else float(x)


def _merged_chi_square(expected: list, observed: list):
    """Pearson statistic after merging cells until each expects at least 5."""
    cells = sorted(zip(expected, observed))
    merged = []
    acc_e = acc_o = 0.0
    for e, o in cells:
        acc_e += e
        acc_o += o
        if acc_e >= 5:
            merged.append((acc_e, acc_o))
            acc_e = acc_o = 0.0
    if acc_e > 0 or acc_o > 0:
        if merged:
            e, o = merged.pop()
            merged.append((e + acc_e, o + acc_o))
        else:
            merged.append((acc_e, acc_o))
    if len(merged) < 2:
        return None, None, None
    chi2 = sum((o - e) ** 2 / e for e, o in merged)
    dof = len(merged) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


def compare(expected: ExactDistribution, observed) -> ComparisonReport:
    """Distance between an exact law and a batch (or another exact law)."""
    if isinstance(observed, SampleBatch):
        if observed.total <= 0:
            raise ValueError("empty batch")
        counts = observed.trees()
        total = observed.total
        universe = sorted(set(expected.probs) | set(counts))
        table = []
        tv = 0.0
        exp_counts, obs_counts = [], []
        for t in universe:
            p = float(expected.probs.get(t, 0))
            c = counts.get(t, 0)
            tv += abs(p - c / total)
            exp_counts.append(p * total)
            obs_counts.append(c)
            table.append({"tree": t.key(), "expected": p, "observed": c / total, "count": c})
        tv /= 2
        chi2, dof, pval = _merged_chi_square(exp_counts, obs_counts)
        mad = max(abs(r["expected"] - r["observed"]) for r in table)
        return ComparisonReport(tv, chi2, dof, pval, mad, table)
    universe = sorted(set(expected.probs) | set(observed.probs))
    zero = Fraction(0)
    diffs = [abs(expected.probs.get(t, zero) - observed.probs.get(t, zero)) for t in universe]
    tv = sum(diffs) / 2
    table = [
        {"tree": t.key(), "expected": format_scalar(expected.probs.get(t, zero)),
         "observed": format_scalar(observed.probs.get(t, zero))}
        for t in universe
    ]
    return ComparisonReport(tv, None, None, None, max(diffs), table)


def tv_between_batches(a: SampleBatch, b: SampleBatch, unrooted: bool = False) -> float:
    """Empirical TV; ``unrooted`` compares undirected edge sets only."""
    if unrooted:
        fa, fb = a.unrooted_frequencies(), b.unrooted_frequencies()
    else:
        fa, fb = a.frequencies(), b.frequencies()
    return 0.5 * sum(abs(fa.get(t, 0.0) - fb.get(t, 0.0)) for t in set(fa) | set(fb))


def tv_between(p: dict, q: dict):
    return sum(abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)) / 2


def stationary_check(M: MarkovKernel) -> bool:
    """Root marginal of the joint law equals the stationary distribution."""
    joint = stationary_joint_distribution(M)
    return tuple(root_marginal(joint, M.n)) == stationary_distribution(M)
