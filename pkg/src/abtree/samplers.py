"""Monte Carlo tree samplers.

Batches run trial ``i`` on the stream ``(seed, i)`` through the compiled core
(or its Python fallback). The single-sample functions below draw from a
caller-held :class:`RandomSource` in pure Python; a fresh
``RandomSource(seed, i)`` reproduces batch trial ``i`` exactly.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analysis import (
    iter_rooted_spanning_trees,
    reversed_kernel,
    stationary_distribution,
    tree_weight,
)
from .graph import MarkovKernel, RootedTree, first_entrance_tree, format_scalar, kernel_hash
from .rng import RandomSource

DEFAULT_BUDGET = 10**7
CHUNK = 50_000
MAX_CHAIN_N = 6


class StepBudgetExceeded(RuntimeError):
    pass


def csr_tables(K: MarkovKernel):
    """Neighbour lists and per-row cumulative float probabilities."""
    Kf = K.to_float()
    indptr = [0]
    indices = []
    cum = []
    for a in range(K.n):
        acc = 0.0
        for b in K.neighbors(a):
            acc += Kf[a, b]
            indices.append(b)
            cum.append(acc)
        indptr.append(len(indices))
    return (
        np.array(indptr, dtype=np.int64),
        np.array(indices, dtype=np.int64),
        np.array(cum, dtype=np.float64),
    )


def start_table(M: MarkovKernel) -> np.ndarray:
    rho = stationary_distribution(M)
    return np.cumsum([float(x) for x in rho])


def walk_until_cover(M: MarkovKernel, start: int, rng: RandomSource, budget: int = DEFAULT_BUDGET) -> tuple:
    """Run the chain from ``start`` until every vertex has been seen."""
    indptr, indices, cum = csr_tables(M)
    return _walk(indptr, indices, cum, M.n, start, rng, budget)


def _walk(indptr, indices, cum, n, start, rng, budget):
    path = [start]
    seen = {start}
    v = start
    while len(seen) < n:
        if len(path) - 1 >= budget:
            raise StepBudgetExceeded(f"no cover within {budget} steps")
        v = int(indices[rng.pick(cum, int(indptr[v]), int(indptr[v + 1]))])
        path.append(v)
        seen.add(v)
    return tuple(path)


def sample_fet(M: MarkovKernel, rng: RandomSource, root: int | None = None, budget: int = DEFAULT_BUDGET) -> RootedTree:
    """First-entrance tree of one cover walk.

    ``root=None`` starts the walk from the stationary law of ``M``.
    """
    indptr, indices, cum = csr_tables(M)
    if root is None:
        root = rng.pick(start_table(M), 0, M.n)
    path = _walk(indptr, indices, cum, M.n, root, rng, budget)
    return first_entrance_tree(path, M.n)


def wilson_sample(K: MarkovKernel, root: int, rng: RandomSource, budget: int = DEFAULT_BUDGET) -> RootedTree:
    """Loop-erased walk tree with law proportional to the product of ``K[u][parent(u)]``."""
    indptr, indices, cum = csr_tables(K)
    n = K.n
    nxt = [-1] * n
    in_tree = [False] * n
    in_tree[root] = True
    steps = 0
    for i in range(n):
        u = i
        while not in_tree[u]:
            if steps >= budget:
                raise StepBudgetExceeded(f"Wilson walk exceeded {budget} steps")
            nxt[u] = int(indices[rng.pick(cum, int(indptr[u]), int(indptr[u + 1]))])
            u = nxt[u]
            steps += 1
        u = i
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    nxt[root] = -1
    return RootedTree(root, tuple(nxt))


@dataclass
class SampleBatch:
    counts: dict
    total: int
    seed: int
    kind: str
    mode: str
    kernel_hash: str = ""
    labels: tuple = field(default_factory=tuple)

    def trees(self) -> dict:
        return {RootedTree.from_key(k): c for k, c in self.counts.items()}

    def frequencies(self) -> dict:
        return {RootedTree.from_key(k): c / self.total for k, c in self.counts.items()}

    def unrooted_frequencies(self) -> dict:
        out = {}
        for k, c in self.counts.items():
            u = RootedTree.from_key(k).unrooted_key()
            out[u] = out.get(u, 0) + c / self.total
        return out

    def root_counts(self, n: int) -> list:
        out = [0] * n
        for k, c in self.counts.items():
            out[int(k.split(":")[0])] += c
        return out

    def merge(self, other: "SampleBatch") -> "SampleBatch":
        counts = dict(self.counts)
        for k, c in other.counts.items():
            counts[k] = counts.get(k, 0) + c
        return SampleBatch(dict(sorted(counts.items())), self.total + other.total, self.seed,
                           self.kind, self.mode, self.kernel_hash, self.labels)

    def to_json_obj(self) -> dict:
        return {
            "kernel_hash": self.kernel_hash,
            "sampler": self.kind,
            "mode": self.mode,
            "samples": self.total,
            "seed": self.seed,
            "labels": list(self.labels),
            "tree_counts": dict(self.counts),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SampleBatch":
        counts = {str(k): int(v) for k, v in obj["tree_counts"].items()}
        return cls(dict(sorted(counts.items())), int(obj["samples"]), int(obj["seed"]),
                   obj.get("sampler", "fet"), obj["mode"], obj.get("kernel_hash", ""),
                   tuple(obj.get("labels", ())))


def _count_rows(parents: np.ndarray, roots: np.ndarray) -> dict:
    table = np.hstack([roots[:, None].astype(np.int32), parents])
    uniq, cnt = np.unique(table, axis=0, return_counts=True)
    out = {}
    for row, c in zip(uniq, cnt):
        out[RootedTree(int(row[0]), tuple(int(x) for x in row[1:])).key()] = int(c)
    return out


def _run_chunk(args):
    kind, tables, n, root, start_cum, seed, first, count, budget = args
    indptr, indices, cum = tables
    if kind == "wilson":
        parents, status = kernels.wilson_trees(indptr, indices, cum, n, root, seed, first, count, budget)
        roots = np.full(count, root, dtype=np.int32)
    else:
        parents, roots, status = kernels.cover_trees(
            indptr, indices, cum, n, root, start_cum, seed, first, count, budget, kind == "let"
        )
    if status:
        raise StepBudgetExceeded(f"a trial in [{first}, {first + count}) exceeded {budget} steps")
    return _count_rows(parents, roots)


def sample_batch(
    M: MarkovKernel,
    samples: int,
    seed: int = 0,
    root: int | None = None,
    kind: str = "fet",
    workers: int | None = 1,
    budget: int = DEFAULT_BUDGET,
) -> SampleBatch:
    """Draw ``samples`` trees and tally them.

    ``kind`` is ``"fet"`` (first-entrance tree of a cover walk of ``M``),
    ``"let"`` (last-exit tree of the same walk) or ``"wilson"`` (loop-erased
    walks of ``M`` itself; pass the reversed kernel to match ``"fet"``).
    ``root=None`` means a stationary start and is not allowed for Wilson.
    """
    if kind not in ("fet", "let", "wilson"):
        raise ValueError(f"unknown sampler {kind!r}")
    if samples <= 0:
        raise ValueError("samples must be positive")
    if kind == "wilson" and root is None:
        raise ValueError("Wilson sampling needs a root")
    tables = csr_tables(M)
    start_cum = start_table(M) if root is None else np.zeros(0)
    jobs = [
        (kind, tables, M.n, -1 if root is None else root, start_cum, seed, first, min(CHUNK, samples - first), budget)
        for first in range(0, samples, CHUNK)
    ]
    if workers is None or workers <= 0:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    counts = {}
    for part in parts:
        for k, c in part.items():
            counts[k] = counts.get(k, 0) + c
    return SampleBatch(
        dict(sorted(counts.items())),
        samples,
        seed,
        kind,
        "stationary" if root is None else "fixed-root",
        kernel_hash(M),
        M.labels,
    )


def tree_move(state: RootedTree, new_root: int) -> RootedTree:
    """Add the edge ``root -> new_root`` and drop the old edge out of ``new_root``."""
    parent = list(state.parent)
    parent[state.root] = new_root
    parent[new_root] = -1
    return RootedTree(new_root, tuple(parent))


def tree_chain_step(state: RootedTree, Mrev: MarkovKernel, rng: RandomSource) -> RootedTree:
    indptr, indices, cum = csr_tables(Mrev)
    r = state.root
    return tree_move(state, int(indices[rng.pick(cum, int(indptr[r]), int(indptr[r + 1]))]))


def decode_chain_code(code: int, n: int) -> RootedTree:
    base = n + 1
    parent = [0] * n
    for v in range(n - 1, -1, -1):
        code, digit = divmod(code, base)
        parent[v] = digit - 1
    return RootedTree(code, tuple(parent))


def run_tree_chain(Mrev: MarkovKernel, state: RootedTree, steps: int, seed: int = 0, stream: int = 0) -> dict:
    """Occupation counts of the tree-valued chain over ``steps`` moves."""
    indptr, indices, cum = csr_tables(Mrev)
    codes = kernels.tree_chain_codes(indptr, indices, cum, Mrev.n, list(state.parent), state.root,
                                     seed, stream, steps)
    uniq, cnt = np.unique(codes, return_counts=True)
    return {decode_chain_code(int(c), Mrev.n): int(k) for c, k in zip(uniq, cnt)}


def all_rooted_trees(M: MarkovKernel) -> list:
    return [t for r in range(M.n) for t in iter_rooted_spanning_trees(M, r)]


def tree_chain_matrix(M: MarkovKernel, Mrev: MarkovKernel | None = None):
    """States and exact transition entries of the root-move chain."""
    if Mrev is None:
        Mrev = reversed_kernel(M)
    states = all_rooted_trees(M)
    index = {t: i for i, t in enumerate(states)}
    Q = {}
    for i, t in enumerate(states):
        for r2 in Mrev.neighbors(t.root):
            j = index[tree_move(t, r2)]
            Q[(i, j)] = Q.get((i, j), 0) + Mrev[t.root, r2]
    return states, Q


def verify_tree_chain_stationarity(M: MarkovKernel, Mrev: MarkovKernel | None = None, weights: MarkovKernel | None = None) -> dict:
    """Check that P proportional to the product of ``weights`` (default ``Mrev``) balances Q."""
    if M.n > MAX_CHAIN_N:
        raise ValueError(f"full tree enumeration limited to n <= {MAX_CHAIN_N}")
    if Mrev is None:
        Mrev = reversed_kernel(M)
    if weights is None:
        weights = Mrev
    states, Q = tree_chain_matrix(M, Mrev)
    w = [tree_weight(t, weights) for t in states]
    z = sum(w)
    P = [x / z for x in w]
    m = len(states)
    row = [0] * m
    flow = [0] * m
    for (i, j), q in Q.items():
        row[i] += q
        flow[j] += P[i] * q
    if M.exact:
        rows_ok = all(x == 1 for x in row)
        resid = max(abs(flow[j] - P[j]) for j in range(m))
        balance_ok = resid == 0
    else:
        rows_ok = all(abs(x - 1) < 1e-12 for x in row)
        resid = max(abs(flow[j] - P[j]) for j in range(m))
        balance_ok = resid < 1e-12
    return {
        "states": m,
        "rows_stochastic": rows_ok,
        "balance": balance_ok,
        "max_residual": format_scalar(resid),
        "pass": rows_ok and balance_ok,
    }
