"""Golf sequences: balls played from start vertices until each drops into a
distinct, still-empty hole.

A ball's trajectory ``w_0 -> ... -> w_m`` is a walk of the reversed kernel,
so its heap encoding stores each step ``(w_i, w_{i+1})`` under ``w_i`` in
play order. Reading first edges from ``S_1`` then replays ball 1, and so
on; this is what makes the encoding injective and what lets a truncated
heap be split into a golf part (bottom) and a heap of cycles (top).
"""
from __future__ import annotations

from dataclasses import dataclass

from .graph import MarkovKernel, RootedTree
from .heaps import (
    HeapCollection,
    HeapError,
    bounded_vectors,
    concat,
    enumerate_collections,
    passport_weight_sum,
    xi_passport,
)
from .rng import RandomSource
from .samplers import csr_tables

DEFAULT_BUDGET = 10**7


class GolfError(ValueError):
    pass


@dataclass(frozen=True)
class GolfConfig:
    holes: frozenset
    starts: tuple

    def __post_init__(self):
        object.__setattr__(self, "holes", frozenset(int(h) for h in self.holes))
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))
        bad = [s for s in self.starts if s in self.holes]
        if bad:
            raise GolfError(f"start vertex {bad[0]} is a hole")

    @property
    def nb(self) -> int:
        return len(self.starts)

    def counts(self, n: int) -> list:
        c = [0] * n
        for s in self.starts:
            c[s] += 1
        return c


@dataclass(frozen=True)
class GolfSequence:
    paths: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(tuple(int(v) for v in p) for p in self.paths))

    @property
    def finals(self) -> tuple:
        return tuple(p[-1] for p in self.paths)

    def weight(self, Mrev: MarkovKernel):
        w = Mrev.one()
        for p in self.paths:
            for a, b in zip(p, p[1:]):
                w *= Mrev[a, b]
        return w

    def to_json_obj(self, config: GolfConfig, labels) -> dict:
        obj = {
            "holes": [labels[h] for h in sorted(config.holes)],
            "starts": [labels[s] for s in config.starts],
            "paths": [[labels[v] for v in p] for p in self.paths],
        }
        if len(config.holes) == config.nb + 1:
            obj["free"] = labels[free_hole(self, config)]
        return obj


@dataclass(frozen=True)
class XiWitness:
    golf_part: HeapCollection
    cycle_part: HeapCollection
    sequence: GolfSequence

    def recompose(self) -> HeapCollection:
        return concat(self.golf_part, self.cycle_part)


def golf_config_for_tree(t: RootedTree) -> GolfConfig:
    """Holes at the leaves; ``deg(u) - 1`` balls at each internal ``u``, in vertex order."""
    if not t.is_spanning() or t.n < 2:
        raise GolfError("need a spanning tree on at least two vertices")
    deg = t.children_count()
    starts = []
    for u in t.internal():
        starts.extend([u] * (deg[u] - 1))
    return GolfConfig(frozenset(t.leaves()), tuple(starts))


def is_golf_sequence(paths, config: GolfConfig, kernel: MarkovKernel | None = None) -> bool:
    if len(paths) != config.nb:
        return False
    available = set(config.holes)
    for start, p in zip(config.starts, paths):
        p = tuple(p)
        if not p or p[0] != start:
            return False
        if kernel is not None and any(kernel[a, b] == 0 for a, b in zip(p, p[1:])):
            return False
        hits = [i for i, v in enumerate(p) if v in available]
        if hits != [len(p) - 1]:
            return False
        available.discard(p[-1])
    return True


def stochastic_golf(Mrev: MarkovKernel, config: GolfConfig, rng: RandomSource, budget: int = DEFAULT_BUDGET) -> GolfSequence:
    """Play the balls in order with the reversed kernel."""
    if config.nb > len(config.holes):
        raise GolfError("more balls than holes")
    indptr, indices, cum = csr_tables(Mrev)
    available = set(config.holes)
    paths = []
    steps = 0
    for s in config.starts:
        p = [s]
        v = s
        while v not in available:
            if steps >= budget:
                raise GolfError(f"golf play exceeded {budget} steps")
            v = int(indices[rng.pick(cum, int(indptr[v]), int(indptr[v + 1]))])
            p.append(v)
            steps += 1
        available.discard(v)
        paths.append(tuple(p))
    return GolfSequence(tuple(paths))


def golf_heap_encode(seq: GolfSequence, n: int) -> HeapCollection:
    heaps = [[] for _ in range(n)]
    for p in seq.paths:
        for a, b in zip(p, p[1:]):
            heaps[a].append(b)
    return HeapCollection(tuple(tuple(h) for h in heaps))


def _extract(H: HeapCollection, config: GolfConfig):
    """Replay the balls along first edges; return the sequence and the rest."""
    ptr = [0] * H.n
    available = set(config.holes)
    paths = []
    for s in config.starts:
        p = [s]
        v = s
        while v not in available:
            if ptr[v] >= len(H.heaps[v]):
                raise GolfError(f"ball from {s} stuck at {v} (empty heap)")
            nxt = H.heaps[v][ptr[v]]
            ptr[v] += 1
            v = nxt
            p.append(v)
        available.discard(v)
        paths.append(tuple(p))
    used = HeapCollection(tuple(h[: ptr[u]] for u, h in enumerate(H.heaps)))
    rest = HeapCollection(tuple(h[ptr[u]:] for u, h in enumerate(H.heaps)))
    return GolfSequence(tuple(paths)), used, rest


def golf_heap_decode(H: HeapCollection, config: GolfConfig) -> GolfSequence:
    seq, _, rest = _extract(H, config)
    if not rest.is_empty():
        raise GolfError("edges left over after replaying every ball")
    return seq


def free_hole(seq: GolfSequence, config: GolfConfig) -> int:
    if len(config.holes) != config.nb + 1:
        raise GolfError("exactly one hole must stay free")
    left = config.holes - set(seq.finals)
    if len(left) != 1:
        raise GolfError("sequence does not leave exactly one free hole")
    return next(iter(left))


def m_free_counts(H: HeapCollection, config: GolfConfig, f: int):
    """``n_u`` making ``H``'s passport ``(n + Nb, n + 1[holes - f])``, or ``None``."""
    nb = config.counts(H.n)
    out, inn = H.passport()
    free = {}
    for u in range(H.n):
        nu = out[u] - nb[u]
        if nu < 0 or inn[u] != nu + (1 if u in config.holes and u != f else 0):
            return None
        free[u] = nu
    if free[f] != 0:
        return None
    return free


def decompose_truncated_heap(H: HeapCollection, config: GolfConfig, f: int) -> XiWitness:
    """Split ``H`` into a golf heap leaving ``f`` free and an ``f``-free heap of cycles."""
    if f not in config.holes or len(config.holes) != config.nb + 1:
        raise GolfError("need f among the holes and exactly one more hole than balls")
    free = m_free_counts(H, config, f)
    if free is None:
        out, inn = H.passport()
        raise GolfError(f"passport out={list(out)} in={list(inn)} is outside the family for f={f}")
    seq, used, rest = _extract(H, config)
    if not rest.is_balanced() or rest.heaps[f]:
        raise HeapError("residual is not an f-free heap of cycles")
    return XiWitness(used, rest, seq)


def enumerate_m_family(K: MarkovKernel, config: GolfConfig, f: int, max_edges: int):
    """Every collection in the decomposable family with at most ``max_edges`` edges."""
    n = K.n
    nb = config.counts(n)
    if max_edges < config.nb:
        return
    verts = [u for u in range(n) if u != f]
    # edge count is sum(n_u) + Nb
    for counts in bounded_vectors(len(verts), max_edges - config.nb):
        free = dict(zip(verts, counts))
        free[f] = 0
        out = [free[u] + nb[u] for u in range(n)]
        inn = [free[u] + (1 if u in config.holes and u != f else 0) for u in range(n)]
        yield from enumerate_collections(K, out, inn)


def xi_weight_sum(Mrev: MarkovKernel, t: RootedTree, f: int, max_edges: int):
    """Weight of truncated-heap collections for ``(t, f)`` with at most ``max_edges`` edges."""
    verts = [u for u in range(t.n) if u != f]
    deg = t.children_count()
    base = sum(deg[u] - 1 for u in range(t.n) if deg[u] > 0)
    total = Mrev.one() * 0
    if max_edges < base:
        return total
    for counts in bounded_vectors(len(verts), max_edges - base):
        out, inn = xi_passport(t, f, dict(zip(verts, counts)))
        total += passport_weight_sum(Mrev, out, inn)
    return total
