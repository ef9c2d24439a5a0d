"""Collections of heaps of directed edges, heaps of cycles, and the
signed-sum/inversion machinery built on them.

A collection stores, for every vertex ``u``, the ordered targets of the
edges ``(u, target)``. Index 0 is the first (bottom) edge, the last index the
top edge. Weights multiply ``K[u][target]`` for whatever kernel ``K`` the
caller passes (normally the reversed kernel).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

from .graph import MarkovKernel, RootedTree, check_path


class HeapError(ValueError):
    pass


@dataclass(frozen=True)
class HeapCollection:
    heaps: tuple

    def __post_init__(self):
        object.__setattr__(self, "heaps", tuple(tuple(int(x) for x in h) for h in self.heaps))

    @classmethod
    def empty(cls, n: int) -> "HeapCollection":
        return cls(((),) * n)

    @property
    def n(self) -> int:
        return len(self.heaps)

    def __len__(self) -> int:
        return sum(len(h) for h in self.heaps)

    def is_empty(self) -> bool:
        return all(not h for h in self.heaps)

    def edges(self):
        for u, h in enumerate(self.heaps):
            for v in h:
                yield (u, v)

    def passport(self) -> tuple:
        out = [len(h) for h in self.heaps]
        inn = [0] * self.n
        for h in self.heaps:
            for v in h:
                inn[v] += 1
        return tuple(out), tuple(inn)

    def is_balanced(self) -> bool:
        out, inn = self.passport()
        return out == inn

    def weight(self, K: MarkovKernel):
        w = K.one()
        for u, v in self.edges():
            w *= K[u, v]
        return w

    def to_json_obj(self, labels) -> dict:
        return {labels[u]: [labels[v] for v in h] for u, h in enumerate(self.heaps)}

    @classmethod
    def from_json_obj(cls, obj: dict, labels) -> "HeapCollection":
        index = {lab: i for i, lab in enumerate(labels)}
        heaps = [[] for _ in labels]
        for u, targets in obj.items():
            heaps[index[u]] = [index[v] for v in targets]
        return cls(tuple(tuple(h) for h in heaps))


def heap_encode(path, n: int | None = None) -> HeapCollection:
    """Each step ``w_j -> w_{j+1}`` becomes the edge ``(w_{j+1}, w_j)`` under ``w_{j+1}``."""
    path = check_path(path)
    if n is None:
        n = max(path) + 1
    heaps = [[] for _ in range(n)]
    for a, b in zip(path, path[1:]):
        heaps[b].append(a)
    return HeapCollection(tuple(tuple(h) for h in heaps))


def heap_decode(H: HeapCollection, start_hint: int | None = None) -> tuple:
    """Recover the unique path whose encoding is ``H``."""
    out, inn = H.passport()
    m = len(H)
    surplus = [u for u in range(H.n) if out[u] - inn[u] == 1]
    if any(abs(out[u] - inn[u]) > 1 for u in range(H.n)) or len(surplus) > 1:
        raise HeapError("passport is not that of a path")
    if surplus:
        end = surplus[0]
    elif start_hint is not None:
        end = start_hint
    elif m == 0:
        raise HeapError("empty collection needs a start hint")
    else:
        raise HeapError("balanced collection needs a start hint")
    heaps = [list(h) for h in H.heaps]
    rev = [end]
    p = end
    while heaps[p]:
        p = heaps[p].pop()
        rev.append(p)
    if any(heaps):
        u = next(i for i, h in enumerate(heaps) if h)
        raise HeapError(f"reconstruction stopped at {p} with edges left at vertex {u}")
    path = tuple(reversed(rev))
    if start_hint is not None and surplus and path[0] != start_hint:
        raise HeapError(f"decoded path starts at {path[0]}, not {start_hint}")
    return path


def concat(H: HeapCollection, H2: HeapCollection) -> HeapCollection:
    if H.n != H2.n:
        raise HeapError("collections on different vertex sets")
    return HeapCollection(tuple(a + b for a, b in zip(H.heaps, H2.heaps)))


def prefix_remove(H: HeapCollection, P: HeapCollection) -> HeapCollection:
    if H.n != P.n:
        raise HeapError("collections on different vertex sets")
    rest = []
    for u, (h, p) in enumerate(zip(H.heaps, P.heaps)):
        if h[: len(p)] != p:
            raise HeapError(f"heap at vertex {u} does not start with the given prefix")
        rest.append(h[len(p):])
    return HeapCollection(tuple(rest))


def tree_heap(t: RootedTree) -> HeapCollection:
    return HeapCollection(tuple((p,) if p >= 0 else () for p in t.parent))


def truncated_heap(path, n: int) -> HeapCollection:
    """Encoding of a covering path with its first-entrance tree edges removed."""
    from .graph import first_entrance_tree

    t = first_entrance_tree(path, n, strict=True)
    return prefix_remove(heap_encode(path, n), tree_heap(t))


@dataclass(frozen=True, order=True)
class Cycle:
    """Simple directed cycle ``c0 -> c1 -> ... -> c0``, rotated so the
    smallest vertex comes first. Ordered by (length, vertices)."""

    length: int
    vertices: tuple

    @classmethod
    def of(cls, vertices) -> "Cycle":
        vs = tuple(int(v) for v in vertices)
        if not vs:
            raise HeapError("a cycle needs at least one vertex")
        if len(set(vs)) != len(vs):
            raise HeapError(f"cycle {vs} is not simple")
        i = vs.index(min(vs))
        return cls(len(vs), vs[i:] + vs[:i])

    def edges(self) -> list:
        vs = self.vertices
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    def succ(self) -> dict:
        return dict(self.edges())

    def weight(self, K: MarkovKernel):
        w = K.one()
        for a, b in self.edges():
            w *= K[a, b]
        return w

    def heap(self, n: int) -> HeapCollection:
        heaps = [()] * n
        for a, b in self.edges():
            heaps[a] = (b,)
        return HeapCollection(tuple(heaps))

    def intersects(self, other: "Cycle") -> bool:
        return not set(self.vertices).isdisjoint(other.vertices)


def pop_cycle(H: HeapCollection, start: int):
    """Follow first edges from ``start`` until a vertex repeats; remove that cycle."""
    if not H.is_balanced():
        raise HeapError("pop_cycle needs a balanced collection")
    if not H.heaps[start]:
        raise HeapError(f"heap at vertex {start} is empty")
    path = [start]
    pos = {start: 0}
    v = start
    while True:
        v = H.heaps[v][0]
        if v in pos:
            cyc = path[pos[v]:]
            break
        pos[v] = len(path)
        path.append(v)
    heaps = list(H.heaps)
    for u in cyc:
        heaps[u] = heaps[u][1:]
    return Cycle.of(cyc), HeapCollection(tuple(heaps))


def cycle_decomposition(H: HeapCollection) -> list:
    """Pop cycles from the lowest-index nonempty heap until nothing is left."""
    if not H.is_balanced():
        raise HeapError("collection is not a heap of cycles (unbalanced passport)")
    cycles = []
    while not H.is_empty():
        u = next(i for i, h in enumerate(H.heaps) if h)
        c, H = pop_cycle(H, u)
        cycles.append(c)
    return cycles


def heap_of_cycles(cycles, n: int) -> HeapCollection:
    """Stack cycles bottom to top."""
    H = HeapCollection.empty(n)
    for c in cycles:
        H = concat(H, c.heap(n))
    return H


def xi_passport(t: RootedTree, f: int, free: dict) -> tuple:
    """Passport of the truncated-heap family for tree ``t``, final leaf ``f``
    and free multiplicities ``free[u]`` (``n_u``; zero at ``f``)."""
    deg = t.children_count()
    n = t.n
    out = []
    inn = []
    for u in range(n):
        nu = free.get(u, 0)
        out.append(nu + (deg[u] - 1 if deg[u] > 0 else 0))
        inn.append(nu + (1 if deg[u] == 0 and u != f else 0))
    return tuple(out), tuple(inn)


def xi_free_counts(H: HeapCollection, t: RootedTree, f: int):
    """Solve for the ``n_u`` of ``H`` in the truncated-heap family, or ``None``."""
    deg = t.children_count()
    if deg[f] != 0:
        raise HeapError(f"vertex {f} is internal; no covering path ends there")
    out, inn = H.passport()
    free = {}
    for u in range(H.n):
        nu = out[u] - (deg[u] - 1 if deg[u] > 0 else 0)
        if nu < 0 or (u == f and nu != 0):
            return None
        if inn[u] != nu + (1 if deg[u] == 0 and u != f else 0):
            return None
        free[u] = nu
    return free


def xi_membership(H: HeapCollection, t: RootedTree, f: int) -> bool:
    return xi_free_counts(H, t, f) is not None


def simple_cycles(K: MarkovKernel, avoid=()) -> list:
    """All simple directed cycles of ``support(K)`` avoiding the given vertices."""
    avoid = set(avoid)
    out = []
    n = K.n

    def extend(path, onpath):
        last = path[-1]
        for v in K.neighbors(last):
            if v == path[0]:
                out.append(Cycle.of(path))
            elif v > path[0] and v not in onpath and v not in avoid:
                onpath.add(v)
                path.append(v)
                extend(path, onpath)
                path.pop()
                onpath.discard(v)

    for s in range(n):
        if s not in avoid:
            extend([s], {s})
    return sorted(out)


def trivial_heaps(K: MarkovKernel, f: int):
    """Yield every set of pairwise disjoint cycles avoiding ``f``."""
    cycles = simple_cycles(K, avoid=(f,))

    def rec(i, used, chosen):
        if i == len(cycles):
            yield tuple(chosen)
            return
        yield from rec(i + 1, used, chosen)
        c = cycles[i]
        if used.isdisjoint(c.vertices):
            chosen.append(c)
            yield from rec(i + 1, used | set(c.vertices), chosen)
            chosen.pop()

    yield from rec(0, frozenset(), [])


def trivial_signed_sum(K: MarkovKernel, f: int, max_n: int = 8):
    """Sum over disjoint cycle sets avoiding ``f`` of ``(-1)^#cycles`` times their weight."""
    if K.n > max_n:
        raise HeapError(f"cycle-set enumeration limited to n <= {max_n}")
    total = K.one() * 0
    for cs in trivial_heaps(K, f):
        w = K.one()
        for c in cs:
            w *= c.weight(K)
        total += -w if len(cs) % 2 else w
    return total


def _compositions(total: int, caps: list):
    """Ways to split ``total`` into len(caps) parts, part i at most caps[i]."""
    if not caps:
        if total == 0:
            yield ()
        return
    first_cap = min(caps[0], total)
    rest_cap = sum(caps[1:])
    for x in range(max(0, total - rest_cap), first_cap + 1):
        for tail in _compositions(total - x, caps[1:]):
            yield (x,) + tail


def passport_weight_sum(K: MarkovKernel, out, inn):
    """Total weight of all collections with passport ``(out, inn)``.

    Groups collections by their edge-count matrix; a matrix with row ``a_u``
    stands for ``multinomial(a_u)`` orderings of the heap at ``u``.
    """
    n = K.n
    if sum(out) != sum(inn):
        return K.one() * 0
    nbrs = [list(K.neighbors(u)) for u in range(n)]
    total = [K.one() * 0]

    def rec(u, remaining_in, acc):
        if u == n:
            if not any(remaining_in):
                total[0] += acc
            return
        caps = [remaining_in[v] for v in nbrs[u]]
        if out[u] > sum(caps):
            return
        for comp in _compositions(out[u], caps):
            w = acc * factorial(out[u])
            rem = list(remaining_in)
            for v, a in zip(nbrs[u], comp):
                if a:
                    w = w * K[u, v] ** a / factorial(a)
                    rem[v] -= a
            rec(u + 1, rem, w)

    rec(0, list(inn), K.one())
    return total[0]


def heap_cycles_weight_sum(K: MarkovKernel, f: int, max_edges: int, max_n: int = 6):
    """Total weight of heaps of cycles avoiding ``f`` with at most ``max_edges`` edges."""
    if K.n > max_n or max_edges > 64:
        raise HeapError("heap-of-cycles enumeration needs n <= 6 and max_edges <= 64")
    verts = [u for u in range(K.n) if u != f]
    total = K.one() * 0
    for counts in bounded_vectors(len(verts), max_edges):
        N = [0] * K.n
        for u, c in zip(verts, counts):
            N[u] = c
        if _balanced_feasible(K, N, f):
            total += passport_weight_sum(K, N, N)
    return total


def bounded_vectors(k: int, budget: int):
    if k == 0:
        yield ()
        return
    for x in range(budget + 1):
        for rest in bounded_vectors(k - 1, budget - x):
            yield (x,) + rest


def _balanced_feasible(K: MarkovKernel, N, f) -> bool:
    # a vertex can only receive edges from support neighbours that emit
    for u in range(K.n):
        if N[u] and sum(N[v] for v in K.neighbors(u) if v != f) == 0:
            return False
    return True


def enumerate_collections(K: MarkovKernel, out, inn):
    """Yield every collection with passport ``(out, inn)`` (brute force)."""
    n = K.n
    nbrs = [list(K.neighbors(u)) for u in range(n)]

    def rec(u, remaining_in, heaps):
        if u == n:
            if not any(remaining_in):
                yield HeapCollection(tuple(heaps))
            return
        for seq in itertools.product(nbrs[u], repeat=out[u]):
            rem = list(remaining_in)
            ok = True
            for v in seq:
                rem[v] -= 1
                if rem[v] < 0:
                    ok = False
                    break
            if ok:
                heaps.append(seq)
                yield from rec(u + 1, rem, heaps)
                heaps.pop()

    yield from rec(0, list(inn), [])


def enumerate_heaps_of_cycles(K: MarkovKernel, f: int, max_edges: int):
    """Yield every heap of cycles avoiding ``f`` with at most ``max_edges`` edges."""
    verts = [u for u in range(K.n) if u != f]
    for counts in bounded_vectors(len(verts), max_edges):
        N = [0] * K.n
        for u, c in zip(verts, counts):
            N[u] = c
        yield from enumerate_collections(K, N, N)


def top_cycles(h: HeapCollection) -> list:
    """Cycles formed by the top edges; each can be lifted off ``h``."""
    succ = {u: hs[-1] for u, hs in enumerate(h.heaps) if hs}
    found = []
    state = {}
    for s in succ:
        if s in state:
            continue
        path = []
        v = s
        while v in succ and v not in state:
            state[v] = 1
            path.append(v)
            v = succ[v]
        if v in succ and state.get(v) == 1 and v in path:
            found.append(Cycle.of(path[path.index(v):]))
        for x in path:
            state[x] = 2
    return sorted(found)


def lift_cycle(h: HeapCollection, c: Cycle) -> HeapCollection:
    heaps = list(h.heaps)
    for a, b in c.edges():
        if not heaps[a] or heaps[a][-1] != b:
            raise HeapError(f"cycle {c.vertices} is not on top of the collection")
        heaps[a] = heaps[a][:-1]
    return HeapCollection(tuple(heaps))


def drop_cycle(h: HeapCollection, c: Cycle) -> HeapCollection:
    heaps = list(h.heaps)
    for a, b in c.edges():
        heaps[a] = heaps[a] + (b,)
    return HeapCollection(tuple(heaps))


def pair_involution(h: HeapCollection, s):
    """Sign-reversing involution on (heap of cycles, disjoint cycle set) pairs.

    The candidates are the cycles of ``s`` together with the top cycles of
    ``h`` that meet no cycle of ``s``; the greatest one switches sides, and
    lands on top of ``h`` when it moves into the heap.
    """
    s = frozenset(s)
    if h.is_empty() and not s:
        raise HeapError("(empty, empty) is the fixed point")
    if not h.is_balanced():
        raise HeapError("first component must be a heap of cycles")
    cands = set(s)
    for c in top_cycles(h):
        if not any(c.intersects(d) for d in s):
            cands.add(c)
    c = max(cands)
    if c in s:
        return drop_cycle(h, c), s - {c}
    return lift_cycle(h, c), s | {c}


def signed_pair_weight(h: HeapCollection, s, K: MarkovKernel):
    w = h.weight(K)
    for c in s:
        w *= c.weight(K)
    return -w if len(s) % 2 else w
