"""Pure-Python sampling kernels; fallback for the compiled ``_ckernels``.

Both modules expose the same functions with the same signatures and return
bit-identical arrays for identical inputs.
"""
import numpy as np

from .rng import MASK64, GOLDEN, mix64, stream_state

_INV_2_53 = 2.0 ** -53

OK = 0
BUDGET_EXCEEDED = 1


def _pick(state, cum, lo, hi):
    state = (state + GOLDEN) & MASK64
    u = (mix64(state) >> 11) * _INV_2_53
    k = lo
    while k < hi - 1 and u >= cum[k]:
        k += 1
    return state, k


def cover_trees(indptr, indices, cum, n, root, start_cum, seed, first_trial, count, budget, last_exit):
    """Walk to the cover time once per trial and record the tree.

    ``last_exit`` selects the last-exit tree (rooted at the final vertex)
    instead of the first-entrance tree (rooted at the start). A non-empty
    ``start_cum`` draws the start from that law, otherwise the walk starts
    at ``root``. Returns ``(parents, roots, status)``.
    """
    indptr = list(indptr)
    indices = list(indices)
    cum = list(cum)
    start_cum = list(start_cum)
    parents = np.full((count, n), -1, dtype=np.int32)
    roots = np.zeros(count, dtype=np.int32)
    for t in range(count):
        state = stream_state(seed, first_trial + t)
        if start_cum:
            state, v = _pick(state, start_cum, 0, n)
        else:
            v = root
        start = v
        parent = [-1] * n
        seen = [False] * n
        seen[v] = True
        nseen = 1
        steps = 0
        while nseen < n:
            if steps >= budget:
                return parents, roots, BUDGET_EXCEEDED
            state, k = _pick(state, cum, indptr[v], indptr[v + 1])
            w = indices[k]
            steps += 1
            if last_exit:
                parent[v] = w
                parent[w] = -1
            elif not seen[w]:
                parent[w] = v
            if not seen[w]:
                seen[w] = True
                nseen += 1
            v = w
        if last_exit:
            roots[t] = v
        else:
            roots[t] = start
        parents[t] = parent
    return parents, roots, OK


def wilson_trees(indptr, indices, cum, n, root, seed, first_trial, count, budget):
    """Loop-erased random walk trees rooted at ``root``, one per trial."""
    indptr = list(indptr)
    indices = list(indices)
    cum = list(cum)
    parents = np.full((count, n), -1, dtype=np.int32)
    for t in range(count):
        state = stream_state(seed, first_trial + t)
        nxt = [-1] * n
        in_tree = [False] * n
        in_tree[root] = True
        steps = 0
        for i in range(n):
            u = i
            while not in_tree[u]:
                if steps >= budget:
                    return parents, BUDGET_EXCEEDED
                state, k = _pick(state, cum, indptr[u], indptr[u + 1])
                nxt[u] = indices[k]
                u = nxt[u]
                steps += 1
            u = i
            while not in_tree[u]:
                in_tree[u] = True
                u = nxt[u]
        nxt[root] = -1
        parents[t] = nxt
    return parents, OK


def tree_chain_codes(indptr, indices, cum, n, parent0, root0, seed, stream, steps):
    """Run the root-move chain and return an integer code per visited state."""
    indptr = list(indptr)
    indices = list(indices)
    cum = list(cum)
    parent = list(parent0)
    r = root0
    state = stream_state(seed, stream)
    codes = np.zeros(steps, dtype=np.int64)
    base = n + 1
    for s in range(steps):
        state, k = _pick(state, cum, indptr[r], indptr[r + 1])
        r2 = indices[k]
        parent[r] = r2
        parent[r2] = -1
        r = r2
        code = r
        for v in range(n):
            code = code * base + parent[v] + 1
        codes[s] = code
    return codes
