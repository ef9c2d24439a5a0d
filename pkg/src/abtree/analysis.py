"""Stationary law, time reversal, principal minors and spanning-tree sums."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import MarkovKernel, RootedTree, format_scalar
from .linalg import det, solve_exact

FLOAT_TOL = 1e-10
MAX_ENUM_N = 8


class EnumerationGuardError(ValueError):
    pass


def stationary_distribution(M: MarkovKernel) -> tuple:
    """Invariant law ``rho`` of ``M``.

    Solves ``rho Q = (0, ..., 0, 1)`` where ``Q`` is ``Id - M`` with its last
    column replaced by ones (the last balance equation is redundant).
    """
    n = M.n
    if n == 1:
        return (M.one(),)
    # Q^T rho^T = e_n
    qt = []
    for j in range(n - 1):
        qt.append([(M.one() if i == j else 0) - M[i, j] for i in range(n)])
    qt.append([M.one()] * n)
    rhs = [0] * (n - 1) + [1]
    if M.exact:
        rho = solve_exact(qt, rhs)
    else:
        rho = [float(x) for x in np.linalg.solve(np.array(qt, dtype=float), np.array(rhs, dtype=float))]
    return tuple(rho)


def reversed_kernel(M: MarkovKernel, rho=None) -> MarkovKernel:
    """Time reversal ``Mrev[x][y] = rho[y] M[y][x] / rho[x]``."""
    if rho is None:
        rho = stationary_distribution(M)
    n = M.n
    rows = [[rho[y] * M[y, x] / rho[x] for y in range(n)] for x in range(n)]
    if not M.exact:
        # renormalize rounding drift so the float kernel validates
        rows = [[x / sum(r) for x in r] for r in rows]
    return MarkovKernel(tuple(tuple(r) for r in rows), M.labels, exact=M.exact)


def is_reversible(M: MarkovKernel, rho=None) -> bool:
    if rho is None:
        rho = stationary_distribution(M)
    n = M.n
    for a in range(n):
        for b in range(a + 1, n):
            lhs, rhs = rho[a] * M[a, b], rho[b] * M[b, a]
            if M.exact:
                if lhs != rhs:
                    return False
            elif abs(lhs - rhs) > FLOAT_TOL * max(abs(lhs), abs(rhs), 1e-300):
                return False
    return True


def principal_minor_det(M: MarkovKernel, r: int):
    """``det(Id - M^(r))`` where ``M^(r)`` drops row and column ``r``."""
    idx = [i for i in range(M.n) if i != r]
    one = M.one()
    a = [[(one if i == j else 0) - M[i, j] for j in idx] for i in idx]
    return det(a, M.exact)


def tree_weight(t: RootedTree, K: MarkovKernel):
    """Product of ``K[u][parent(u)]`` over the tree edges."""
    w = K.one()
    for u, p in t.edges():
        x = K[u, p]
        if x == 0:
            raise ValueError(f"tree edge ({u},{p}) is outside the kernel support")
        w *= x
    return w


@dataclass(frozen=True)
class TreeEnsemble:
    root: int
    trees: tuple
    weights: tuple
    total: object


def iter_rooted_spanning_trees(M: MarkovKernel, r: int):
    """Yield every spanning tree rooted at ``r`` with edges in ``support(M)``."""
    n = M.n
    others = [u for u in range(n) if u != r]
    choices = [[v for v in M.neighbors(u) if v != u] for u in others]
    for combo in itertools.product(*choices):
        parent = [-1] * n
        for u, p in zip(others, combo):
            parent[u] = p
        ok = True
        state = [0] * n  # 0 unknown, 1 on stack, 2 reaches root
        state[r] = 2
        for u in others:
            path = []
            v = u
            while state[v] == 0:
                state[v] = 1
                path.append(v)
                v = parent[v]
            if state[v] == 1:
                ok = False
                break
            for x in path:
                state[x] = 2
        if ok:
            yield RootedTree(r, tuple(parent))


def enumerate_rooted_spanning_trees(M: MarkovKernel, r: int, weight_kernel: MarkovKernel | None = None) -> TreeEnsemble:
    if M.n > MAX_ENUM_N:
        raise EnumerationGuardError(f"enumeration limited to n <= {MAX_ENUM_N}, got {M.n}")
    K = M if weight_kernel is None else weight_kernel
    trees = tuple(iter_rooted_spanning_trees(M, r))
    weights = tuple(tree_weight(t, K) for t in trees)
    total = sum(weights, K.one() * 0)
    return TreeEnsemble(r, trees, weights, total)


def matrix_tree_check(M: MarkovKernel, r: int, Mrev: MarkovKernel | None = None) -> dict:
    """Compare both principal minors with both tree-mass sums at root ``r``."""
    if Mrev is None:
        Mrev = reversed_kernel(M)
    det_m = principal_minor_det(M, r)
    det_rev = principal_minor_det(Mrev, r)
    sum_m = enumerate_rooted_spanning_trees(M, r).total
    sum_rev = enumerate_rooted_spanning_trees(M, r, weight_kernel=Mrev).total
    vals = [det_m, det_rev, sum_m, sum_rev]
    if M.exact:
        ok = all(v == det_m for v in vals)
    else:
        ok = all(abs(v - det_m) <= FLOAT_TOL * max(1.0, abs(det_m)) for v in vals)
    return {
        "root": M.labels[r],
        "det_M": format_scalar(det_m),
        "det_Mrev": format_scalar(det_rev),
        "tree_sum_M": format_scalar(sum_m),
        "tree_sum_Mrev": format_scalar(sum_rev),
        "pass": ok,
    }


def determinant_vector(M: MarkovKernel) -> tuple:
    """``(det(Id - M^(w)))_w`` normalized to sum to one."""
    d = [principal_minor_det(M, w) for w in range(M.n)]
    s = sum(d)
    return tuple(x / s for x in d)
