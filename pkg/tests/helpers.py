"""Shared builders for the test suite."""
import json
import random
from fractions import Fraction

from abtree.graph import kernel_from_rows

EXAMPLE_ROWS = [["0", "1/3", "2/3"], ["1/5", "0", "4/5"], ["1/7", "6/7", "0"]]
EXAMPLE_TEXT = json.dumps({"labels": ["1", "2", "3"], "rows": EXAMPLE_ROWS})


def example_kernel():
    return kernel_from_rows([[Fraction(x) for x in r] for r in EXAMPLE_ROWS], ("1", "2", "3"))


def random_support(n, rng, extra=0.5):
    """Symmetric connected edge set: a random spanning tree plus extra pairs."""
    edges = set()
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((a, b))
        edges.add((b, a))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < extra:
                edges.add((a, b))
                edges.add((b, a))
    return edges


def random_kernel(n, rng, extra=0.5, loops=0.0, max_weight=9):
    """Random rational kernel with a connected symmetric support."""
    edges = random_support(n, rng, extra)
    for a in range(n):
        if n == 1 or rng.random() < loops:
            edges.add((a, a))
    rows = []
    for a in range(n):
        w = [rng.randint(1, max_weight) if (a, b) in edges else 0 for b in range(n)]
        s = sum(w)
        rows.append([Fraction(x, s) for x in w])
    return kernel_from_rows(rows, tuple(str(i + 1) for i in range(n)))


def kernels(count, sizes, seed, **kw):
    rng = random.Random(seed)
    return [random_kernel(rng.choice(sizes), rng, **kw) for _ in range(count)]


def random_reversible_kernel(n, rng, extra=0.5, max_weight=9):
    """Random walk on a graph with symmetric integer conductances."""
    edges = random_support(n, rng, extra)
    c = {}
    for a, b in edges:
        if a < b:
            c[(a, b)] = c[(b, a)] = rng.randint(1, max_weight)
    rows = []
    for a in range(n):
        s = sum(c.get((a, b), 0) for b in range(n))
        rows.append([Fraction(c.get((a, b), 0), s) for b in range(n)])
    return kernel_from_rows(rows, tuple(str(i + 1) for i in range(n)))
