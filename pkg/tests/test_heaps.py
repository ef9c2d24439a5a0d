import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abtree.analysis import principal_minor_det, reversed_kernel
from abtree.graph import RootedTree, first_entrance_tree, path_weight
from abtree.heaps import (
    Cycle,
    HeapCollection,
    HeapError,
    concat,
    cycle_decomposition,
    enumerate_collections,
    enumerate_heaps_of_cycles,
    heap_cycles_weight_sum,
    heap_decode,
    heap_encode,
    heap_of_cycles,
    lift_cycle,
    pair_involution,
    passport_weight_sum,
    pop_cycle,
    prefix_remove,
    signed_pair_weight,
    simple_cycles,
    top_cycles,
    tree_heap,
    trivial_heaps,
    trivial_signed_sum,
    truncated_heap,
    xi_membership,
)
from abtree.rng import RandomSource
from abtree.samplers import walk_until_cover
from helpers import random_kernel, example_kernel

SEVEN_WALK = [0, 3, 0, 1, 0, 1, 0, 3, 0, 3, 4, 5, 4, 6, 4, 3, 4, 5, 2]
A, B = 0, 1


def random_walk(n, length, rng):
    path = [rng.randrange(n)]
    for _ in range(length):
        path.append(rng.randrange(n))
    return path


def random_heap_of_cycles(K, f, rng, k):
    cycles = simple_cycles(K, avoid=(f,))
    return heap_of_cycles([rng.choice(cycles) for _ in range(k)], K.n)


def random_trivial(K, f, rng):
    chosen = []
    for c in rng.sample(simple_cycles(K, avoid=(f,)), k=len(simple_cycles(K, avoid=(f,)))):
        if rng.random() < 0.5 and all(not c.intersects(d) for d in chosen):
            chosen.append(c)
    return frozenset(chosen)


def test_seven_walk_heap_at_v3():
    H = heap_encode(SEVEN_WALK, 7)
    assert H.heaps[3] == (0, 0, 0, 4)


def test_single_vertex_path_is_empty():
    assert heap_encode([A], 2).is_empty()
    assert heap_decode(HeapCollection.empty(2), start_hint=A) == (A,)


def test_back_and_forth():
    H = heap_encode([A, B, A], 2)
    assert H.heaps == ((B,), (A,))
    assert H.passport() == ((1, 1), (1, 1))
    assert heap_decode(H, start_hint=A) == (A, B, A)


def test_lone_edge_decodes_and_stray_edge_fails():
    H = HeapCollection(((B,), ()))
    assert heap_decode(H) == (B, A)
    stray = HeapCollection(((B,), (), (3,), ()))
    with pytest.raises(HeapError):
        heap_decode(stray)


def test_seven_walk_round_trip_and_truncation():
    H = heap_encode(SEVEN_WALK, 7)
    assert heap_decode(H) == tuple(SEVEN_WALK)
    t = first_entrance_tree(SEVEN_WALK, 7, strict=True)
    T = prefix_remove(H, tree_heap(t))
    assert T == truncated_heap(SEVEN_WALK, 7)
    assert T.heaps == ((3, 1, 1, 3), (0,), (), (0, 0, 4), (5, 6, 3), (4,), ())
    assert concat(tree_heap(t), T) == H


def test_tree_heap_of_star():
    t = RootedTree(0, (-1, 0, 0))
    H = tree_heap(t)
    assert H.heaps == ((), (0,), (0,))
    assert H.passport() == ((0, 1, 1), (2, 0, 0))
    assert tree_heap(RootedTree(0, (-1,))).is_empty()


def test_prefix_remove_errors_name_the_vertex():
    H = HeapCollection(((1,), (0,)))
    with pytest.raises(HeapError, match="vertex 1"):
        prefix_remove(H, HeapCollection(((1,), (1,))))
    assert prefix_remove(H, H).is_empty()
    assert concat(H, HeapCollection.empty(2)) == H


def test_pop_cycle_cases():
    c, rest = pop_cycle(heap_encode([A, B, A], 2), A)
    assert c == Cycle.of([A, B]) and rest.is_empty()
    two = heap_of_cycles([Cycle.of([A, B])] * 2, 2)
    c, rest = pop_cycle(two, A)
    assert rest == heap_of_cycles([Cycle.of([A, B])], 2)
    with pytest.raises(HeapError):
        pop_cycle(HeapCollection(((B,), ())), A)


def test_seven_walk_residual_cycles_have_length_two():
    # the residual of the golf split is a heap of three 2-cycles
    H = HeapCollection(((1, 3), (0,), (), (0, 4), (3,), (), ()))
    cycles = cycle_decomposition(H)
    assert [c.length for c in cycles] == [2, 2, 2]
    assert heap_of_cycles(cycles, 7).weight(dense_kernel(7)) == H.weight(dense_kernel(7))


def dense_kernel(n):
    return random_kernel(n, random.Random(n), extra=1.0)


def test_cycle_canonical_form():
    assert Cycle.of([3, 1, 2]).vertices == (1, 2, 3)
    assert Cycle.of([2]) < Cycle.of([0, 1])
    with pytest.raises(HeapError):
        Cycle.of([1, 2, 1])


def test_xi_membership_examples():
    star = RootedTree(0, (-1, 0, 0, 0))
    assert not xi_membership(HeapCollection.empty(4), star, 1)
    t = first_entrance_tree(SEVEN_WALK, 7, strict=True)
    assert xi_membership(truncated_heap(SEVEN_WALK, 7), t, 2)
    at_f = HeapCollection(((), (), (), (1,), (), (), ()))
    assert not xi_membership(at_f, t, 1)
    with pytest.raises(HeapError):
        xi_membership(HeapCollection.empty(7), t, 4)


def test_k3_signed_sums():
    M = example_kernel()
    R = reversed_kernel(M)
    assert trivial_signed_sum(R, 0) == Fraction(11, 35)
    assert trivial_signed_sum(M, 0) == 1 - Fraction(4, 5) * Fraction(6, 7)
    two = random_kernel(2, random.Random(0))
    assert trivial_signed_sum(two, 0) == 1


def test_k3_heap_series_is_geometric():
    R = reversed_kernel(example_kernel())
    assert heap_cycles_weight_sum(R, 0, 0) == 1
    q = Fraction(24, 35)
    for m in (1, 2, 5, 10):
        assert heap_cycles_weight_sum(R, 0, m) == sum(q ** k for k in range(m // 2 + 1))


def test_heap_series_guard():
    R = reversed_kernel(example_kernel())
    with pytest.raises(HeapError):
        heap_cycles_weight_sum(R, 0, 65)


@pytest.mark.parametrize("seed", range(4))
def test_passport_sum_matches_brute_force(seed):
    K = random_kernel(4, random.Random(seed), loops=0.3)
    for f in range(4):
        brute = sum((H.weight(K) for H in enumerate_heaps_of_cycles(K, f, 5)), Fraction(0))
        assert heap_cycles_weight_sum(K, f, 5) == brute


def test_heap_series_increases_toward_inverse_det():
    K = random_kernel(4, random.Random(21))
    limit = 1 / principal_minor_det(K, 0)
    prev = Fraction(0)
    for m in range(0, 9, 2):
        s = heap_cycles_weight_sum(K, 0, m)
        assert prev <= s < limit
        prev = s


def test_enumerated_collections_have_the_passport():
    K = random_kernel(3, random.Random(2), extra=1.0, loops=1.0)
    out, inn = (2, 1, 1), (1, 2, 1)
    found = list(enumerate_collections(K, out, inn))
    assert found and all(H.passport() == (out, inn) for H in found)
    assert len(set(found)) == len(found)
    assert sum((H.weight(K) for H in found), Fraction(0)) == passport_weight_sum(K, out, inn)


def test_involution_on_single_cycle():
    c = Cycle.of([A, B])
    h = heap_of_cycles([c], 2)
    h2, s2 = pair_involution(h, frozenset())
    assert h2.is_empty() and s2 == {c}
    with pytest.raises(HeapError):
        pair_involution(HeapCollection.empty(2), frozenset())


def test_top_cycles_are_liftable():
    K = random_kernel(5, random.Random(3), extra=1.0)
    rng = random.Random(4)
    for _ in range(200):
        h = random_heap_of_cycles(K, 0, rng, rng.randint(1, 6))
        tops = top_cycles(h)
        assert tops
        for i, c in enumerate(tops):
            assert not any(c.intersects(d) for d in tops[i + 1:])
            assert lift_cycle(h, c).is_balanced()


# property tests

@settings(max_examples=200)
@given(st.integers(1, 7), st.integers(0, 200), st.integers(0, 2**32))
def test_round_trip(n, length, seed):
    path = random_walk(n, length, random.Random(seed))
    H = heap_encode(path, n)
    assert heap_decode(H, start_hint=path[0]) == tuple(path)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32))
def test_weight_preservation(n, seed):
    rng = random.Random(seed)
    K = random_kernel(n, rng, loops=0.3)
    path = walk_until_cover(K, 0, RandomSource(seed, 0))
    assert heap_encode(path, n).weight(K) == path_weight(path, K, "backward")


@given(st.integers(1, 6), st.integers(0, 2**32))
def test_passport_additivity(n, seed):
    rng = random.Random(seed)
    H1 = heap_encode(random_walk(n, 20, rng), n)
    H2 = heap_encode(random_walk(n, 20, rng), n)
    (o1, i1), (o2, i2) = H1.passport(), H2.passport()
    o, i = concat(H1, H2).passport()
    assert o == tuple(a + b for a, b in zip(o1, o2))
    assert i == tuple(a + b for a, b in zip(i1, i2))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32))
def test_covering_path_passport(n, seed):
    K = random_kernel(n, random.Random(seed))
    path = walk_until_cover(K, seed % n, RandomSource(seed, 1))
    t = first_entrance_tree(path, n, strict=True)
    f = path[-1]
    assert f in t.leaves()
    out, inn = heap_encode(path, n).passport()
    N = [o - (1 if u == f else 0) for u, o in enumerate(out)]
    assert list(inn) == [N[u] + (1 if u == t.root else 0) for u in range(n)]
    assert N[f] == 0 and N[t.root] >= 0
    assert all(N[u] >= 1 for u in range(n) if u not in (f, t.root))
    assert xi_membership(truncated_heap(path, n), t, f)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8))
def test_decomposition_preserves_edges(seed, k):
    rng = random.Random(seed)
    K = random_kernel(5, rng, loops=0.2)
    h = random_heap_of_cycles(K, 0, rng, k)
    cycles = cycle_decomposition(h)
    assert sum(c.length for c in cycles) == len(h)
    assert Counter(e for c in cycles for e in c.edges()) == Counter(h.edges())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8))
def test_pop_cycle_order_gives_same_cycle_multiset(seed, k):
    rng = random.Random(seed)
    K = random_kernel(5, rng, loops=0.2)
    h = random_heap_of_cycles(K, 0, rng, k)
    baseline = Counter(cycle_decomposition(h))
    for start in range(5):
        if not h.heaps[start]:
            continue
        c, rest = pop_cycle(h, start)
        assert Counter([c]) + Counter(cycle_decomposition(rest)) == baseline


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32), st.floats(0, 1))
def test_signed_sum_is_principal_minor(n, seed, loops):
    K = random_kernel(n, random.Random(seed), loops=loops)
    for W in (K, reversed_kernel(K)):
        for f in range(n):
            assert trivial_signed_sum(W, f) == principal_minor_det(W, f)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_involution_properties(seed):
    rng = random.Random(seed)
    K = random_kernel(rng.randint(2, 5), rng, extra=0.8, loops=0.3)
    f = rng.randrange(K.n)
    if not simple_cycles(K, avoid=(f,)):
        return
    h = random_heap_of_cycles(K, f, rng, rng.randint(0, 5))
    s = random_trivial(K, f, rng)
    if h.is_empty() and not s:
        return
    h2, s2 = pair_involution(h, s)
    assert pair_involution(h2, s2) == (h, s)
    assert len(s2) == len(s) + 1 or len(s2) == len(s) - 1
    assert signed_pair_weight(h, s, K) + signed_pair_weight(h2, s2, K) == 0
    assert h2.is_balanced() and not h2.heaps[f]


def test_trivial_heaps_are_disjoint():
    K = random_kernel(5, random.Random(9), extra=1.0, loops=0.5)
    for cs in trivial_heaps(K, 0):
        seen = set()
        for c in cs:
            assert seen.isdisjoint(c.vertices) and 0 not in c.vertices
            seen |= set(c.vertices)
