import os
import random
import subprocess
import sys

import numpy as np
import pytest

from abtree import _pykernels, kernels
from abtree.analysis import reversed_kernel, tree_weight
from abtree.graph import RootedTree, first_entrance_tree, last_exit_tree, kernel_from_rows
from abtree.rng import RandomSource, mix64
from abtree.samplers import (
    SampleBatch,
    _walk,
    StepBudgetExceeded,
    all_rooted_trees,
    csr_tables,
    run_tree_chain,
    sample_batch,
    sample_fet,
    start_table,
    tree_chain_matrix,
    tree_chain_step,
    tree_move,
    verify_tree_chain_stationarity,
    walk_until_cover,
    wilson_sample,
)
from helpers import random_kernel, example_kernel

try:
    from abtree import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled core not built")


def test_splitmix_reference_value():
    # first output of SplitMix64 seeded with 0
    assert mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_uniform_range_and_determinism():
    a = RandomSource(5, 9)
    xs = [a.uniform() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    b = RandomSource(5, 9)
    assert xs == [b.uniform() for _ in range(1000)]
    assert xs != [RandomSource(5, 10).uniform() for _ in range(1000)]


def test_walk_covers_and_ends_on_new_vertex():
    M = random_kernel(6, random.Random(1))
    path = walk_until_cover(M, 2, RandomSource(0, 0))
    assert path[0] == 2 and set(path) == set(range(6))
    assert path[-1] not in path[:-1]


def test_fixed_root_sample_has_that_root():
    M = example_kernel()
    for i in range(50):
        assert sample_fet(M, RandomSource(1, i), root=1).root == 1


@pytest.mark.parametrize("kind", ["fet", "let"])
def test_single_sample_reproduces_batch_trial(kind):
    M = random_kernel(5, random.Random(2))
    tables = csr_tables(M)
    parents, roots, status = kernels.cover_trees(*tables, M.n, -1, start_table(M), 3, 0, 40, 10**6, kind == "let")
    assert status == 0
    for i in range(40):
        rng = RandomSource(3, i)
        start = rng.pick(start_table(M), 0, M.n)
        path = _walk(*tables, M.n, start, rng, 10**6)
        t = first_entrance_tree(path, M.n) if kind == "fet" else last_exit_tree(path, M.n)
        assert RootedTree(int(roots[i]), tuple(int(x) for x in parents[i])) == t


def test_wilson_single_sample_matches_batch():
    M = random_kernel(5, random.Random(3))
    R = reversed_kernel(M)
    parents, status = kernels.wilson_trees(*csr_tables(R), R.n, 1, 4, 0, 30, 10**6)
    for i in range(30):
        t = wilson_sample(R, 1, RandomSource(4, i))
        assert t.parent == tuple(int(x) for x in parents[i])


@needs_ext
@pytest.mark.parametrize("root", [-1, 0, 2])
@pytest.mark.parametrize("last_exit", [False, True])
def test_backends_agree_on_cover_trees(root, last_exit):
    M = random_kernel(6, random.Random(5), loops=0.3)
    args = (*csr_tables(M), M.n, root, start_table(M), 11, 100, 300, 10**6, last_exit)
    p1, r1, s1 = _ckernels.cover_trees(*args)
    p2, r2, s2 = _pykernels.cover_trees(*args)
    assert s1 == s2 == 0
    assert np.array_equal(p1, p2) and np.array_equal(r1, r2)


@needs_ext
def test_backends_agree_on_wilson():
    M = random_kernel(6, random.Random(6), loops=0.3)
    args = (*csr_tables(M), M.n, 3, 8, 0, 300, 10**6)
    p1, s1 = _ckernels.wilson_trees(*args)
    p2, s2 = _pykernels.wilson_trees(*args)
    assert s1 == s2 == 0 and np.array_equal(p1, p2)


@needs_ext
def test_backends_agree_on_tree_chain():
    M = random_kernel(5, random.Random(7))
    R = reversed_kernel(M)
    t0 = all_rooted_trees(M)[0]
    args = (*csr_tables(R), R.n, list(t0.parent), t0.root, 2, 1, 5000)
    assert np.array_equal(_ckernels.tree_chain_codes(*args), _pykernels.tree_chain_codes(*args))


def test_tree_chain_codes_follow_python_step():
    M = example_kernel()
    R = reversed_kernel(M)
    t = RootedTree(0, (-1, 0, 0))
    occ = run_tree_chain(R, t, 200, seed=3, stream=0)
    rng = RandomSource(3, 0)
    seen = {}
    state = t
    for _ in range(200):
        state = tree_chain_step(state, R, rng)
        seen[state] = seen.get(state, 0) + 1
    assert occ == seen


def test_batches_are_deterministic_and_worker_invariant():
    M = random_kernel(5, random.Random(8))
    a = sample_batch(M, 120_000, seed=9, root=None, workers=1)
    b = sample_batch(M, 120_000, seed=9, root=None, workers=3)
    assert a.counts == b.counts
    c = sample_batch(M, 120_000, seed=10, root=None, workers=1)
    assert c.counts != a.counts


def test_batch_totals_and_roots():
    M = example_kernel()
    b = sample_batch(M, 5000, seed=1, root=2)
    assert sum(b.counts.values()) == 5000
    assert b.root_counts(3) == [0, 0, 5000]
    assert b.mode == "fixed-root"


def test_batch_json_round_trip():
    b = sample_batch(example_kernel(), 2000, seed=4)
    again = SampleBatch.from_json_obj(b.to_json_obj())
    assert again.counts == b.counts and again.total == b.total and again.mode == "stationary"


def test_merge_adds_counts():
    M = example_kernel()
    a = sample_batch(M, 1000, seed=1, root=0)
    b = sample_batch(M, 1000, seed=2, root=0)
    m = a.merge(b)
    assert m.total == 2000
    assert sum(m.counts.values()) == 2000


def test_step_budget_is_enforced():
    M = random_kernel(6, random.Random(9))
    with pytest.raises(StepBudgetExceeded):
        sample_batch(M, 10, root=0, budget=2)
    with pytest.raises(StepBudgetExceeded):
        walk_until_cover(M, 0, RandomSource(), budget=2)


def test_bad_arguments():
    M = example_kernel()
    with pytest.raises(ValueError):
        sample_batch(M, 0)
    with pytest.raises(ValueError):
        sample_batch(M, 10, kind="wilson")
    with pytest.raises(ValueError):
        sample_batch(M, 10, kind="nope")


def test_tree_move_matches_surgery():
    t = RootedTree(0, (-1, 0, 1))
    assert tree_move(t, 2) == RootedTree(2, (2, 0, -1))


def test_tree_chain_is_irreducible_on_k3():
    M = example_kernel()
    R = reversed_kernel(M)
    occ = run_tree_chain(R, RootedTree(0, (-1, 0, 0)), 5000, seed=0)
    assert set(occ) == set(all_rooted_trees(M))
    assert len(occ) == 9


def test_tree_chain_balance_example():
    rep = verify_tree_chain_stationarity(example_kernel())
    assert rep == {"states": 9, "rows_stochastic": True, "balance": True, "max_residual": "0", "pass": True}


def test_tree_chain_balance_fails_with_forward_weights():
    # the product of forward entries is not invariant for a non-reversible kernel
    M = example_kernel()
    assert not verify_tree_chain_stationarity(M, weights=M)["pass"]


def test_tree_chain_rows_are_stochastic_with_loops():
    M = random_kernel(4, random.Random(12), loops=1.0)
    states, Q = tree_chain_matrix(M)
    row = {}
    for (i, _), q in Q.items():
        row[i] = row.get(i, 0) + q
    assert all(v == 1 for v in row.values()) and len(row) == len(states)
    assert verify_tree_chain_stationarity(M)["pass"]


def test_tree_chain_occupation_matches_weights():
    M = example_kernel()
    R = reversed_kernel(M)
    states = all_rooted_trees(M)
    w = {t: float(tree_weight(t, R)) for t in states}
    z = sum(w.values())
    steps = 10**6
    occ = run_tree_chain(R, states[0], steps, seed=1)
    tv = 0.5 * sum(abs(occ.get(t, 0) / steps - w[t] / z) for t in states)
    assert tv < 0.02


def test_loops_are_sampled():
    M = kernel_from_rows([["1/2", "1/2"], ["1/2", "1/2"]])
    b = sample_batch(M, 1000, seed=0, root=0)
    assert b.counts == {"0:-,0": 1000}


def test_fallback_can_be_forced():
    env = dict(os.environ, ABTREE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from abtree import kernels; print(kernels.BACKEND_NAME)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
