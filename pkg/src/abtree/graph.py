"""Kernels, paths and rooted trees.

Vertices are integers ``0..n-1``; labels only matter for I/O. A kernel holds
its entries either as :class:`fractions.Fraction` (exact mode) or as
``float`` (float mode), never a mixture.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

FLOAT_ROW_TOL = 1e-12


class KernelError(ValueError):
    """Raised for malformed or invalid kernel input."""


class PathError(ValueError):
    pass


def parse_scalar(text, exact: bool):
    """Parse ``"p/q"`` or a decimal string into a Fraction or float."""
    if isinstance(text, (int, Fraction)) and exact:
        return Fraction(text)
    if not isinstance(text, str):
        text = str(text)
    s = text.strip()
    try:
        value = Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise KernelError(f"cannot parse entry {text!r}") from exc
    return value if exact else float(value)


def is_rational_literal(text) -> bool:
    s = str(text).strip()
    return all(c.isdigit() or c in "/+-" for c in s)


@dataclass(frozen=True)
class MarkovKernel:
    """Row-stochastic matrix with symmetric, connected support."""

    rows: tuple
    labels: tuple = ()
    exact: bool = True
    _neighbors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.rows)
        if n < 1:
            raise KernelError("kernel must have at least one vertex")
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i + 1) for i in range(n)))
        else:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if len(self.labels) != n:
            raise KernelError(f"{len(self.labels)} labels for {n} rows")
        if len(set(self.labels)) != n:
            raise KernelError("duplicate labels")
        scalar_type = Fraction if self.exact else float
        for a, row in enumerate(rows):
            if len(row) != n:
                raise KernelError(f"row {a + 1} has {len(row)} entries, expected {n}")
            for b, x in enumerate(row):
                if type(x) is not scalar_type:
                    raise KernelError(
                        f"entry ({a + 1},{b + 1}) is {type(x).__name__}, "
                        f"kernel mode needs {scalar_type.__name__}"
                    )
                if x < 0:
                    raise KernelError(f"negative entry at ({a + 1},{b + 1})")
            s = sum(row)
            if self.exact and s != 1:
                raise KernelError(f"row {a + 1} sums to {s}, not 1")
            if not self.exact and abs(s - 1.0) > FLOAT_ROW_TOL:
                raise KernelError(f"row {a + 1} sums to {s!r}, not 1")
        for a in range(n):
            for b in range(a + 1, n):
                if (rows[a][b] > 0) != (rows[b][a] > 0):
                    za, zb = (a, b) if rows[a][b] == 0 else (b, a)
                    raise KernelError(
                        f"support asymmetry at ({za + 1},{zb + 1}): entry is 0 "
                        f"but ({zb + 1},{za + 1}) is positive"
                    )
        nbrs = tuple(tuple(b for b in range(n) if rows[a][b] > 0) for a in range(n))
        object.__setattr__(self, "_neighbors", nbrs)
        seen = {0}
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for b in nbrs[a]:
                if b not in seen:
                    seen.add(b)
                    queue.append(b)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise KernelError(
                f"support is disconnected: vertex {missing[0] + 1} unreachable from vertex 1"
            )

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ab):
        a, b = ab
        return self.rows[a][b]

    def neighbors(self, a: int) -> tuple:
        """Vertices ``b`` with ``M[a][b] > 0`` (self included when looped)."""
        return self._neighbors[a]

    def in_support(self, a: int, b: int) -> bool:
        return self.rows[a][b] > 0

    def support_edges(self):
        return [(a, b) for a in range(self.n) for b in self._neighbors[a]]

    def one(self):
        return Fraction(1) if self.exact else 1.0

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise KernelError(f"unknown vertex label {label!r}") from None

    def to_float(self) -> "MarkovKernel":
        if not self.exact:
            return self
        return MarkovKernel(
            tuple(tuple(float(x) for x in r) for r in self.rows), self.labels, exact=False
        )

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.rows], dtype=np.float64)

    def to_json_obj(self) -> dict:
        return {"labels": list(self.labels), "rows": [[format_scalar(x) for x in r] for r in self.rows]}


def format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def kernel_from_rows(rows, labels=None, exact: bool | None = None) -> MarkovKernel:
    """Build a kernel from string/number rows.

    ``exact=None`` picks exact mode when every entry is an integer or ``p/q``
    literal, float mode otherwise.
    """
    if exact is None:
        exact = all(
            isinstance(x, (int, Fraction)) or (isinstance(x, str) and is_rational_literal(x))
            for r in rows
            for x in r
        )
    parsed = tuple(tuple(parse_scalar(x, exact) for x in r) for r in rows)
    return MarkovKernel(parsed, tuple(labels) if labels else (), exact=exact)


def parse_kernel(text: str, mode: str | None = None) -> MarkovKernel:
    """Load a kernel from the JSON kernel-file format.

    ``mode`` is ``"exact"``, ``"float"`` or ``None`` (decided by the entries).
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "rows" not in obj:
        raise KernelError('kernel file must be an object with a "rows" field')
    rows = obj["rows"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise KernelError('"rows" must be a list of lists')
    labels = obj.get("labels")
    exact = {None: None, "exact": True, "float": False}[mode]
    return kernel_from_rows(rows, labels, exact=exact)


def canonical_kernel_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def kernel_hash(kernel: MarkovKernel) -> str:
    """64-bit FNV-1a of the canonical JSON form, as 16 hex digits."""
    return f"{fnv1a_64(canonical_kernel_json(kernel.to_json_obj()).encode()):016x}"


@dataclass(frozen=True, order=True)
class RootedTree:
    """Tree with edges ``u -> parent[u]`` directed toward ``root``.

    ``parent`` has one slot per vertex of the ambient graph; the root and
    vertices outside the tree hold ``-1``.
    """

    root: int
    parent: tuple

    def __post_init__(self):
        object.__setattr__(self, "parent", tuple(int(p) for p in self.parent))
        n = len(self.parent)
        if not 0 <= self.root < n:
            raise ValueError(f"root {self.root} outside 0..{n - 1}")
        if self.parent[self.root] != -1:
            raise ValueError("root must not have a parent")
        for u in range(n):
            seen = set()
            v = u
            while self.parent[v] != -1:
                if v in seen:
                    raise ValueError(f"cycle through vertex {u}")
                seen.add(v)
                v = self.parent[v]
                if not 0 <= v < n:
                    raise ValueError(f"parent of vertex {u} out of range")
            if v != self.root and v != u:
                raise ValueError(f"vertex {u} does not reach the root")

    @classmethod
    def from_parents(cls, root: int, parents: dict, n: int) -> "RootedTree":
        p = [-1] * n
        for u, v in parents.items():
            p[u] = v
        return cls(root, tuple(p))

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def vertices(self) -> frozenset:
        return frozenset([self.root] + [u for u, p in enumerate(self.parent) if p >= 0])

    def edges(self) -> list:
        return [(u, p) for u, p in enumerate(self.parent) if p >= 0]

    def is_spanning(self) -> bool:
        return len(self.vertices) == self.n

    def children_count(self) -> list:
        deg = [0] * self.n
        for p in self.parent:
            if p >= 0:
                deg[p] += 1
        return deg

    def leaves(self) -> list:
        deg = self.children_count()
        return [u for u in sorted(self.vertices) if deg[u] == 0]

    def internal(self) -> list:
        deg = self.children_count()
        return [u for u in sorted(self.vertices) if deg[u] > 0]

    def key(self) -> str:
        """Canonical serialization: root, then the parent array."""
        return f"{self.root}:" + ",".join("-" if p < 0 else str(p) for p in self.parent)

    @classmethod
    def from_key(cls, key: str) -> "RootedTree":
        root, body = key.split(":")
        return cls(int(root), tuple(-1 if x == "-" else int(x) for x in body.split(",")))

    def unrooted_key(self) -> str:
        """Undirected edge set, for comparing trees up to root and orientation."""
        return ",".join(f"{a}-{b}" for a, b in sorted(tuple(sorted(e)) for e in self.edges()))

    def label_parents(self, labels: Sequence[str]) -> dict:
        return {labels[u]: labels[p] for u, p in self.edges()}


def check_path(path: Sequence[int], kernel: MarkovKernel | None = None) -> tuple:
    path = tuple(int(v) for v in path)
    if not path:
        raise PathError("path must be nonempty")
    if kernel is not None:
        for i, (a, b) in enumerate(zip(path, path[1:])):
            if not (0 <= a < kernel.n and 0 <= b < kernel.n) or kernel[a, b] == 0:
                raise PathError(f"step {i} ({a}->{b}) is not in the kernel support")
    return path


def first_entrance_tree(path: Sequence[int], n: int | None = None, strict: bool = False) -> RootedTree:
    """Tree of reversed first-entrance steps, rooted at ``path[0]``.

    On a non-covering path the tree spans the visited set only; ``strict``
    turns that case into an error.
    """
    path = check_path(path)
    if n is None:
        n = max(path) + 1
    parent = [-1] * n
    seen = {path[0]}
    for prev, cur in zip(path, path[1:]):
        if cur not in seen:
            seen.add(cur)
            parent[cur] = prev
    if strict and len(seen) != n:
        raise PathError(f"path visits {len(seen)} of {n} vertices")
    return RootedTree(path[0], tuple(parent))


def last_exit_tree(path: Sequence[int], n: int | None = None) -> RootedTree:
    """Tree grown by edge surgery along the path, rooted at ``path[-1]``."""
    path = check_path(path)
    if n is None:
        n = max(path) + 1
    parent = [-1] * n
    for a, b in zip(path, path[1:]):
        parent[a] = b
        parent[b] = -1
    return RootedTree(path[-1], tuple(parent))


def cover_time(path: Sequence[int], n: int) -> int:
    seen = set()
    for i, v in enumerate(path):
        seen.add(v)
        if len(seen) == n:
            return i
    raise PathError(f"path visits {len(seen)} of {n} vertices")


def cover_prefix(path: Sequence[int], n: int) -> tuple:
    """Prefix of ``path`` ending at its cover time."""
    path = check_path(path)
    return path[: cover_time(path, n) + 1]


def path_weight(path: Sequence[int], kernel: MarkovKernel, convention: str = "forward"):
    """Product of kernel entries along the path.

    ``forward`` multiplies ``K[w_i][w_{i+1}]``; ``backward`` multiplies
    ``K[w_{i+1}][w_i]`` (each step read backwards).
    """
    if convention not in ("forward", "backward"):
        raise ValueError(f"unknown convention {convention!r}")
    path = check_path(path)
    w = kernel.one()
    for a, b in zip(path, path[1:]):
        x = kernel[a, b] if convention == "forward" else kernel[b, a]
        if x == 0:
            raise PathError(f"step {a}->{b} has zero weight")
        w *= x
    return w


def reverse_path(path: Iterable[int]) -> tuple:
    return tuple(reversed(tuple(path)))
