"""Small dense linear algebra over Fractions, with numpy for float mode."""
from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np


def bareiss_det(a: list) -> Fraction:
    """Determinant of a rational matrix by fraction-free elimination.

    Rows are scaled to integers first so every intermediate stays an exact
    integer; the scale factors are divided out at the end.
    """
    n = len(a)
    if n == 0:
        return Fraction(1)
    scale = Fraction(1)
    m = []
    for row in a:
        d = lcm(*(Fraction(x).denominator for x in row))
        scale *= d
        m.append([int(Fraction(x) * d) for x in row])
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        pivot = m[k][k]
        for i in range(k + 1, n):
            mik = m[i][k]
            row_i, row_k = m[i], m[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * pivot - mik * row_k[j]) // prev
            row_i[k] = 0
        prev = pivot
    return Fraction(sign * m[n - 1][n - 1]) / scale


def det(a, exact: bool):
    if exact:
        return bareiss_det(a)
    if len(a) == 0:
        return 1.0
    return float(np.linalg.det(np.asarray(a, dtype=np.float64)))


def solve_exact(a: list, b: list) -> list:
    """Solve ``a x = b`` by Gauss-Jordan elimination in Fractions."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(b[i])] for i, row in enumerate(a)]
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k] != 0), None)
        if piv is None:
            raise np.linalg.LinAlgError("singular matrix")
        m[k], m[piv] = m[piv], m[k]
        pk = m[k][k]
        row_k = [x / pk for x in m[k]]
        m[k] = row_k
        for i in range(n):
            if i != k and m[i][k] != 0:
                f = m[i][k]
                m[i] = [x - f * y for x, y in zip(m[i], row_k)]
    return [m[i][n] for i in range(n)]


def inverse_exact(a: list) -> list:
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k] != 0), None)
        if piv is None:
            raise np.linalg.LinAlgError("singular matrix")
        m[k], m[piv] = m[piv], m[k]
        pk = m[k][k]
        row_k = [x / pk for x in m[k]]
        m[k] = row_k
        for i in range(n):
            if i != k and m[i][k] != 0:
                f = m[i][k]
                m[i] = [x - f * y for x, y in zip(m[i], row_k)]
    return [row[n:] for row in m]
