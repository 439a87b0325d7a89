"""Compiled inner loops."""

import numpy as np
from numba import njit


@njit(cache=True)
def weighted_recursion(x, a, theta_tail, phi_tail, length):
    """Solve ``s_{n+1} = x * sum_{i<n} Theta_i a_{n-i} s_{n-i} + Phi_n``.

    ``a`` is indexed by score (``a[0]`` unused) and must have ``length + 1``
    entries. Returns ``s_1..s_length``.
    """
    s = np.zeros(length + 1)
    w = np.zeros(length + 1)
    nt = theta_tail.shape[0]
    nphi = phi_tail.shape[0]
    for n in range(length):
        acc = 0.0
        top = min(n, nt)
        for i in range(top):
            acc += theta_tail[i] * w[n - i]
        val = x * acc
        if n < nphi:
            val += phi_tail[n]
        s[n + 1] = val
        w[n + 1] = a[n + 1] * val
    return s[1:]


# Fenwick (binary indexed) tree over scores 1..size; index 0 unused.

@njit(cache=True)
def fenwick_add(tree, i, delta):
    size = tree.shape[0] - 1
    while i <= size:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def fenwick_prefix(tree, i):
    total = 0.0
    while i > 0:
        total += tree[i]
        i -= i & (-i)
    return total


@njit(cache=True)
def fenwick_search(tree, value, top_bit):
    """Smallest ``i`` with ``prefix(i) > value``."""
    size = tree.shape[0] - 1
    pos = 0
    step = top_bit
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= value:
            pos = nxt
            value -= tree[nxt]
        step >>= 1
    return pos + 1


@njit(cache=True)
def fenwick_build(values):
    size = values.shape[0] - 1
    tree = values.copy()
    tree[0] = 0.0
    for i in range(1, size + 1):
        j = i + (i & (-i))
        if j <= size:
            tree[j] += tree[i]
    return tree
