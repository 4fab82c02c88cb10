"""Maximum spanning arborescence (Chu-Liu/Edmonds) with a single-root constraint.

Scores are given as a (n+1, n+1) matrix `S[h, m]` over nodes 0..n where node
0 is the artificial root; column 0 and the diagonal are ignored.
"""

from __future__ import annotations

import itertools

import numpy as np

from .data.types import is_tree

NEG = -np.inf


def _find_cycle(heads: np.ndarray):
    n = len(heads)
    color = np.zeros(n, dtype=np.int64)  # 0 unvisited, 1 on stack, 2 done
    for start in range(1, n):
        path = []
        v = start
        while v != 0 and color[v] == 0:
            color[v] = 1
            path.append(v)
            v = heads[v]
        if v != 0 and color[v] == 1:
            cycle = path[path.index(v):]
            for u in path:
                color[u] = 2
            return cycle
        for u in path:
            color[u] = 2
    return None


def chu_liu_edmonds(scores: np.ndarray) -> np.ndarray:
    """Heads (index 0 unused, set to -1) of the maximum arborescence rooted at node 0."""
    S = np.array(scores, dtype=float)
    n = S.shape[0]
    S[:, 0] = NEG
    np.fill_diagonal(S, NEG)
    heads = S.argmax(axis=0)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads
    # contract the cycle into a fresh node c
    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    rest = [v for v in range(n) if not in_cycle[v]]
    c = len(rest)
    index = {v: i for i, v in enumerate(rest)}
    cycle_score = sum(S[heads[v], v] for v in cycle)
    T = np.full((c + 1, c + 1), NEG)
    enter_from = {}
    leave_to = {}
    for u in rest:
        for v in rest:
            if u != v:
                T[index[u], index[v]] = S[u, v]
        # edge into the cycle: break the cycle at the entered node
        gains = [S[u, v] - S[heads[v], v] for v in cycle]
        best = int(np.argmax(gains))
        T[index[u], c] = cycle_score + gains[best]
        enter_from[u] = cycle[best]
        # edge out of the cycle: best source inside the cycle
        if u != 0:
            srcs = [S[v, u] for v in cycle]
            best = int(np.argmax(srcs))
            T[c, index[u]] = srcs[best]
            leave_to[u] = cycle[best]
    sub = chu_liu_edmonds(T)
    result = heads.copy()
    for u in rest:
        if u == 0:
            continue
        h = sub[index[u]]
        result[u] = leave_to[u] if h == c else rest[h]
    h_c = rest[sub[c]]
    result[enter_from[h_c]] = h_c
    return result


def _tree_score(S, heads):
    return float(sum(S[heads[m], m] for m in range(1, len(heads))))


def max_spanning_tree(scores: np.ndarray, single_root: bool = True) -> np.ndarray:
    """Maximum-score dependency tree; with `single_root`, exactly one token attaches to the root."""
    S = np.array(scores, dtype=float)
    heads = chu_liu_edmonds(S)
    n = S.shape[0] - 1
    if not single_root or np.sum(heads[1:] == 0) == 1:
        return heads
    best, best_score = None, NEG
    for r in range(1, n + 1):
        if not np.isfinite(S[0, r]):
            continue
        T = S.copy()
        T[0, :] = NEG
        T[0, r] = S[0, r]
        cand = chu_liu_edmonds(T)
        if np.sum(cand[1:] == 0) != 1:
            continue
        sc = _tree_score(S, cand)
        if sc > best_score:
            best, best_score = cand, sc
    return best


def decode_heads(arc: np.ndarray) -> np.ndarray:
    """Greedy argmax heads from an (n+1, n) arc matrix; MST repair if the result is not a tree.

    Returns 1-based heads for tokens 1..n (array of length n).
    """
    n = arc.shape[1]
    S = np.full((n + 1, n + 1), NEG)
    S[:, 1:] = arc
    np.fill_diagonal(S, NEG)
    greedy = S[:, 1:].argmax(axis=0)
    if is_tree(greedy.tolist()):
        return greedy
    return max_spanning_tree(S)[1:]


def exhaustive_best_tree(arc: np.ndarray):
    """Brute-force the best single-rooted tree (oracle for small n)."""
    n = arc.shape[1]
    best, best_score = None, NEG
    for heads in itertools.product(range(n + 1), repeat=n):
        if not is_tree(list(heads)):
            continue
        sc = sum(arc[h, m] for m, h in enumerate(heads))
        if sc > best_score:
            best, best_score = heads, sc
    return np.array(best), best_score
