"""Maximum bipartite matching and the edges usable by some maximum matching.

Left vertices are rings, right vertices are candidate outputs, both indexed
densely from 0.  Everything here is iterative so that ledgers with hundreds of
thousands of edges do not hit the recursion limit.
"""

from __future__ import annotations

from typing import Sequence

UNMATCHED = -1


def hopcroft_karp(adj: Sequence[Sequence[int]], n_right: int) -> tuple[list[int], list[int]]:
    """Maximum matching of the bipartite graph given by left adjacency lists.

    Returns ``(match_left, match_right)`` with ``UNMATCHED`` for free vertices.
    The result is deterministic for a given adjacency order.
    """
    n_left = len(adj)
    ml = [UNMATCHED] * n_left
    mr = [UNMATCHED] * n_right

    for u in range(n_left):  # greedy warm start
        for v in adj[u]:
            if mr[v] == UNMATCHED:
                ml[u] = v
                mr[v] = u
                break

    while True:
        dist = [-1] * n_left
        queue = [u for u in range(n_left) if ml[u] == UNMATCHED]
        for u in queue:
            dist[u] = 0
        limit = -1  # layer where the first free right vertex shows up
        i = 0
        while i < len(queue):
            u = queue[i]
            i += 1
            if limit != -1 and dist[u] >= limit:
                continue
            for v in adj[u]:
                w = mr[v]
                if w == UNMATCHED:
                    if limit == -1:
                        limit = dist[u] + 1
                elif dist[w] == -1:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if limit == -1:
            break

        ptr = [0] * n_left
        for s in range(n_left):
            if ml[s] != UNMATCHED:
                continue
            stack = [s]
            via: list[int] = []
            while stack:
                u = stack[-1]
                nbrs = adj[u]
                if ptr[u] >= len(nbrs):
                    dist[u] = -1  # dead end for this phase
                    stack.pop()
                    if via:
                        via.pop()
                    continue
                v = nbrs[ptr[u]]
                ptr[u] += 1
                w = mr[v]
                if w == UNMATCHED:
                    if dist[u] + 1 != limit:
                        continue
                    via.append(v)
                    for lu, rv in zip(stack, via):
                        ml[lu] = rv
                        mr[rv] = lu
                    break
                if dist[w] == dist[u] + 1:
                    via.append(v)
                    stack.append(w)
    return ml, mr


def _strong_components(n: int, succ: Sequence[Sequence[int]]) -> list[int]:
    """Tarjan's algorithm, iterative.  Returns a component id per vertex."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    n_comp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            nbrs = succ[v]
            if i < len(nbrs):
                work[-1] = (v, i + 1)
                w = nbrs[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = n_comp
                    if w == v:
                        break
                n_comp += 1
    return comp


def allowed_edges(
    adj: Sequence[Sequence[int]], n_right: int, ml: Sequence[int], mr: Sequence[int]
) -> tuple[list[list[bool]], list[bool]]:
    """Classify edges against a left-saturating maximum matching.

    An edge ``(u, v)`` belongs to some maximum matching iff it is matched, or
    it closes an alternating cycle, or ``v`` can be freed by an even
    alternating path from an unmatched right vertex.  Returns per-edge flags
    (parallel to ``adj``) and, per right vertex, whether it is matched in
    every maximum matching.
    """
    n_left = len(adj)
    radj: list[list[int]] = [[] for _ in range(n_right)]
    for u, nbrs in enumerate(adj):
        for v in nbrs:
            radj[v].append(u)

    # right vertices that some maximum matching leaves free
    freeable = [False] * n_right
    queue = [v for v in range(n_right) if mr[v] == UNMATCHED and radj[v]]
    for v in queue:
        freeable[v] = True
    i = 0
    while i < len(queue):
        v = queue[i]
        i += 1
        for u in radj[v]:
            w = ml[u]
            if w != v and w != UNMATCHED and not freeable[w]:
                freeable[w] = True
                queue.append(w)

    # alternating cycles: u -> mr[v] for every unmatched edge (u, v)
    succ = [[mr[v] for v in nbrs if v != ml[u] and mr[v] != UNMATCHED] for u, nbrs in enumerate(adj)]
    comp = _strong_components(n_left, succ)

    flags = []
    for u, nbrs in enumerate(adj):
        row = []
        for v in nbrs:
            if v == ml[u] or freeable[v]:
                row.append(True)
            else:
                w = mr[v]
                row.append(w != UNMATCHED and comp[w] == comp[u])
        flags.append(row)
    forced = [mr[v] != UNMATCHED and not freeable[v] for v in range(n_right)]
    return flags, forced
