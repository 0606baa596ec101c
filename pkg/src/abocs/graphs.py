"""Explicit-graph helpers shared by the automaton and model-checking code."""
from __future__ import annotations

from collections import deque
from typing import Callable, Hashable, Iterable


def reachable(roots: Iterable[Hashable], succ: Callable) -> list:
    """Nodes reachable from ``roots`` in BFS order."""
    seen = set()
    order = []
    queue = deque()
    for r in roots:
        if r not in seen:
            seen.add(r)
            queue.append(r)
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in succ(v):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return order


def sccs(nodes: Iterable[Hashable], succ: Callable) -> list:
    """Strongly connected components (iterative Tarjan)."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def on_cycle(nodes: Iterable[Hashable], succ: Callable) -> set:
    """Nodes lying on some cycle (including self-loops)."""
    res = set()
    for comp in sccs(nodes, succ):
        if len(comp) > 1:
            res.update(comp)
        else:
            v = comp[0]
            if v in succ(v):
                res.add(v)
    return res


def has_marked_cycle(roots: Iterable[Hashable], succ: Callable, marked: Callable) -> bool:
    """True iff a node with ``marked(node)`` lies on a cycle reachable from ``roots``."""
    adj = {}

    def cached(v):
        s = adj.get(v)
        if s is None:
            s = adj[v] = list(succ(v))
        return s

    nodes = reachable(roots, cached)
    if not any(marked(v) for v in nodes):
        return False
    return any(marked(v) for v in on_cycle(nodes, cached))
