"""
Unweighted set covering over cells.

``coverage`` maps each UE to the set of cells able to serve it; a cover is
a set of cells meeting every UE's set. The exact solver returns the
lexicographically smallest minimum-cardinality cover so that results are
reproducible.
"""

from __future__ import annotations

from typing import Iterable, Mapping


def _normalise(coverage: Mapping, cells: Iterable) -> tuple[list, dict]:
    cells = sorted(set(cells))
    allowed = set(cells)
    sets = {}
    for k, f in coverage.items():
        f = frozenset(f) & allowed
        if not f:
            raise ValueError(f"UE {k} cannot be covered")
        sets[k] = f
    return cells, sets


def is_cover(active: Iterable, coverage: Mapping) -> bool:
    active = set(active)
    return all(active & set(f) for f in coverage.values())


def solve_set_cover_greedy(coverage: Mapping, cells: Iterable) -> set:
    """Chvatal greedy: repeatedly take the cell covering most uncovered UEs."""
    cells, sets = _normalise(coverage, cells)
    uncovered = set(sets)
    chosen = set()
    while uncovered:
        best, best_n = None, 0
        for c in cells:
            if c in chosen:
                continue
            n = sum(1 for k in uncovered if c in sets[k])
            if n > best_n:
                best, best_n = c, n
        chosen.add(best)
        uncovered = {k for k in uncovered if best not in sets[k]}
    return chosen


def _components(sets: list[frozenset]) -> list[list[frozenset]]:
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in sets:
        it = iter(f)
        root = find(next(it))
        for c in it:
            parent[find(c)] = root
    groups: dict = {}
    for f in sets:
        groups.setdefault(find(next(iter(f))), []).append(f)
    return list(groups.values())


def _exact_component(sets: list[frozenset]) -> set:
    cand = sorted(set().union(*sets))
    n_ue = len(sets)
    masks = []
    for c in cand:
        m = 0
        for i, f in enumerate(sets):
            if c in f:
                m |= 1 << i
        masks.append(m)
    suffix = [0] * (len(cand) + 1)
    for d in range(len(cand) - 1, -1, -1):
        suffix[d] = suffix[d + 1] | masks[d]
    full = (1 << n_ue) - 1

    # Greedy size + 1 is a strict bound that any optimum beats, so the
    # first optimum reached in include-first order is the lexicographic one.
    best_size = len(solve_set_cover_greedy({i: f for i, f in enumerate(sets)}, cand)) + 1
    best: list = []

    def lower_bound(uncovered: int, d: int) -> int:
        top = max((bin(masks[j] & uncovered).count("1") for j in range(d, len(cand))), default=0)
        if top == 0:
            return 1 << 30
        need = bin(uncovered).count("1")
        return -(-need // top)

    def dfs(d: int, covered: int, chosen: list):
        nonlocal best_size, best
        if covered == full:
            if len(chosen) < best_size:
                best_size = len(chosen)
                best = list(chosen)
            return
        uncovered = full & ~covered
        if d == len(cand) or uncovered & ~suffix[d]:
            return
        if len(chosen) + lower_bound(uncovered, d) >= best_size:
            return
        if masks[d] & uncovered:
            chosen.append(cand[d])
            dfs(d + 1, covered | masks[d], chosen)
            chosen.pop()
        dfs(d + 1, covered, chosen)

    dfs(0, 0, [])
    return set(best)


def solve_set_cover_exact(coverage: Mapping, cells: Iterable) -> set:
    """Minimum cover, lexicographically smallest among optima.

    Cells forced by single-option UEs are taken first; the rest is split
    into independent components, each solved by include-first branch and
    bound with a greedy incumbent bound.
    """
    _, sets = _normalise(coverage, cells)
    forced = {next(iter(f)) for f in sets.values() if len(f) == 1}
    rest = [f for f in sets.values() if not (f & forced)]
    chosen = set(forced)
    for comp in _components(list(set(rest))):
        chosen |= _exact_component(comp)
    return chosen
