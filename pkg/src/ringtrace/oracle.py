"""Exhaustive search over spend assignments on small ledgers.

An assignment maps every key image to one output that is a member of every
ring carrying it, such that no output is used by two key images on the same
branch.  The oracle reports, per key image, the outputs some assignment uses,
and per branch the outputs every assignment uses.  It knows nothing about
matchings; it is plain backtracking so it can check the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

from .errors import TooLarge, Unsatisfiable
from .ledger import KeyImage, LedgerView, OutputUid


@dataclass
class _Component:
    key_images: list[KeyImage]
    domains: list[list[OutputUid]]
    branches: list[tuple[str, ...]]


@dataclass
class OracleResult:
    count: int
    candidates: dict[KeyImage, frozenset[OutputUid]]
    forced_spent: dict[str, frozenset[OutputUid]]
    saturated: bool = False
    components: int = 0
    component_sizes: list[int] = field(default_factory=list)

    def traced(self) -> dict[KeyImage, OutputUid]:
        return {ki: next(iter(c)) for ki, c in self.candidates.items() if len(c) == 1}


def _domains(view: LedgerView) -> tuple[list[KeyImage], dict, dict]:
    domain: dict[KeyImage, set[OutputUid]] = {}
    on: dict[KeyImage, list[str]] = {}
    for ki in view.all_key_images:
        entries = view.rings_for_key_image(ki)
        d = set(entries[0][1].members)
        for _, ring in entries[1:]:
            d &= set(ring.members)
        domain[ki] = d
        on[ki] = [b for b, _ in entries]
    return view.all_key_images, domain, on


def components(view: LedgerView) -> list[_Component]:
    """Split key images into independent groups.

    Two key images interact only if they can use the same output on a common
    branch; union-find over (branch, output) keys yields the groups.
    """
    kis, domain, on = _domains(view)
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for ki in kis:
        a = find(("k", ki))
        for b in on[ki]:
            for o in domain[ki]:
                r = find(("o", b, o))
                if r != a:
                    parent[r] = a
    groups: dict = {}
    for ki in kis:
        groups.setdefault(find(("k", ki)), []).append(ki)
    out = []
    for members in groups.values():
        out.append(_Component(
            members,
            [sorted(domain[k]) for k in members],
            [tuple(on[k]) for k in members],
        ))
    return out


def _order(comp: _Component) -> list[int]:
    # most constrained first keeps the search shallow
    return sorted(range(len(comp.key_images)), key=lambda i: (len(comp.domains[i]), i))


def _search(comp: _Component, domains: list[list[OutputUid]], order: list[int],
            forbid: dict[str, OutputUid] | None = None) -> list[OutputUid] | None:
    """Find one assignment for ``comp`` (or None).  ``forbid`` bans one output per branch."""
    n = len(order)
    choice: list[OutputUid | None] = [None] * len(comp.key_images)
    used: set[tuple[str, OutputUid]] = set()
    if forbid:
        used = {(b, o) for b, o in forbid.items()}

    def rec(depth: int) -> bool:
        if depth == n:
            return True
        i = order[depth]
        bs = comp.branches[i]
        for o in domains[i]:
            if any((b, o) in used for b in bs):
                continue
            for b in bs:
                used.add((b, o))
            choice[i] = o
            if rec(depth + 1):
                return True
            for b in bs:
                used.discard((b, o))
        return False

    return list(choice) if rec(0) else None


def _count(comp: _Component, order: list[int], limit: int) -> tuple[int, bool]:
    """Number of assignments, memoised on (depth, used keys); capped at ``limit``."""
    memo: dict = {}
    n = len(order)

    def rec(depth: int, used: frozenset) -> int:
        if depth == n:
            return 1
        key = (depth, used)
        hit = memo.get(key)
        if hit is not None:
            return hit
        i = order[depth]
        bs = comp.branches[i]
        total = 0
        for o in comp.domains[i]:
            keys = [(b, o) for b in bs]
            if any(k in used for k in keys):
                continue
            total += rec(depth + 1, used.union(keys))
        memo[key] = total
        return total

    c = rec(0, frozenset())
    return c, c > limit


def enumerate_assignments(view: LedgerView, *, max_component: int = 12,
                          limit: int = 1_000_000) -> OracleResult:
    """Exact candidate sets, forced spends and assignment count for ``view``.

    Raises :class:`TooLarge` if a component has more than ``max_component``
    key images and :class:`Unsatisfiable` if no assignment exists.
    """
    comps = components(view)
    for c in comps:
        if len(c.key_images) > max_component:
            raise TooLarge(
                f"component with {len(c.key_images)} key images exceeds guard {max_component}"
            )
    candidates: dict[KeyImage, frozenset[OutputUid]] = {}
    forced: dict[str, set[OutputUid]] = {b: set() for b in view.branch_names}
    total = 1
    saturated = False
    for comp in comps:
        order = _order(comp)
        first = _search(comp, comp.domains, order)
        if first is None:
            raise Unsatisfiable(f"no assignment for key images {comp.key_images[:5]}")
        # feasibility of each (key image, output) pair; a found assignment
        # certifies all of its pairs at once
        feasible = [set() for _ in comp.key_images]
        witnesses = [first]
        for sol in witnesses:
            for i, o in enumerate(sol):
                feasible[i].add(o)
        for i, dom in enumerate(comp.domains):
            for o in dom:
                if o in feasible[i]:
                    continue
                pinned = list(comp.domains)
                pinned[i] = [o]
                sol = _search(comp, pinned, order)
                if sol is not None:
                    for j, oj in enumerate(sol):
                        feasible[j].add(oj)
        for i, ki in enumerate(comp.key_images):
            candidates[ki] = frozenset(feasible[i])
        # an output is forced on b iff no assignment leaves it unused there
        branches = sorted({b for bs in comp.branches for b in bs})
        for b in branches:
            used_somewhere = {
                o for i, dom in enumerate(comp.domains) if b in comp.branches[i] for o in feasible[i]
            }
            for o in sorted(used_somewhere):
                if _search(comp, comp.domains, order, forbid={b: o}) is None:
                    forced[b].add(o)
        n, sat = _count(comp, order, limit)
        saturated |= sat
        total *= n
    return OracleResult(
        count=total,
        candidates=candidates,
        forced_spent={b: frozenset(s) for b, s in forced.items()},
        saturated=saturated,
        components=len(comps),
        component_sizes=sorted((len(c.key_images) for c in comps), reverse=True),
    )


def iter_assignments(view: LedgerView, *, limit: int = 1_000_000) -> Iterator[dict[KeyImage, OutputUid]]:
    """Yield every assignment (debug helper for fixtures); stops after ``limit``."""
    kis, domain, on = _domains(view)
    order = sorted(kis, key=lambda k: (len(domain[k]), kis.index(k)))
    doms = {k: sorted(domain[k]) for k in kis}
    used: set[tuple[str, OutputUid]] = set()
    current: dict[KeyImage, OutputUid] = {}
    emitted = 0

    def rec(depth: int):
        nonlocal emitted
        if emitted >= limit:
            return
        if depth == len(order):
            emitted += 1
            yield {k: current[k] for k in kis}
            return
        k = order[depth]
        for o in doms[k]:
            keys = [(b, o) for b in on[k]]
            if any(x in used for x in keys):
                continue
            used.update(keys)
            current[k] = o
            yield from rec(depth + 1)
            used.difference_update(keys)
        current.pop(k, None)

    yield from rec(0)


def dump_assignments(view: LedgerView, limit: int = 1000) -> str:
    """JSON lines of assignments in (amount, index) form, for fixture debugging."""
    lines = []
    for a in iter_assignments(view, limit=limit):
        lines.append(json.dumps(
            {ki: view.output_ref(o).to_json() for ki, o in a.items()}, separators=(",", ":")
        ))
    return "\n".join(lines)
