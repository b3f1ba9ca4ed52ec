"""Sound mixin deduction over a :class:`LedgerView`.

Three rules shrink per-(branch, key image) candidate sets until nothing
changes:

``zmr``
    a ring with one remaining candidate is traced; that output is spent and
    becomes a mixin in every other ring on the branch.
``ir``
    rings x candidate outputs form a bipartite graph in which every ring must
    be matched.  Edges that no ring-saturating matching uses are mixins, and
    outputs matched by every such matching are spent.  This covers every
    "N rings over the same N outputs" group at once.
``cc``
    rings that share a key image across branches spend the same output, so
    each keeps only the intersection of all their candidates.

Rules are monotone and deflationary, so the fixpoint does not depend on the
order they run in.
"""

from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InconsistentLedger, UnknownKeyImage
from .ledger import KeyImage, LedgerView, OutputRef, OutputUid
from .matching import UNMATCHED, allowed_edges, hopcroft_karp

ZMR = "zmr"
IR = "ir"
CC = "cc"
ALL_RULES = (ZMR, CC, IR)


class Mark(enum.Enum):
    UNKNOWN = "unknown"
    MIXIN = "mixin"
    REAL = "real"


@dataclass
class MarkBatch:
    """Changes computed by one rule application, applied atomically."""

    removals: list[tuple[str, KeyImage, OutputUid]] = field(default_factory=list)
    resolutions: list[tuple[str, KeyImage, OutputUid]] = field(default_factory=list)
    spent: list[tuple[str, OutputUid]] = field(default_factory=list)

    def extend(self, other: "MarkBatch") -> None:
        self.removals += other.removals
        self.resolutions += other.resolutions
        self.spent += other.spent


class MarkStore:
    """Mutable deduction state.

    ``candidates[(branch, key_image)]`` holds the ring members not yet ruled
    out; ``spent[branch]`` the outputs known spent on that branch;
    ``resolved[key_image]`` the traced real output.
    """

    def __init__(self, view: LedgerView):
        self.view = view
        self.candidates: dict[tuple[str, KeyImage], set[OutputUid]] = {}
        self.spent: dict[str, set[OutputUid]] = {b: set() for b in view.branch_names}
        self.resolved: dict[KeyImage, OutputUid] = {}
        self.version: dict[str, int] = {b: 0 for b in view.branch_names}
        for b in view.branch_names:
            for ring in view.branch_rings(b):
                self.candidates[(b, ring.key_image)] = set(ring.members)

    def copy(self) -> "MarkStore":
        new = object.__new__(MarkStore)
        new.view = self.view
        new.candidates = {k: set(v) for k, v in self.candidates.items()}
        new.spent = {b: set(s) for b, s in self.spent.items()}
        new.resolved = dict(self.resolved)
        new.version = dict(self.version)
        return new

    # -- queries ----------------------------------------------------------------

    def candidate_set(self, branch: str, key_image: KeyImage) -> frozenset[OutputUid]:
        try:
            return frozenset(self.candidates[(branch, key_image)])
        except KeyError:
            raise UnknownKeyImage(f"no ring with key image {key_image!r} on {branch!r}") from None

    def effective_ringsize(self, branch: str, key_image: KeyImage) -> int:
        try:
            return len(self.candidates[(branch, key_image)])
        except KeyError:
            raise UnknownKeyImage(f"no ring with key image {key_image!r} on {branch!r}") from None

    def traced(self, branch: str, key_image: KeyImage) -> bool:
        return self.effective_ringsize(branch, key_image) == 1

    def mark(self, branch: str, key_image: KeyImage, uid: OutputUid) -> Mark:
        cand = self.candidates.get((branch, key_image))
        if cand is None:
            raise UnknownKeyImage(f"no ring with key image {key_image!r} on {branch!r}")
        if self.resolved.get(key_image) == uid:
            return Mark.REAL
        if uid not in cand or key_image in self.resolved:
            return Mark.MIXIN
        return Mark.UNKNOWN

    def spent_unattributed(self, branch: str) -> set[OutputUid]:
        """Outputs known spent on ``branch`` without a known spending ring."""
        attributed = {
            self.resolved[ki] for ki in self.view.key_images(branch) if ki in self.resolved
        }
        return self.spent[branch] - attributed

    def canonical(self) -> tuple:
        """Order-independent snapshot used for equality checks."""
        return (
            tuple(sorted((b, ki, tuple(sorted(c))) for (b, ki), c in self.candidates.items())),
            tuple(sorted((b, tuple(sorted(s))) for b, s in self.spent.items())),
            tuple(sorted(self.resolved.items())),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarkStore):
            return NotImplemented
        return self.canonical() == other.canonical()

    # -- updates ----------------------------------------------------------------

    def apply(self, batch: MarkBatch) -> tuple[int, int]:
        """Apply a batch; returns (mark changes, new spent entries)."""
        marks = 0
        for branch, ki, uid in batch.removals:
            cand = self.candidates[(branch, ki)]
            if uid not in cand:
                continue
            if len(cand) == 1:
                raise InconsistentLedger(
                    f"ring {ki} on {branch} would lose its last candidate {uid}"
                )
            if self.resolved.get(ki) == uid:
                raise InconsistentLedger(f"resolved real {uid} of {ki} ruled out on {branch}")
            cand.discard(uid)
            self.version[branch] += 1
            marks += 1
        for branch, ki, uid in batch.resolutions:
            prev = self.resolved.get(ki)
            if prev is None:
                if uid not in self.candidates[(branch, ki)]:
                    raise InconsistentLedger(f"{ki} resolved to a ruled-out member {uid}")
                self.resolved[ki] = uid
                marks += 1
            elif prev != uid:
                raise InconsistentLedger(f"{ki} resolved to both {prev} and {uid}")
        added = 0
        for branch, uid in batch.spent:
            s = self.spent[branch]
            if uid not in s:
                s.add(uid)
                added += 1
        return marks, added


# ---------------------------------------------------------------------------
# rule planning (read-only against the store)
# ---------------------------------------------------------------------------

def plan_zero_mixin(view: LedgerView, store: MarkStore, branch: str) -> MarkBatch:
    batch = MarkBatch()
    members_of = view.member_index(branch)
    local: dict[KeyImage, set[OutputUid]] = {}
    cands = store.candidates

    def cand(ki: KeyImage) -> set[OutputUid]:
        c = local.get(ki)
        return c if c is not None else cands[(branch, ki)]

    work = [ki for ki in view.key_images(branch) if len(cands[(branch, ki)]) == 1]
    work.reverse()
    done: set[KeyImage] = set()
    spent = store.spent[branch]
    while work:
        ki = work.pop()
        if ki in done:
            continue
        done.add(ki)
        (real,) = cand(ki)
        if store.resolved.get(ki) != real:
            batch.resolutions.append((branch, ki, real))
        if real not in spent:
            batch.spent.append((branch, real))
        for other in members_of.get(real, ()):
            if other == ki:
                continue
            c = cand(other)
            if real not in c:
                continue
            if len(c) == 1:
                raise InconsistentLedger(
                    f"output {real} is the only candidate of both {ki} and {other} on {branch}"
                )
            if other not in local:
                c = local[other] = set(c)
            c.discard(real)
            batch.removals.append((branch, other, real))
            if len(c) == 1:
                work.append(other)
    return batch


def plan_allowed_edges(view: LedgerView, store: MarkStore, branch: str) -> MarkBatch:
    batch = MarkBatch()
    kis = list(view.key_images(branch))
    if not kis:
        return batch
    col: dict[OutputUid, int] = {}
    outs: list[OutputUid] = []
    adj: list[list[int]] = []
    for ki in kis:
        row = []
        for uid in sorted(store.candidates[(branch, ki)]):
            j = col.get(uid)
            if j is None:
                j = col[uid] = len(outs)
                outs.append(uid)
            row.append(j)
        adj.append(row)
    ml, mr = hopcroft_karp(adj, len(outs))
    if UNMATCHED in ml:
        missing = [kis[u] for u, v in enumerate(ml) if v == UNMATCHED]
        raise InconsistentLedger(
            f"no ring-saturating matching on {branch}: {len(missing)} ring(s) unmatched, "
            f"e.g. {missing[0]}"
        )
    flags, forced = allowed_edges(adj, len(outs), ml, mr)
    for ki, row, ok in zip(kis, adj, flags):
        for j, allowed in zip(row, ok):
            if not allowed:
                batch.removals.append((branch, ki, outs[j]))
    spent = store.spent[branch]
    for j, f in enumerate(forced):
        if f and outs[j] not in spent:
            batch.spent.append((branch, outs[j]))
    return batch


def plan_cross_chain(view: LedgerView, store: MarkStore) -> MarkBatch:
    batch = MarkBatch()
    for ki in view.multi_branch_key_images:
        branches = view.key_image_branches(ki)
        sets = [store.candidates[(b, ki)] for b in branches]
        common = set.intersection(*sets)
        if not common:
            raise InconsistentLedger(f"rings with key image {ki} have no common candidate")
        for b, s in zip(branches, sets):
            if len(s) != len(common):
                for uid in sorted(s - common):
                    batch.removals.append((b, ki, uid))
    return batch


# ---------------------------------------------------------------------------
# public rule operations
# ---------------------------------------------------------------------------

def zero_mixin_sweep(view: LedgerView, store: MarkStore, branch: str) -> int:
    """Rule ``zmr`` on one branch; returns the number of marks changed."""
    return store.apply(plan_zero_mixin(view, store, branch))[0]


def allowed_edge_filter(view: LedgerView, store: MarkStore, branch: str) -> int:
    """Rule ``ir`` on one branch; returns the number of marks changed."""
    return store.apply(plan_allowed_edges(view, store, branch))[0]


def cross_chain_intersect(view: LedgerView, store: MarkStore) -> int:
    """Rule ``cc`` across all branches; returns the number of marks changed."""
    return store.apply(plan_cross_chain(view, store))[0]


def effective_ringsize(store: MarkStore, branch: str, key_image: KeyImage) -> int:
    return store.effective_ringsize(branch, key_image)


@dataclass
class DeductionResult:
    store: MarkStore
    rules: tuple[str, ...]
    changes: list[dict[str, int]]  # per iteration: rule -> marks changed, plus "spent"

    @property
    def iterations(self) -> int:
        return len(self.changes)

    @property
    def changing_iterations(self) -> int:
        return sum(1 for c in self.changes if any(c.values()))

    @property
    def view(self) -> LedgerView:
        return self.store.view

    @property
    def resolved(self) -> dict[KeyImage, OutputUid]:
        return self.store.resolved


def parse_rules(text: str | Iterable[str]) -> tuple[str, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    rules = tuple(r.strip().lower() for r in items if r.strip())
    bad = [r for r in rules if r not in ALL_RULES]
    if bad:
        raise ValueError(f"unknown rule(s) {bad}; expected a subset of {list(ALL_RULES)}")
    if len(set(rules)) != len(rules):
        raise ValueError("rules listed twice")
    return rules


def run_fixpoint(
    view: LedgerView,
    rules: Sequence[str] = ALL_RULES,
    *,
    threads: int = 1,
    store: MarkStore | None = None,
    max_iterations: int | None = None,
) -> DeductionResult:
    """Apply ``rules`` in the given order until an iteration changes nothing.

    Per-branch rules are planned against the same snapshot (optionally on a
    thread pool) and applied in branch order, so results do not depend on
    ``threads``.  ``store`` resumes from an existing state (it is copied).
    """
    rules = parse_rules(rules)
    store = MarkStore(view) if store is None else store.copy()
    branches = view.branch_names
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 and len(branches) > 1 else None
    ir_seen: dict[str, int] = {}

    def per_branch(planner, which: list[str]) -> list[MarkBatch]:
        if pool is None:
            return [planner(view, store, b) for b in which]
        return list(pool.map(lambda b: planner(view, store, b), which))

    changes: list[dict[str, int]] = []
    try:
        while True:
            it = {r: 0 for r in rules}
            it["spent"] = 0
            for rule in rules:
                if rule == ZMR:
                    batches = per_branch(plan_zero_mixin, branches)
                elif rule == CC:
                    batches = [plan_cross_chain(view, store)]
                else:
                    # the filter is idempotent: skip branches untouched since the last run
                    todo = [b for b in branches if ir_seen.get(b) != store.version[b]]
                    batches = per_branch(plan_allowed_edges, todo)
                for batch in batches:
                    m, s = store.apply(batch)
                    it[rule] += m
                    it["spent"] += s
                if rule == IR:
                    for b in branches:
                        ir_seen[b] = store.version[b]
            changes.append(it)
            if not any(it.values()):
                break
            if max_iterations is not None and len(changes) >= max_iterations:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return DeductionResult(store, rules, changes)


# ---------------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------------

def _ref(view: LedgerView, uid: OutputUid) -> dict:
    return view.output_ref(uid).to_json()


def deduction_records(result: DeductionResult) -> Iterable[dict]:
    view, store = result.view, result.store
    for b in view.branch_names:
        for ki in view.key_images(b):
            real = store.resolved.get(ki)
            yield {
                "key_image": ki,
                "branch": b,
                "real": None if real is None else _ref(view, real),
                "candidates": [
                    view.output_ref(u).to_json()
                    for u in sorted(store.candidates[(b, ki)], key=view.output_ref)
                ],
            }


def export_result(result: DeductionResult, out_dir: str | os.PathLike) -> list[Path]:
    """Write ``deduction.jsonl`` plus one ``spent-<branch>.jsonl`` per branch."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    view, store = result.view, result.store
    paths = [out / "deduction.jsonl"]
    with open(paths[0], "w", encoding="utf-8", newline="\n") as fh:
        for rec in deduction_records(result):
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    for b in view.branch_names:
        owner = {store.resolved[ki]: ki for ki in view.key_images(b) if ki in store.resolved}
        p = out / f"spent-{b}.jsonl"
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            for uid in sorted(store.spent[b], key=view.output_ref):
                rec = _ref(view, uid)
                rec["key_image"] = owner.get(uid)
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        paths.append(p)
    return paths


def load_result(view: LedgerView, out_dir: str | os.PathLike,
                rules: Sequence[str] = ()) -> DeductionResult:
    """Rebuild a :class:`DeductionResult` from files written by :func:`export_result`."""
    out = Path(out_dir)
    store = MarkStore(view)
    with open(out / "deduction.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            b, ki = rec["branch"], rec["key_image"]
            if (b, ki) not in store.candidates:
                raise UnknownKeyImage(f"{ki} not on {b}")
            store.candidates[(b, ki)] = {
                view.resolve(OutputRef.from_json(c), b) for c in rec["candidates"]
            }
            if rec["real"] is not None:
                store.resolved[ki] = view.resolve(OutputRef.from_json(rec["real"]), b)
    for b in view.branch_names:
        p = out / f"spent-{b}.jsonl"
        if p.exists():
            with open(p, encoding="utf-8") as fh:
                store.spent[b] = {
                    view.resolve(OutputRef.from_json(json.loads(line)), b)
                    for line in fh if line.strip()
                }
    return DeductionResult(store, tuple(rules), [])
