"""Multi-branch ledger model.

Outputs are identified by a dense integer uid.  Outputs created below a
branch's fork height are shared with the parent and keep the parent's uid;
post-fork outputs get uids local to their branch.  Uids grow with creation
order along every branch timeline, so "newer" is simply "larger uid".
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Sequence

from .errors import UnknownOutputRef

OutputUid = int
KeyImage = str


@dataclass(frozen=True, order=True)
class OutputRef:
    """Position of an output in the per-amount output sequence of a branch."""

    amount: int
    index: int

    def to_json(self) -> dict:
        return {"amount": self.amount, "index": self.index}

    @classmethod
    def from_json(cls, obj: Mapping) -> "OutputRef":
        return cls(int(obj["amount"]), int(obj["index"]))


@dataclass(frozen=True)
class Branch:
    name: str
    parent: str | None
    fork_height: int | None


@dataclass(frozen=True)
class Output:
    uid: OutputUid
    amount: int
    index: int
    created_at: int
    height: int
    creating_tx: int
    origin_branch: str

    @property
    def ref(self) -> OutputRef:
        return OutputRef(self.amount, self.index)


@dataclass(frozen=True)
class Ring:
    """One transaction input: key image plus ordered member uids."""

    ring_id: int
    key_image: KeyImage
    members: tuple[OutputUid, ...]
    spending_tx: int
    branches: frozenset[str]
    height: int
    timestamp: int
    origin_branch: str

    @property
    def nontrivial(self) -> bool:
        return len(self.members) > 1


@dataclass(frozen=True)
class Transaction:
    tx_id: int
    hash: str
    coinbase: bool
    inputs: tuple[int, ...]  # ring ids
    outputs: tuple[OutputUid, ...]
    height: int
    timestamp: int
    origin_branch: str
    branches: frozenset[str]


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    txs: tuple[int, ...]
    origin_branch: str


class LedgerView:
    """Immutable multi-branch ledger.

    Instances are produced by :func:`ringtrace.ingest.build_ledger`; the
    constructor only wires together tables that have already been validated.
    """

    def __init__(
        self,
        branches: Sequence[Branch],
        blocks: Mapping[str, Sequence[Block]],
        outputs: Sequence[Output],
        rings: Sequence[Ring],
        transactions: Sequence[Transaction],
        amount_index: Mapping[str, Mapping[int, Sequence[OutputUid]]],
    ):
        self.branches: dict[str, Branch] = {b.name: b for b in branches}
        self._blocks = {name: tuple(bl) for name, bl in blocks.items()}
        self.outputs: tuple[Output, ...] = tuple(outputs)
        self.rings: tuple[Ring, ...] = tuple(rings)
        self.transactions: tuple[Transaction, ...] = tuple(transactions)
        self._amount_index = {
            b: {a: tuple(u) for a, u in per.items()} for b, per in amount_index.items()
        }
        self._key_image_index: dict[str, dict[KeyImage, int]] = {b: {} for b in self.branches}
        self._branch_rings: dict[str, list[int]] = {b: [] for b in self.branches}
        for ring in self.rings:
            for b in ring.branches:
                self._key_image_index[b][ring.key_image] = ring.ring_id
        # timeline order: rings sorted by (height, ring_id) per branch
        for name in self.branches:
            ids = list(self._key_image_index[name].values())
            ids.sort(key=lambda r: (self.rings[r].height, r))
            self._branch_rings[name] = ids
        self._by_key_image: dict[KeyImage, list[int]] = {}
        for ring in self.rings:
            self._by_key_image.setdefault(ring.key_image, []).append(ring.ring_id)

    # -- structure ------------------------------------------------------------

    @property
    def branch_names(self) -> list[str]:
        return list(self.branches)

    @property
    def root(self) -> str:
        return next(b.name for b in self.branches.values() if b.parent is None)

    def own_blocks(self, branch: str) -> tuple[Block, ...]:
        """Blocks stored on ``branch`` itself (post-fork part for children)."""
        return self._blocks[branch]

    def timeline(self, branch: str) -> list[Block]:
        """All blocks visible on ``branch``, inherited prefix included."""
        b = self.branches[branch]
        own = list(self._blocks[branch])
        if b.parent is None:
            return own
        prefix = [blk for blk in self.timeline(b.parent) if blk.height < b.fork_height]
        return prefix + own

    def tip_height(self, branch: str) -> int | None:
        tl = self._blocks[branch]
        if tl:
            return tl[-1].height
        b = self.branches[branch]
        return None if b.parent is None else b.fork_height - 1

    # -- rings ------------------------------------------------------------------

    def branch_ring_ids(self, branch: str) -> list[int]:
        """Ring ids on the timeline of ``branch`` in spending order."""
        return self._branch_rings[branch]

    def branch_rings(self, branch: str) -> Iterator[Ring]:
        for rid in self._branch_rings[branch]:
            yield self.rings[rid]

    def key_images(self, branch: str) -> dict[KeyImage, int]:
        """Mapping key image -> ring id for every ring on ``branch``."""
        return self._key_image_index[branch]

    def ring_on(self, branch: str, key_image: KeyImage) -> Ring:
        return self.rings[self._key_image_index[branch][key_image]]

    def rings_for_key_image(self, key_image: KeyImage) -> list[tuple[str, Ring]]:
        out = []
        for rid in self._by_key_image.get(key_image, ()):
            ring = self.rings[rid]
            for b in self.branches:
                if b in ring.branches:
                    out.append((b, ring))
        return out

    def key_image_branches(self, key_image: KeyImage) -> list[str]:
        return [b for b, _ in self.rings_for_key_image(key_image)]

    @cached_property
    def multi_branch_key_images(self) -> list[KeyImage]:
        """Key images carried by rings on at least two branches."""
        out = []
        for ki, rids in self._by_key_image.items():
            n = sum(len(self.rings[r].branches) for r in rids)
            if n >= 2:
                out.append(ki)
        return out

    @cached_property
    def cross_chain_key_images(self) -> list[KeyImage]:
        """Key images spent by distinct rings on different branches."""
        return [ki for ki, rids in self._by_key_image.items() if len(rids) >= 2]

    @cached_property
    def all_key_images(self) -> list[KeyImage]:
        return list(self._by_key_image)

    def member_index(self, branch: str) -> dict[OutputUid, list[KeyImage]]:
        """Output uid -> key images (on ``branch``) whose rings reference it."""
        cache = self.__dict__.setdefault("_member_index_cache", {})
        if branch not in cache:
            idx: dict[OutputUid, list[KeyImage]] = {}
            for ring in self.branch_rings(branch):
                for m in ring.members:
                    idx.setdefault(m, []).append(ring.key_image)
            cache[branch] = idx
        return cache[branch]

    # -- outputs ---------------------------------------------------------------

    def resolve(self, ref: OutputRef, branch: str) -> OutputUid:
        try:
            seq = self._amount_index[branch].get(ref.amount, ())
        except KeyError:
            raise UnknownOutputRef(f"unknown branch {branch!r}") from None
        if not 0 <= ref.index < len(seq):
            raise UnknownOutputRef(
                f"no output (amount={ref.amount}, index={ref.index}) on branch {branch!r}"
            )
        return seq[ref.index]

    def output_ref(self, uid: OutputUid) -> OutputRef:
        return self.outputs[uid].ref

    def amount_outputs(self, branch: str, amount: int) -> tuple[OutputUid, ...]:
        """Uids of all outputs of ``amount`` on the timeline of ``branch``."""
        return self._amount_index[branch].get(amount, ())

    def outputs_created_before(self, branch: str, amount: int, height: int) -> int:
        """Number of ``amount`` outputs on ``branch`` created below ``height``."""
        seq = self.amount_outputs(branch, amount)
        heights = [self.outputs[u].height for u in seq]
        return bisect_left(heights, height)

    def __repr__(self) -> str:
        return (
            f"LedgerView(branches={self.branch_names}, outputs={len(self.outputs)}, "
            f"rings={len(self.rings)}, txs={len(self.transactions)})"
        )
