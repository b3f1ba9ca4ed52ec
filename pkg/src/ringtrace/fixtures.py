"""Hand-built ledgers: a small builder, the two-branch fork example, and
random small instances for cross-checking the engine against the oracle."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ingest import BranchSpec, ForkSpec, dump_block
from .ledger import OutputRef

DAY = 86_400


@dataclass
class _Branch:
    name: str
    parent: str | None
    fork_height: int | None
    blocks: list[dict] = field(default_factory=list)
    next_height: int = 0
    counters: dict[int, int] = field(default_factory=dict)


class LedgerBuilder:
    """Incrementally writes branch files in the ingestion format.

    Outputs are named; names map to :class:`OutputRef` values so rings can
    reference them symbolically.  ``fork`` splits off a child at the parent's
    next height, so build the shared prefix first.
    """

    def __init__(self, root: str = "main", start_time: int = 1_522_540_800,
                 interval: int = 120, start_height: int = 0):
        self.start_time = start_time
        self.interval = interval
        self._branches: dict[str, _Branch] = {root: _Branch(root, None, None, next_height=start_height)}
        self.refs: dict[str, OutputRef] = {}
        self._tx_counter = 0

    def fork(self, name: str, parent: str) -> int:
        p = self._branches[parent]
        child = _Branch(name, parent, p.next_height, next_height=p.next_height,
                        counters=dict(p.counters))
        self._branches[name] = child
        return child.fork_height

    def height(self, branch: str) -> int:
        return self._branches[branch].next_height

    def block(self, branch: str, timestamp: int | None = None) -> int:
        b = self._branches[branch]
        h = b.next_height
        ts = self.start_time + h * self.interval if timestamp is None else timestamp
        b.blocks.append({"height": h, "timestamp": ts, "txs": []})
        b.next_height += 1
        return h

    def _tx_hash(self) -> str:
        self._tx_counter += 1
        return f"{self._tx_counter:064x}"

    def _emit(self, b: _Branch, names, amount: int) -> list[dict]:
        """``names`` items are a name (or None) or a (name, amount) pair."""
        outs = []
        default = amount
        for n in names:
            amount = default
            if isinstance(n, tuple):
                n, amount = n
            idx = b.counters.get(amount, 0)
            b.counters[amount] = idx + 1
            if n is not None:
                if n in self.refs and self.refs[n] != OutputRef(amount, idx):
                    raise ValueError(f"output name {n!r} reused with a different ref")
                self.refs[n] = OutputRef(amount, idx)
            outs.append({"amount": amount})
        return outs

    def coinbase(self, branch: str, *names: str | None, amount: int = 0) -> None:
        b = self._branches[branch]
        b.blocks[-1]["txs"].append({
            "hash": self._tx_hash(), "coinbase": True, "inputs": [],
            "outputs": self._emit(b, names, amount),
        })

    def spend(self, branch: str, inputs, outputs=(), amount: int = 0) -> None:
        """Add a transaction; ``inputs`` is a list of (key_image, member names)."""
        b = self._branches[branch]
        b.blocks[-1]["txs"].append({
            "hash": self._tx_hash(), "coinbase": False,
            "inputs": [
                {"key_image": ki, "members": [self.refs[m].to_json() for m in members]}
                for ki, members in inputs
            ],
            "outputs": self._emit(b, outputs, amount),
        })

    def build(self) -> tuple[ForkSpec, dict[str, bytes]]:
        spec = ForkSpec(tuple(
            BranchSpec(b.name, f"{b.name}.jsonl", b.parent, b.fork_height)
            for b in self._branches.values()
        ))
        sources = {
            b.name: "".join(dump_block(blk) + "\n" for blk in b.blocks).encode()
            for b in self._branches.values()
        }
        return spec, sources


def two_branch() -> tuple[ForkSpec, dict[str, bytes], dict[str, OutputRef]]:
    """Two blocks before and two after a fork, one ring per block.

    Rings 0 and 1 both hold {b, c}; ring 2 holds {a, b, c} and is the last
    pre-fork ring.  Key image 3 is spent as {a,d,e,f} on ``main`` and as
    {a,e,f,g} on ``fork``; key image 4's two rings only share ``x``.
    Returns the fork spec, in-memory branch files, and the name -> ref map.
    """
    b = LedgerBuilder("main", start_time=1_522_195_200, interval=DAY)  # 2018-03-28
    b.block("main")
    b.coinbase("main", "a", "b", "c", "d", "e", "f", "x", "h", "i")
    b.block("main")
    b.spend("main", [("00", ["b", "c"])])
    b.block("main")
    b.spend("main", [("01", ["c", "b"])])
    b.block("main")
    b.spend("main", [("02", ["a", "b", "c"])])
    b.fork("fork", "main")
    b.block("main")
    b.spend("main", [("03", ["a", "d", "e", "f"])])
    b.block("main")
    b.spend("main", [("04", ["x", "h", "i"])])
    b.block("fork")
    b.coinbase("fork", "g", "j", "k")
    b.block("fork")
    b.spend("fork", [("03", ["a", "e", "f", "g"])])
    b.block("fork")
    b.spend("fork", [("04", ["j", "x", "k"])])
    spec, sources = b.build()
    return spec, sources, dict(b.refs)


# ---------------------------------------------------------------------------
# random small instances
# ---------------------------------------------------------------------------

@dataclass
class SmallInstance:
    spec: ForkSpec
    sources: dict[str, bytes]
    refs: dict[str, OutputRef]
    truth: dict[str, str] | None  # key image -> real output name
    seed: int


def random_instance(seed: int, *, branches: int = 1, max_key_images: int = 10,
                    max_ringsize: int = 6, consistent: bool = True) -> SmallInstance:
    """A tiny ledger with dense ring overlaps.

    With ``consistent`` every ring holds a hidden real output and the reals are
    distinct per branch, so at least one assignment exists.  Otherwise members
    are drawn freely (rings sharing a key image across branches still share
    one member so ingestion accepts them).
    """
    rng = random.Random(seed)
    n_ki = rng.randint(1, max_key_images)
    pool_size = rng.randint(max(2, n_ki // 2), n_ki + 4)
    pool = [f"p{i}" for i in range(pool_size)]
    b = LedgerBuilder("main", interval=3600)
    b.block("main")
    b.coinbase("main", *pool)
    truth: dict[str, str] = {}
    kis = [f"{i:02x}" for i in range(n_ki)]

    def ring(real: str | None, candidates: list[str]) -> list[str]:
        size = rng.randint(1, min(max_ringsize, len(candidates)))
        if real is None:
            return rng.sample(candidates, size)
        others = [c for c in candidates if c != real]
        members = [real] + rng.sample(others, min(size - 1, len(others)))
        rng.shuffle(members)
        return members

    def emit(branch: str, batch: list[tuple[str, list[str]]]) -> None:
        # one to three rings per transaction, one transaction per block
        while batch:
            take = rng.randint(1, 3)
            b.block(branch)
            b.spend(branch, batch[:take])
            batch = batch[take:]

    if branches == 1:
        reals = rng.sample(pool, min(n_ki, pool_size)) if consistent else [None] * n_ki
        batch = []
        for ki, real in zip(kis, reals):
            if real is None and consistent:
                break
            if real is not None:
                truth[ki] = real
            batch.append((ki, ring(real, pool)))
        emit("main", batch)
        return SmallInstance(*b.build(), dict(b.refs), truth if consistent else None, seed)

    # two branches: split key images into pre-fork, main-only, fork-only, shared
    roles = [rng.choice(("pre", "main", "fork", "shared", "shared")) for _ in kis]
    used_main: set[str] = set()
    used_fork: set[str] = set()
    pre_batch = []
    for ki, role in zip(kis, roles):
        if role != "pre":
            continue
        real = _pick(rng, pool, used_main) if consistent else None
        if consistent and real is None:
            continue
        if real is not None:
            used_main.add(real)
            used_fork.add(real)
            truth[ki] = real
        pre_batch.append((ki, ring(real, pool)))
    emit("main", pre_batch)
    b.fork("fork", "main")
    own = [f"q{i}" for i in range(rng.randint(0, 3))]
    b.block("fork")
    if own:
        b.coinbase("fork", *own)
    main_batch, fork_batch = [], []
    for ki, role in zip(kis, roles):
        if role == "main":
            real = _pick(rng, pool, used_main) if consistent else None
            if consistent and real is None:
                continue
            if real is not None:
                used_main.add(real)
                truth[ki] = real
            main_batch.append((ki, ring(real, pool)))
        elif role == "fork":
            real = _pick(rng, pool + own, used_fork) if consistent else None
            if consistent and real is None:
                continue
            if real is not None:
                used_fork.add(real)
                truth[ki] = real
            fork_batch.append((ki, ring(real, pool + own)))
        elif role == "shared":
            if consistent:
                real = _pick(rng, pool, used_main | used_fork)
                if real is None:
                    continue
                used_main.add(real)
                used_fork.add(real)
                truth[ki] = real
            else:
                real = rng.choice(pool)
            main_batch.append((ki, ring(real, pool)))
            fork_batch.append((ki, ring(real, pool + own)))
    emit("main", main_batch)
    emit("fork", fork_batch)
    if b.height("main") <= b._branches["fork"].fork_height:
        b.block("main")  # fork height must not exceed the parent tip
    return SmallInstance(*b.build(), dict(b.refs), truth if consistent else None, seed)


def _pick(rng: random.Random, pool: list[str], used: set[str]) -> str | None:
    free = [p for p in pool if p not in used]
    return rng.choice(free) if free else None
