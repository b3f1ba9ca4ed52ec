"""Branch ledger files and fork specifications -> validated :class:`LedgerView`.

Branch files are line oriented, one JSON block object per line::

    {"height": H, "timestamp": T, "txs": [{"hash": "..", "coinbase": false,
      "inputs": [{"key_image": "..", "members": [{"amount": A, "index": I}]}],
      "outputs": [{"amount": A}]}]}

A child branch file holds only its post-fork blocks; the shared prefix is read
from the parent.  Per-amount output indexes continue across the fork.
"""

from __future__ import annotations

import io
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Union

from .errors import (
    DuplicateField,
    HeightGap,
    LedgerSyntaxError,
    LedgerValidationError,
)
from .ledger import Block, Branch, LedgerView, Output, OutputRef, Ring, Transaction

_HEX = re.compile(r"^(?:[0-9a-f]{2})+$")

Source = Union[str, bytes, os.PathLike, IO, Iterable]


# ---------------------------------------------------------------------------
# raw file model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawInput:
    key_image: str
    members: tuple[OutputRef, ...]


@dataclass(frozen=True)
class RawTx:
    hash: str
    coinbase: bool
    inputs: tuple[RawInput, ...]
    outputs: tuple[int, ...]  # amounts


@dataclass(frozen=True)
class RawBlock:
    height: int
    timestamp: int
    txs: tuple[RawTx, ...]
    line: int = 0

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "timestamp": self.timestamp,
            "txs": [
                {
                    "hash": tx.hash,
                    "coinbase": tx.coinbase,
                    "inputs": [
                        {"key_image": i.key_image, "members": [m.to_json() for m in i.members]}
                        for i in tx.inputs
                    ],
                    "outputs": [{"amount": a} for a in tx.outputs],
                }
                for tx in self.txs
            ],
        }


def dump_block(block: Mapping) -> str:
    """Serialize one block object as a canonical single line (no newline)."""
    return json.dumps(block, separators=(",", ":"), ensure_ascii=True)


def _no_duplicates(pairs):
    obj = {}
    for k, v in pairs:
        if k in obj:
            raise _Dup(k)
        obj[k] = v
    return obj


class _Dup(Exception):
    pass


def _int(obj, key: str, line: int) -> int:
    if key not in obj:
        raise LedgerSyntaxError(f"missing field {key!r}", line)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise LedgerSyntaxError(f"field {key!r} must be a non-negative integer", line)
    return v


def _hex(obj, key: str, line: int) -> str:
    v = obj.get(key)
    if not isinstance(v, str) or not _HEX.match(v):
        raise LedgerSyntaxError(f"field {key!r} must be a lowercase even-length hex string", line)
    return v


def _list(obj, key: str, line: int) -> list:
    v = obj.get(key)
    if not isinstance(v, list):
        raise LedgerSyntaxError(f"field {key!r} must be a list", line)
    return v


def _obj(v, what: str, line: int) -> dict:
    if not isinstance(v, dict):
        raise LedgerSyntaxError(f"{what} must be an object", line)
    return v


def _parse_block(text: str, line: int) -> RawBlock:
    try:
        obj = json.loads(text, object_pairs_hook=_no_duplicates)
    except _Dup as exc:
        raise DuplicateField(f"duplicate field {exc.args[0]!r}", line) from None
    except json.JSONDecodeError as exc:
        raise LedgerSyntaxError(f"malformed JSON ({exc.msg})", line) from None
    obj = _obj(obj, "block", line)
    txs = []
    for tx in _list(obj, "txs", line):
        tx = _obj(tx, "transaction", line)
        coinbase = tx.get("coinbase", False)
        if not isinstance(coinbase, bool):
            raise LedgerSyntaxError("field 'coinbase' must be a boolean", line)
        inputs = []
        for inp in _list(tx, "inputs", line):
            inp = _obj(inp, "input", line)
            members = tuple(
                OutputRef(_int(_obj(m, "member", line), "amount", line), _int(m, "index", line))
                for m in _list(inp, "members", line)
            )
            inputs.append(RawInput(_hex(inp, "key_image", line), members))
        outputs = tuple(_int(_obj(o, "output", line), "amount", line) for o in _list(tx, "outputs", line))
        txs.append(RawTx(_hex(tx, "hash", line), coinbase, tuple(inputs), outputs))
    return RawBlock(_int(obj, "height", line), _int(obj, "timestamp", line), tuple(txs), line)


def _lines(stream: Source) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, (bytes, bytearray)):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise LedgerSyntaxError("invalid UTF-8") from None
        yield raw


def parse_branch_file(stream: Source) -> Iterator[RawBlock]:
    """Yield blocks of one branch file in order.

    ``stream`` may be a binary or text file object, ``bytes``/``str`` content,
    or any iterable of lines.  Blank lines are skipped.
    """
    prev = None
    for lineno, text in enumerate(_lines(stream), start=1):
        if not text.strip():
            continue
        block = _parse_block(text, lineno)
        if prev is not None and block.height != prev + 1:
            raise HeightGap(f"height {block.height} follows {prev}", lineno)
        prev = block.height
        yield block


# ---------------------------------------------------------------------------
# fork specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchSpec:
    name: str
    file: str | None
    parent: str | None = None
    fork_height: int | None = None


@dataclass(frozen=True)
class ForkSpec:
    branches: tuple[BranchSpec, ...]

    @classmethod
    def single(cls, name: str, file: str | None = None) -> "ForkSpec":
        return cls((BranchSpec(name, file),))

    @classmethod
    def from_json(cls, obj: Mapping, base_dir: str | os.PathLike | None = None) -> "ForkSpec":
        out = []
        for b in obj["branches"]:
            f = b.get("file")
            if f is not None and base_dir is not None and not os.path.isabs(f):
                f = os.path.join(base_dir, f)
            out.append(BranchSpec(b["name"], f, b.get("parent"), b.get("fork_height")))
        return cls(tuple(out))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ForkSpec":
        """Read a fork spec file; relative branch paths resolve against its directory."""
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh), base_dir=path.parent)

    def to_json(self) -> dict:
        return {
            "branches": [
                {"name": b.name, "file": b.file, "parent": b.parent, "fork_height": b.fork_height}
                for b in self.branches
            ]
        }


# ---------------------------------------------------------------------------
# validation report
# ---------------------------------------------------------------------------

FATAL = "fatal"
WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    severity: str
    rule: str
    location: str
    message: str


@dataclass
class BranchCounts:
    blocks: int = 0
    txs: int = 0
    coinbase_txs: int = 0
    outputs: int = 0
    rings: int = 0
    nontrivial_rings: int = 0
    ring_members: int = 0

    def add_block(self, raw: RawBlock) -> None:
        self.blocks += 1
        for tx in raw.txs:
            self.txs += 1
            self.coinbase_txs += tx.coinbase
            self.outputs += len(tx.outputs)
            for inp in tx.inputs:
                self.rings += 1
                self.nontrivial_rings += len(inp.members) > 1
                self.ring_members += len(inp.members)


@dataclass
class ValidationReport:
    """Dataset statistics plus every violation found while building.

    ``own`` counts only blocks stored on the branch itself (data unique to
    that chain); ``timeline`` counts the inherited prefix as well.
    """

    own: dict[str, BranchCounts] = field(default_factory=dict)
    timeline: dict[str, BranchCounts] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    @property
    def fatal(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == FATAL]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == WARNING]

    @property
    def ok(self) -> bool:
        return not self.fatal

    @property
    def total(self) -> BranchCounts:
        t = BranchCounts()
        for c in self.own.values():
            for k in vars(t):
                setattr(t, k, getattr(t, k) + getattr(c, k))
        return t

    def add(self, severity: str, rule: str, location: str, message: str) -> None:
        self.violations.append(Violation(severity, rule, location, message))


# ---------------------------------------------------------------------------
# ledger assembly
# ---------------------------------------------------------------------------

def _ordered_branches(spec: ForkSpec, report: ValidationReport) -> list[BranchSpec]:
    names = [b.name for b in spec.branches]
    for n in {n for n in names if names.count(n) > 1}:
        report.add(FATAL, "DuplicateBranch", n, "branch name used twice")
    by_name = {b.name: b for b in spec.branches}
    roots = [b for b in spec.branches if b.parent is None]
    if len(roots) != 1:
        report.add(FATAL, "RootCount", "forkspec", f"expected exactly one root branch, got {len(roots)}")
    for b in spec.branches:
        if b.parent is not None:
            if b.parent not in by_name:
                report.add(FATAL, "UnknownParent", b.name, f"parent {b.parent!r} not in spec")
            if not isinstance(b.fork_height, int) or b.fork_height <= 0:
                report.add(FATAL, "BadForkHeight", b.name, "fork height must be a positive integer")
        elif b.fork_height is not None:
            report.add(FATAL, "BadForkHeight", b.name, "root branch cannot have a fork height")
    if report.fatal:
        return []
    ordered, placed = [], set()
    pending = list(spec.branches)
    while pending:
        progress = False
        for b in list(pending):
            if b.parent is None or b.parent in placed:
                ordered.append(b)
                placed.add(b.name)
                pending.remove(b)
                progress = True
        if not progress:
            report.add(FATAL, "ForkCycle", ",".join(b.name for b in pending), "cyclic parents")
            return []
    return ordered


def _read_branch(bspec: BranchSpec, sources: Mapping[str, Source] | None) -> list[RawBlock]:
    if sources is not None and bspec.name in sources:
        return list(parse_branch_file(sources[bspec.name]))
    if bspec.file is None:
        return []
    with open(bspec.file, "rb") as fh:
        return list(parse_branch_file(fh))


def build_ledger(
    spec: ForkSpec, sources: Mapping[str, Source] | None = None
) -> tuple[LedgerView, ValidationReport]:
    """Parse every branch of ``spec`` and assemble a validated ledger.

    ``sources`` optionally maps branch names to in-memory file contents,
    overriding the paths in ``spec``.  Raises :class:`LedgerValidationError`
    when any fatal violation is found; parse errors propagate unchanged.
    """
    report = ValidationReport()
    ordered = _ordered_branches(spec, report)
    if report.fatal:
        raise LedgerValidationError(report)

    raw: dict[str, list[RawBlock]] = {b.name: _read_branch(b, sources) for b in ordered}
    bmeta = {b.name: b for b in ordered}
    children: dict[str, list[str]] = {b.name: [] for b in ordered}
    for b in ordered:
        if b.parent is not None:
            children[b.parent].append(b.name)

    # heights and fork placement
    tips: dict[str, int | None] = {}
    for b in ordered:
        blocks = raw[b.name]
        if b.parent is None:
            if blocks and blocks[0].height not in (0, 1):
                report.add(FATAL, "BranchStart", b.name, "root file must start at height 0 or 1")
            tips[b.name] = blocks[-1].height if blocks else None
        else:
            ptip = tips[b.parent]
            if ptip is None or b.fork_height > ptip:
                report.add(FATAL, "BadForkHeight", b.name,
                           f"fork height {b.fork_height} exceeds parent tip {ptip}")
            if blocks and blocks[0].height != b.fork_height:
                report.add(FATAL, "BranchStart", b.name,
                           f"child file starts at {blocks[0].height}, expected {b.fork_height}")
            tips[b.name] = blocks[-1].height if blocks else b.fork_height - 1
    if report.fatal:
        raise LedgerValidationError(report)

    def sharing(branch: str, height: int) -> frozenset[str]:
        out = {branch}
        for c in children[branch]:
            if height < bmeta[c].fork_height:
                out |= sharing(c, height)
        return frozenset(out)

    outputs: list[Output] = []
    txs: list[Transaction] = []
    blocks: dict[str, list[Block]] = {}
    amount_index: dict[str, dict[int, list[int]]] = {}
    pending_rings = []  # (branch, tx_id, raw input, height, ts, branches)
    seen_hashes: dict[str, str] = {}

    for b in ordered:
        name = b.name
        if b.parent is None:
            lists: dict[int, list[int]] = {}
        else:
            lists = {
                a: [u for u in seq if outputs[u].height < b.fork_height]
                for a, seq in amount_index[b.parent].items()
            }
        amount_index[name] = lists
        blist = []
        prev_ts = None
        for rb in raw[name]:
            loc_blk = f"{name}@{rb.height}"
            if prev_ts is not None and rb.timestamp < prev_ts:
                report.add(WARNING, "NonMonotonicTimestamp", loc_blk,
                           f"timestamp {rb.timestamp} < previous {prev_ts}")
            prev_ts = rb.timestamp
            shared = sharing(name, rb.height)
            tx_ids = []
            for rtx in rb.txs:
                tx_id = len(txs)
                loc = f"{loc_blk}/{rtx.hash}"
                if rtx.coinbase and rtx.inputs:
                    report.add(FATAL, "CoinbaseWithInputs", loc, "coinbase transaction has inputs")
                if rtx.hash in seen_hashes:
                    report.add(WARNING, "DuplicateTxHash", loc, f"also seen at {seen_hashes[rtx.hash]}")
                else:
                    seen_hashes[rtx.hash] = loc
                out_uids = []
                for amount in rtx.outputs:
                    seq = lists.setdefault(amount, [])
                    uid = len(outputs)
                    outputs.append(Output(uid, amount, len(seq), rb.timestamp, rb.height, tx_id, name))
                    seq.append(uid)
                    out_uids.append(uid)
                for inp in rtx.inputs:
                    pending_rings.append((name, tx_id, inp, rb.height, rb.timestamp, shared, loc))
                txs.append((tx_id, rtx, tuple(out_uids), rb.height, rb.timestamp, name, shared))
                tx_ids.append(tx_id)
            blist.append(Block(rb.height, rb.timestamp, tuple(tx_ids), name))
        blocks[name] = blist

    # resolve ring members
    rings: list[Ring] = []
    tx_inputs: dict[int, list[int]] = {}
    for name, tx_id, inp, height, ts, shared, loc in pending_rings:
        loc = f"{loc}/{inp.key_image}"
        if not inp.members:
            report.add(FATAL, "EmptyRing", loc, "ring has no members")
            continue
        members = []
        bad = False
        for ref in inp.members:
            seq = amount_index[name].get(ref.amount, ())
            if ref.index >= len(seq):
                report.add(FATAL, "UnknownOutputRef", loc,
                           f"(amount={ref.amount}, index={ref.index}) does not exist on {name}")
                bad = True
                continue
            uid = seq[ref.index]
            if outputs[uid].height >= height:
                report.add(FATAL, "MemberNotYetCreated", loc,
                           f"member created at height {outputs[uid].height}, spent at {height}")
                bad = True
            members.append(uid)
        if len(set(members)) != len(members):
            report.add(FATAL, "DuplicateMember", loc, "ring lists a member twice")
            bad = True
        if bad:
            continue
        rid = len(rings)
        rings.append(Ring(rid, inp.key_image, tuple(members), tx_id, shared, height, ts, name))
        tx_inputs.setdefault(tx_id, []).append(rid)

    transactions = [
        Transaction(tx_id, rtx.hash, rtx.coinbase, tuple(tx_inputs.get(tx_id, ())), outs,
                    height, ts, name, shared)
        for tx_id, rtx, outs, height, ts, name, shared in txs
    ]

    # per-branch double spends and cross-chain consistency
    per_branch: dict[str, dict[str, Ring]] = {b.name: {} for b in ordered}
    by_ki: dict[str, list[Ring]] = {}
    for ring in rings:
        by_ki.setdefault(ring.key_image, []).append(ring)
        for bname in ring.branches:
            prev = per_branch[bname].get(ring.key_image)
            if prev is not None:
                report.add(FATAL, "DuplicateKeyImageOnBranch", f"{bname}/{ring.key_image}",
                           f"key image spent at heights {prev.height} and {ring.height}")
            else:
                per_branch[bname][ring.key_image] = ring
    for ki, group in by_ki.items():
        if len(group) > 1:
            common = set(group[0].members)
            for r in group[1:]:
                common &= set(r.members)
            if not common:
                report.add(FATAL, "DisjointCrossChainRings", ki,
                           "rings sharing this key image have no common member")

    if report.fatal:
        raise LedgerValidationError(report)

    view = LedgerView(
        [Branch(b.name, b.parent, b.fork_height) for b in ordered],
        blocks, outputs, rings, transactions, amount_index,
    )
    for b in ordered:
        own = BranchCounts()
        for rb in raw[b.name]:
            own.add_block(rb)
        report.own[b.name] = own
    for b in ordered:
        tl = BranchCounts()
        cur = b
        limit = None
        while cur is not None:
            for rb in raw[cur.name]:
                if limit is None or rb.height < limit:
                    tl.add_block(rb)
            limit = cur.fork_height if limit is None else min(limit, cur.fork_height or limit)
            cur = bmeta.get(cur.parent) if cur.parent else None
        report.timeline[b.name] = tl
    return view, report


def load_ledger(spec_path: str | os.PathLike) -> tuple[LedgerView, ValidationReport]:
    return build_ledger(ForkSpec.load(spec_path))


# ---------------------------------------------------------------------------
# export (round trip)
# ---------------------------------------------------------------------------

def export_branch_files(view: LedgerView) -> dict[str, bytes]:
    """Serialize ``view`` back into per-branch file contents."""
    out = {}
    for name in view.branch_names:
        lines = []
        for blk in view.own_blocks(name):
            txs = []
            for tid in blk.txs:
                tx = view.transactions[tid]
                txs.append({
                    "hash": tx.hash,
                    "coinbase": tx.coinbase,
                    "inputs": [
                        {
                            "key_image": view.rings[r].key_image,
                            "members": [view.output_ref(m).to_json() for m in view.rings[r].members],
                        }
                        for r in tx.inputs
                    ],
                    "outputs": [{"amount": view.outputs[u].amount} for u in tx.outputs],
                })
            lines.append(dump_block({"height": blk.height, "timestamp": blk.timestamp, "txs": txs}))
        out[name] = "".join(line + "\n" for line in lines).encode("utf-8")
    return out


def export_fork_spec(view: LedgerView, files: Mapping[str, str] | None = None) -> ForkSpec:
    files = files or {}
    return ForkSpec(tuple(
        BranchSpec(b.name, files.get(b.name), b.parent, b.fork_height)
        for b in view.branches.values()
    ))
