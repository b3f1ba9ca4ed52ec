"""Guessing heuristics (newest member, output merging) and their accuracy.

Neither heuristic is sound.  Accuracy is measured either against simulator
ground truth or, as on real chains, against the rings the deduction rules
managed to trace; the latter rows are flagged ``estimated`` because only
traced rings can be scored.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .deduction import DeductionResult
from .errors import EmptyEvaluation
from .ledger import KeyImage, LedgerView, OutputUid, Ring, Transaction
from .simulator import GroundTruth

GNH = "gnh"
OMH = "omh"
IN_TIME = "in"
OUT_TIME = "out"


@dataclass(frozen=True)
class Guess:
    key_image: KeyImage
    branch: str
    guessed: OutputUid
    heuristic: str


def month_of(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m")


# ---------------------------------------------------------------------------
# guess newest
# ---------------------------------------------------------------------------

def guess_newest(view: LedgerView, ring: Ring, branch: str) -> OutputUid:
    """The most recently created member.

    Uids follow creation order along every branch timeline (block height,
    then position inside the block), so this is the largest uid.
    """
    if branch not in ring.branches:
        raise ValueError(f"ring {ring.key_image} is not on branch {branch!r}")
    return max(ring.members)


def guess_newest_all(view: LedgerView, branch: str) -> list[Guess]:
    return [
        Guess(r.key_image, branch, guess_newest(view, r, branch), GNH)
        for r in view.branch_rings(branch)
        if r.nontrivial
    ]


# ---------------------------------------------------------------------------
# output merging
# ---------------------------------------------------------------------------

def output_merging_guesses(view: LedgerView, tx: Transaction, branch: str) -> list[Guess]:
    """Guesses for inputs of ``tx`` that reference outputs of one earlier tx.

    For each source transaction referenced by two or more rings (through at
    least two distinct outputs), every ring holding exactly one output of that
    source guesses it.  Rings holding several outputs of the source, rings
    whose output is also the single pick of another ring, and rings that end
    up with conflicting guesses from different sources are skipped.
    """
    if len(tx.inputs) < 2:
        return []
    rings = [view.rings[r] for r in tx.inputs]
    by_source: dict[int, list[tuple[int, list[OutputUid]]]] = {}
    for pos, ring in enumerate(rings):
        per: dict[int, list[OutputUid]] = {}
        for m in ring.members:
            per.setdefault(view.outputs[m].creating_tx, []).append(m)
        for src, ms in per.items():
            by_source.setdefault(src, []).append((pos, ms))

    proposals: dict[int, set[OutputUid]] = {}
    for src in sorted(by_source):
        hits = by_source[src]
        if len(hits) < 2:
            continue
        if len({m for _, ms in hits for m in ms}) < 2:
            continue
        singles = [(pos, ms[0]) for pos, ms in hits if len(ms) == 1]
        picks = Counter(m for _, m in singles)
        for pos, m in singles:
            if picks[m] == 1:
                proposals.setdefault(pos, set()).add(m)
    return [
        Guess(rings[pos].key_image, branch, next(iter(g)), OMH)
        for pos, g in sorted(proposals.items())
        if len(g) == 1
    ]


def output_merging_all(view: LedgerView, branch: str) -> list[Guess]:
    out: list[Guess] = []
    for blk in view.timeline(branch):
        for tid in blk.txs:
            tx = view.transactions[tid]
            if not tx.coinbase and len(tx.inputs) >= 2:
                out += output_merging_guesses(view, tx, branch)
    return out


def guesses_for(view: LedgerView, heuristic: str, branches: Sequence[str] | None = None) -> list[Guess]:
    branches = list(branches or view.branch_names)
    fn = {GNH: guess_newest_all, OMH: output_merging_all}[heuristic]
    return [g for b in branches for g in fn(view, b)]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyRow:
    month: str
    heuristic: str
    basis: str
    tp: int
    fp: int
    undecided: int
    accuracy: float | None
    baseline: float | None
    estimated: bool = False


def evaluate(guesses: Iterable[Guess], truth: GroundTruth | DeductionResult,
             view: LedgerView, basis: str = IN_TIME) -> list[AccuracyRow]:
    """Score guesses per calendar month.

    ``basis`` ``in`` groups by the spending block's month, ``out`` by the
    month the guessed output was created.  Against ground truth every guess
    is decided; against a deduction result a guess is decided only when the
    ring is resolved or the guessed member is a known mixin.
    """
    if basis not in (IN_TIME, OUT_TIME):
        raise ValueError("basis must be 'in' or 'out'")
    guesses = list(guesses)
    estimated = isinstance(truth, DeductionResult)
    if estimated:
        store = truth.store
    else:
        reals: dict[KeyImage, OutputUid] = {}
        for g in guesses:
            if g.key_image in truth and g.key_image not in reals:
                reals[g.key_image] = truth.real_uid(view, g.key_image)

    acc: dict[tuple[str, str], list] = {}
    decided_any = False
    for g in guesses:
        ring = view.ring_on(g.branch, g.key_image)
        if estimated:
            real = store.resolved.get(g.key_image)
            cand = store.candidates[(g.branch, g.key_image)]
            if real is not None:
                verdict = real == g.guessed
            elif g.guessed not in cand:
                verdict = False
            else:
                verdict = None
            size = len(cand)
        else:
            real = reals.get(g.key_image)
            verdict = None if real is None else real == g.guessed
            size = len(ring.members)
        ts = ring.timestamp if basis == IN_TIME else view.outputs[g.guessed].created_at
        row = acc.setdefault((month_of(ts), g.heuristic), [0, 0, 0, 0.0])
        if verdict is None:
            row[2] += 1
        else:
            decided_any = True
            row[0 if verdict else 1] += 1
            row[3] += 1.0 / size
    if not decided_any:
        raise EmptyEvaluation("no guess could be decided against the given truth")
    rows = []
    for (month, heur), (tp, fp, und, inv) in sorted(acc.items()):
        n = tp + fp
        rows.append(AccuracyRow(
            month, heur, basis, tp, fp, und,
            tp / n if n else None, inv / n if n else None, estimated,
        ))
    return rows


def totals(rows: Iterable[AccuracyRow]) -> tuple[int, int, int]:
    tp = fp = und = 0
    for r in rows:
        tp += r.tp
        fp += r.fp
        und += r.undecided
    return tp, fp, und


def overall_accuracy(rows: Iterable[AccuracyRow]) -> tuple[float, float]:
    """Pooled (accuracy, baseline) over all rows."""
    rows = list(rows)
    tp, fp, _ = totals(rows)
    n = tp + fp
    if n == 0:
        raise EmptyEvaluation("no decided guesses")
    base = sum(r.baseline * (r.tp + r.fp) for r in rows if r.baseline is not None) / n
    return tp / n, base


ACCURACY_COLUMNS = ("month", "heuristic", "basis", "tp", "fp", "undecided", "accuracy", "baseline")


def _ratio(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def accuracy_csv(rows: Iterable[AccuracyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ACCURACY_COLUMNS)
    for r in rows:
        w.writerow([r.month, r.heuristic, r.basis, r.tp, r.fp, r.undecided,
                    _ratio(r.accuracy), _ratio(r.baseline)])
    return buf.getvalue()
