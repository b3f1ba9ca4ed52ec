"""Monthly traceability tables and with/without comparisons, as CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from datetime import date, datetime, time, timezone
from typing import Iterable, Sequence

from .deduction import DeductionResult
from .errors import EmptyWindow
from .heuristics import month_of
from .ledger import LedgerView

COMBINED = "*"


@dataclass(frozen=True)
class Window:
    """Inclusive UTC range of block timestamps; either end may be open."""

    start: int | None = None
    end: int | None = None

    def __contains__(self, ts: int) -> bool:
        return (self.start is None or ts >= self.start) and (self.end is None or ts <= self.end)

    @classmethod
    def from_dates(cls, start: str | date | None, end: str | date | None) -> "Window":
        return cls(_bound(start, False), _bound(end, True))


def _bound(value, upper: bool) -> int | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = value.strip()
        # a bare date covers the whole day
        if len(value) == 10:
            value = date.fromisoformat(value)
        else:
            value = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if isinstance(value, datetime):
        if value.tzinfo is None:
            value = value.replace(tzinfo=timezone.utc)
        return int(value.timestamp())
    t = time.max if upper else time.min
    return int(datetime.combine(value, t, tzinfo=timezone.utc).timestamp())


@dataclass(frozen=True)
class MonthlyRow:
    month: str
    branch: str
    nontrivial: int
    traced: int
    mixins: int
    reals: int
    spent_unattributed: int
    members: int

    @property
    def traced_ratio(self) -> float | None:
        return self.traced / self.nontrivial if self.nontrivial else None


MONTHLY_COLUMNS = (
    "month", "branch", "nontrivial_rings", "traced_rings", "identified_mixins",
    "identified_reals", "spent_unattributed", "members", "traced_ratio",
)


def _months_with_blocks(view: LedgerView, branch: str, window: Window) -> list[str]:
    return sorted({month_of(b.timestamp) for b in view.timeline(branch) if b.timestamp in window})


def monthly_aggregate(result: DeductionResult, view: LedgerView | None = None,
                      window: Window | None = None, *, combined: bool = True) -> list[MonthlyRow]:
    """Per-branch monthly rows over each branch timeline, plus combined rows.

    A branch row counts every ring on that branch's timeline, so pre-fork
    rings appear under each branch.  Combined rows (branch ``*``) count each
    ring once, on the branch that stores it, so they add up to the per-file
    totals.  Only nontrivial rings contribute to the counts.  A ring counts
    an identified real only when its own candidates on that branch are down
    to the resolved output.
    """
    view = view or result.view
    window = window or Window()
    store = result.store
    months = {b: _months_with_blocks(view, b, window) for b in view.branch_names}
    if not any(months.values()):
        raise EmptyWindow("no blocks inside the requested window")
    unattributed = {b: store.spent_unattributed(b) for b in view.branch_names}

    rows: list[MonthlyRow] = []
    for b in view.branch_names:
        acc = {m: [0] * 6 for m in months[b]}
        for ring in view.branch_rings(b):
            if not ring.nontrivial or ring.timestamp not in window:
                continue
            cand = store.candidates[(b, ring.key_image)]
            a = acc[month_of(ring.timestamp)]
            a[0] += 1
            a[1] += len(cand) == 1
            a[2] += len(ring.members) - len(cand)
            a[3] += len(cand) == 1 and ring.key_image in store.resolved
            a[4] += len(cand & unattributed[b])
            a[5] += len(ring.members)
        rows += [MonthlyRow(m, b, *acc[m]) for m in months[b]]

    if combined:
        # each distinct ring once, judged on the branch whose file holds it
        all_months = sorted({m for ms in months.values() for m in ms})
        acc = {m: [0] * 6 for m in all_months}
        for ring in view.rings:
            if not ring.nontrivial or ring.timestamp not in window:
                continue
            b = ring.origin_branch
            cand = store.candidates[(b, ring.key_image)]
            a = acc[month_of(ring.timestamp)]
            a[0] += 1
            a[1] += len(cand) == 1
            a[2] += len(ring.members) - len(cand)
            a[3] += len(cand) == 1 and ring.key_image in store.resolved
            a[4] += len(cand & unattributed[b])
            a[5] += len(ring.members)
        rows += [MonthlyRow(m, COMBINED, *acc[m]) for m in all_months]
    return rows


def _ratio(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def _write(header: Sequence[str], body: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    return buf.getvalue()


def monthly_csv(rows: Iterable[MonthlyRow]) -> str:
    return _write(MONTHLY_COLUMNS, ([*astuple(r), _ratio(r.traced_ratio)] for r in rows))


# ---------------------------------------------------------------------------
# window summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Summary:
    """Window totals for one branch (or ``*``)."""

    branch: str
    nontrivial: int
    members: int
    traced: int
    mixins: int
    reals: int
    spent_unattributed: int

    @property
    def identified(self) -> int:
        # the real counts as one identified member per resolved ring
        return self.mixins + self.reals

    @property
    def identified_fraction(self) -> float | None:
        return self.identified / self.members if self.members else None


def identified_fraction(reals: int, mixins: int, members: int) -> float:
    return (reals + mixins) / members


def summarize(rows: Iterable[MonthlyRow]) -> list[Summary]:
    per: dict[str, list[int]] = {}
    order: list[str] = []
    for r in rows:
        if r.branch not in per:
            per[r.branch] = [0] * 6
            order.append(r.branch)
        a = per[r.branch]
        for i, v in enumerate((r.nontrivial, r.members, r.traced, r.mixins, r.reals,
                               r.spent_unattributed)):
            a[i] += v
    return [Summary(b, *per[b]) for b in order]


SUMMARY_COLUMNS = ("branch", "nontrivial_rings", "members", "traced_rings",
                   "identified_mixins", "identified_reals", "spent_unattributed",
                   "identified_fraction")


def summary_csv(summaries: Iterable[Summary]) -> str:
    return _write(SUMMARY_COLUMNS, (
        [s.branch, s.nontrivial, s.members, s.traced, s.mixins, s.reals,
         s.spent_unattributed, _ratio(s.identified_fraction)]
        for s in summaries
    ))


@dataclass(frozen=True)
class DeltaRow:
    branch: str
    metric: str
    without: int | float | None
    with_: int | float | None


DELTA_COLUMNS = ("branch", "metric", "without", "with")


def delta_report(with_result: DeductionResult, without_result: DeductionResult,
                 view: LedgerView | None = None, window: Window | None = None) -> list[DeltaRow]:
    """Compare two rule sets over the same ledger and window."""
    view = view or with_result.view
    a = {s.branch: s for s in summarize(monthly_aggregate(with_result, view, window))}
    b = {s.branch: s for s in summarize(monthly_aggregate(without_result, view, window))}
    rows = []
    for br in a:
        w, wo = a[br], b[br]
        rows += [
            DeltaRow(br, "nontrivial_rings", wo.nontrivial, w.nontrivial),
            DeltaRow(br, "members", wo.members, w.members),
            DeltaRow(br, "traced_rings", wo.traced, w.traced),
            DeltaRow(br, "identified_reals", wo.reals, w.reals),
            DeltaRow(br, "identified_mixins", wo.mixins, w.mixins),
            DeltaRow(br, "identified_members", wo.identified, w.identified),
            DeltaRow(br, "identified_fraction", wo.identified_fraction, w.identified_fraction),
        ]
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    return _ratio(v) if isinstance(v, float) else str(v)


def delta_csv(rows: Iterable[DeltaRow]) -> str:
    return _write(DELTA_COLUMNS, ([r.branch, r.metric, _cell(r.without), _cell(r.with_)] for r in rows))

