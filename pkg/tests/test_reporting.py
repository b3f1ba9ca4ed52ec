import pytest
from hypothesis import given, settings, strategies as st

from ringtrace.deduction import CC, IR, ZMR, run_fixpoint
from ringtrace.errors import EmptyWindow
from ringtrace.fixtures import LedgerBuilder, random_instance
from ringtrace.ingest import build_ledger
from ringtrace.reporting import (
    COMBINED, Window, delta_csv, delta_report, identified_fraction, monthly_aggregate,
    monthly_csv, summarize,
)
from ringtrace.simulator import ForkConfig, SimConfig, simulate


def by_key(rows):
    return {(r.month, r.branch): r for r in rows}


def test_two_branch_rows(twob):
    rows = by_key(monthly_aggregate(run_fixpoint(twob.view)))
    # blocks 0-3 fall in March 2018, the post-fork blocks in April
    m = rows[("2018-03", "main")]
    assert (m.nontrivial, m.traced, m.reals, m.members) == (3, 1, 1, 7)
    a = rows[("2018-04", "main")]
    assert (a.nontrivial, a.traced, a.mixins, a.reals) == (2, 1, 4, 1)
    total = summarize(monthly_aggregate(run_fixpoint(twob.view)))
    main = next(s for s in total if s.branch == "main")
    assert (main.nontrivial, main.traced) == (5, 2)
    comb = next(s for s in total if s.branch == COMBINED)
    assert comb.nontrivial == twob.report.total.nontrivial_rings == 7


def test_row_invariants(twob):
    res = run_fixpoint(twob.view)
    cross = len(twob.view.cross_chain_key_images)
    for r in monthly_aggregate(res):
        assert 0 <= r.traced <= r.nontrivial
        assert r.reals <= r.traced + cross
        assert min(r.mixins, r.spent_unattributed, r.members) >= 0


def test_empty_window(twob):
    res = run_fixpoint(twob.view)
    with pytest.raises(EmptyWindow):
        monthly_aggregate(res, window=Window.from_dates("2019-01-01", "2019-02-01"))


def test_window_is_inclusive(twob):
    res = run_fixpoint(twob.view)
    # the two main post-fork blocks sit on 2018-04-01 and 2018-04-02
    rows = monthly_aggregate(res, window=Window.from_dates("2018-04-02", "2018-04-02"), combined=False)
    main = [r for r in rows if r.branch == "main"]
    assert [(r.month, r.nontrivial) for r in main] == [("2018-04", 1)]


def test_all_trivial_ledger():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "a", "b")
    b.block("main")
    b.spend("main", [("01", ["a"]), ("02", ["b"])])
    view, _ = build_ledger(*b.build())
    rows = monthly_aggregate(run_fixpoint(view))
    assert rows and all(r.nontrivial == 0 and r.traced == 0 for r in rows)


def test_fraction_formatting():
    # reals plus mixins over all members, four decimals
    assert f"{identified_fraction(73_321, 544_131, 11_826_525):.4f}" == "0.0522"
    assert f"{identified_fraction(25_256, 203_251, 11_826_525):.4f}" == "0.0193"


def test_csv_bytes(twob):
    res = run_fixpoint(twob.view)
    text = monthly_csv(monthly_aggregate(res))
    assert text.splitlines()[0] == (
        "month,branch,nontrivial_rings,traced_rings,identified_mixins,identified_reals,"
        "spent_unattributed,members,traced_ratio"
    )
    assert "2018-03,main,3,1,2,1,4,7,0.3333" in text.splitlines()
    assert "\r" not in text and text.endswith("\n")
    assert monthly_csv(monthly_aggregate(run_fixpoint(twob.view, (IR, CC, ZMR), threads=3))) == text


def test_delta_rows(twob):
    w = run_fixpoint(twob.view)
    wo = run_fixpoint(twob.view, (ZMR, IR))
    rows = delta_report(w, wo)
    got = {(r.branch, r.metric): (r.without, r.with_) for r in rows}
    assert got[("main", "traced_rings")] == (1, 2)
    assert got[("main", "identified_mixins")] == (3, 6)
    assert got[(COMBINED, "traced_rings")] == (1, 3)
    assert "main,identified_fraction,0.2857,0.5714" in delta_csv(rows).splitlines()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 5000), branches=st.sampled_from([1, 2]))
def test_sums_match_report_and_recount(seed, branches):
    inst = random_instance(seed, branches=branches)
    view, report = build_ledger(inst.spec, inst.sources)
    res = run_fixpoint(view)
    rows = monthly_aggregate(res)
    for b in view.branch_names:
        mine = [r for r in rows if r.branch == b]
        assert sum(r.nontrivial for r in mine) == report.timeline[b].nontrivial_rings
        assert sum(r.members for r in mine) <= report.timeline[b].ring_members
        traced = sum(1 for ring in view.branch_rings(b)
                     if ring.nontrivial and len(res.store.candidates[(b, ring.key_image)]) == 1)
        assert sum(r.traced for r in mine) == traced
    comb = [r for r in rows if r.branch == COMBINED]
    assert sum(r.nontrivial for r in comb) == report.total.nontrivial_rings


def test_fork_lift_by_month():
    cfg = SimConfig(blocks=2000, block_interval=14_400, txs_per_block=3, seed=1,
                    ringsize={"kind": "fixed", "n": 5},
                    forks=[ForkConfig("fork", 1086, p_redeem=0.3, redeem_delay_days=45, txs_per_block=1)])
    sim = simulate(cfg)
    view, _ = build_ledger(sim.fork_spec, sim.files)
    w = by_key(monthly_aggregate(run_fixpoint(view)))
    wo = by_key(monthly_aggregate(run_fixpoint(view, (ZMR, IR))))
    post = sorted(k for k in w if k[1] == "main" and k[0] >= "2018-07")
    assert len(post) >= 4
    for k in post:
        assert w[k].traced > wo[k].traced
