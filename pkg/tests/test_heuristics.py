import pytest

from ringtrace.deduction import run_fixpoint
from ringtrace.errors import EmptyEvaluation
from ringtrace.fixtures import LedgerBuilder
from ringtrace.heuristics import (
    GNH, IN_TIME, OMH, OUT_TIME, Guess, accuracy_csv, evaluate, guess_newest, guesses_for,
    output_merging_guesses, totals,
)
from ringtrace.ingest import build_ledger
from ringtrace.ledger import OutputRef
from ringtrace.simulator import GroundTruth, TruthEntry

DAY = 86_400


def build(b):
    view, _ = build_ledger(*b.build())
    return view


def test_newest_strict_max():
    b = LedgerBuilder(interval=60)
    for h in range(502):
        b.block("main")
        if h == 10:
            b.coinbase("main", "old")
        elif h == 499:
            b.coinbase("main", "mid")
        elif h == 500:
            b.coinbase("main", "new")
    b.spend("main", [("01", ["old", "new", "mid"])])
    view = build(b)
    ring = view.ring_on("main", "01")
    assert guess_newest(view, ring, "main") == view.resolve(b.refs["new"], "main")


def test_newest_same_block_tie_break():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "first", "second")
    b.block("main")
    b.spend("main", [("01", ["second", "first"])])
    view = build(b)
    ring = view.ring_on("main", "01")
    assert guess_newest(view, ring, "main") == view.resolve(b.refs["second"], "main")


def test_newest_trivial_ring():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "only")
    b.block("main")
    b.spend("main", [("01", ["only"])])
    view = build(b)
    assert guess_newest(view, view.ring_on("main", "01"), "main") == 0
    assert guesses_for(view, GNH) == []


def merge_ledger(rings):
    """Source tx pays o1, o2, o5 (amounts 1, 2, 5); decoys of each amount exist."""
    b = LedgerBuilder()
    b.block("main")
    # every decoy has its own source tx so only the o* outputs share one
    for n in ("d1", "d2", "d5", "e1", "e2", "e5"):
        b.coinbase("main", (n, int(n[1])))
    b.block("main")
    b.spend("main", [("aa", ["d1"])], outputs=[("o1", 1), ("o2", 2), ("o5", 5)])
    b.block("main")
    for n in ("f1", "f2", "f5"):
        b.coinbase("main", (n, int(n[1])))
    b.block("main")
    b.spend("main", rings)
    view = build(b)
    return view, b.refs


def names_of(view, refs, guesses):
    inv = {view.resolve(r, "main"): n for n, r in refs.items()}
    return {g.key_image: inv[g.guessed] for g in guesses}


def last_tx(view):
    return view.transactions[view.own_blocks("main")[-1].txs[0]]


def test_merge_three_denominations():
    view, refs = merge_ledger([
        ("01", ["e1", "o1", "f1"]), ("02", ["o2", "e2"]), ("03", ["f5", "o5", "d5"]),
    ])
    got = output_merging_guesses(view, last_tx(view), "main")
    assert names_of(view, refs, got) == {"01": "o1", "02": "o2", "03": "o5"}
    assert all(g.heuristic == OMH for g in got)


def test_merge_no_shared_source():
    view, refs = merge_ledger([("01", ["e1", "f1"]), ("02", ["o2", "d2"])])
    assert output_merging_guesses(view, last_tx(view), "main") == []


def test_merge_ambiguous_ring_skipped():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "x")
    b.coinbase("main", "y")
    b.coinbase("main", "z")
    b.block("main")
    b.spend("main", [("aa", ["z"])], outputs=["o1", "o2", "o3"])
    b.block("main")
    b.spend("main", [("01", ["o1", "o2", "y"]), ("02", ["o3", "x"]), ("03", ["o2", "y"])])
    view = build(b)
    got = output_merging_guesses(view, last_tx(view), "main")
    # ring 01 holds two outputs of the source; 02 and 03 each hold one
    assert names_of(view, b.refs, got) == {"02": "o3", "03": "o2"}


def test_single_input_tx_no_guess():
    view, _ = merge_ledger([("01", ["o1", "e1"])])
    assert output_merging_guesses(view, last_tx(view), "main") == []


def fixture_truth(view, refs, reals):
    return GroundTruth({
        ki: TruthEntry(refs[n], ("main",), {"main": 0}) for ki, n in reals.items()
    })


def test_evaluate_against_deduction():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "a", "b", "c")
    b.block("main")
    b.spend("main", [("01", ["a"])])
    b.block("main")
    b.spend("main", [("02", ["a", "b"])])
    b.block("main")
    b.spend("main", [("03", ["b", "c"])])
    view = build(b)
    res = run_fixpoint(view)
    guesses = [Guess("02", "main", view.resolve(b.refs["b"], "main"), GNH)]
    rows = evaluate(guesses, res, view)
    assert (rows[0].tp, rows[0].fp, rows[0].undecided) == (1, 0, 0)
    assert rows[0].estimated
    wrong = [Guess("03", "main", view.resolve(b.refs["b"], "main"), GNH)]
    assert evaluate(wrong, res, view)[0].fp == 1


def test_evaluate_undecidable():
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", "a", "b")
    b.block("main")
    b.spend("main", [("01", ["a", "b"])])
    view = build(b)
    res = run_fixpoint(view)
    with pytest.raises(EmptyEvaluation):
        evaluate(guesses_for(view, GNH), res, view)


def test_ground_truth_months_and_baseline():
    b = LedgerBuilder(start_time=1_517_356_800, interval=DAY)  # 2018-01-31
    b.block("main")
    b.coinbase("main", "a", "b", "c", "d")
    b.block("main")  # 2018-02-01
    b.spend("main", [("01", ["a", "b"])])
    b.spend("main", [("02", ["c", "d", "a"])])
    view = build(b)
    truth = fixture_truth(view, b.refs, {"01": "b", "02": "c"})
    g = guesses_for(view, GNH)
    rows_in = evaluate(g, truth, view, IN_TIME)
    rows_out = evaluate(g, truth, view, OUT_TIME)
    assert [(r.month, r.tp, r.fp, r.undecided) for r in rows_in] == [("2018-02", 1, 1, 0)]
    assert [(r.month, r.tp, r.fp) for r in rows_out] == [("2018-01", 1, 1)]
    assert rows_in[0].baseline == pytest.approx((1 / 2 + 1 / 3) / 2)
    assert totals(rows_in) == totals(rows_out)
    assert accuracy_csv(rows_in) == (
        "month,heuristic,basis,tp,fp,undecided,accuracy,baseline\n"
        "2018-02,gnh,in,1,1,0,0.5000,0.4167\n"
    )


def test_bad_basis(twob):
    with pytest.raises(ValueError):
        evaluate([], GroundTruth(), twob.view, "sideways")
