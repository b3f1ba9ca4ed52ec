import pytest

from ringtrace.errors import TooLarge, Unsatisfiable
from ringtrace.fixtures import LedgerBuilder, random_instance
from ringtrace.ingest import build_ledger
from ringtrace.oracle import dump_assignments, enumerate_assignments, iter_assignments

from oracles import brute_force_assignments, rings_from_view


def single(rings, extra=()):
    names = sorted({m for _, ms in rings for m in ms} | set(extra))
    b = LedgerBuilder()
    b.block("main")
    b.coinbase("main", *names)
    for ki, ms in rings:
        b.block("main")
        b.spend("main", [(ki, ms)])
    view, _ = build_ledger(*b.build())
    return view, {n: view.resolve(b.refs[n], "main") for n in names}


def test_two_branch(twob):
    v = twob.view
    res = enumerate_assignments(v)
    # ki0/ki1 may swap b and c, ki3 may take e or f
    assert res.count == 4
    assert res.count == len(brute_force_assignments(rings_from_view(v)))
    assert res.traced() == {"02": twob.uid("a"), "04": twob.uid("x")}
    assert res.candidates["03"] == twob.uids("ef")
    assert res.candidates["00"] == twob.uids("bc")
    for b in ("main", "fork"):
        assert res.forced_spent[b] == twob.uids("abcx", b)
    assert not res.saturated


def test_triangle_with_tail():
    view, u = single([("01", ["a", "b"]), ("02", ["b", "c"]), ("03", ["c", "a"]), ("04", ["a", "d"])])
    res = enumerate_assignments(view)
    assert res.count == 2
    assert res.traced() == {"04": u["d"]}
    assert res.forced_spent["main"] == {u[n] for n in "abcd"}


def test_single_ring():
    view, u = single([("01", ["a"])])
    res = enumerate_assignments(view)
    assert res.count == 1
    assert res.traced() == {"01": u["a"]}


def test_unsatisfiable():
    view, _ = single([("01", ["a", "b"]), ("02", ["a", "b"]), ("03", ["a", "b"])], extra=["c"])
    with pytest.raises(Unsatisfiable):
        enumerate_assignments(view)


def test_too_large():
    names = [f"o{i}" for i in range(14)]
    rings = [(f"{i:02x}", [names[i], names[i + 1]]) for i in range(13)]
    view, _ = single(rings)
    with pytest.raises(TooLarge):
        enumerate_assignments(view, max_component=12)
    assert enumerate_assignments(view, max_component=13).count == 14


def test_count_saturates():
    names = [f"o{i}" for i in range(12)]
    rings = [(f"{i:02x}", names) for i in range(8)]
    view, _ = single(rings)
    res = enumerate_assignments(view, limit=1000)
    assert res.saturated
    assert res.count == 12 * 11 * 10 * 9 * 8 * 7 * 6 * 5


@pytest.mark.parametrize("seed", range(150))
def test_matches_brute_force(seed):
    inst = random_instance(seed, branches=1 + seed % 2, max_key_images=7, max_ringsize=4)
    view, _ = build_ledger(inst.spec, inst.sources)
    brute = brute_force_assignments(rings_from_view(view))
    res = enumerate_assignments(view)
    assert res.count == len(brute)
    for ki in view.all_key_images:
        assert res.candidates[ki] == {a[ki] for a in brute}
    for b in view.branch_names:
        on_b = [ki for ki in view.all_key_images if b in view.key_image_branches(ki)]
        used = [{a[k] for k in on_b} for a in brute]
        assert res.forced_spent[b] == (set.intersection(*used) if used else set())


def test_iter_and_dump(twob):
    got = list(iter_assignments(twob.view))
    assert len(got) == 4
    assert len(dump_assignments(twob.view).splitlines()) == 4
    assert len(list(iter_assignments(twob.view, limit=3))) == 3
