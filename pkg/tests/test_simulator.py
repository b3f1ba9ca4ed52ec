import json
import random
from collections import namedtuple

import pytest
from scipy import stats

from ringtrace.deduction import CC, IR, ZMR, run_fixpoint
from ringtrace.errors import ConfigError, ExhaustedDecoyPool
from ringtrace.ingest import build_ledger, load_ledger
from ringtrace.simulator import (
    DAY, DecoyPool, ForkConfig, GammaAge, GroundTruth, RecentZone, RingsizePolicy, SimConfig,
    Triangular, Uniform, confidential_pool_filter, denominate, regime_from_json, sample_decoys,
    simulate,
)

from oracles import recent_zone_expectation


def small(**kw):
    base = dict(blocks=300, block_interval=600, txs_per_block=3, seed=5)
    base.update(kw)
    return SimConfig(**base)


# -- sampling ---------------------------------------------------------------------

def test_uniform_ks():
    n = 1000
    pool = DecoyPool(list(range(n)), [i * 60 for i in range(n)])
    rng = random.Random(0)
    draws = []
    while len(draws) < 100_000:
        got = sample_decoys(Uniform(), n * 60, pool, 6, rng)
        assert len(set(got)) == 6
        draws += got
    # spread each index over its unit cell so the reference is continuous
    jitter = random.Random(1)
    sample = [(d + jitter.random()) / n for d in draws]
    assert stats.kstest(sample, "uniform").pvalue > 0.01


@pytest.mark.parametrize("base", [Uniform(), Triangular()])
def test_recent_zone_fraction(base):
    n = 2000
    created = [i * 30 * DAY // n for i in range(n)]  # 30 days of outputs
    now = created[-1] + 60
    pool = DecoyPool(list(range(n)), created)
    regime = RecentZone(0.5, 1.8, base)
    rng = random.Random(2)
    young = total = 0
    while total < 100_000:
        for d in sample_decoys(regime, now, pool, 10, rng):
            young += now - created[d] <= 1.8 * DAY
            total += 1
    expected = regime.zone_mass(pool, now)
    if isinstance(base, Uniform):
        assert expected == pytest.approx(recent_zone_expectation(created, now, 0.5, 1.8 * DAY), abs=1e-3)
    # distinctness within a ring skews the share slightly; stays inside tolerance
    assert abs(young / total - expected) < 0.02


def test_gamma_prefers_recent():
    n = 5000
    created = [i * 120 for i in range(n)]
    pool = DecoyPool(list(range(n)), created)
    rng = random.Random(3)
    draws = [GammaAge().draw_index(rng, pool, created[-1] + 120) for _ in range(5000)]
    # the bulk of ages is a few days; with a week of history most picks are recent
    assert sum(d > n // 2 for d in draws) > 0.6 * len(draws)


def test_sample_edge_cases():
    pool = DecoyPool(list(range(5)), [0, 1, 2, 3, 4])
    rng = random.Random(0)
    assert sample_decoys(Uniform(), 10, pool, 0, rng) == []
    assert sorted(sample_decoys(Uniform(), 10, pool, 4, rng, exclude=2)) == [0, 1, 3, 4]
    with pytest.raises(ExhaustedDecoyPool):
        sample_decoys(Uniform(), 10, pool, 5, rng, exclude=2)


def test_confidential_filter():
    O = namedtuple("O", "uid amount")
    mixed = [O(0, 0), O(1, 5), O(2, 0), O(3, 10), O(4, 5)]
    assert [o.uid for o in confidential_pool_filter(mixed, 0)] == [0, 2]
    assert [o.uid for o in confidential_pool_filter(mixed, 5)] == [1, 4]
    conf = [O(i, 0) for i in range(4)]
    assert confidential_pool_filter(conf, 0) == conf


def test_denominate():
    assert denominate(8) == [1, 2, 5]
    assert denominate(1234) == [2, 2, 10, 20, 200, 1000]
    assert sum(denominate(987654)) == 987654
    assert denominate(0) == []


def test_ringsize_policy():
    p = RingsizePolicy.from_json({"kind": "minimum", "schedule": [[0, 1], [100, 3]], "extra_mean": 0.0})
    assert p.minimum(0) == 1 and p.minimum(99) == 1 and p.minimum(100) == 3
    q = RingsizePolicy.from_json({"kind": "minimum", "schedule": [[0, 3]], "extra_mean": 2.0})
    rng = random.Random(0)
    sizes = [q.draw(rng, 0) for _ in range(20_000)]
    assert min(sizes) == 3
    assert sum(sizes) / len(sizes) == pytest.approx(5.0, abs=0.1)
    with pytest.raises(ConfigError):
        RingsizePolicy.from_json({"kind": "fixed", "size": 5})


def test_regime_from_json():
    assert regime_from_json({"kind": "recent_zone", "q": 0.25, "window_days": 5}) == RecentZone(0.25, 5.0)
    with pytest.raises(ConfigError):
        regime_from_json({"kind": "nope"})
    with pytest.raises(ConfigError):
        regime_from_json({"kind": "recent_zone", "q": 2})


# -- configuration ------------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = small(forks=[ForkConfig("alt", 100, p_redeem=0.3)])
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_json()))
    assert SimConfig.load(p) == cfg


@pytest.mark.parametrize("bad", [
    {"blocks": 0},
    {"bogus": 1},
    {"merge_prob": 1.5},
    {"value_model": "cash"},
    {"forks": [{"name": "main", "fork_height": 10}]},
    {"forks": [{"name": "f", "fork_height": 0}]},
    {"forks": [{"name": "f", "fork_height": 10, "p_redeem": -1}]},
    {"decoys": {"kind": "schedule", "eras": [[0, {"kind": "zzz"}]]}},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        SimConfig.from_json(bad)


# -- generation ---------------------------------------------------------------------

def test_deterministic():
    a = simulate(small(forks=[ForkConfig("f", 150)]))
    b = simulate(small(forks=[ForkConfig("f", 150)]))
    c = simulate(small(forks=[ForkConfig("f", 150)], seed=6))
    assert a.files == b.files and a.truth.to_lines() == b.truth.to_lines()
    assert a.files != c.files


def test_single_branch_clean():
    res = simulate(small())
    view, report = build_ledger(res.fork_spec, res.files)
    assert view.branch_names == ["main"]
    assert report.ok and not report.warnings
    reals = res.truth.real_uids(view)
    assert len(reals) == len(view.rings)
    assert len(set(reals.values())) == len(reals)
    for ki, u in reals.items():
        assert u in view.ring_on("main", ki).members


def test_clamped_rings_recorded():
    res = simulate(small(blocks=20, ringsize={"kind": "fixed", "n": 16}))
    assert res.stats["clamped_rings"] > 0
    build_ledger(res.fork_spec, res.files)


def test_no_redemption_no_cross_chain():
    res = simulate(small(forks=[ForkConfig("f", 150, p_redeem=0.0)]))
    view, _ = build_ledger(res.fork_spec, res.files)
    assert view.cross_chain_key_images == []
    assert res.stats["cross_chain_key_images"] == 0
    r = run_fixpoint(view)
    assert sum(c[CC] for c in r.changes) == 0


def test_full_redemption_every_output_cross_chain():
    cfg = SimConfig(blocks=1100, block_interval=600, txs_per_block=12, seed=11,
                    ringsize={"kind": "fixed", "n": 7},
                    forks=[ForkConfig("f", 1000, p_redeem=1.0, redeem_delay_days=0, p_main_move=1.0,
                                      txs_per_block=1)])
    res = simulate(cfg)
    view, _ = build_ledger(res.fork_spec, res.files)
    unspent_at_fork = res.stats["redeem_scheduled"]["f"]
    assert unspent_at_fork >= 10_000
    assert res.stats["redeemed"]["f"] == unspent_at_fork
    assert len(view.cross_chain_key_images) == unspent_at_fork
    out = run_fixpoint(view)
    truth = res.truth.real_uids(view)
    assert sum(c[CC] for c in out.changes) > 0
    assert all(truth[ki] == u for ki, u in out.resolved.items())
    # with fresh decoys on both sides almost every redeemed ring is traced
    traced = sum(1 for ki in view.cross_chain_key_images if out.store.traced("f", ki))
    assert traced > 0.9 * unspent_at_fork


def test_write_and_reload(tmp_path):
    res = simulate(small(forks=[ForkConfig("f", 150)]))
    spec_path = res.write(tmp_path)
    view, report = load_ledger(spec_path)
    assert report.ok
    truth = GroundTruth.load(tmp_path / "truth.jsonl")
    assert truth.to_lines() == res.truth.to_lines()
    assert json.loads((tmp_path / "stats.json").read_text())["key_images"] == len(truth)
    assert SimConfig.load(tmp_path / "config.json") == res.config


def test_rules_sound_on_simulated_fork():
    res = simulate(small(blocks=600, forks=[ForkConfig("f", 300, p_redeem=0.6)]))
    view, _ = build_ledger(res.fork_spec, res.files)
    out = run_fixpoint(view, (ZMR, IR, CC))
    truth = res.truth.real_uids(view)
    assert out.resolved
    for (b, ki), c in out.store.candidates.items():
        assert truth[ki] in c
