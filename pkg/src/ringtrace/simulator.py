"""Synthetic ring-signature ledgers with known real spends.

The root branch is generated block by block.  Every block has a coinbase
output; ordinary transactions pick a real output to spend by drawing a target
age from the spend-age model and taking the nearest unspent output, then pad
every input with decoys drawn by the active decoy regime.  Forks copy the
root's state at the fork height; on the child, pre-fork outputs are only spent
through redemptions (probability ``p_redeem`` each), which reuse the key image
with an independently sampled decoy set.

All randomness comes from :class:`random.Random` instances seeded per branch
from the config seed, so a config always produces byte-identical files.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import random
from bisect import bisect_left, bisect_right
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .errors import ConfigError, ExhaustedDecoyPool
from .ingest import BranchSpec, ForkSpec, dump_block
from .ledger import KeyImage, LedgerView, OutputRef, OutputUid

DAY = 86_400

# ---------------------------------------------------------------------------
# decoy regimes
# ---------------------------------------------------------------------------


class DecoyPool:
    """Outputs ordered by creation; only the first ``n`` are eligible."""

    def __init__(self, ids: Sequence, created_at: Sequence[int], n: int | None = None,
                 ids_sorted: bool = False):
        self.ids = ids
        self.created_at = created_at
        self.n = len(ids) if n is None else n
        self.ids_sorted = ids_sorted

    def __contains__(self, item) -> bool:
        if self.ids_sorted:
            i = bisect_left(self.ids, item, 0, self.n)
            return i < self.n and self.ids[i] == item
        return any(self.ids[i] == item for i in range(self.n))

    def eligible(self) -> list:
        return [self.ids[i] for i in range(self.n)]

    def zone_start(self, now: int, window: float) -> int:
        return bisect_left(self.created_at, now - window, 0, self.n)


class Regime(Protocol):
    def draw_index(self, rng: random.Random, pool: DecoyPool, now: int) -> int: ...


@dataclass(frozen=True)
class Uniform:
    """Every eligible output equally likely."""

    def draw_index(self, rng, pool, now):
        return int(rng.random() * pool.n)


@dataclass(frozen=True)
class Triangular:
    """Density linear in creation index, rising towards the newest output."""

    def draw_index(self, rng, pool, now):
        return min(pool.n - 1, int(math.sqrt(rng.random()) * pool.n))


@dataclass(frozen=True)
class RecentZone:
    """With probability ``q`` draw uniformly among outputs younger than
    ``window_days``; otherwise defer to ``base``."""

    q: float = 0.5
    window_days: float = 1.8
    base: Regime = Uniform()

    def draw_index(self, rng, pool, now):
        if rng.random() < self.q:
            start = pool.zone_start(now, self.window_days * DAY)
            if start < pool.n:
                return start + int(rng.random() * (pool.n - start))
        return self.base.draw_index(rng, pool, now)

    def zone_mass(self, pool: DecoyPool, now: int) -> float:
        """Expected fraction of draws younger than the window (no exclusions)."""
        start = pool.zone_start(now, self.window_days * DAY)
        inside = pool.n - start
        if inside == 0:
            return 0.0
        base_mass = _base_mass(self.base, pool, start)
        return self.q + (1 - self.q) * base_mass


def _base_mass(base: Regime, pool: DecoyPool, start: int) -> float:
    n = pool.n
    if isinstance(base, Uniform):
        return (n - start) / n
    if isinstance(base, Triangular):
        return 1 - (start / n) ** 2
    raise ValueError(f"no closed form zone mass for {base!r}")


@dataclass(frozen=True)
class GammaAge:
    """log(age in seconds) ~ Gamma(shape, rate); pick the newest output at
    least that old.  Defaults are the values wallets adopted in 2018."""

    shape: float = 19.28
    rate: float = 1.61

    def draw_index(self, rng, pool, now):
        for _ in range(64):
            age = math.exp(rng.gammavariate(self.shape, 1.0 / self.rate))
            i = bisect_right(pool.created_at, now - age, 0, pool.n) - 1
            if i >= 0:
                return i
        return int(rng.random() * pool.n)


@dataclass(frozen=True)
class LogNormalAge:
    """Output age log-normal with the given median (days)."""

    median_days: float = 2.0
    sigma: float = 1.0

    def draw_age(self, rng) -> float:
        return self.median_days * DAY * math.exp(self.sigma * rng.gauss(0.0, 1.0))

    def draw_index(self, rng, pool, now):
        i = bisect_right(pool.created_at, now - self.draw_age(rng), 0, pool.n) - 1
        return max(i, 0)


def regime_from_json(obj: Mapping) -> Regime:
    kind = obj.get("kind")
    if kind == "uniform":
        return Uniform()
    if kind == "triangular":
        return Triangular()
    if kind == "recent_zone":
        q = float(obj.get("q", 0.5))
        if not 0 <= q <= 1:
            raise ConfigError("recent_zone q must be in [0, 1]")
        base = regime_from_json(obj.get("base", {"kind": "uniform"}))
        return RecentZone(q, float(obj.get("window_days", 1.8)), base)
    if kind == "gamma":
        return GammaAge(float(obj.get("shape", 19.28)), float(obj.get("rate", 1.61)))
    if kind == "lognormal":
        return LogNormalAge(float(obj.get("median_days", 2.0)), float(obj.get("sigma", 1.0)))
    raise ConfigError(f"unknown regime kind {kind!r}")


def sample_decoys(regime: Regime, now: int, pool: DecoyPool, k: int,
                  rng: random.Random, exclude=None) -> list:
    """Draw ``k`` distinct eligible ids, never ``exclude``, by ``regime``."""
    if k == 0:
        return []
    available = pool.n
    if exclude is not None and exclude in pool:
        available -= 1
    if available < k:
        raise ExhaustedDecoyPool(f"{available} eligible outputs for {k} decoys")
    chosen: list = []
    seen = set() if exclude is None else {exclude}
    rejects = 0
    while len(chosen) < k:
        uid = pool.ids[regime.draw_index(rng, pool, now)]
        if uid in seen:
            rejects += 1
            if rejects > 32 * k + 64:
                rest = [u for u in pool.eligible() if u not in seen]
                chosen += rng.sample(rest, k - len(chosen))
                break
            continue
        seen.add(uid)
        chosen.append(uid)
    return chosen


def confidential_pool_filter(outputs: Sequence, amount: int) -> list:
    """Outputs that may serve as decoys for a real of ``amount``.

    Confidential (amount 0) spends only mix with confidential outputs,
    denominated spends only with the same denomination.
    """
    return [o for o in outputs if o.amount == amount]


# ---------------------------------------------------------------------------
# ringsize policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RingsizePolicy:
    """Minimum ringsize by height plus a geometric number of extra members.

    ``schedule`` is a list of (from_height, minimum); a fixed ringsize is a
    one-entry schedule with ``extra_mean`` 0.
    """

    schedule: tuple[tuple[int, int], ...] = ((0, 11),)
    extra_mean: float = 0.0

    def minimum(self, height: int) -> int:
        m = self.schedule[0][1]
        for h, v in self.schedule:
            if height >= h:
                m = v
        return m

    def draw(self, rng: random.Random, height: int) -> int:
        n = self.minimum(height)
        if self.extra_mean > 0:
            p = self.extra_mean / (1 + self.extra_mean)
            while rng.random() < p:
                n += 1
        return n

    @classmethod
    def from_json(cls, obj: Mapping) -> "RingsizePolicy":
        kind = obj.get("kind", "fixed")
        allowed = {"fixed": {"kind", "n"}, "minimum": {"kind", "schedule", "extra_mean"}}
        if kind in allowed and set(obj) - allowed[kind]:
            raise ConfigError(f"unknown ringsize field(s) {sorted(set(obj) - allowed[kind])}")
        if kind == "fixed":
            n = int(obj.get("n", 11))
            if n < 1:
                raise ConfigError("ringsize must be >= 1")
            return cls(((0, n),), 0.0)
        if kind == "minimum":
            sched = tuple(sorted((int(h), int(v)) for h, v in obj["schedule"]))
            if not sched or any(v < 1 for _, v in sched):
                raise ConfigError("ringsize schedule needs minimums >= 1")
            extra = float(obj.get("extra_mean", 0.0))
            if extra < 0:
                raise ConfigError("extra_mean must be >= 0")
            return cls(sched, extra)
        raise ConfigError(f"unknown ringsize kind {kind!r}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ForkConfig:
    name: str
    fork_height: int
    p_redeem: float = 0.5
    redeem_delay_days: float = 7.0
    p_main_move: float = 0.8
    txs_per_block: float | None = None


@dataclass
class SimConfig:
    """Simulation parameters; JSON config files use these field names."""

    blocks: int = 2000
    block_interval: int = 120
    start_time: int = 1_514_764_800  # 2018-01-01T00:00:00Z
    txs_per_block: float = 4.0
    outputs_per_tx: int = 2
    extra_input_prob: float = 0.2
    value_model: str = "confidential"
    ringct_height: int | None = None
    merge_prob: float = 0.9
    ringsize: dict = field(default_factory=lambda: {"kind": "fixed", "n": 11})
    spend_age: dict = field(default_factory=lambda: {"kind": "lognormal", "median_days": 2.0, "sigma": 1.0})
    decoys: dict = field(default_factory=lambda: {"kind": "gamma"})
    min_age_blocks: int = 1
    root_name: str = "main"
    forks: list[ForkConfig] = field(default_factory=list)
    seed: int = 0

    def validate(self) -> None:
        if self.blocks < 1:
            raise ConfigError("blocks must be >= 1")
        if self.block_interval < 1:
            raise ConfigError("block_interval must be >= 1")
        if self.txs_per_block < 0 or self.outputs_per_tx < 1:
            raise ConfigError("txs_per_block >= 0 and outputs_per_tx >= 1 required")
        for p, name in ((self.extra_input_prob, "extra_input_prob"), (self.merge_prob, "merge_prob")):
            if not 0 <= p <= 1:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.value_model not in ("confidential", "denominated"):
            raise ConfigError("value_model must be 'confidential' or 'denominated'")
        if self.min_age_blocks < 1:
            raise ConfigError("min_age_blocks must be >= 1")
        names = {self.root_name}
        for f in self.forks:
            if f.name in names:
                raise ConfigError(f"branch name {f.name!r} used twice")
            names.add(f.name)
            if not 0 < f.fork_height < self.blocks:
                raise ConfigError("fork height must lie strictly inside the chain")
            if not (0 <= f.p_redeem <= 1 and 0 <= f.p_main_move <= 1):
                raise ConfigError("p_redeem and p_main_move must be in [0, 1]")
        RingsizePolicy.from_json(self.ringsize)
        _decoy_schedule(self.decoys)
        _spend_model(self.spend_age, self.decoys)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: Mapping) -> "SimConfig":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config field(s) {sorted(unknown)}")
        try:
            forks = [ForkConfig(**f) for f in obj.pop("forks", [])]
            cfg = cls(**obj, forks=forks)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _decoy_schedule(obj: Mapping) -> list[tuple[int, Regime]]:
    if obj.get("kind") == "schedule":
        eras = sorted(((int(h), regime_from_json(r)) for h, r in obj["eras"]), key=lambda e: e[0])
        if not eras:
            raise ConfigError("decoy schedule is empty")
        return eras
    return [(0, regime_from_json(obj))]


def _spend_model(spend: Mapping, decoys: Mapping):
    """Spend-age sampler; kind ``matched`` reuses the decoy regime."""
    if spend.get("kind") == "matched":
        return None
    return regime_from_json(spend)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruthEntry:
    real: OutputRef
    branches: tuple[str, ...]
    spent_at: dict


class GroundTruth:
    """Key image -> real output, as emitted by the simulator."""

    def __init__(self, entries: Mapping[KeyImage, TruthEntry] | None = None):
        self.entries: dict[KeyImage, TruthEntry] = dict(entries or {})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, ki) -> bool:
        return ki in self.entries

    def __getitem__(self, ki) -> TruthEntry:
        return self.entries[ki]

    def real_uid(self, view: LedgerView, ki: KeyImage) -> OutputUid:
        e = self.entries[ki]
        return view.resolve(e.real, e.branches[0])

    def real_uids(self, view: LedgerView) -> dict[KeyImage, OutputUid]:
        return {ki: self.real_uid(view, ki) for ki in self.entries}

    def to_lines(self) -> list[str]:
        return [
            json.dumps({"key_image": ki, "real": e.real.to_json(), "branches": list(e.branches),
                        "spent_at": e.spent_at}, separators=(",", ":"))
            for ki, e in self.entries.items()
        ]

    @classmethod
    def from_lines(cls, lines) -> "GroundTruth":
        entries = {}
        for line in lines:
            if not line.strip():
                continue
            obj = json.loads(line)
            entries[obj["key_image"]] = TruthEntry(
                OutputRef.from_json(obj["real"]), tuple(obj["branches"]), dict(obj.get("spent_at", {}))
            )
        return cls(entries)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

_DIGITS = {1: (1,), 2: (2,), 3: (1, 2), 4: (2, 2), 5: (5,), 6: (1, 5), 7: (2, 5), 8: (1, 2, 5), 9: (2, 2, 5)}


def denominate(value: int) -> list[int]:
    """Split ``value`` into 1/2/5 x 10^k parts, smallest first (8 -> 1, 2, 5)."""
    out = []
    scale = 1
    while value:
        value, d = divmod(value, 10)
        out += [p * scale for p in _DIGITS.get(d, ())]
        scale *= 10
    return out


@dataclass
class _Out:
    seq: int
    amount: int
    index: int
    created_at: int
    height: int
    group: int
    origin: str
    key_image: str
    value: int


class _State:
    def __init__(self, name: str):
        self.name = name
        self.outputs: list[_Out] = []
        self.created: list[int] = []  # created_at per seq
        self.heights: list[int] = []
        self.by_amount: dict[int, tuple[list[int], list[int], list[int]]] = {}  # seqs, created, heights
        self.unspent: list[int] = []  # sorted seqs available to ordinary spends
        self.spent: set[int] = set()
        self.groups: dict[int, list[int]] = {}
        self.next_group = 0
        self.counters: dict[int, int] = {}


def _key_image(seed: int, origin: str, seq: int) -> str:
    return hashlib.blake2b(f"{seed}:{origin}:{seq}".encode(), digest_size=16).hexdigest()


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    if lam > 30:
        return max(0, int(round(rng.gauss(lam, math.sqrt(lam)))))
    limit, k, p = math.exp(-lam), 0, rng.random()
    while p > limit:
        k += 1
        p *= rng.random()
    return k


def _sub_seed(seed: int, label: str) -> int:
    return int.from_bytes(hashlib.sha256(f"{seed}/{label}".encode()).digest()[:8], "big")


@dataclass
class SimulationResult:
    files: dict[str, bytes]
    fork_spec: ForkSpec
    truth: GroundTruth
    stats: dict
    config: SimConfig

    def write(self, out_dir: str | os.PathLike) -> Path:
        """Write branch files, ``forks.json``, ``truth.jsonl``, ``config.json``, ``stats.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, data in self.files.items():
            (out / f"{name}.jsonl").write_bytes(data)
        spec = ForkSpec(tuple(
            BranchSpec(b.name, f"{b.name}.jsonl", b.parent, b.fork_height) for b in self.fork_spec.branches
        ))
        (out / "forks.json").write_text(json.dumps(spec.to_json(), indent=1) + "\n", encoding="utf-8")
        (out / "truth.jsonl").write_text("".join(l + "\n" for l in self.truth.to_lines()), encoding="utf-8")
        (out / "config.json").write_text(json.dumps(self.config.to_json(), indent=1) + "\n", encoding="utf-8")
        (out / "stats.json").write_text(json.dumps(self.stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return out / "forks.json"

    @property
    def sources(self) -> dict[str, bytes]:
        return self.files


class _Generator:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.ringsize = RingsizePolicy.from_json(cfg.ringsize)
        self.eras = _decoy_schedule(cfg.decoys)
        self.spend = _spend_model(cfg.spend_age, cfg.decoys)
        self.truth: dict[str, dict] = {}
        self.stats = {"clamped_rings": 0, "rings": {}, "txs": {}, "redeemed": {}, "redeem_scheduled": {}}
        self.tx_counter = 0

    # -- helpers -------------------------------------------------------------

    def regime(self, height: int) -> Regime:
        r = self.eras[0][1]
        for h, reg in self.eras:
            if height >= h:
                r = reg
        return r

    def timestamp(self, height: int) -> int:
        return self.cfg.start_time + height * self.cfg.block_interval

    def confidential(self, height: int) -> bool:
        if self.cfg.value_model == "confidential":
            return True
        return self.cfg.ringct_height is not None and height >= self.cfg.ringct_height

    def tx_hash(self, branch: str) -> str:
        self.tx_counter += 1
        return hashlib.blake2b(f"{self.cfg.seed}:tx:{branch}:{self.tx_counter}".encode(),
                               digest_size=32).hexdigest()

    def emit_outputs(self, st: _State, height: int, groups: list[list[int]]) -> list[dict]:
        """Create outputs; ``groups`` holds amounts per recipient."""
        ts = self.timestamp(height)
        outs = []
        for amounts in groups:
            gid = st.next_group
            st.next_group += 1
            members = []
            for value in amounts:
                amount = 0 if self.confidential(height) else value
                idx = st.counters.get(amount, 0)
                st.counters[amount] = idx + 1
                seq = len(st.outputs)
                o = _Out(seq, amount, idx, ts, height, gid, st.name,
                         _key_image(self.cfg.seed, st.name, seq), value)
                st.outputs.append(o)
                st.created.append(ts)
                st.heights.append(height)
                seqs, created, heights = st.by_amount.setdefault(amount, ([], [], []))
                seqs.append(seq)
                created.append(ts)
                heights.append(height)
                st.unspent.append(seq)
                members.append(seq)
                outs.append({"amount": amount})
            st.groups[gid] = members
        return outs

    def split_value(self, rng: random.Random, value: int, height: int, n_out: int) -> list[list[int]]:
        if self.confidential(height):
            parts = [1] * n_out
            return [[p] for p in parts]
        value = max(value, 2)
        pay = max(1, int(value * rng.uniform(0.1, 0.9)))
        groups = [denominate(pay), denominate(value - pay)]
        return [g for g in groups if g] or [[1]]

    # -- spending --------------------------------------------------------------

    def pick_real(self, rng: random.Random, st: _State, height: int) -> int | None:
        """Nearest unspent eligible output to a target drawn by the spend model."""
        limit_h = height - self.cfg.min_age_blocks + 1
        n_elig = bisect_left(st.heights, limit_h)
        hi = bisect_left(st.unspent, n_elig)
        if hi == 0:
            return None
        now = self.timestamp(height)
        model = self.spend if self.spend is not None else self.regime(height)
        target = model.draw_index(rng, DecoyPool(range(n_elig), st.created, n_elig), now)
        pos = bisect_left(st.unspent, target, 0, hi)
        cands = [p for p in (pos - 1, pos) if 0 <= p < hi]
        tc = st.created[target]
        best = min(cands, key=lambda p: (abs(st.created[st.unspent[p]] - tc), -p))
        return st.unspent[best]

    def mark_spent(self, st: _State, seq: int) -> None:
        i = bisect_left(st.unspent, seq)
        if i < len(st.unspent) and st.unspent[i] == seq:
            del st.unspent[i]
        st.spent.add(seq)

    def make_ring(self, rng: random.Random, st: _State, seq: int, height: int) -> dict:
        real = st.outputs[seq]
        seqs, created, heights = st.by_amount[real.amount]
        n_elig = bisect_left(heights, height - self.cfg.min_age_blocks + 1)
        size = self.ringsize.draw(rng, height)
        k = size - 1
        if k > n_elig - 1:
            k = max(0, n_elig - 1)
            self.stats["clamped_rings"] += 1
        pool = DecoyPool(seqs, created, n_elig, ids_sorted=True)
        decoys = sample_decoys(self.regime(height), self.timestamp(height), pool, k, rng, exclude=seq)
        members = sorted([st.outputs[d].index for d in decoys] + [real.index])
        return {"key_image": real.key_image,
                "members": [{"amount": real.amount, "index": i} for i in members]}

    def spend_tx(self, rng: random.Random, st: _State, height: int, reals: list[int]) -> dict:
        inputs = []
        value = 0
        for seq in reals:
            inputs.append(self.make_ring(rng, st, seq, height))
            value += st.outputs[seq].value
            self.record_spend(st, seq, height)
        groups = self.split_value(rng, value, height, self.cfg.outputs_per_tx)
        outputs = self.emit_outputs(st, height, groups)
        self.stats["rings"][st.name] = self.stats["rings"].get(st.name, 0) + len(inputs)
        return {"hash": self.tx_hash(st.name), "coinbase": False, "inputs": inputs, "outputs": outputs}

    def record_spend(self, st: _State, seq: int, height: int) -> None:
        o = st.outputs[seq]
        entry = self.truth.setdefault(o.key_image, {
            "real": OutputRef(o.amount, o.index), "branches": [], "spent_at": {},
        })
        entry["branches"].append(st.name)
        entry["spent_at"][st.name] = self.timestamp(height)

    def with_group(self, rng: random.Random, st: _State, seq: int, height: int) -> list[int]:
        """The real plus (in denominated mode) the unspent rest of its group."""
        if self.confidential(height) or rng.random() >= self.cfg.merge_prob:
            return [seq]
        limit_h = height - self.cfg.min_age_blocks + 1
        group = st.groups[st.outputs[seq].group]
        return [seq] + [s for s in group
                        if s != seq and s not in st.spent and st.heights[s] < limit_h
                        and _is_unspent(st, s)]

    def ordinary_block(self, rng: random.Random, st: _State, height: int, lam: float) -> list[dict]:
        txs = []
        for _ in range(_poisson(rng, lam)):
            first = self.pick_real(rng, st, height)
            if first is None:
                break
            reals = self.with_group(rng, st, first, height)
            for s in reals:
                self.mark_spent(st, s)
            if rng.random() < self.cfg.extra_input_prob:
                extra = self.pick_real(rng, st, height)
                if extra is not None:
                    more = self.with_group(rng, st, extra, height)
                    for s in more:
                        self.mark_spent(st, s)
                    reals += more
            txs.append(self.spend_tx(rng, st, height, reals))
        return txs

    def coinbase(self, rng: random.Random, st: _State, height: int) -> dict:
        if self.confidential(height):
            groups = [[1]]
        else:
            groups = [denominate(rng.randint(1, 99) * 10 ** rng.randint(0, 3))]
        outputs = self.emit_outputs(st, height, groups)
        return {"hash": self.tx_hash(st.name), "coinbase": True, "inputs": [], "outputs": outputs}

    # -- branches ---------------------------------------------------------------

    def scheduled_block(self, rng: random.Random, st: _State, height: int,
                        schedule: dict[int, list[int]]) -> tuple[list[dict], int]:
        """Spend outputs whose redemption or move falls due; one tx per group."""
        due = [s for s in schedule.pop(height, []) if s not in st.spent]
        by_group: dict[int, list[int]] = {}
        for s in due:
            by_group.setdefault(st.outputs[s].group, []).append(s)
        txs = []
        for gid in sorted(by_group):
            reals = sorted(by_group[gid])
            for s in reals:
                self.mark_spent(st, s)
            txs.append(self.spend_tx(rng, st, height, reals))
        return txs, len(due)

    def plan_redemptions(self, f: ForkConfig, st: _State, rng: random.Random,
                         root_schedule: dict[int, list[int]]) -> dict[int, list[int]]:
        """Pick pre-fork unspent outputs to redeem on the child and, for some
        of them, a later move of the same coins on the parent."""
        cfg = self.cfg
        child: dict[int, list[int]] = {}
        scheduled = moved = 0

        def when(base: int) -> int:
            if f.redeem_delay_days <= 0:
                return base
            delay = rng.expovariate(1.0 / (f.redeem_delay_days * DAY))
            return base + int(delay // cfg.block_interval)

        for seq in st.unspent:
            if rng.random() >= f.p_redeem:
                continue
            h = when(f.fork_height)
            if h < cfg.blocks:
                child.setdefault(h, []).append(seq)
                scheduled += 1
            if rng.random() < f.p_main_move:
                h2 = when(f.fork_height)
                if h2 < cfg.blocks:
                    root_schedule.setdefault(h2, []).append(seq)
                    moved += 1
        self.stats["redeem_scheduled"][f.name] = scheduled
        self.stats.setdefault("main_moves_scheduled", {})[f.name] = moved
        return child

    def run(self) -> SimulationResult:
        cfg = self.cfg
        root = _State(cfg.root_name)
        rng = random.Random(_sub_seed(cfg.seed, cfg.root_name))
        forks = sorted(cfg.forks, key=lambda f: (f.fork_height, f.name))
        pending: dict[str, tuple[_State, random.Random, dict]] = {}
        root_schedule: dict[int, list[int]] = {}
        lines: dict[str, list[str]] = {cfg.root_name: []}
        for h in range(cfg.blocks):
            for f in forks:
                if f.fork_height == h:
                    frng = random.Random(_sub_seed(cfg.seed, f.name))
                    snap = copy.deepcopy(root)
                    child_schedule = self.plan_redemptions(f, snap, frng, root_schedule)
                    pending[f.name] = (snap, frng, child_schedule)
            txs = [self.coinbase(rng, root, h)]
            moves, _ = self.scheduled_block(rng, root, h, root_schedule)
            txs += moves
            txs += self.ordinary_block(rng, root, h, cfg.txs_per_block)
            lines[cfg.root_name].append(dump_block({"height": h, "timestamp": self.timestamp(h), "txs": txs}))
        for f in forks:
            lines[f.name] = self.run_fork(f, *pending[f.name])

        spec = ForkSpec((BranchSpec(cfg.root_name, None),) + tuple(
            BranchSpec(f.name, None, cfg.root_name, f.fork_height) for f in cfg.forks
        ))
        truth = GroundTruth({
            ki: TruthEntry(e["real"], tuple(e["branches"]), e["spent_at"]) for ki, e in self.truth.items()
        })
        self.stats["key_images"] = len(truth)
        self.stats["cross_chain_key_images"] = sum(1 for e in truth.entries.values() if len(e.branches) > 1)
        files = {name: "".join(l + "\n" for l in ls).encode() for name, ls in lines.items()}
        return SimulationResult(files, spec, truth, self.stats, cfg)

    def run_fork(self, f: ForkConfig, st: _State, rng: random.Random,
                 schedule: dict[int, list[int]]) -> list[str]:
        cfg = self.cfg
        st.name = f.name
        st.unspent = []  # ordinary spends on the child use child outputs only
        redeemed = 0
        lam = cfg.txs_per_block if f.txs_per_block is None else f.txs_per_block
        out = []
        for h in range(f.fork_height, cfg.blocks):
            txs = [self.coinbase(rng, st, h)]
            red, n = self.scheduled_block(rng, st, h, schedule)
            txs += red
            redeemed += n
            txs += self.ordinary_block(rng, st, h, lam)
            out.append(dump_block({"height": h, "timestamp": self.timestamp(h), "txs": txs}))
        self.stats["redeemed"][f.name] = redeemed
        return out


def _is_unspent(st: _State, seq: int) -> bool:
    i = bisect_left(st.unspent, seq)
    return i < len(st.unspent) and st.unspent[i] == seq


def simulate(config: SimConfig) -> SimulationResult:
    """Generate branch files, fork spec and ground truth for ``config``."""
    config.validate()
    return _Generator(config).run()
