"""Why a matching is needed: tight sets that pairwise checks miss.

Three rings {a,b}, {b,c}, {c,a} use three outputs between them, so a, b and c
are all spent even though no ring is traced.  A fourth ring {a,d} then has
to be d.  Looking for identical rings would not find this; Hall's condition
on the ring/output bipartite graph does.

Run:  python demos/intersection_removal.py
"""

from ringtrace.deduction import IR, ZMR, run_fixpoint
from ringtrace.fixtures import LedgerBuilder
from ringtrace.ingest import build_ledger
from ringtrace.matching import allowed_edges, hopcroft_karp

b = LedgerBuilder()
b.block("main")
b.coinbase("main", "a", "b", "c", "d", "e")
for ki, ring in [("01", "ab"), ("02", "bc"), ("03", "ca"), ("04", "ad"), ("05", "de")]:
    b.block("main")
    b.spend("main", [(ki, list(ring))])
view, _ = build_ledger(*b.build())
name = {view.resolve(r, "main"): n for n, r in b.refs.items()}

# The raw graph: left = rings, right = outputs.
kis = list(view.key_images("main"))
outs = sorted(name)
adj = [[outs.index(u) for u in view.ring_on("main", k).members] for k in kis]
ml, mr = hopcroft_karp(adj, len(outs))
flags, forced = allowed_edges(adj, len(outs), ml, mr)
print("one maximum matching:", {f"ki{k}": name[outs[v]] for k, v in zip(kis, ml)})
for k, row, ok in zip(kis, adj, flags):
    keep = [name[outs[v]] for v, f in zip(row, ok) if f]
    drop = [name[outs[v]] for v, f in zip(row, ok) if not f]
    print(f"  ki{k}: usable {keep}, never usable {drop}")
print("spent in every matching:", sorted(name[outs[v]] for v, f in enumerate(forced) if f))

# The same through the rule engine.  Ring 05 {d,e} becomes e once d is taken.
res = run_fixpoint(view, (ZMR, IR))
print("\nengine resolved:", {f"ki{k}": name[u] for k, u in sorted(res.resolved.items())})
print("iterations:", res.changes)
