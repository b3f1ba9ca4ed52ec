"""Independent reference computations used by the tests.

Nothing here imports the deduction engine or the search oracle; the
functions work from plain sets or from a LedgerView plus ground truth.
"""

from __future__ import annotations

import bisect
import itertools
from typing import Mapping


def brute_force_assignments(rings: Mapping[str, list[tuple[str, set]]]) -> list[dict]:
    """Every map key image -> member that is valid on every branch.

    ``rings`` maps a key image to its (branch, member set) entries.  A member
    must lie in every ring of its key image, and no branch may use an output
    twice.  Plain product over the domains, so keep instances tiny.
    """
    kis = sorted(rings)
    domains = []
    for ki in kis:
        entries = rings[ki]
        dom = set(entries[0][1])
        for _, m in entries[1:]:
            dom &= set(m)
        domains.append(sorted(dom))
    out = []
    for combo in itertools.product(*domains):
        used = set()
        ok = True
        for ki, o in zip(kis, combo):
            for b, _ in rings[ki]:
                if (b, o) in used:
                    ok = False
                    break
                used.add((b, o))
            if not ok:
                break
        if ok:
            out.append(dict(zip(kis, combo)))
    return out


def rings_from_view(view) -> dict[str, list[tuple[str, set]]]:
    return {
        ki: [(b, set(r.members)) for b, r in view.rings_for_key_image(ki)]
        for ki in view.all_key_images
    }


def newest_guess_probability(view, truth, branch: str, min_age_blocks: int = 1) -> float:
    """Expected accuracy of guessing the newest member under uniform decoys.

    For a ring of size k+1 whose real output has ``older`` strictly older
    eligible outputs among ``n`` eligible non-real outputs, the real is the
    newest member iff all k decoys are older: C(older, k) / C(n, k).
    Eligible means same amount, created at least ``min_age_blocks`` blocks
    before the spending block.  Averaged over nontrivial rings.
    """
    heights = {}
    position = {}
    total = 0.0
    count = 0
    for ring in view.branch_rings(branch):
        if len(ring.members) < 2:
            continue
        real = truth.real_uid(view, ring.key_image)
        amount = view.outputs[real].amount
        if amount not in heights:
            seq = view.amount_outputs(branch, amount)
            heights[amount] = [view.outputs[u].height for u in seq]
            position[amount] = {u: i for i, u in enumerate(seq)}
        n = bisect.bisect_right(heights[amount], ring.height - min_age_blocks) - 1
        older = position[amount][real]
        k = len(ring.members) - 1
        p = 1.0
        for i in range(k):
            p *= max(0, older - i) / (n - i)
        total += p
        count += 1
    return total / count


def recent_zone_expectation(created_at: list[int], now: int, q: float, window_s: float) -> float:
    """Share of decoys younger than the window under q-mixing with a uniform base."""
    inside = sum(1 for t in created_at if now - t <= window_s)
    return q + (1 - q) * inside / len(created_at)
