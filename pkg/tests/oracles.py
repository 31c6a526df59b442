"""Independent brute-force reference implementations used only by tests.

These deliberately take the slow, literal route (graph searches, explicit
per-mention scans, exhaustive merge-order enumeration) so they share no
code path with the library functions they check.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


# -- partitions ----------------------------------------------------------------


def all_partitions(items: list) -> list[list[frozenset]]:
    """Every set partition of ``items`` (Bell-number many)."""
    if not items:
        return [[]]
    head, rest = items[0], items[1:]
    out = []
    for partition in all_partitions(rest):
        out.append([frozenset({head})] + partition)
        for i, block in enumerate(partition):
            out.append(partition[:i] + [block | {head}] + partition[i + 1 :])
    return out


def random_partition(items: list, rng) -> list[frozenset]:
    if not items:
        return []
    labels = rng.integers(0, len(items), size=len(items))
    groups: dict[int, set] = {}
    for item, label in zip(items, labels):
        groups.setdefault(int(label), set()).add(item)
    return [frozenset(g) for g in groups.values()]


# -- MUC (link-based) ----------------------------------------------------------


def _components_within(cluster: frozenset, other_partition) -> int:
    """Connected components of ``cluster`` linking mentions co-clustered in
    ``other_partition`` (BFS over the induced pair graph)."""
    def linked(x, y):
        return any(x in block and y in block for block in other_partition)

    unvisited = set(cluster)
    components = 0
    while unvisited:
        seed_mention = unvisited.pop()
        frontier = [seed_mention]
        while frontier:
            node = frontier.pop()
            neighbours = [m for m in unvisited if linked(node, m)]
            for m in neighbours:
                unvisited.discard(m)
            frontier.extend(neighbours)
        components += 1
    return components


def muc_bruteforce(gold, system) -> tuple[float, float, float]:
    """MUC P/R/F1 by the minimal-link definition: a cluster of size s needs
    s - c links when the other partition splits it into c components."""
    def half(base, other):
        num = sum(len(c) - _components_within(c, other) for c in base)
        den = sum(len(c) - 1 for c in base)
        return num, den

    r_num, r_den = half(gold, system)
    p_num, p_den = half(system, gold)
    recall = r_num / r_den if r_den else 0.0
    precision = p_num / p_den if p_den else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


# -- B-cubed (mention-based) -----------------------------------------------------


def b3_bruteforce(gold, system, remove_singletons: bool = False):
    """B-cubed P/R/F1 by explicit per-mention scans over the raw partitions."""
    if remove_singletons:
        keep = {m for c in gold if len(c) > 1 for m in c}
        gold = [frozenset(c) for c in gold if len(c) > 1]
        system = [frozenset(c & keep) for c in system]
        system = [c for c in system if c]
    universe = sorted({m for c in gold for m in c})
    if not universe:
        return None

    def cluster_of(m, partition):
        for block in partition:
            if m in block:
                return block
        return frozenset()

    r_sum = Fraction(0)
    p_sum = Fraction(0)
    for m in universe:
        g = cluster_of(m, gold)
        s = cluster_of(m, system)
        inter = len(g & s)
        r_sum += Fraction(inter, len(g))
        p_sum += Fraction(inter, len(s)) if s else Fraction(0)
    n = len(universe)
    precision = float(p_sum / n)
    recall = float(r_sum / n)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


# -- transitive closure ----------------------------------------------------------


def reachability_clusters(nodes, edges) -> set[frozenset]:
    """Connected components by repeated full-relaxation over the edge list."""
    clusters = {n: {n} for n in nodes}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            union = clusters[a] | clusters[b]
            if union != clusters[a] or union != clusters[b]:
                for m in union:
                    clusters[m] = union
                changed = True
    return {frozenset(c) for c in clusters.values()}


# -- agglomerative merge orders ----------------------------------------------------


def _linkage(cluster_a, cluster_b, scores, kind) -> float:
    values = [scores[a][b] for a in cluster_a for b in cluster_b]
    if kind == "average":
        return sum(values) / len(values)
    if kind == "single":
        return max(values)
    return min(values)


def agglomerate_all_orders(ids, scores, tau, kind="average") -> set[frozenset]:
    """Terminal partitions of every merge order that only joins cluster
    pairs whose linkage is >= tau. One element means the result is
    order-independent."""
    results: set[frozenset] = set()

    def recurse(partition: tuple[frozenset, ...]):
        mergeable = [
            (i, j)
            for i, j in itertools.combinations(range(len(partition)), 2)
            if _linkage(partition[i], partition[j], scores, kind) >= tau
        ]
        if not mergeable:
            results.add(frozenset(partition))
            return
        for i, j in mergeable:
            merged = partition[i] | partition[j]
            rest = tuple(c for k, c in enumerate(partition) if k not in (i, j))
            recurse(rest + (merged,))

    recurse(tuple(frozenset({i}) for i in ids))
    return results


# -- two-rater agreement -----------------------------------------------------------


def two_rater_kappa(verdicts_a, verdicts_b):
    """Chance-corrected two-rater agreement with pooled marginals, computed
    straight from the verdict lists; None when undefined."""
    n = len(verdicts_a)
    observed = sum(a == b for a, b in zip(verdicts_a, verdicts_b)) / n
    pooled_yes = (
        sum(v == "yes" for v in verdicts_a) + sum(v == "yes" for v in verdicts_b)
    ) / (2 * n)
    expected = pooled_yes**2 + (1 - pooled_yes) ** 2
    if expected == 1.0:
        return None
    return (observed - expected) / (1 - expected)


# -- misc --------------------------------------------------------------------------


def binomial_three_sigma(n: int, p: float) -> tuple[float, float]:
    mean = n * p
    sigma = (n * p * (1 - p)) ** 0.5
    return mean - 3 * sigma, mean + 3 * sigma
