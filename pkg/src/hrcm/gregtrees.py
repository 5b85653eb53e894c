"""Greg trees: two-coloured trees with labelled blue vertices (degree >= 1)
and anonymous red vertices (degree >= 3).

The counts N_n enter the cluster-moment bound E[#C^n] <= (n+1)! N_{n+1}
chi^(2n-1), which `moment_bound_check` verifies by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement, product

import numpy as np

from .clusters import sample_origin_cluster_sizes

ENUMERATION_CAP = 8

RED = 0  # colour marker; blue vertices carry their label 1..n


@dataclass(frozen=True)
class GregTree:
    """Canonical form of one Greg tree."""

    blue_count: int
    red_count: int
    edges: tuple  # tuple of (u, v) index pairs into colours
    colours: tuple  # per-vertex: RED or blue label
    canonical_code: tuple

    @property
    def n_vertices(self) -> int:
        return len(self.colours)


def _tree_centers(adj: list[list[int]]) -> list[int]:
    n = len(adj)
    if n <= 2:
        return list(range(n))
    deg = [len(a) for a in adj]
    layer = [v for v in range(n) if deg[v] <= 1]
    removed = len(layer)
    while removed < n:
        nxt = []
        for u in layer:
            deg[u] = 0
            for v in adj[u]:
                if deg[v] > 1:
                    deg[v] -= 1
                    if deg[v] == 1:
                        nxt.append(v)
                elif deg[v] == 1:
                    deg[v] = 0
                    nxt.append(v)
        removed += len(nxt)
        layer = nxt
    return layer


def _rooted_code(v: int, parent: int, adj: list[list[int]], colours) -> tuple:
    subcodes = sorted(_rooted_code(c, v, adj, colours) for c in adj[v] if c != parent)
    return (colours[v], tuple(subcodes))


def canonical_code(adj: list[list[int]], colours) -> tuple:
    """AHU-style canonical form: rooted codes minimised over the tree centres,
    blue labels fixed, red vertices mutually anonymous."""
    centers = _tree_centers(adj)
    return min(_rooted_code(c, -1, adj, colours) for c in centers)


def _make_tree(edges: list[tuple[int, int]], colours: list[int]) -> GregTree:
    n = len(colours)
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    code = canonical_code(adj, colours)
    blue = sum(1 for c in colours if c != RED)
    return GregTree(blue, n - blue, tuple(sorted(tuple(sorted(e)) for e in edges)),
                    tuple(colours), code)


def _is_valid(edges, colours) -> bool:
    n = len(colours)
    if n == 1:
        return colours[0] != RED and not edges
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return all(
        (deg[v] >= 3 if colours[v] == RED else deg[v] >= 1) for v in range(n)
    ) and len(edges) == n - 1


def enumerate_greg(n: int) -> list[GregTree]:
    """All Greg trees with n labelled vertices, built by the four-step
    iteration from the (n-1)-trees and deduplicated by canonical code."""
    if not 1 <= n <= ENUMERATION_CAP:
        raise ValueError(f"n must lie in 1..{ENUMERATION_CAP}")
    gen: dict[tuple, GregTree] = {}
    t1 = _make_tree([], [1])
    gen[t1.canonical_code] = t1
    for label in range(2, n + 1):
        nxt: dict[tuple, GregTree] = {}
        for tree in gen.values():
            for cand in _extensions(tree, label):
                if cand.canonical_code not in nxt:
                    nxt[cand.canonical_code] = cand
        gen = nxt
    return sorted(gen.values(), key=lambda t: t.canonical_code)


def _extensions(tree: GregTree, label: int):
    edges = [list(e) for e in tree.edges]
    colours = list(tree.colours)
    n = len(colours)
    # option 1: attach the new blue vertex to any existing vertex
    for v in range(n):
        yield _make_tree([tuple(e) for e in edges] + [(v, n)], colours + [label])
    # option 2: insert the new blue vertex into the middle of an edge
    for k, (u, v) in enumerate(edges):
        rest = [tuple(e) for i, e in enumerate(edges) if i != k]
        yield _make_tree(rest + [(u, n), (n, v)], colours + [label])
    # option 3: insert a red vertex into an edge, attach the blue to it
    for k, (u, v) in enumerate(edges):
        rest = [tuple(e) for i, e in enumerate(edges) if i != k]
        yield _make_tree(rest + [(u, n), (n, v), (n, n + 1)], colours + [RED, label])
    # option 4: replace a pre-existing red vertex with the new blue vertex
    for v in range(n):
        if colours[v] == RED:
            recol = colours.copy()
            recol[v] = label
            yield _make_tree([tuple(e) for e in edges], recol)


def greg_count(n: int) -> int:
    return len(enumerate_greg(n))


def greg_asymptotic(n: int) -> float:
    """Leading-order asymptotic count:
    (1/sqrt 2) n^-2 e^(3/4 - n) (2 e^(-1/2) - 1)^(3/2 - n) n^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    base = 2.0 * math.exp(-0.5) - 1.0
    logv = (
        -0.5 * math.log(2.0)
        - 2.0 * math.log(n)
        + (0.75 - n)
        + (1.5 - n) * math.log(base)
        + n * math.log(n)
    )
    return math.exp(logv)


# -- exhaustive oracle ---------------------------------------------------------

def _prufer_to_edges(seq: tuple[int, ...], v: int) -> list[tuple[int, int]]:
    degree = [1] * v
    for x in seq:
        degree[x] += 1
    edges = []
    leaves = sorted(i for i in range(v) if degree[i] == 1)
    import heapq

    heapq.heapify(leaves)
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def _multiset_perms(counts: dict[int, int], length: int):
    if length == 0:
        yield ()
        return
    for item in list(counts):
        if counts[item] > 0:
            counts[item] -= 1
            for rest in _multiset_perms(counts, length - 1):
                yield (item,) + rest
            counts[item] += 1


def brute_force_greg(n: int) -> dict[tuple, tuple]:
    """Exhaustive generation of all coloured trees with n labelled blue
    vertices (degree >= 1) and any number of red vertices (degree >= 3),
    deduplicated by an independent red-permutation-minimal edge signature.

    Returns {signature: AHU canonical code} so callers can both count
    independently of the iterative construction and compare canonical sets.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    found: dict[tuple, tuple] = {}

    def consider(edges: list[tuple[int, int]], m: int) -> None:
        colours = [i + 1 for i in range(n)] + [RED] * m
        if not _is_valid(edges, colours):
            return
        sig = _red_min_signature(edges, n, m)
        if sig not in found:
            adj: list[list[int]] = [[] for _ in range(n + m)]
            for u, v in edges:
                adj[u].append(v)
                adj[v].append(u)
            found[sig] = canonical_code(adj, colours)

    if n == 1:
        consider([], 0)
        return found
    for m in range(0, max(0, n - 2) + 1):
        v = n + m
        if v == 2:
            consider([(0, 1)], m)
            continue
        length = v - 2
        if m == 0:
            for seq in product(range(v), repeat=length):
                consider(_prufer_to_edges(seq, v), m)
            continue
        spare = length - 2 * m
        if spare < 0:
            continue
        # distribute the spare Prufer slots over all vertices; reds start at 2
        for extra in combinations_with_replacement(range(v), spare):
            counts = {i: 0 for i in range(v)}
            for x in extra:
                counts[x] += 1
            for r in range(n, v):
                counts[r] += 2
            for seq in _multiset_perms(counts, length):
                consider(_prufer_to_edges(seq, v), m)
    return found


def _red_min_signature(edges: list[tuple[int, int]], n: int, m: int) -> tuple:
    from itertools import permutations

    best = None
    for perm in permutations(range(n, n + m)):
        relab = {**{i: i for i in range(n)},
                 **{n + k: perm[k] for k in range(m)}}
        sig = tuple(sorted(tuple(sorted((relab[u], relab[v]))) for u, v in edges))
        if best is None or sig < best:
            best = sig
    return best if best is not None else ()


# -- cluster moment bound -------------------------------------------------------

def moment_bound_check(
    lam: float,
    phi,
    n: int,
    window_radius: float,
    replicas: int,
    seed: int,
    margin: float = 1.0,
    d: int = 2,
    lambda_c_hint: float | None = None,
    threads: int | None = None,
) -> dict:
    """Monte Carlo check of E[#C^n] <= (n+1)! N_(n+1) chi^(2n-1) (one-sided,
    3-sigma slack).  Refuses lambda at or above a supplied critical estimate."""
    if not 1 <= n <= 3:
        raise ValueError("moment order n must be 1..3")
    if lambda_c_hint is not None and lam >= lambda_c_hint:
        raise ValueError(
            f"lambda={lam} is not subcritical (lambda_c estimate {lambda_c_hint})")
    sizes, _ = sample_origin_cluster_sizes(
        lam, phi, window_radius, margin, replicas, seed, d, threads)
    x = sizes.astype(float)
    const = math.factorial(n + 1) * greg_count(n + 1)
    moment = float(np.mean(x**n))
    chi = float(np.mean(x))
    # vectorised delete-one jackknife of the slack statistic rhs - lhs
    nn = x.size
    s1 = x.sum()
    sn = (x**n).sum()
    chi_i = (s1 - x) / (nn - 1)
    mom_i = (sn - x**n) / (nn - 1)
    stat_i = const * chi_i ** (2 * n - 1) - mom_i
    stat = const * chi ** (2 * n - 1) - moment
    var = (nn - 1) / nn * float(((stat_i - stat_i.mean()) ** 2).sum())
    stderr = math.sqrt(var)
    return {
        "n": n,
        "lambda": lam,
        "replicas": replicas,
        "moment_hat": moment,
        "chi_hat": chi,
        "constant": const,
        "bound": const * chi ** (2 * n - 1),
        "slack": stat,
        "slack_stderr": stderr,
        "holds": bool(stat >= -3.0 * stderr),
    }
