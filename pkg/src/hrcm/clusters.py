"""Connected components and cluster observables of sampled configurations.

Estimators run replicas keyed by (master_seed, replica, role) substreams, so
replica evaluation order and worker count never change the result.  Standard
errors are leave-one-out jackknives over replicas.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import rng as rngmod
from .geometry import hyperbolic_radii
from .sampling import ConnectionSpec, Configuration, ghost_uniforms, sample_edges, sample_points
from .stats import mean_and_stderr, wilson_interval


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while x != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def components(n_points: int, edges: np.ndarray) -> np.ndarray:
    """Component label per point; labels are the smallest member index."""
    uf = UnionFind(n_points)
    for i, j in edges:
        uf.union(int(i), int(j))
    roots = np.fromiter((uf.find(k) for k in range(n_points)), dtype=np.int64, count=n_points)
    # normalise: label = min index in the component
    label_of_root: dict[int, int] = {}
    for k in range(n_points):
        r = int(roots[k])
        if r not in label_of_root:
            label_of_root[r] = k
    return np.fromiter((label_of_root[int(r)] for r in roots), dtype=np.int64, count=n_points)


def components_of_config(config: Configuration) -> np.ndarray:
    return components(config.n_points, config.edges)


@dataclass
class ClusterStats:
    """Per-replica cluster observables of the Palm origin."""

    origin_cluster_size: int
    reaches_boundary: bool
    ghost_connected: bool
    size_histogram: dict[int, int]
    margin: float


def cluster_stats(config: Configuration, margin: float = 1.0) -> ClusterStats:
    if not config.palm:
        raise ValueError("cluster_stats needs a Palm configuration (origin present)")
    labels = components_of_config(config)
    origin_members = np.nonzero(labels == labels[0])[0]
    radii = hyperbolic_radii(config.points[origin_members])
    reach = bool(radii.max(initial=0.0) > config.window_radius - margin)
    ghost = bool(config.ghost[origin_members].any()) if config.ghost.size else False
    sizes, counts = np.unique(np.unique(labels, return_counts=True)[1], return_counts=True)
    hist = {int(s): int(c) for s, c in zip(sizes, counts)}
    return ClusterStats(
        origin_cluster_size=int(origin_members.size),
        reaches_boundary=reach,
        ghost_connected=ghost,
        size_histogram=hist,
        margin=margin,
    )


# -- replica engine -----------------------------------------------------------

def _origin_cluster(pts: np.ndarray, phi: ConnectionSpec, edge_key: int) -> np.ndarray:
    """Indices of the origin's component (origin is index 0)."""
    n = pts.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    edges = sample_edges(pts, phi, edge_key, prune=None if phi.support_radius else False)
    if edges.shape[0] == 0:
        return np.zeros(1, dtype=np.int64)
    graph = coo_matrix((np.ones(edges.shape[0], dtype=np.int8),
                        (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return np.nonzero(labels == labels[0])[0]


def _replica_batch(task: dict) -> dict:
    """Evaluate one contiguous block of replicas; pure function of the task."""
    phi = ConnectionSpec.from_dict(task["phi"])
    lam, R, d = task["lam"], task["R"], task["d"]
    seed, margin = task["seed"], task["margin"]
    lo, hi = task["rep_lo"], task["rep_hi"]
    mode = task["mode"]
    nrep = hi - lo
    out: dict[str, np.ndarray] = {
        "size": np.zeros(nrep, dtype=np.int64),
        "reach": np.zeros(nrep, dtype=bool),
    }
    if mode == "magnet":
        nq = len(task["qs"])
        out["ghost_hit"] = np.zeros((nrep, nq), dtype=bool)
        out["chi_gf"] = np.zeros((nrep, nq), dtype=np.float64)
    if mode == "two_point":
        out["connected"] = np.zeros(nrep, dtype=bool)

    x_coords = np.asarray(task["x"], dtype=float) if mode == "two_point" else None

    for k in range(nrep):
        rep = lo + k
        pts = sample_points(lam, R, d, mode != "two_point",
                            rngmod.substream(seed, rep, rngmod.ROLE_POINTS))
        if mode == "two_point":
            pts = np.vstack([np.zeros((1, d)), x_coords[None, :], pts])
        edge_key = rngmod.stream_key(seed, rep, rngmod.ROLE_EDGES)
        members = _origin_cluster(pts, phi, edge_key)
        out["size"][k] = members.size
        out["reach"][k] = bool(
            hyperbolic_radii(pts[members]).max(initial=0.0) > R - margin
        )
        if mode == "magnet":
            u = ghost_uniforms(pts.shape[0],
                               rngmod.substream(seed, rep, rngmod.ROLE_GHOSTS))
            for qi, q in enumerate(task["qs"]):
                # the Palm origin counts as a ghost candidate here: the
                # derivative identity (1-q) dM/dq = chi_gf holds in exactly
                # this convention
                hit = bool((u[members] < q).any())
                out["ghost_hit"][k, qi] = hit
                out["chi_gf"][k, qi] = 0.0 if hit else float(members.size)
        if mode == "two_point":
            out["connected"][k] = bool((members == 1).any())
    return out


def _run_replicas(task: dict, replicas: int, threads: int | None) -> dict:
    threads = 1 if threads is None else max(1, int(threads))
    if threads == 1 or replicas < 64:
        task = dict(task, rep_lo=0, rep_hi=replicas)
        return _replica_batch(task)
    chunk = max(32, replicas // (threads * 8))
    bounds = list(range(0, replicas, chunk)) + [replicas]
    tasks = [dict(task, rep_lo=bounds[i], rep_hi=bounds[i + 1])
             for i in range(len(bounds) - 1)]
    parts: list[dict | None] = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for idx, part in enumerate(pool.map(_replica_batch, tasks)):
            parts[idx] = part
    merged: dict[str, np.ndarray] = {}
    for key in parts[0]:
        merged[key] = np.concatenate([p[key] for p in parts], axis=0)
    return merged


def _base_task(lam, phi, R, d, seed, margin, mode, **extra) -> dict:
    t = {"lam": float(lam), "phi": phi.to_dict(), "R": float(R), "d": int(d),
         "seed": int(seed), "margin": float(margin), "mode": mode}
    t.update(extra)
    return t


def sample_origin_cluster_sizes(
    lam, phi, window_radius, margin, replicas, seed, d=2, threads=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Origin-cluster sizes and boundary-reach flags over replicas."""
    res = _run_replicas(
        _base_task(lam, phi, window_radius, d, seed, margin, "origin"),
        replicas, threads)
    return res["size"], res["reach"]


# -- estimators ----------------------------------------------------------------

@dataclass
class ChiEstimate:
    chi_hat: float
    stderr: float
    censored_fraction: float
    chi_hat_uncensored: float
    stderr_uncensored: float
    replicas: int
    lam: float
    window_radius: float
    margin: float
    sizes: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("chi_hat", "stderr", "censored_fraction", "chi_hat_uncensored",
                 "stderr_uncensored", "replicas", "lam", "window_radius", "margin")}


def estimate_chi(
    lam, phi, window_radius, margin, replicas, seed, d=2, threads=None,
    lambda_c_hint=None,
) -> ChiEstimate:
    """Mean origin-cluster size with jackknife error; boundary-censored
    replicas are counted in the raw mean but also reported separately.
    Warns when a supplied critical estimate says lam is not subcritical."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    if lambda_c_hint is not None and lam >= lambda_c_hint:
        import warnings

        warnings.warn(
            f"lambda={lam} is at or above the critical estimate {lambda_c_hint}; "
            "the mean cluster size is window-limited there", stacklevel=2)
    sizes, reach = sample_origin_cluster_sizes(
        lam, phi, window_radius, margin, replicas, seed, d, threads)
    if reach.all() and replicas > 0:
        raise ValueError("window too small: every origin cluster reached the boundary margin")
    mean, err = mean_and_stderr(sizes.astype(float))
    free = sizes[~reach].astype(float)
    mean_u, err_u = mean_and_stderr(free) if free.size else (math.nan, math.nan)
    return ChiEstimate(mean, err, float(reach.mean()) if replicas else 0.0,
                       mean_u, err_u, replicas, lam, window_radius, margin, sizes)


@dataclass
class ThetaEstimate:
    radii: list[float]
    theta_hat: list[float]
    stderr: list[float]
    limit_estimate: float
    limit_stderr: float
    monotone_decreasing: bool
    replicas: int
    lam: float
    margin: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("radii", "theta_hat", "stderr", "limit_estimate", "limit_stderr",
                 "monotone_decreasing", "replicas", "lam", "margin")}


def estimate_theta(
    lam, phi, window_radii, margin, replicas, seed, d=2, threads=None,
    bias_decay: float | None = None,
) -> ThetaEstimate:
    """Boundary-reach probability per window radius plus a limit estimate.

    The limit extrapolates the last two radii assuming the window bias decays
    by the factor ``bias_decay`` per unit radius (default e^-1).  Calibrating
    bias_decay from a subcritical anchor, where the true limit is zero, makes
    the extrapolation self-consistent at desk scale.  When the sequence is
    not decreasing the last value is reported unchanged."""
    radii = sorted(float(r) for r in window_radii)
    if len(radii) < 1:
        raise ValueError("need at least one window radius")
    th, se = [], []
    for i, R in enumerate(radii):
        seed_r = rngmod.derive_seed(seed, i)
        _, reach = sample_origin_cluster_sizes(
            lam, phi, R, margin, replicas, seed_r, d, threads)
        m, e = mean_and_stderr(reach.astype(float))
        th.append(m)
        se.append(e)
    monotone = all(th[i + 1] <= th[i] + 3.0 * math.hypot(se[i], se[i + 1])
                   for i in range(len(th) - 1))
    if len(radii) >= 2 and th[-1] < th[-2]:
        decay = math.exp(-1.0) if bias_decay is None else bias_decay
        if not 0.0 < decay < 1.0:
            raise ValueError("bias_decay must lie in (0, 1)")
        rho = decay ** (radii[-1] - radii[-2])
        w = rho / (1.0 - rho)
        limit = max(0.0, th[-1] - w * (th[-2] - th[-1]))
        lse = math.hypot((1.0 + w) * se[-1], w * se[-2])
    else:
        limit, lse = th[-1], se[-1]
    return ThetaEstimate(radii, th, se, limit, lse, monotone, replicas, lam, margin)


@dataclass
class TailEstimate:
    n_grid: list[int]
    ccdf: list[float]
    wilson_low: list[float]
    wilson_high: list[float]
    censored_fraction: float
    replicas: int
    lam: float
    window_radius: float
    semantics: str = "censored clusters enter at their observed size (lower bound)"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("n_grid", "ccdf", "wilson_low", "wilson_high", "censored_fraction",
                 "replicas", "lam", "window_radius", "semantics")}


def estimate_tail(
    lam, phi, window_radius, n_grid, replicas, seed, margin=1.0, d=2, threads=None,
) -> TailEstimate:
    """Empirical complementary CDF of the origin-cluster size with Wilson
    intervals; censoring makes each P(#C >= n) a lower bound."""
    n_grid = list(n_grid)
    if any(n_grid[i] >= n_grid[i + 1] for i in range(len(n_grid) - 1)):
        raise ValueError("n_grid must be strictly increasing")
    sizes, reach = sample_origin_cluster_sizes(
        lam, phi, window_radius, margin, replicas, seed, d, threads)
    ccdf, lo, hi = [], [], []
    for n in n_grid:
        k = int((sizes >= n).sum())
        ccdf.append(k / replicas)
        w = wilson_interval(k, replicas)
        lo.append(w[0])
        hi.append(w[1])
    return TailEstimate(n_grid, ccdf, lo, hi, float(reach.mean()), replicas,
                        lam, window_radius)


@dataclass
class MagnetEstimate:
    qs: list[float]
    m_hat: list[float]
    m_stderr: list[float]
    chi_gf_hat: list[float]
    chi_gf_stderr: list[float]
    replicas: int
    lam: float
    window_radius: float
    ghost_hits: np.ndarray = field(repr=False, default=None)
    chi_gf_values: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("qs", "m_hat", "m_stderr", "chi_gf_hat", "chi_gf_stderr",
                 "replicas", "lam", "window_radius")}


def estimate_magnetization(
    lam, q, phi, window_radius, replicas, seed, margin=1.0, d=2, threads=None,
) -> MagnetEstimate:
    """Magnetization and ghost-free susceptibility at one or several q.

    Ghost marks are Bernoulli(q) per vertex with common uniforms across the
    q-levels (monotone coupling), and the Palm origin is itself a ghost
    candidate, matching the convention under which (1-q) dM/dq equals the
    ghost-free susceptibility."""
    qs = [float(v) for v in (q if isinstance(q, (list, tuple)) else [q])]
    if any(not 0.0 <= v <= 1.0 for v in qs):
        raise ValueError("q must lie in [0, 1]")
    res = _run_replicas(
        _base_task(lam, phi, window_radius, d, seed, margin, "magnet", qs=qs),
        replicas, threads)
    m_hat, m_se, c_hat, c_se = [], [], [], []
    for qi in range(len(qs)):
        m, e = mean_and_stderr(res["ghost_hit"][:, qi].astype(float))
        c, ce = mean_and_stderr(res["chi_gf"][:, qi])
        m_hat.append(m)
        m_se.append(e)
        c_hat.append(c)
        c_se.append(ce)
    return MagnetEstimate(qs, m_hat, m_se, c_hat, c_se, replicas, lam,
                          window_radius, res["ghost_hit"], res["chi_gf"])


@dataclass
class TwoPointEstimate:
    tau_hat: float
    stderr: float
    replicas: int
    lam: float
    distance: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("tau_hat", "stderr", "replicas", "lam", "distance")}


def two_point(
    lam, phi, x, window_radius, replicas, seed, margin=1.0, d=2, threads=None,
) -> TwoPointEstimate:
    """P(o <-> x) under the two-point Palm version (both o and x added)."""
    from .geometry import HPoint, dist, origin

    xc = np.asarray(x.coords if isinstance(x, HPoint) else x, dtype=float)
    r = dist(origin(d), xc)
    if r > window_radius - margin:
        raise ValueError("x must lie inside the window with margin")
    if r == 0.0:
        return TwoPointEstimate(1.0, 0.0, replicas, lam, 0.0)
    res = _run_replicas(
        _base_task(lam, phi, window_radius, d, seed, margin, "two_point", x=list(xc)),
        replicas, threads)
    m, e = mean_and_stderr(res["connected"].astype(float))
    return TwoPointEstimate(m, e, replicas, lam, r)
