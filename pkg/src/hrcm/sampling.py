"""Sampling the random connection model on H^2 / H^3.

Points come from a homogeneous Poisson process under the hyperbolic measure
restricted to a ball window; edges are independent Bernoulli draws with
probability phi(distance); ghost labels are independent Bernoulli(q) marks.
Everything is driven by (master_seed, replica, role) substreams plus a
counter-based per-pair hash, so sampling is reproducible and
order-independent (see rng module).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import rng as rngmod
from .geometry import GeometryError, ball_measure, hyperbolic_radii

CONFIG_SCHEMA = "hrcm.configuration.v1"


# -- connection functions ---------------------------------------------------

@dataclass(frozen=True)
class ConnectionSpec:
    """Radial connection profile phi: boolean(R), exponential(alpha), or a
    tabulated profile with linear interpolation (zero beyond the last knot)."""

    kind: str
    radius: float = 0.0
    alpha: float = 0.0
    radii: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "boolean":
            if self.radius <= 0:
                raise ValueError("boolean phi needs radius > 0")
        elif self.kind == "exponential":
            if self.alpha <= 0:
                raise ValueError("exponential phi needs alpha > 0")
        elif self.kind == "table":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2:
                raise ValueError("table phi needs matching radii/values, >= 2 knots")
            if not np.all(np.diff(r) > 0):
                raise ValueError("table radii must be strictly increasing")
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError("table values must lie in [0, 1]")
        else:
            raise ValueError(f"unknown phi kind {self.kind!r}")

    @staticmethod
    def boolean(radius: float) -> "ConnectionSpec":
        return ConnectionSpec("boolean", radius=float(radius))

    @staticmethod
    def exponential(alpha: float) -> "ConnectionSpec":
        return ConnectionSpec("exponential", alpha=float(alpha))

    @staticmethod
    def table(radii, values) -> "ConnectionSpec":
        return ConnectionSpec("table", radii=tuple(map(float, radii)),
                              values=tuple(map(float, values)))

    @property
    def support_radius(self) -> float | None:
        """Radius beyond which phi vanishes, or None for unbounded support."""
        if self.kind == "boolean":
            return self.radius
        if self.kind == "table":
            return self.radii[-1]
        return None

    def prob(self, r):
        """Connection probability at hyperbolic distance r (vectorised)."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("distance must be nonnegative")
        if self.kind == "boolean":
            return (r <= self.radius).astype(float)
        if self.kind == "exponential":
            return np.exp(-self.alpha * r)
        return np.interp(r, self.radii, self.values, right=0.0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "boolean":
            d["radius"] = self.radius
        elif self.kind == "exponential":
            d["alpha"] = self.alpha
        else:
            d["radii"] = list(self.radii)
            d["values"] = list(self.values)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ConnectionSpec":
        kind = d["kind"]
        if kind == "boolean":
            return ConnectionSpec.boolean(d["radius"])
        if kind == "exponential":
            return ConnectionSpec.exponential(d["alpha"])
        return ConnectionSpec.table(d["radii"], d["values"])

    @staticmethod
    def parse(text: str) -> "ConnectionSpec":
        """Parse CLI grammar: 'boolean:R' | 'exp:alpha' | 'table:path.json'."""
        try:
            kind, _, arg = text.partition(":")
            if kind == "boolean":
                return ConnectionSpec.boolean(float(arg))
            if kind == "exp":
                return ConnectionSpec.exponential(float(arg))
            if kind == "table":
                with open(arg) as fh:
                    d = json.load(fh)
                return ConnectionSpec.table(d["radii"], d["values"])
        except (ValueError, OSError, KeyError) as exc:
            raise ValueError(
                f"invalid phi spec {text!r}; expected boolean:R | exp:alpha | table:path"
            ) from exc
        raise ValueError(
            f"invalid phi spec {text!r}; expected boolean:R | exp:alpha | table:path"
        )


def connection_prob(phi: ConnectionSpec, r) -> float | np.ndarray:
    out = phi.prob(r)
    return float(out) if np.ndim(r) == 0 else out


def int_phi(phi: ConnectionSpec, d: int) -> float:
    """Total connection weight: integral of phi(dist(o, .)) over H^d.

    Returns math.inf for divergent integrals (legal: the phase transition is
    non-trivial iff this is positive and finite)."""
    if d not in (2, 3):
        raise GeometryError("only d = 2, 3 supported")
    if phi.kind == "boolean":
        return ball_measure(phi.radius, d)
    if phi.kind == "exponential":
        a = phi.alpha
        if d == 2:
            return 2.0 * math.pi / (a * a - 1.0) if a > 1.0 else math.inf
        return 8.0 * math.pi / (a * (a * a - 4.0)) if a > 2.0 else math.inf
    # tabulated profiles have compact support: integrate exactly per segment
    total = 0.0
    r = np.asarray(phi.radii)
    v = np.asarray(phi.values)
    for k in range(r.size - 1):
        lo, hi = r[k], r[k + 1]
        b = (v[k + 1] - v[k]) / (hi - lo)
        a0 = v[k] - b * lo
        total += _segment_integral(a0, b, lo, hi, d)
    if r[0] > 0 and v[0] > 0:
        total += _segment_integral(v[0], 0.0, 0.0, r[0], d)
    return total


def _segment_integral(a0: float, b: float, lo: float, hi: float, d: int) -> float:
    # integral of (a0 + b r) * surface(r) over [lo, hi]
    if d == 2:
        def F(r):
            return 2.0 * math.pi * ((a0 + b * r) * math.cosh(r) - b * math.sinh(r))
    else:
        def F(r):
            return 4.0 * math.pi * (
                (a0 + b * r) * (math.sinh(2 * r) / 4.0 - r / 2.0)
                - b * (math.cosh(2 * r) / 8.0 - r * r / 4.0)
            )
    return F(hi) - F(lo)


def int_phi_quadrature(phi: ConnectionSpec, d: int, r_max: float | None = None) -> float:
    """Adaptive-quadrature route to the same integral (cross-check path)."""
    from .geometry import sphere_measure

    def integrand(r):
        p = float(phi.prob(r))
        return p * sphere_measure(r, d) if p > 0.0 else 0.0

    if r_max is None:
        # unbounded support: truncate far past any sane decay scale
        r_max = phi.support_radius if phi.support_radius is not None else 200.0
    val, _ = integrate.quad(integrand, 0.0, r_max, epsabs=0.0, epsrel=1e-10, limit=400)
    return val


# -- Poisson sampling --------------------------------------------------------

def radial_cdf(r, window_radius: float, d: int):
    """CDF of the radial coordinate of a uniform point in B_R(o)."""
    r = np.asarray(r, dtype=float)
    if d == 2:
        return (np.cosh(r) - 1.0) / (math.cosh(window_radius) - 1.0)
    return (np.sinh(2.0 * r) - 2.0 * r) / (math.sinh(2.0 * window_radius) - 2.0 * window_radius)


def _invert_radial(u: np.ndarray, window_radius: float, d: int) -> np.ndarray:
    if d == 2:
        x = u * (math.cosh(window_radius) - 1.0)
        return np.log1p(x + np.sqrt(x * (x + 2.0)))
    lo = np.zeros_like(u)
    hi = np.full_like(u, window_radius)
    target = u * (math.sinh(2.0 * window_radius) - 2.0 * window_radius)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = (np.sinh(2.0 * mid) - 2.0 * mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def sample_points(
    lam: float,
    window_radius: float,
    d: int,
    palm: bool,
    gen: np.random.Generator,
) -> np.ndarray:
    """Poisson(lam * |B_R|) points in the ball window, Poincare coordinates;
    radii by CDF inversion, directions uniform; Palm origin prepended."""
    if lam < 0 or window_radius <= 0:
        raise ValueError("need lam >= 0 and window_radius > 0")
    n = int(gen.poisson(lam * ball_measure(window_radius, d))) if lam > 0 else 0
    r_hyp = _invert_radial(gen.random(n), window_radius, d)
    rho = np.tanh(0.5 * r_hyp)
    if d == 2:
        phi_ang = gen.random(n) * (2.0 * math.pi)
        pts = np.column_stack([rho * np.cos(phi_ang), rho * np.sin(phi_ang)])
    else:
        g = gen.standard_normal((n, 3))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        pts = rho[:, None] * g
    if palm:
        pts = np.vstack([np.zeros((1, d)), pts])
    return pts


def ghost_uniforms(n: int, gen: np.random.Generator) -> np.ndarray:
    return gen.random(n)


def assign_ghosts(n_points: int, q: float, gen: np.random.Generator, palm: bool) -> np.ndarray:
    """Bernoulli(q) ghost bits per point; the Palm origin (index 0) is kept
    off the ghost list -- it is the probe vertex."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    bits = ghost_uniforms(n_points, gen) < q
    if palm and n_points:
        bits[0] = False
    return bits


# -- edge sampling ------------------------------------------------------------

def chord_params(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point quantities for fast pair distances: squared norms and
    conformal factors 1 - |x|^2."""
    n2 = np.einsum("ij,ij->i", points, points)
    return n2, 1.0 - n2


def pair_dist(points: np.ndarray, idx_i: np.ndarray, idx_j: np.ndarray) -> np.ndarray:
    """Hyperbolic distances for index pairs into a coordinate array."""
    n2, s = chord_params(points)
    diff = points[idx_i] - points[idx_j]
    d2 = np.einsum("ij,ij->i", diff, diff)
    u = np.maximum(2.0 * d2 / (s[idx_i] * s[idx_j]), 0.0)
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def sample_edges(
    points: np.ndarray,
    phi: ConnectionSpec,
    edge_key: int,
    prune: bool | None = None,
    block: int = 512,
) -> np.ndarray:
    """Edge list of the RCM on the given points.

    Each unordered pair {i, j} is included with probability phi(dist).
    The Bernoulli deviate is a pure function of (edge_key, i, j), so the
    pruned path (available for compactly supported phi) returns exactly the
    same edges as this exhaustive reference path.  Rows are sorted (i < j).
    """
    n = points.shape[0]
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    if prune is None:
        prune = phi.support_radius is not None and n > 256
    if prune:
        if phi.support_radius is None:
            raise ValueError("pruned edge sampling requires compactly supported phi")
        cand_i, cand_j = _candidate_pairs(points, phi.support_radius)
        return _edges_from_candidates(points, phi, edge_key, cand_i, cand_j)

    n2, s = chord_params(points)
    thresh = None
    if phi.kind == "boolean":
        thresh = 0.5 * (math.cosh(phi.radius) - 1.0)
    col = np.arange(n)
    rows_i: list[np.ndarray] = []
    rows_j: list[np.ndarray] = []
    for i0 in range(0, n - 1, block):
        i1 = min(i0 + block, n - 1)
        blk = points[i0:i1]
        d2 = n2[i0:i1, None] + n2[None, :] - 2.0 * (blk @ points.T)
        u = np.maximum(d2 / (s[i0:i1, None] * s[None, :]), 0.0)
        upper = col[None, :] > np.arange(i0, i1)[:, None]
        if thresh is not None:
            bi, bj = np.nonzero(upper & (u <= thresh))
            rows_i.append(bi + i0)
            rows_j.append(bj)
        else:
            bi, bj = np.nonzero(upper)
            I, J = bi + i0, bj
            uu = u[bi, bj]
            r = np.log1p(2.0 * uu + np.sqrt(2.0 * uu * (2.0 * uu + 2.0)))
            p = phi.prob(r)
            draw = rngmod.pair_uniform(edge_key, I, J) < p
            rows_i.append(I[draw])
            rows_j.append(J[draw])
    return _sorted_edge_array(np.concatenate(rows_i), np.concatenate(rows_j))


def origin_degree(points: np.ndarray, phi: ConnectionSpec, edge_key: int) -> int:
    """Number of neighbours of point 0: the restriction of sample_edges to
    pairs containing 0, bit-identical because pair draws are counter-based."""
    n = points.shape[0]
    if n < 2:
        return 0
    idx = np.arange(1, n)
    r = pair_dist(points, np.zeros(n - 1, dtype=np.int64), idx)
    p = phi.prob(r)
    if phi.kind == "boolean":
        return int((p >= 1.0).sum())
    live = p > 0.0
    draws = rngmod.pair_uniform(edge_key, np.zeros(int(live.sum()), dtype=np.int64),
                                idx[live])
    return int((draws < p[live]).sum())


def _edges_from_candidates(points, phi, edge_key, cand_i, cand_j) -> np.ndarray:
    if cand_i.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    r = pair_dist(points, cand_i, cand_j)
    p = phi.prob(r)
    if phi.kind == "boolean":
        keep = p >= 1.0
    else:
        keep = rngmod.pair_uniform(edge_key, cand_i, cand_j) < p
    return _sorted_edge_array(cand_i[keep], cand_j[keep])


def _sorted_edge_array(i: np.ndarray, j: np.ndarray) -> np.ndarray:
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    edges = np.column_stack([lo, hi])
    order = np.lexsort((hi, lo))
    return edges[order]


def _candidate_pairs(points: np.ndarray, support: float) -> tuple[np.ndarray, np.ndarray]:
    """Superset of all pairs within hyperbolic distance `support`, built from
    radial bands of width `support` and per-band angular sectors (d=2); in
    d=3 falls back to radial bands only."""
    r = hyperbolic_radii(points)
    band = np.floor(r / support).astype(np.int64)
    d = points.shape[1]
    ang = np.arctan2(points[:, 1], points[:, 0]) if d == 2 else None
    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []
    for b in np.unique(band):
        same = np.nonzero(band == b)[0]
        above = np.nonzero(band == b + 1)[0]
        for other in (same, above):
            if other.size == 0 or same.size == 0:
                continue
            # pairs across bands (b, b) or (b, b+1) need both radii >= b*support
            r0 = max(0.0, b * support)
            dmax = _max_angle(r0, support)
            if d == 3 or dmax >= math.pi:
                if other is same:
                    a_idx, b_idx = np.triu_indices(same.size, k=1)
                    out_i.append(same[a_idx])
                    out_j.append(same[b_idx])
                else:
                    ii, jj = np.meshgrid(same, other, indexing="ij")
                    out_i.append(ii.ravel())
                    out_j.append(jj.ravel())
                continue
            ii, jj = _angular_window_pairs(ang, same, other, dmax)
            if other is same:
                # the sweep sees both orientations of a same-band pair
                keep = ii < jj
                ii, jj = ii[keep], jj[keep]
            out_i.append(ii)
            out_j.append(jj)
    if not out_i:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    lo = np.minimum(np.concatenate(out_i), np.concatenate(out_j)).astype(np.int64)
    hi = np.maximum(np.concatenate(out_i), np.concatenate(out_j)).astype(np.int64)
    return lo, hi


def _max_angle(r0: float, support: float) -> float:
    if r0 <= 0.0:
        return math.pi
    c = (math.cosh(r0) ** 2 - math.cosh(support)) / (math.sinh(r0) ** 2)
    if c <= -1.0:
        return math.pi
    if c >= 1.0:
        return 0.0
    return math.acos(c)


def _angular_window_pairs(ang, left, right, dmax):
    """Raw (i in left, j in right) pairs whose angular separation can be at
    most dmax, via a sorted sweep with wrap-around; self-pairs removed,
    unordered dedupe happens in the caller."""
    la = ang[left]
    order = np.argsort(ang[right], kind="stable")
    rs = right[order]
    ra = ang[rs]
    ra_ext = np.concatenate([ra, ra + 2.0 * math.pi])
    rs_ext = np.concatenate([rs, rs])
    la_shift = np.where(la - dmax < -math.pi, la + 2.0 * math.pi, la)
    lo = np.searchsorted(ra_ext, la_shift - dmax, side="left")
    hi = np.searchsorted(ra_ext, la_shift + dmax, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    li = np.repeat(left, counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    offs = np.arange(total) - np.repeat(starts, counts)
    rj = rs_ext[np.repeat(lo, counts) + offs]
    keep = li != rj
    return li[keep], rj[keep]


# -- configurations ------------------------------------------------------------

@dataclass
class Configuration:
    """One sampled RCM realisation on a ball window."""

    points: np.ndarray
    edges: np.ndarray
    lam: float
    window_radius: float
    dim: int
    phi: ConnectionSpec
    seed: int
    replica: int = 0
    palm: bool = True
    q: float = 0.0
    ghost: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    provenance: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def validate(self) -> None:
        r = hyperbolic_radii(self.points)
        if self.n_points and r.max() > self.window_radius + 1e-9:
            raise ValueError("point outside window")
        if self.palm and self.n_points and np.any(self.points[0] != 0.0):
            raise ValueError("palm origin must sit at o")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n_points:
                raise ValueError("edge index out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-loop")
            key = self.edges[:, 0] * self.n_points + self.edges[:, 1]
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edge")

    def to_json_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "lambda": self.lam,
            "window_radius": self.window_radius,
            "dim": self.dim,
            "phi": self.phi.to_dict(),
            "seed": self.seed,
            "replica": self.replica,
            "palm": self.palm,
            "q": self.q,
            "points": [[float(c) for c in row] for row in self.points],
            "ghost": [int(b) for b in self.ghost],
            "edges": [[int(i), int(j)] for i, j in self.edges],
            "provenance": self.provenance,
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path: str) -> "Configuration":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed configuration JSON at line {exc.lineno}: {exc.msg}") from exc
        if d.get("schema") != CONFIG_SCHEMA:
            raise ValueError(f"not a {CONFIG_SCHEMA} file")
        cfg = Configuration(
            points=np.asarray(d["points"], dtype=float).reshape(-1, d["dim"]),
            edges=np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2),
            lam=d["lambda"],
            window_radius=d["window_radius"],
            dim=d["dim"],
            phi=ConnectionSpec.from_dict(d["phi"]),
            seed=d["seed"],
            replica=d.get("replica", 0),
            palm=d["palm"],
            q=d.get("q", 0.0),
            ghost=np.asarray(d.get("ghost", []), dtype=bool),
            provenance=d.get("provenance", {}),
        )
        return cfg


def sample_configuration(
    lam: float,
    window_radius: float,
    d: int,
    phi: ConnectionSpec,
    seed: int,
    replica: int = 0,
    palm: bool = True,
    q: float = 0.0,
    prune: bool | None = None,
) -> Configuration:
    """Sample one full Configuration (points, edges, ghost labels)."""
    pts = sample_points(lam, window_radius, d, palm,
                        rngmod.substream(seed, replica, rngmod.ROLE_POINTS))
    edge_key = rngmod.stream_key(seed, replica, rngmod.ROLE_EDGES)
    edges = sample_edges(pts, phi, edge_key, prune=prune)
    ghost = assign_ghosts(pts.shape[0], q,
                          rngmod.substream(seed, replica, rngmod.ROLE_GHOSTS), palm)
    return Configuration(
        points=pts, edges=edges, lam=lam, window_radius=window_radius, dim=d,
        phi=phi, seed=seed, replica=replica, palm=palm, q=q, ghost=ghost,
    )
