"""Hyperbolic convex hulls, epsilon-boundaries, halo areas (d=2 only).

Hulls are computed as Euclidean hulls of Klein images (geodesics are Klein
chords, so hyperbolic and Euclidean convexity agree there) and mapped back.
Polygon areas come from the angle defect.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng as rngmod
from .geometry import (
    GeometryError,
    HPoint,
    angle_at,
    ball_measure,
    dist,
    geodesic_hyperplane_normal,
    hyperbolic_radii,
    lorentz_form,
    point_to_segment_distance,
    poincare_to_hyperboloid,
    to_klein,
)
from .sampling import _invert_radial


class HullPolygon:
    """Convex hull of a finite point set: cyclically ordered boundary
    vertices with their interior angles.  Degenerate hulls (fewer than three
    extreme points) keep vertices but carry no angles and zero area."""

    def __init__(self, vertices: list[HPoint]):
        self.vertices = vertices
        if len(vertices) >= 3:
            k = len(vertices)
            self.interior_angles = [
                angle_at(vertices[i], vertices[(i - 1) % k], vertices[(i + 1) % k])
                for i in range(k)
            ]
        else:
            self.interior_angles = []

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3


def _as_point_array(points) -> np.ndarray:
    rows = [p.coords if isinstance(p, HPoint) else np.asarray(p, float) for p in points]
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError("hulls are implemented for d=2 only")
    return arr


def _monotone_chain(klein: np.ndarray) -> list[int]:
    """Indices of hull vertices, counter-clockwise, strictly convex turns."""
    order = np.lexsort((klein[:, 1], klein[:, 0]))

    def cross(o, a, b):
        return (klein[a, 0] - klein[o, 0]) * (klein[b, 1] - klein[o, 1]) - (
            klein[a, 1] - klein[o, 1]
        ) * (klein[b, 0] - klein[o, 0])

    lower: list[int] = []
    for idx in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], idx) <= 0:
            lower.pop()
        lower.append(int(idx))
    upper: list[int] = []
    for idx in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], idx) <= 0:
            upper.pop()
        upper.append(int(idx))
    return lower[:-1] + upper[:-1]


def convex_hull(points) -> HullPolygon:
    """Convex hull of a d=2 point set, via the Klein model."""
    arr = _as_point_array(points)
    if arr.shape[0] == 0:
        raise GeometryError("need at least one point")
    uniq = np.unique(arr, axis=0)
    if uniq.shape[0] == 1:
        return HullPolygon([HPoint(uniq[0])])
    klein = np.array([to_klein(p) for p in uniq])
    if uniq.shape[0] == 2:
        return HullPolygon([HPoint(p) for p in uniq])
    idx = _monotone_chain(klein)
    if len(idx) < 3:
        # all collinear: keep the two extremes
        order = np.lexsort((klein[:, 1], klein[:, 0]))
        return HullPolygon([HPoint(uniq[order[0]]), HPoint(uniq[order[-1]])])
    verts = [HPoint(uniq[i]) for i in idx]
    # merge angle-pi vertices the chain kept due to float ties
    poly = HullPolygon(verts)
    while not poly.degenerate and any(a >= math.pi - 1e-12 for a in poly.interior_angles):
        keep = [v for v, a in zip(poly.vertices, poly.interior_angles) if a < math.pi - 1e-12]
        if len(keep) == len(poly.vertices):
            break
        poly = HullPolygon(keep)
    return poly


def polygon_area(hull: HullPolygon) -> float:
    """Hyperbolic area via the angle defect: (n-2)*pi - sum of angles."""
    n = len(hull.vertices)
    if n < 3:
        return 0.0
    return (n - 2) * math.pi - sum(hull.interior_angles)


def hull_contains(hull: HullPolygon, point, tol: float = 1e-10) -> bool:
    """Membership in the closed hull region via supporting geodesics."""
    if hull.degenerate:
        if len(hull.vertices) == 1:
            return dist(hull.vertices[0], point) <= tol
        return point_to_segment_distance(point, hull.vertices[0], hull.vertices[1]) <= tol
    X = poincare_to_hyperboloid(point)
    k = len(hull.vertices)
    for i in range(k):
        a, b = hull.vertices[i], hull.vertices[(i + 1) % k]
        w = geodesic_hyperplane_normal(a, b)
        side = lorentz_form(poincare_to_hyperboloid(hull.vertices[(i + 2) % k]), w)
        if side * lorentz_form(X, w) < -tol:
            return False
    return True


def hull_boundary_members(points, hull: HullPolygon, tol: float = 1e-9) -> np.ndarray:
    """Boolean mask of the input points lying on the hull boundary."""
    arr = _as_point_array(points)
    if hull.degenerate:
        return np.ones(arr.shape[0], dtype=bool)
    out = np.zeros(arr.shape[0], dtype=bool)
    k = len(hull.vertices)
    for pi in range(arr.shape[0]):
        p = arr[pi]
        for i in range(k):
            if point_to_segment_distance(p, hull.vertices[i], hull.vertices[(i + 1) % k]) <= tol:
                out[pi] = True
                break
    return out


def boundary_distance(hull: HullPolygon, point) -> float:
    """Distance from a point to the hull boundary curve."""
    if hull.degenerate:
        if len(hull.vertices) == 1:
            return dist(hull.vertices[0], point)
        return point_to_segment_distance(point, hull.vertices[0], hull.vertices[1])
    k = len(hull.vertices)
    return min(
        point_to_segment_distance(point, hull.vertices[i], hull.vertices[(i + 1) % k])
        for i in range(k)
    )


def eps_boundary(points, eps: float) -> np.ndarray:
    """Mask of points whose eps-ball is not contained in the hull of the set.

    Points on the hull boundary always qualify; interior points qualify when
    they sit within eps of the boundary.  A degenerate hull has empty
    interior, so every point qualifies."""
    if eps <= 0:
        raise GeometryError("eps must be positive")
    arr = _as_point_array(points)
    hull = convex_hull(arr)
    if hull.degenerate:
        return np.ones(arr.shape[0], dtype=bool)
    mask = hull_boundary_members(arr, hull)
    for i in range(arr.shape[0]):
        if not mask[i] and boundary_distance(hull, arr[i]) < eps:
            mask[i] = True
    return mask


def halo_area(
    points,
    eps: float,
    seed: int = 0,
    target_rel_stderr: float = 0.01,
    n_strata: int = 16,
    batch: int = 4096,
    max_samples: int = 2_000_000,
) -> tuple[float, float]:
    """Monte Carlo area of the union of eps-balls around the points.

    Stratified over equal-measure radial shells of a covering ball; returns
    (estimate, stderr) with sampling continued until the relative stderr
    target or the sample cap is reached."""
    arr = _as_point_array(points)
    if arr.shape[0] == 0:
        return 0.0, 0.0
    gen = rngmod.substream(seed, 0, rngmod.ROLE_MC)
    r_cov = float(hyperbolic_radii(arr).max()) + eps
    total_measure = ball_measure(r_cov, 2)
    n2 = np.einsum("ij,ij->i", arr, arr)
    s_pts = 1.0 - n2
    u_thresh = 0.5 * (math.cosh(eps) - 1.0)

    hits = np.zeros(n_strata, dtype=np.int64)
    draws = np.zeros(n_strata, dtype=np.int64)
    while True:
        for k in range(n_strata):
            u = (k + gen.random(batch)) / n_strata
            r_hyp = _invert_radial(u, r_cov, 2)
            rho = np.tanh(0.5 * r_hyp)
            ang = gen.random(batch) * 2.0 * math.pi
            smp = np.column_stack([rho * np.cos(ang), rho * np.sin(ang)])
            sm = 1.0 - np.einsum("ij,ij->i", smp, smp)
            d2 = (
                np.einsum("ij,ij->i", smp, smp)[:, None]
                + n2[None, :]
                - 2.0 * smp @ arr.T
            )
            uu = d2 / (sm[:, None] * s_pts[None, :])
            inside = (uu <= u_thresh).any(axis=1)
            hits[k] += int(inside.sum())
            draws[k] += batch
        p = hits / draws
        est = total_measure * float(p.mean())
        var = (total_measure / n_strata) ** 2 * float((p * (1.0 - p) / draws).sum())
        se = math.sqrt(var)
        if est > 0 and se / est <= target_rel_stderr:
            return est, se
        if draws.sum() >= max_samples:
            return est, se


def cap_fraction(theta: float, d: int) -> float:
    """Fraction of the rotation sphere within angle theta of a fixed axis:
    theta/pi in d=2 and (1 - cos theta)/2 in d=3."""
    if not 0.0 <= theta <= math.pi:
        raise GeometryError("theta must lie in [0, pi]")
    if d == 2:
        return theta / math.pi
    if d == 3:
        return 0.5 * (1.0 - math.cos(theta))
    raise GeometryError("only d = 2, 3 supported")
