"""Deterministic geometry/hull property suite behind the `geomtest` command.

Each check returns (name, ok, detail).  The suite is seeded and cheap enough
to run routinely; the pytest suite runs the same checks at full depth.
"""

from __future__ import annotations

import math

import numpy as np

from . import hull as hullmod
from .geometry import (
    Geodesic,
    HalfSpace,
    HPoint,
    angle_at,
    avoidance_length,
    ball_measure,
    dist,
    embed_binary_tree,
    from_klein,
    geodesic_from_direction,
    half_space_at,
    lorentz_form,
    poincare_radius,
    poincare_to_hyperboloid,
    pulled_halfspace_params,
    rotation_isometry,
    solve_triangle,
    stepping_stones,
    to_klein,
    translation_isometry,
)


def random_point(gen: np.random.Generator, r_max: float = 4.0) -> HPoint:
    r = math.acosh(1.0 + gen.random() * (math.cosh(r_max) - 1.0))
    a = gen.random() * 2.0 * math.pi
    rho = math.tanh(0.5 * r)
    return HPoint(np.array([rho * math.cos(a), rho * math.sin(a)]))


def random_triangle(gen: np.random.Generator, r_max: float = 3.5,
                    min_side: float = 0.05, min_angle: float = 0.08):
    """Three random points forming a nondegenerate hyperbolic triangle."""
    while True:
        A, B, C = (random_point(gen, r_max) for _ in range(3))
        a, b, c = dist(B, C), dist(A, C), dist(A, B)
        if min(a, b, c) < min_side:
            continue
        al = angle_at(A, B, C)
        be = angle_at(B, A, C)
        ga = angle_at(C, A, B)
        if min(al, be, ga) >= min_angle:
            return (A, B, C), (a, b, c), (al, be, ga)


def triangle_rule_residuals(sides, angles) -> list[float]:
    """Scale-relative residuals of the cosine, sine, second-cosine and
    angle-defect identities for one triangle."""
    a, b, c = sides
    al, be, ga = angles
    out = []
    # first cosine rule (all three labellings)
    for (s1, s2, s3), g in (((a, b, c), ga), ((b, c, a), al), ((c, a, b), be)):
        lhs = math.cosh(s3)
        rhs = math.cosh(s1) * math.cosh(s2) - math.sinh(s1) * math.sinh(s2) * math.cos(g)
        out.append(abs(lhs - rhs) / max(1.0, abs(lhs)))
    # sine rule
    ratios = [math.sin(al) / math.sinh(a), math.sin(be) / math.sinh(b),
              math.sin(ga) / math.sinh(c)]
    scale = max(ratios)
    out.append((max(ratios) - min(ratios)) / scale)
    # second cosine rule (all three labellings)
    for (a1, a2, a3), s in (((al, be, ga), c), ((be, ga, al), a), ((ga, al, be), b)):
        lhs = math.cosh(s) * math.sin(a1) * math.sin(a2)
        rhs = math.cos(a1) * math.cos(a2) + math.cos(a3)
        out.append(abs(lhs - rhs) / max(1.0, abs(lhs)))
    # angle defect is positive and below pi
    defect = math.pi - al - be - ga
    out.append(0.0 if 0.0 < defect < math.pi else math.inf)
    return out


def check_triangle_rules(n: int = 300, tol: float = 1e-10, seed: int = 2024):
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        _, sides, angles = random_triangle(gen)
        worst = max(worst, max(triangle_rule_residuals(sides, angles)))
        # solver round-trip consistency: SSS angles match tangent-space angles
        sol = solve_triangle(a=sides[0], b=sides[1], c=sides[2])
        worst = max(worst, abs(sol.alpha - angles[0]), abs(sol.beta - angles[1]),
                    abs(sol.gamma - angles[2]),
                    abs(sol.area - (math.pi - sum(angles))))
        # right triangles: tangent and cosine rules
        leg_a, leg_b = 0.3 + 2.0 * gen.random(2)
        rt = solve_triangle(a=leg_a, b=leg_b, gamma=math.pi / 2)
        worst = max(worst,
                    abs(math.tan(rt.alpha) - math.tanh(leg_a) / math.sinh(leg_b)),
                    abs(math.cos(rt.alpha) - math.tanh(leg_b) / math.tanh(rt.c)))
    return "triangle_rules", worst < tol, f"worst residual {worst:.3e}"


def check_isometry_group(n: int = 60, tol: float = 1e-10, seed: int = 7):
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        u, v, w, x, y = (random_point(gen, 3.0) for _ in range(5))
        S = translation_isometry(u, v)
        T = translation_isometry(w, u).compose(rotation_isometry(gen.random() * 6.28))
        lhs = S.compose(T).apply(x)
        rhs = S.apply(T.apply(x))
        # point coincidence is measured in coordinates: hyperbolic distance
        # between nearly equal points square-root-amplifies float noise
        worst = max(worst, float(np.abs(lhs.coords - rhs.coords).max()))
        worst = max(worst, abs(dist(S.apply(x), S.apply(y)) - dist(x, y)))
        worst = max(worst, float(np.abs(S.inverse().apply(S.apply(x)).coords - x.coords).max()))
    return "isometry_group", worst < tol, f"worst deviation {worst:.3e}"


def check_halfspace_invariance(n: int = 40, tol: float = 1e-9, seed: int = 8):
    gen = np.random.default_rng(seed)
    ok = True
    for _ in range(n):
        u, v, x = (random_point(gen, 3.0) for _ in range(3))
        geod = geodesic_from_direction(u, gen.standard_normal(2))
        H = half_space_at(geod, 0.7 * gen.random(), keeps_negative_side=bool(gen.random() < 0.5))
        T = translation_isometry(u, v)
        a = H.contains(x, tol=1e-12)
        b = H.transformed(T).contains(T.apply(x), tol=1e-12)
        if a != b and abs(H.signed_excess(x)) > tol:
            ok = False
    return "halfspace_invariance", ok, "membership preserved under isometries"


def check_ball_measure_mc(samples: int = 200_000, seed: int = 9):
    # hyperbolic area of B_1 via uniform Euclidean sampling of the Poincare
    # disc of radius tanh(1/2), weighted by the metric density
    gen = np.random.default_rng(seed)
    rho_max = poincare_radius(1.0)
    pts = gen.random((samples, 2)) * 2.0 * rho_max - rho_max
    inside = np.einsum("ij,ij->i", pts, pts) <= rho_max**2
    w = np.zeros(samples)
    nn = np.einsum("ij,ij->i", pts[inside], pts[inside])
    w[inside] = 4.0 / (1.0 - nn) ** 2
    box = (2.0 * rho_max) ** 2
    est = box * w.mean()
    se = box * w.std(ddof=1) / math.sqrt(samples)
    truth = ball_measure(1.0, 2)
    ok = abs(est - truth) < 4.0 * se
    return "ball_measure_mc", ok, f"mc {est:.5f} vs closed form {truth:.5f} (se {se:.5f})"


def _branch_crosses_bisector(theta: float, length: float, t_max: float = 40.0) -> bool:
    geod = Geodesic(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    A = geod.point_at_raw(length)
    TA = geod.tangent_at_raw(length)
    c = np.cross(A, TA)
    N = np.array([-c[0], c[1], c[2]])
    N /= math.sqrt(lorentz_form(N, N))
    if N[2] < 0:
        N = -N
    U = math.cos(theta) * TA + math.sin(theta) * N
    w_bis = np.array([0.0, -math.sin(theta / 2.0), math.cos(theta / 2.0)])
    sign0 = None
    for t in np.linspace(0.0, t_max, 4001):
        pt = math.cosh(t) * A + math.sinh(t) * U
        s = lorentz_form(pt, w_bis)
        if sign0 is None:
            sign0 = math.copysign(1.0, s)
        elif s * sign0 < 0:
            return True
    return False


def check_avoidance_soundness(seed: int = 0):
    ok = True
    detail = []
    for theta in (math.pi / 3, math.pi / 2, 2 * math.pi / 3, 2.4):
        L = avoidance_length(theta)
        crosses_below = _branch_crosses_bisector(theta, L - 0.01)
        crosses_above = _branch_crosses_bisector(theta, L + 0.01)
        if not crosses_below or crosses_above:
            ok = False
            detail.append(f"theta={theta:.3f}: below={crosses_below} above={crosses_above}")
    return "avoidance_soundness", ok, "; ".join(detail) or "branches cross iff l < L(theta)"


def check_klein(n: int = 100, tol: float = 1e-10, seed: int = 5):
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        p = random_point(gen, 5.0)
        worst = max(worst, float(np.abs(from_klein(to_klein(p)).coords - p.coords).max()))
    # geodesic samples are collinear in the Klein model
    a, b = random_point(gen, 3.0), random_point(gen, 3.0)
    from .geometry import geodesic_through
    geod = geodesic_through(a, b)
    ks = [to_klein(geod.point_at(t)) for t in np.linspace(0, dist(a, b), 9)]
    for k in ks[1:-1]:
        cross = (ks[-1][0] - ks[0][0]) * (k[1] - ks[0][1]) - (ks[-1][1] - ks[0][1]) * (k[0] - ks[0][0])
        worst = max(worst, abs(cross))
    return "klein_model", worst < tol, f"worst residual {worst:.3e}"


def _pulled_numeric(D: float, eps: float) -> tuple[float, float]:
    """Numeric construction of the pulled half-space union for x = o:
    scan tangent half-spaces to the eps-ball, keep those inside H, and find
    the extreme one by bisection on the pull direction."""
    geod = Geodesic(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    H = half_space_at(geod, -D, keeps_negative_side=False)

    def m_halfspace(psi: float) -> HalfSpace:
        w = np.array([math.sinh(eps), math.cosh(eps) * math.cos(psi),
                      math.cosh(eps) * math.sin(psi)])
        return HalfSpace(w, +1)

    ts = np.linspace(-30.0, 30.0, 2401)
    cosh_t, sinh_t = np.cosh(ts), np.sinh(ts)
    base_H = geod.point_at_raw(-D)
    ch = np.cross(base_H, geod.tangent_at_raw(-D))
    tang_H = np.array([-ch[0], ch[1], ch[2]])
    tang_H /= math.sqrt(lorentz_form(tang_H, tang_H))
    bd_H = cosh_t[:, None] * base_H[None, :] + sinh_t[:, None] * tang_H[None, :]

    def valid(psi: float) -> bool:
        # M inside H iff M's boundary stays in H and H's boundary never
        # enters M's interior (the second clause rejects candidates that
        # swallow the complement of H)
        w = m_halfspace(psi).normal
        base = math.cosh(eps) * np.array([1.0, 0.0, 0.0]) + math.sinh(eps) * np.array(
            [0.0, math.cos(psi), math.sin(psi)])
        tang = np.array([0.0, -math.sin(psi), math.cos(psi)])
        bd_M = cosh_t[:, None] * base[None, :] + sinh_t[:, None] * tang[None, :]
        w_H = H.normal
        in_H = H.side * (-bd_M[:, 0] * w_H[0] + bd_M[:, 1:] @ w_H[1:])
        if np.any(in_H > 1e-9):
            return False
        in_M = -bd_H[:, 0] * w[0] + bd_H[:, 1:] @ w[1:]
        return not np.any(in_M < -1e-9)

    lo, hi = math.pi / 2 + 1e-6, math.pi
    if not valid(hi):
        raise RuntimeError("straight pull should be admissible")
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        if valid(mid):
            hi = mid
        else:
            lo = mid
    psi_star = hi
    s_star = math.atanh(max(-1 + 1e-15, min(1 - 1e-15, math.tanh(eps) / math.cos(psi_star))))
    m_dist_num = D + s_star
    # theta_eps is the half-angle of admissible pull directions at x: the
    # quantity that bounds the measure of rotations keeping a pulled
    # half-space inside H
    return m_dist_num, math.pi - psi_star


def _to_poincare(x: np.ndarray) -> np.ndarray:
    return x[1:] / (1.0 + x[0])


def check_pulled_halfspace(tol: float = 2e-4):
    worst = 0.0
    for D, eps in ((1.0, 0.5), (2.0, 0.4), (1.5, 1.0)):
        m_formula, th_formula = pulled_halfspace_params(D, eps)
        m_num, th_num = _pulled_numeric(D, eps)
        worst = max(worst, abs(m_formula - m_num),
                    abs(math.cos(th_formula) - math.cos(th_num)))
    return "pulled_halfspace", worst < tol, f"worst deviation {worst:.2e}"


def check_hull_keystone(n_sets: int = 150, seed: int = 12):
    gen = np.random.default_rng(seed)
    ok = True
    for _ in range(n_sets):
        n = int(gen.integers(3, 40))
        pts = np.array([random_point(gen, 5.0).coords for _ in range(n)])
        h = hullmod.convex_hull(pts)
        area = hullmod.polygon_area(h)
        n_bd = int(hullmod.hull_boundary_members(pts, h).sum())
        if area > math.pi * (n_bd - 2) or area < 0:
            ok = False
    return "hull_keystone", ok, "area(conv S) <= pi(#boundary - 2)"


def check_cap_fraction(tol: float = 1e-9):
    from scipy import integrate

    worst = 0.0
    for d in (2, 3):
        for theta in np.linspace(0.05, math.pi, 20):
            direct = hullmod.cap_fraction(theta, d)
            surf = {2: 2.0, 3: 2.0 * math.pi}[d]
            whole = {2: 2.0 * math.pi, 3: 4.0 * math.pi}[d]
            val, _ = integrate.quad(lambda t: math.sin(t) ** (d - 2), 0.0, theta)
            worst = max(worst, abs(direct - surf * val / whole))
    return "cap_fraction", worst < tol, f"worst residual {worst:.2e}"


def check_binary_tree():
    A = HPoint(np.array([poincare_radius(1.0), 0.0]))
    B = HPoint(np.array([0.0, poincare_radius(1.0)]))
    pts, min_dist = embed_binary_tree(A, B, 6)
    ok = len(pts) == 127 and min_dist > 1e-4
    # generators' cones stay on opposite sides of the bisecting geodesic
    # (vertex order: o, A, B, A-descendants, B-descendants)
    w_bis = np.array([0.0, -math.sin(math.pi / 4), math.cos(math.pi / 4)])
    sides = [math.copysign(1.0, lorentz_form(poincare_to_hyperboloid(p.coords), w_bis))
             for p in pts[1:]]
    half = (len(sides) - 2) // 2
    a_signs = {sides[0]} | set(sides[2:2 + half])
    b_signs = {sides[1]} | set(sides[2 + half:])
    ok = ok and len(a_signs) == 1 and len(b_signs) == 1 and a_signs != b_signs
    return "binary_tree", ok, f"{len(pts)} vertices, min distance {min_dist:.4f}"


def check_stepping_stones():
    stones, near, far = stepping_stones(HPoint(np.zeros(2)), np.array([1.0, 0.0]),
                                        1.0, 0.2, 5)
    ok = True
    for k in range(len(stones) - 1):
        ok = ok and abs(dist(stones[k][0], stones[k + 1][0]) - 1.0) < 1e-10
    for centre, delta in stones:
        ok = ok and near.boundary_distance(centre) >= 2 * delta - 1e-9
        ok = ok and far.boundary_distance(centre) >= 2 * delta - 1e-9
        ok = ok and not near.contains(centre)
    return "stepping_stones", ok, "spacing and clearance hold"


ALL_CHECKS = [
    check_triangle_rules,
    check_isometry_group,
    check_halfspace_invariance,
    check_ball_measure_mc,
    check_avoidance_soundness,
    check_klein,
    check_pulled_halfspace,
    check_hull_keystone,
    check_cap_fraction,
    check_binary_tree,
    check_stepping_stones,
]


def run_all() -> list[tuple[str, bool, str]]:
    return [chk() for chk in ALL_CHECKS]
