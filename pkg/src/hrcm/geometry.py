"""Exact hyperbolic geometry for curvature -1 in dimensions 2 and 3.

Points are stored in Poincare disc/ball coordinates (Euclidean vectors of
norm < 1).  Isometries, half-spaces and tangent calculations run in the
hyperboloid model, which stays numerically stable at large radii, and the
Klein model is used where hyperbolic convexity reduces to Euclidean
convexity.  Identities are good to ~1e-10 for points within hyperbolic
radius ~15 of the origin; Poincare coordinates lose precision like e^(-r)
beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GEOM_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometric input (bad norms, dimension mismatch, ...)."""


def _as_coords(x, dim: int | None = None) -> np.ndarray:
    c = np.asarray(x.coords if isinstance(x, HPoint) else x, dtype=np.float64)
    if c.ndim != 1 or c.shape[0] not in (2, 3):
        raise GeometryError(f"point must be a 2- or 3-vector, got shape {c.shape}")
    if dim is not None and c.shape[0] != dim:
        raise GeometryError(f"dimension mismatch: expected {dim}, got {c.shape[0]}")
    n = float(np.dot(c, c))
    if n >= 1.0:
        raise GeometryError(f"Poincare coordinates must have norm < 1, got |x|^2 = {n}")
    return c


@dataclass(frozen=True)
class HPoint:
    """A point of H^d in Poincare coordinates (Euclidean norm < 1)."""

    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __iter__(self):
        return iter(self.coords)

    def __eq__(self, other) -> bool:
        return isinstance(other, HPoint) and np.array_equal(self.coords, other.coords)

    def __hash__(self) -> int:
        return hash(self.coords.tobytes())


def origin(dim: int = 2) -> HPoint:
    return HPoint(np.zeros(dim))


# -- model conversions --------------------------------------------------

def poincare_to_hyperboloid(p) -> np.ndarray:
    """Map Poincare coordinates to the unit hyperboloid in R^(d,1)."""
    p = _as_coords(p)
    s = 1.0 - float(np.dot(p, p))
    x = np.empty(p.shape[0] + 1)
    x[0] = (2.0 - s) / s
    x[1:] = 2.0 * p / s
    return x


def hyperboloid_to_poincare(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[1:] / (1.0 + x[0])


def to_klein(p) -> np.ndarray:
    """Poincare -> Klein: k = 2p / (1 + |p|^2)."""
    p = _as_coords(p)
    return 2.0 * p / (1.0 + float(np.dot(p, p)))


def from_klein(k) -> HPoint:
    """Klein -> Poincare: p = k / (1 + sqrt(1 - |k|^2))."""
    k = np.asarray(k, dtype=np.float64)
    n = float(np.dot(k, k))
    if n >= 1.0:
        raise GeometryError(f"Klein coordinates must have norm < 1, got |k|^2 = {n}")
    return HPoint(k / (1.0 + math.sqrt(1.0 - n)))


def lorentz_form(x: np.ndarray, y: np.ndarray) -> float:
    """Minkowski bilinear form of signature (-,+,...,+)."""
    return float(-x[0] * y[0] + np.dot(x[1:], y[1:]))


def _acosh1p(u: float) -> float:
    # acosh(1 + u) without cancellation for small u >= 0
    if u < 0.0:
        u = 0.0
    return math.log1p(u + math.sqrt(u * (u + 2.0)))


# -- distance ------------------------------------------------------------

def dist(x, y) -> float:
    """Hyperbolic distance between two points of equal dimension."""
    xc = _as_coords(x)
    yc = _as_coords(y, dim=xc.shape[0])
    d2 = float(np.dot(xc - yc, xc - yc))
    sx = 1.0 - float(np.dot(xc, xc))
    sy = 1.0 - float(np.dot(yc, yc))
    return _acosh1p(2.0 * d2 / (sx * sy))


def dist_to_origin(r_poincare: float) -> float:
    return 2.0 * math.atanh(r_poincare)


def poincare_radius(r_hyperbolic: float) -> float:
    return math.tanh(0.5 * r_hyperbolic)


def hyperbolic_radii(points: np.ndarray) -> np.ndarray:
    """Hyperbolic distance to the origin for an (n, d) coordinate array."""
    rho = np.linalg.norm(points, axis=-1)
    rho = np.clip(rho, 0.0, 1.0 - 1e-16)
    return 2.0 * np.arctanh(rho)


def ball_measure(r: float, d: int) -> float:
    """Hyperbolic measure of a radius-r ball: 2*pi*(cosh r - 1) in H^2,
    pi*(sinh 2r - 2r) in H^3."""
    if r < 0:
        raise GeometryError("ball radius must be nonnegative")
    if d == 2:
        return 2.0 * math.pi * (math.cosh(r) - 1.0)
    if d == 3:
        return math.pi * (math.sinh(2.0 * r) - 2.0 * r)
    raise GeometryError("only d = 2, 3 supported")


def sphere_measure(r: float, d: int) -> float:
    """Boundary measure of the radius-r sphere (2*pi*sinh r, 4*pi*sinh^2 r)."""
    if d == 2:
        return 2.0 * math.pi * math.sinh(r)
    if d == 3:
        return 4.0 * math.pi * math.sinh(r) ** 2
    raise GeometryError("only d = 2, 3 supported")


# -- isometries ----------------------------------------------------------

def _point_reflection_matrix(x: np.ndarray) -> np.ndarray:
    # geodesic symmetry through a hyperboloid point: z -> -z - 2<z,x> x
    n = x.shape[0]
    J = np.diag(np.r_[-1.0, np.ones(n - 1)])
    return -(np.eye(n) + 2.0 * np.outer(x, J @ x))


@dataclass(frozen=True)
class Isometry:
    """Orientation-preserving isometry as a Lorentz matrix in SO+(d,1)."""

    matrix: np.ndarray
    kind: str = "composite"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] - 1

    def apply(self, x) -> HPoint:
        X = poincare_to_hyperboloid(_as_coords(x, dim=self.dim))
        return HPoint(hyperboloid_to_poincare(self.matrix @ X))

    def apply_many(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts)
        for i in range(pts.shape[0]):
            out[i] = hyperboloid_to_poincare(self.matrix @ poincare_to_hyperboloid(pts[i]))
        return out

    def compose(self, other: "Isometry") -> "Isometry":
        kind = self.kind if self.kind == other.kind else "composite"
        return Isometry(self.matrix @ other.matrix, kind)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return self.compose(other)

    def inverse(self) -> "Isometry":
        n = self.matrix.shape[0]
        J = np.diag(np.r_[-1.0, np.ones(n - 1)])
        return Isometry(J @ self.matrix.T @ J, self.kind)


def identity_isometry(dim: int = 2) -> Isometry:
    return Isometry(np.eye(dim + 1), "translation")


def translation_isometry(u, v) -> Isometry:
    """The unique orientation-preserving isometry that maps u to v along
    their common geodesic and maps that geodesic to itself."""
    uc = _as_coords(u)
    vc = _as_coords(v, dim=uc.shape[0])
    if dist(uc, vc) < 1e-15:
        return identity_isometry(uc.shape[0])
    X, Y = poincare_to_hyperboloid(uc), poincare_to_hyperboloid(vc)
    s = X + Y
    m = s / math.sqrt(-lorentz_form(s, s))
    return Isometry(_point_reflection_matrix(m) @ _point_reflection_matrix(X), "translation")


def rotation_isometry(angle: float, dim: int = 2) -> Isometry:
    """Rotation about the origin; for d=3 this rotates about the z axis."""
    c, s = math.cos(angle), math.sin(angle)
    M = np.eye(dim + 1)
    M[1, 1], M[1, 2], M[2, 1], M[2, 2] = c, -s, s, c
    return Isometry(M, "rotation")


def rotation_from_orthogonal(Q: np.ndarray) -> Isometry:
    """Embed an orthogonal spatial matrix (det +1) as a rotation about o."""
    Q = np.asarray(Q, dtype=np.float64)
    d = Q.shape[0]
    M = np.eye(d + 1)
    M[1:, 1:] = Q
    return Isometry(M, "rotation")


# -- geodesics and tangents ----------------------------------------------

@dataclass(frozen=True)
class Geodesic:
    """Unit-speed geodesic gamma(s) = cosh(s) X + sinh(s) T on the hyperboloid."""

    base: np.ndarray       # hyperboloid point, gamma(0)
    tangent: np.ndarray    # unit spacelike tangent at the base

    def point_at(self, s: float) -> HPoint:
        return HPoint(hyperboloid_to_poincare(self.point_at_raw(s)))

    def point_at_raw(self, s: float) -> np.ndarray:
        return math.cosh(s) * self.base + math.sinh(s) * self.tangent

    def tangent_at_raw(self, s: float) -> np.ndarray:
        return math.sinh(s) * self.base + math.cosh(s) * self.tangent


def tangent_toward(u, v) -> np.ndarray:
    """Unit tangent at u of the geodesic from u toward v (hyperboloid model)."""
    X = poincare_to_hyperboloid(u)
    Y = poincare_to_hyperboloid(v)
    c = lorentz_form(Y, X)
    T = Y + c * X
    nrm = lorentz_form(T, T)
    if nrm <= 0:
        raise GeometryError("tangent undefined: points coincide")
    return T / math.sqrt(nrm)


def geodesic_through(u, v) -> Geodesic:
    return Geodesic(poincare_to_hyperboloid(u), tangent_toward(u, v))


def geodesic_from_direction(p, direction) -> Geodesic:
    """Geodesic through p whose initial velocity is the given Euclidean
    direction of the Poincare chart at p."""
    pc = _as_coords(p)
    e = np.asarray(direction, dtype=np.float64)
    if np.linalg.norm(e) == 0:
        raise GeometryError("direction must be nonzero")
    s = 1.0 - float(np.dot(pc, pc))
    pe = float(np.dot(pc, e))
    dX = np.empty(pc.shape[0] + 1)
    dX[0] = 4.0 * pe / s**2
    dX[1:] = 2.0 * e / s + 4.0 * pc * pe / s**2
    nrm = lorentz_form(dX, dX)
    return Geodesic(poincare_to_hyperboloid(pc), dX / math.sqrt(nrm))


def angle_at(u, v, w) -> float:
    """Angle at u between the geodesics toward v and toward w."""
    t1 = tangent_toward(u, v)
    t2 = tangent_toward(u, w)
    return math.acos(max(-1.0, min(1.0, lorentz_form(t1, t2))))


# -- half-spaces ----------------------------------------------------------

@dataclass(frozen=True)
class HalfSpace:
    """Closed half-space {x : side * <x, normal> <= 0} bounded by the geodesic
    hyperplane with unit spacelike normal."""

    normal: np.ndarray
    side: int = 1

    def __post_init__(self):
        w = np.asarray(self.normal, dtype=np.float64)
        nrm = lorentz_form(w, w)
        if nrm <= 0:
            raise GeometryError("half-space normal must be spacelike")
        object.__setattr__(self, "normal", w / math.sqrt(nrm))
        if self.side not in (+1, -1):
            raise GeometryError("side must be +1 or -1")

    def signed_excess(self, x) -> float:
        """Negative inside, zero on the boundary, positive outside; equals
        sinh(distance to the boundary) in magnitude."""
        X = poincare_to_hyperboloid(x)
        return self.side * lorentz_form(X, self.normal)

    def contains(self, x, tol: float = GEOM_TOL) -> bool:
        return self.signed_excess(x) <= tol

    def boundary_distance(self, x) -> float:
        return math.asinh(abs(self.signed_excess(x)))

    def transformed(self, iso: Isometry) -> "HalfSpace":
        # Lorentz matrices push normals forward by the matrix itself
        return HalfSpace(iso.matrix @ self.normal, self.side)


def half_space_at(geod: Geodesic, s: float, keeps_negative_side: bool = True) -> HalfSpace:
    """Half-space whose boundary is orthogonal to the geodesic at parameter s,
    containing gamma((-inf, s]) if keeps_negative_side else gamma([s, inf))."""
    w = geod.tangent_at_raw(s)
    return HalfSpace(w, +1 if keeps_negative_side else -1)


def geodesic_hyperplane_normal(u, v) -> np.ndarray:
    """Unit spacelike normal of the geodesic through two points of H^2."""
    X = poincare_to_hyperboloid(u)
    Y = poincare_to_hyperboloid(v)
    if X.shape[0] != 3:
        raise GeometryError("hyperplane through two points is specific to d=2")
    c = np.cross(X, Y)
    w = np.array([-c[0], c[1], c[2]])
    nrm = lorentz_form(w, w)
    if nrm <= 0:
        raise GeometryError("points coincide; geodesic undefined")
    return w / math.sqrt(nrm)


def point_to_geodesic_distance(x, u, v) -> float:
    """Distance from x to the full geodesic through u and v (d=2)."""
    w = geodesic_hyperplane_normal(u, v)
    return math.asinh(abs(lorentz_form(poincare_to_hyperboloid(x), w)))


def point_to_segment_distance(x, u, v) -> float:
    """Distance from x to the geodesic segment [u, v]."""
    length = dist(u, v)
    if length < 1e-15:
        return dist(x, u)
    geod = geodesic_through(u, v)
    X = poincare_to_hyperboloid(x)
    bu = lorentz_form(X, geod.base)
    bt = lorentz_form(X, geod.tangent)
    # foot of the perpendicular on the line: tanh(s*) = -bt/bu with bu < 0
    s_star = math.atanh(max(-1.0 + 1e-15, min(1.0 - 1e-15, bt / (-bu))))
    if 0.0 <= s_star <= length:
        w = geodesic_hyperplane_normal(u, v)
        return math.asinh(abs(lorentz_form(X, w)))
    return min(dist(x, u), dist(x, v))


# -- special lengths and angles of the half-space constructions ------------

def avoidance_length(theta: float) -> float:
    """Critical branch length L(theta) above which two geodesics branching
    at angle theta from points on a theta-cone no longer cross."""
    if not 0.0 < theta < math.pi:
        raise GeometryError("theta must lie in (0, pi)")
    arg = (1.0 - math.cos(theta) * math.cos(0.5 * theta)) / (
        math.sin(theta) * math.sin(0.5 * theta)
    )
    if arg < 1.0:
        if arg > 1.0 - 1e-12:
            arg = 1.0
        else:
            raise GeometryError(f"arcosh argument {arg} < 1 for theta={theta}")
    return math.acosh(arg)


def pulled_halfspace_params(D: float, eps: float) -> tuple[float, float]:
    """Distance from the bounding hyperplane to the axis point of the pulled
    half-space union, and the angle it makes with the axis.

    D is the distance from x to the boundary of the ambient half-space,
    eps the pull-back slack; requires 0 < eps < D.
    """
    if not 0.0 < eps < D:
        raise GeometryError("need 0 < eps < D")
    m_dist = D - 0.5 * math.log(
        (1.0 + math.exp(D) * math.sinh(eps)) / (1.0 - math.exp(-D) * math.sinh(eps))
    )
    ratio = math.tanh(eps) / math.tanh(D - m_dist)
    theta_eps = math.acos(max(-1.0, min(1.0, ratio)))
    return m_dist, theta_eps


# -- triangle solving ------------------------------------------------------

@dataclass(frozen=True)
class TriangleSolution:
    """Sides a,b,c opposite angles alpha,beta,gamma; area is the angle defect."""

    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float
    area: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "area", math.pi - self.alpha - self.beta - self.gamma)


def _angle_from_sides(a: float, b: float, c: float) -> float:
    # angle opposite side c via the hyperbolic cosine rule
    num = math.cosh(a) * math.cosh(b) - math.cosh(c)
    den = math.sinh(a) * math.sinh(b)
    return math.acos(max(-1.0, min(1.0, num / den)))


def _side_from_angles(alpha: float, beta: float, gamma: float) -> float:
    # side between alpha and beta (opposite gamma) via the second cosine rule
    den = math.sin(alpha) * math.sin(beta)
    if den == 0.0:
        return math.inf
    arg = (math.cos(alpha) * math.cos(beta) + math.cos(gamma)) / den
    if arg < 1.0:
        if arg < 1.0 - 1e-9:
            raise GeometryError("angles do not define a hyperbolic triangle")
        arg = 1.0
    return math.acosh(arg)


def solve_triangle(
    a: float | None = None,
    b: float | None = None,
    c: float | None = None,
    alpha: float | None = None,
    beta: float | None = None,
    gamma: float | None = None,
) -> TriangleSolution:
    """Solve a hyperbolic triangle from SSS, AAA, or SAS data.

    Supported inputs: three sides; three angles (angle sum < pi, zero angles
    give infinite opposite sides); or two sides with the included angle
    (a, b, gamma) up to relabelling, which covers the right-triangle cases.
    """
    sides = (a, b, c)
    angles = (alpha, beta, gamma)
    ns = sum(s is not None for s in sides)
    na = sum(t is not None for t in angles)

    if ns == 3 and na == 0:
        if min(a, b, c) <= 0:
            raise GeometryError("sides must be positive")
        if max(a, b, c) >= 0.5 * (a + b + c):
            raise GeometryError("triangle inequality violated")
        return TriangleSolution(
            a, b, c,
            _angle_from_sides(b, c, a),
            _angle_from_sides(a, c, b),
            _angle_from_sides(a, b, c),
        )

    if na == 3 and ns == 0:
        if min(alpha, beta, gamma) < 0 or max(alpha, beta, gamma) >= math.pi:
            raise GeometryError("angles must lie in [0, pi)")
        if alpha + beta + gamma >= math.pi:
            raise GeometryError("hyperbolic angle sum must be < pi")
        return TriangleSolution(
            _side_from_angles(beta, gamma, alpha),
            _side_from_angles(alpha, gamma, beta),
            _side_from_angles(alpha, beta, gamma),
            alpha, beta, gamma,
        )

    if ns == 2 and na == 1:
        # rotate labels so the two known sides flank the known angle
        if c is None and gamma is not None:
            pass
        elif a is None and alpha is not None:
            a, b, c = b, c, a
            alpha, beta, gamma = beta, gamma, alpha
            return _relabel_back(solve_triangle(a=a, b=b, gamma=gamma), 1)
        elif b is None and beta is not None:
            a, b, c = c, a, b
            alpha, beta, gamma = gamma, alpha, beta
            return _relabel_back(solve_triangle(a=a, b=b, gamma=gamma), 2)
        else:
            raise GeometryError("SAS data must pair the missing side with its opposite angle")
        if min(a, b) <= 0 or not 0.0 < gamma < math.pi:
            raise GeometryError("SAS requires positive sides and included angle in (0, pi)")
        cc = math.cosh(a) * math.cosh(b) - math.sinh(a) * math.sinh(b) * math.cos(gamma)
        c_len = _acosh1p(max(0.0, cc - 1.0))
        return TriangleSolution(
            a, b, c_len,
            _angle_from_sides(b, c_len, a),
            _angle_from_sides(a, c_len, b),
            gamma,
        )

    raise GeometryError("need SSS, AAA, or SAS data to determine the triangle")


def _relabel_back(t: TriangleSolution, shift: int) -> TriangleSolution:
    lab = [(t.a, t.alpha), (t.b, t.beta), (t.c, t.gamma)]
    lab = lab[-shift:] + lab[:-shift]
    return TriangleSolution(lab[0][0], lab[1][0], lab[2][0], lab[0][1], lab[1][1], lab[2][1])


# -- stepping stones -------------------------------------------------------

def stepping_stones(
    gamma_origin,
    gamma_dir,
    l: float,
    delta: float,
    n: int,
) -> tuple[list[tuple[HPoint, float]], HalfSpace, HalfSpace]:
    """Chain of n delta-balls centred at arc length l, 2l, ..., nl along the
    geodesic from gamma_origin in direction gamma_dir, together with the two
    half-spaces whose boundaries cross the geodesic orthogonally at
    parameters 2*delta (near side, contains the origin) and n*l - 2*delta
    (far side)."""
    if l <= 0 or delta <= 0 or n < 1:
        raise GeometryError("need l > 0, delta > 0, n >= 1")
    geod = geodesic_from_direction(gamma_origin, gamma_dir)
    stones = [(geod.point_at(k * l), delta) for k in range(1, n + 1)]
    near = half_space_at(geod, 2.0 * delta, keeps_negative_side=True)
    far = half_space_at(geod, n * l - 2.0 * delta, keeps_negative_side=False)
    return stones, near, far


# -- binary tree embedding (cone splitting) --------------------------------

def _tangent_normal(X: np.ndarray, T: np.ndarray) -> np.ndarray:
    # the unit tangent at X orthogonal to T, with orientation fixed by the
    # Euclidean cross product in R^(2,1)
    c = np.cross(X, T)
    w = np.array([-c[0], c[1], c[2]])
    return w / math.sqrt(lorentz_form(w, w))


def embed_binary_tree(A, B, depth: int) -> tuple[list[HPoint], float]:
    """Embed the binary tree generated by A and B: each vertex continues its
    incoming geodesic and branches off at the cone angle, always turning
    toward the cone interior.  Returns the 2^(depth+1) - 1 vertices
    (depth < 1 is clamped to the base tree {o, A, B}) and the minimum
    pairwise hyperbolic distance."""
    ac = _as_coords(A)
    bc = _as_coords(B, dim=ac.shape[0])
    if ac.shape[0] != 2:
        raise GeometryError("binary tree embedding is specific to d=2")
    o = np.zeros(2)
    theta = angle_at(o, ac, bc)
    if theta < 1e-12 or theta > math.pi - 1e-12:
        raise GeometryError("A, o, B must not be collinear")
    L = avoidance_length(theta)
    dA, dB = dist(o, ac), dist(o, bc)
    if dA <= L:
        raise GeometryError(f"dist(o, A) = {dA:.6f} must exceed L(theta) = {L:.6f}")
    if dB <= L:
        raise GeometryError(f"dist(o, B) = {dB:.6f} must exceed L(theta) = {L:.6f}")
    depth = max(depth, 1)

    def grow(X, T, turn, length, remaining, out):
        if remaining == 0:
            return
        N = _tangent_normal(X, T)
        U = math.cos(theta) * T + turn * math.sin(theta) * N
        # the straight child keeps branching into the same cone; the branched
        # child's cone lies on its other side, so its chirality flips
        for D, turn_child in ((T, turn), (U, -turn)):
            Xc = math.cosh(length) * X + math.sinh(length) * D
            Tc = math.sinh(length) * X + math.cosh(length) * D
            out.append(Xc)
            grow(Xc, Tc, turn_child, length, remaining - 1, out)

    XA = poincare_to_hyperboloid(ac)
    XB = poincare_to_hyperboloid(bc)
    TA = geodesic_through(o, ac).tangent_at_raw(dA)
    TB = geodesic_through(o, bc).tangent_at_raw(dB)
    # turn direction: rotate toward the other generator's side of the axis
    turn_A = 1.0 if lorentz_form(_tangent_normal(XA, TA), XB) > 0 else -1.0
    turn_B = 1.0 if lorentz_form(_tangent_normal(XB, TB), XA) > 0 else -1.0

    raw = [poincare_to_hyperboloid(o), XA, XB]
    grow(XA, TA, turn_A, dA, depth - 1, raw)
    grow(XB, TB, turn_B, dB, depth - 1, raw)

    M = np.array(raw)
    G = -(-np.outer(M[:, 0], M[:, 0]) + M[:, 1:] @ M[:, 1:].T)
    np.fill_diagonal(G, 1.0)
    min_dist = float(np.arccosh(np.maximum(G, 1.0)).min(initial=np.inf, where=~np.eye(len(raw), dtype=bool)))
    pts = [HPoint(hyperboloid_to_poincare(v)) for v in raw]
    return pts, min_dist
