"""Critical-intensity estimation, log-log exponent fits, and sweep orchestration.

The finite-window protocol: the boundary-reach probability crosses a fixed
threshold at a per-window intensity; crossings from the last two window radii
are extrapolated assuming e^(-R) window bias.  Exponent fits are weighted
least squares on log-log data, with the critical-intensity uncertainty
propagated by refitting at the interval endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .clusters import estimate_chi, estimate_tail, estimate_theta, sample_origin_cluster_sizes
from .sampling import ConnectionSpec, int_phi
from .stats import mean_and_stderr, weighted_linear_fit


@dataclass
class FitResult:
    exponent: float
    stderr: float
    intercept: float
    fit_window: tuple[float, float]
    r_squared: float
    residual_trend: bool
    n_points: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "fit_window": list(self.fit_window),
            "r_squared": self.r_squared,
            "residual_trend": self.residual_trend,
            "n_points": self.n_points,
        }


def fit_exponent(x, y, y_stderr=None) -> FitResult:
    """Weighted least squares of log y against log x; the slope estimates the
    power-law exponent.  A significant quadratic term in the residuals sets
    the residual_trend flag (fit window too wide)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 points for an exponent fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fits need positive data")
    if y_stderr is None:
        sig = np.full(y.size, 1.0)
    else:
        sig = np.asarray(y_stderr, dtype=float) / y
        sig = np.where(sig <= 0, max(1e-12, float(sig[sig > 0].min(initial=1e-12))), sig)
    lx, ly = np.log(x), np.log(y)
    slope, slope_se, intercept, _, r2 = weighted_linear_fit(lx, ly, sig)
    resid = ly - intercept - slope * lx
    trend = _curvature_flag(lx, resid, sig)
    return FitResult(slope, slope_se, intercept, (float(x.min()), float(x.max())),
                     r2, trend, int(x.size))


def _curvature_flag(lx: np.ndarray, resid: np.ndarray, sig: np.ndarray) -> bool:
    if lx.size < 5:
        return False
    w = 1.0 / sig**2
    A = np.column_stack([np.ones_like(lx), lx, lx**2])
    Aw = A * w[:, None]
    cov = np.linalg.inv(A.T @ Aw)
    coef = cov @ (Aw.T @ resid)
    c2, c2_se = coef[2], math.sqrt(max(cov[2, 2], 1e-300))
    return bool(abs(c2) / c2_se > 3.0)


# -- critical intensity ----------------------------------------------------------

@dataclass
class LambdaCEstimate:
    lambda_c_hat: float
    ci_low: float
    ci_high: float
    threshold: float
    radii: list[float]
    crossings: list[float]
    crossing_stderr: list[float]

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("lambda_c_hat", "ci_low", "ci_high", "threshold", "radii",
                 "crossings", "crossing_stderr")}


def _theta_at(lam, phi, R, margin, replicas, seed, d, threads) -> tuple[float, float, np.ndarray]:
    _, reach = sample_origin_cluster_sizes(lam, phi, R, margin, replicas, seed, d, threads)
    m, e = mean_and_stderr(reach.astype(float))
    return m, e, reach


def _crossing_for_radius(
    phi, d, R, margin, replicas, seed, threshold, threads,
    lam_lo=None, lam_hi=None, bisect_replicas=None, rounds=9,
) -> tuple[float, float]:
    """Bisection for the intensity where the reach probability crosses the
    threshold, then a high-replica paired evaluation of the final bracket."""
    iphi = int_phi(phi, d)
    if not 0.0 < iphi < math.inf:
        raise ValueError("phi must have positive finite total weight")
    lo = 0.35 / iphi if lam_lo is None else lam_lo
    hi = min(1.2 / iphi, lam_hi) if lam_hi is not None else 1.2 / iphi
    nb = max(400, replicas // 4) if bisect_replicas is None else bisect_replicas
    th_lo, _, _ = _theta_at(lo, phi, R, margin, nb, rngmod.derive_seed(seed, 90_001), d, threads)
    if th_lo >= threshold:
        raise ValueError(
            f"theta({lo:.4g}) = {th_lo:.3f} already above threshold; "
            "lower lam_lo to bracket the crossing")
    for k in range(24):
        th_hi, _, _ = _theta_at(hi, phi, R, margin, nb,
                                rngmod.derive_seed(seed, 90_100 + k), d, threads)
        if th_hi > threshold:
            break
        if lam_hi is not None and hi >= lam_hi:
            raise ValueError(
                f"no crossing of threshold {threshold} in the probed range "
                f"up to lambda={hi:.4g}; raise lam_hi or lower the threshold")
        lo = hi
        hi = hi * 1.4 if lam_hi is None else min(hi * 1.4, lam_hi)
    else:
        raise ValueError(
            f"no crossing of threshold {threshold} up to lambda={hi:.4g}; "
            "raise lam_hi or lower the threshold")
    for k in range(rounds):
        mid = 0.5 * (lo + hi)
        th_mid, _, _ = _theta_at(mid, phi, R, margin, nb,
                                 rngmod.derive_seed(seed, 90_200 + k), d, threads)
        if th_mid < threshold:
            lo = mid
        else:
            hi = mid
    # final paired evaluation over a bracket wide enough that the crossing
    # interpolation has a resolvable slope (bisection is noise-limited)
    mid = 0.5 * (lo + hi)
    la, lb = mid * 0.96, mid * 1.04
    _, _, ra = _theta_at(la, phi, R, margin, replicas,
                         rngmod.derive_seed(seed, 90_300), d, threads)
    _, _, rb = _theta_at(lb, phi, R, margin, replicas,
                         rngmod.derive_seed(seed, 90_301), d, threads)
    return _interp_crossing(la, lb, ra.astype(float), rb.astype(float), threshold)


def _interp_crossing(la, lb, bits_a, bits_b, threshold) -> tuple[float, float]:
    """Linear interpolation of the crossing plus a paired jackknife stderr."""
    n = bits_a.size
    ta, tb = bits_a.mean(), bits_b.mean()
    width = lb - la
    if tb <= ta:
        return 0.5 * (la + lb), width

    def cross(a, b):
        lam = la + (threshold - a) / (b - a) * width
        return min(max(lam, la - width), lb + width)

    full = cross(ta, tb)
    sa, sb = bits_a.sum(), bits_b.sum()
    loo_a = (sa - bits_a) / (n - 1)
    loo_b = (sb - bits_b) / (n - 1)
    loo = la + (threshold - loo_a) / np.maximum(loo_b - loo_a, 1e-9) * width
    loo = np.clip(loo, la - width, lb + width)
    var = (n - 1) / n * float(((loo - loo.mean()) ** 2).sum())
    return full, math.sqrt(var)


def estimate_lambda_c(
    phi: ConnectionSpec,
    d: int,
    window_radii,
    replicas: int,
    seed: int,
    margin: float = 1.0,
    threshold: float = 0.5,
    threads: int | None = None,
    bisect_replicas: int | None = None,
    lam_lo: float | None = None,
    lam_hi: float | None = None,
) -> LambdaCEstimate:
    """Critical-intensity estimate from threshold crossings of the
    boundary-reach probability, extrapolated over the last two radii."""
    radii = sorted(float(r) for r in window_radii)
    if len(radii) < 2:
        raise ValueError("need at least two window radii")
    crossings, errs = [], []
    for i, R in enumerate(radii):
        c, e = _crossing_for_radius(
            phi, d, R, margin, replicas, rngmod.derive_seed(seed, 10_000 + i),
            threshold, threads, lam_lo=lam_lo, lam_hi=lam_hi,
            bisect_replicas=bisect_replicas)
        crossings.append(c)
        errs.append(e)
    rho = math.exp(-(radii[-1] - radii[-2]))
    w = rho / (1.0 - rho)
    correction = w * (crossings[-1] - crossings[-2])
    lam_c = crossings[-1] + correction
    se = math.hypot((1.0 + w) * errs[-1], w * errs[-2])
    # the e^-R window-bias model is itself uncertain; count the whole
    # correction as systematic slack on top of the statistical error
    half = 1.96 * se + abs(correction)
    return LambdaCEstimate(lam_c, lam_c - half, lam_c + half,
                           threshold, radii, crossings, errs)


# -- sweep plans -------------------------------------------------------------------

@dataclass
class SweepPlan:
    phi: ConnectionSpec
    d: int = 2
    window_radii: list[float] = field(default_factory=lambda: [6.0, 8.0])
    replicas: int = 20_000
    master_seed: int = 1
    margin: float = 1.0
    lambda_grid: list[float] = field(default_factory=list)
    q_grid: list[float] = field(default_factory=list)
    gamma_window: tuple[float, float] = (0.5, 0.9)
    beta_window: tuple[float, float] = (1.05, 1.4)
    tail_window: tuple[float, float] = (1e2, 10**3.5)
    n_grid_points: int = 5
    threshold: float = 0.5
    lambda_c_override: float | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.replicas < 100:
            raise ValueError("replicas must be >= 100 for fit-bearing points")
        for name in ("window_radii", "lambda_grid", "q_grid"):
            vals = getattr(self, name)
            if any(vals[i] >= vals[i + 1] for i in range(len(vals) - 1)):
                raise ValueError(f"{name} must be sorted strictly increasing")
        if not self.window_radii:
            raise ValueError("window_radii must be non-empty")

    @staticmethod
    def from_config(path: str) -> "SweepPlan":
        kv = parse_config(path)
        return plan_from_mapping(kv)


PLAN_SCHEMA: dict[str, tuple[str, str, str]] = {
    # key: (type, default, help)
    "phi": ("phi-spec", "boolean:1.0", "connection function: boolean:R | exp:alpha | table:path"),
    "d": ("int", "2", "dimension, 2 or 3"),
    "window_radii": ("float-list", "6,8", "window radii, increasing"),
    "replicas": ("int", "20000", "replicas per fit-bearing grid point"),
    "master_seed": ("int", "1", "64-bit master seed"),
    "margin": ("float", "1.0", "boundary margin (hyperbolic length)"),
    "lambda_grid": ("float-list", "", "explicit intensity grid (raw sweep only)"),
    "q_grid": ("float-list", "", "ghost-probability grid for magnetization rows"),
    "gamma_window": ("float-list", "0.5,0.9", "subcritical fit window, units of lambda_c"),
    "beta_window": ("float-list", "1.05,1.4", "supercritical fit window, units of lambda_c"),
    "tail_window": ("float-list", "100,3162", "cluster-size window for the tail fit"),
    "n_grid_points": ("int", "5", "grid points per exponent fit"),
    "threshold": ("float", "0.5", "reach-probability crossing threshold"),
    "lambda_c": ("float", "", "skip estimation and use this critical intensity"),
    "threads": ("int", "0", "worker processes (0 = serial)"),
}


def parse_config(path: str) -> dict[str, str]:
    """Flat key = value config file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def plan_from_mapping(kv: dict[str, str]) -> SweepPlan:
    unknown = set(kv) - set(PLAN_SCHEMA)
    if unknown:
        raise ValueError("unknown config keys: " + ", ".join(sorted(unknown)))

    def get(key):
        return kv.get(key, PLAN_SCHEMA[key][1])

    def floats(key):
        raw = get(key)
        return [float(tok) for tok in raw.split(",") if tok.strip()] if raw else []

    lam_c = get("lambda_c")
    threads = int(get("threads"))
    return SweepPlan(
        phi=ConnectionSpec.parse(get("phi")),
        d=int(get("d")),
        window_radii=floats("window_radii"),
        replicas=int(get("replicas")),
        master_seed=int(get("master_seed")),
        margin=float(get("margin")),
        lambda_grid=floats("lambda_grid"),
        q_grid=floats("q_grid"),
        gamma_window=tuple(floats("gamma_window")),
        beta_window=tuple(floats("beta_window")),
        tail_window=tuple(floats("tail_window")),
        n_grid_points=int(get("n_grid_points")),
        threshold=float(get("threshold")),
        lambda_c_override=float(lam_c) if lam_c else None,
        threads=threads if threads > 0 else None,
    )


def config_help() -> str:
    lines = ["sweep plan configuration keys (key = value, '#' comments):", ""]
    for key, (typ, default, help_) in PLAN_SCHEMA.items():
        lines.append(f"  {key:<14} {typ:<10} default={default!r:<14} {help_}")
    return "\n".join(lines)


# -- sweeps --------------------------------------------------------------------------

@dataclass
class SweepResult:
    plan: SweepPlan
    lambda_c: LambdaCEstimate | None
    rows: list[dict]
    fits: dict[str, dict | None]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def _geom_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.exp(np.linspace(math.log(lo), math.log(hi), n))


def refine_lambda_t(chi_points) -> tuple[float, float]:
    """Divergence point of the susceptibility from a weighted linear fit of
    1/chi against lambda (exact when gamma = 1; the log-log exponent fit is
    still taken separately, so a non-unit exponent surfaces as curvature)."""
    lam = np.array([p[0] for p in chi_points])
    chi = np.array([p[1] for p in chi_points])
    se = np.array([p[2] for p in chi_points])
    slope, slope_se, intercept, intercept_se, _ = weighted_linear_fit(
        lam, 1.0 / chi, se / chi**2)
    if slope >= 0:
        raise ValueError("1/chi is not decreasing; cannot locate the divergence")
    lam_t = -intercept / slope
    se_t = abs(lam_t) * math.hypot(intercept_se / abs(intercept), slope_se / abs(slope))
    return float(lam_t), float(se_t)


def run_sweep(plan: SweepPlan) -> SweepResult:
    """Full exponent protocol.

    Stages: (1) threshold-crossing critical-intensity estimate (reported, and
    used to seed the rest); (2) subcritical susceptibility grid, refined into
    a susceptibility-divergence estimate lambda_T (the fit reference: the
    model's critical intensity equals the divergence point of chi, and the
    threshold-crossing estimate tracks a fixed level set of the reach
    probability instead); (3) gamma and Delta fits; (4) window-bias decay
    calibrated at a subcritical anchor, then the beta fit from extrapolated
    reach probabilities; (5) critical tail and the delta fit.  Failed stages
    leave markers instead of silent fits."""
    rows: list[dict] = []
    failures: list[str] = []
    fits: dict[str, dict | None] = {"gamma": None, "beta": None, "delta": None, "Delta": None}
    seed = plan.master_seed
    R_big = plan.window_radii[-1]

    if plan.lambda_c_override is not None:
        lam_c_est = None
        lam_ref = plan.lambda_c_override
        ref_se = 0.0
    else:
        lam_c_est = estimate_lambda_c(
            plan.phi, plan.d, plan.window_radii, plan.replicas,
            rngmod.derive_seed(seed, 1), plan.margin, plan.threshold, plan.threads)
        # the crossing estimate tracks a level set of the reach probability;
        # locate the susceptibility divergence with a scouting grid below it
        scout = lam_c_est.lambda_c_hat * np.linspace(0.40, 0.70, 4)
        pts = []
        for i, lam in enumerate(scout):
            est = estimate_chi(lam, plan.phi, R_big, plan.margin,
                               max(1000, plan.replicas // 8),
                               rngmod.derive_seed(seed, 50 + i), plan.d, plan.threads)
            pts.append((float(lam), est.chi_hat, est.stderr))
        lam_ref, ref_se = refine_lambda_t(pts)

    # susceptibility grid (sub-critical)
    grid = (np.asarray(plan.lambda_grid, dtype=float) if plan.lambda_grid
            else lam_ref * np.linspace(plan.gamma_window[0], plan.gamma_window[1],
                                       plan.n_grid_points))
    chi_pts = []
    for i, lam in enumerate(grid):
        if lam >= lam_ref:
            failures.append(f"gamma: grid point lambda={lam:.4g} not subcritical")
            continue
        est = estimate_chi(lam, plan.phi, R_big, plan.margin, plan.replicas,
                           rngmod.derive_seed(seed, 100 + i), plan.d, plan.threads)
        sizes = est.sizes.astype(float)
        m2, m2_se = mean_and_stderr(sizes**2)
        ratio = m2 / est.chi_hat
        ratio_se = ratio * math.hypot(m2_se / m2, est.stderr / est.chi_hat)
        rows.append({"stage": "gamma", "lam": float(lam), "q": "", "R": R_big,
                     "replicas": plan.replicas, "margin": plan.margin,
                     "chi_hat": est.chi_hat, "chi_stderr": est.stderr,
                     "censored_fraction": est.censored_fraction,
                     "moment2_hat": m2, "moment2_stderr": m2_se})
        chi_pts.append((float(lam), est.chi_hat, est.stderr, ratio, ratio_se))

    if len(chi_pts) >= 4:
        if plan.lambda_c_override is None:
            # final reference: divergence point refit on the fit-grid data
            lam_ref, ref_se = refine_lambda_t([(p[0], p[1], p[2]) for p in chi_pts])
        ref_ci = (lam_ref - 1.96 * ref_se, lam_ref + 1.96 * ref_se)
        fits["gamma"] = _fit_vs_lambda(chi_pts, lam_ref, ref_ci,
                                       subcritical=True, value_index=(1, 2))
        fits["Delta"] = _fit_vs_lambda(chi_pts, lam_ref, ref_ci,
                                       subcritical=True, value_index=(3, 4))
        if fits["gamma"] is None:
            failures.append("gamma: refined reference left fewer than 4 usable points")
    else:
        ref_ci = (lam_ref - 1.96 * ref_se, lam_ref + 1.96 * ref_se)
        if not plan.lambda_grid:
            failures.append("gamma: not enough subcritical grid points for a fit")

    # window-bias decay calibrated where the limit is known to vanish,
    # just below the fit region so the decay rate matches the one that
    # contaminates the supercritical grid
    anchor = 0.95 * lam_ref
    anchor_est = estimate_theta(anchor, plan.phi, plan.window_radii, plan.margin,
                                plan.replicas, rngmod.derive_seed(seed, 150),
                                plan.d, plan.threads)
    bias_decay = None
    if len(anchor_est.theta_hat) >= 2 and anchor_est.theta_hat[-2] > 0:
        pair = anchor_est.theta_hat[-1] / anchor_est.theta_hat[-2]
        gap = anchor_est.radii[-1] - anchor_est.radii[-2]
        if 0.0 < pair < 1.0:
            bias_decay = pair ** (1.0 / gap)
    rows.append({"stage": "anchor", "lam": anchor, "q": "", "R": R_big,
                 "replicas": plan.replicas, "margin": plan.margin,
                 "theta_hat": anchor_est.theta_hat[-1],
                 "theta_stderr": anchor_est.stderr[-1],
                 "theta_per_radius": list(anchor_est.theta_hat)})

    # percolation grid (super-critical)
    beta_grid = lam_ref * np.linspace(plan.beta_window[0], plan.beta_window[1],
                                      plan.n_grid_points)
    theta_pts = []
    for i, lam in enumerate(beta_grid):
        if lam <= lam_ref:
            failures.append(f"beta: grid point lambda={lam:.4g} not supercritical")
            continue
        est = estimate_theta(lam, plan.phi, plan.window_radii, plan.margin,
                             plan.replicas, rngmod.derive_seed(seed, 200 + i),
                             plan.d, plan.threads, bias_decay=bias_decay)
        rows.append({"stage": "beta", "lam": float(lam), "q": "", "R": R_big,
                     "replicas": plan.replicas, "margin": plan.margin,
                     "theta_hat": est.limit_estimate,
                     "theta_stderr": est.limit_stderr,
                     "theta_per_radius": list(est.theta_hat)})
        if est.limit_estimate > 0:
            theta_pts.append((float(lam), est.limit_estimate, max(est.limit_stderr, 1e-12)))
    if len(theta_pts) >= 4:
        fits["beta"] = _fit_vs_lambda(
            [(l, v, e, v, e) for l, v, e in theta_pts], lam_ref,
            ref_ci, subcritical=False, value_index=(1, 2))
    else:
        failures.append("beta: not enough supercritical grid points for a fit")

    # critical tail
    n_lo, n_hi = plan.tail_window
    n_grid = sorted({int(round(v)) for v in _geom_grid(n_lo, n_hi, 9)})
    tail = estimate_tail(lam_ref, plan.phi, R_big, n_grid, plan.replicas,
                         rngmod.derive_seed(seed, 300), plan.margin, plan.d,
                         plan.threads)
    for n, p, lo, hi in zip(tail.n_grid, tail.ccdf, tail.wilson_low, tail.wilson_high):
        rows.append({"stage": "delta", "lam": lam_ref, "q": "", "R": R_big,
                     "replicas": plan.replicas, "margin": plan.margin,
                     "tail_n": n, "tail_ccdf": p, "tail_wilson_low": lo,
                     "tail_wilson_high": hi,
                     "censored_fraction": tail.censored_fraction})
    ns = [n for n, p in zip(tail.n_grid, tail.ccdf) if p > 0]
    ps = [p for p in tail.ccdf if p > 0]
    ses = [max((hi - lo) / (2 * 1.96), 1e-12) for p, lo, hi in
           zip(tail.ccdf, tail.wilson_low, tail.wilson_high) if p > 0]
    if len(ns) >= 4:
        f = fit_exponent(ns, ps, ses)
        d = f.to_dict()
        d["delta_hat"] = -1.0 / f.exponent if f.exponent != 0 else math.inf
        d["delta_stderr"] = abs(f.stderr / f.exponent**2) if f.exponent != 0 else math.inf
        fits["delta"] = d
    else:
        failures.append("delta: tail has too few populated grid points")

    fits["lambda_T"] = {"lambda_t_hat": lam_ref, "stderr": ref_se,
                        "bias_decay": bias_decay}

    # optional magnetization rows at the critical estimate
    if plan.q_grid:
        from .clusters import estimate_magnetization
        est = estimate_magnetization(lam_ref, list(plan.q_grid), plan.phi, R_big,
                                     plan.replicas, rngmod.derive_seed(seed, 400),
                                     plan.margin, plan.d, plan.threads)
        for q, m, me, c, ce in zip(est.qs, est.m_hat, est.m_stderr,
                                   est.chi_gf_hat, est.chi_gf_stderr):
            rows.append({"stage": "magnet", "lam": lam_ref, "q": q, "R": R_big,
                         "replicas": plan.replicas, "margin": plan.margin,
                         "m_hat": m, "m_stderr": me,
                         "chi_gf_hat": c, "chi_gf_stderr": ce})

    return SweepResult(plan, lam_c_est, rows, fits, failures)


def _fit_vs_lambda(points, lam_c, lam_c_ci, subcritical: bool, value_index) -> dict:
    """Fit value ~ |lambda_c - lambda|^(-exponent); the lambda_c uncertainty is
    propagated by refitting at the CI endpoints and widening the interval."""
    vi, ei = value_index

    def fit_at(lc):
        if subcritical:
            x = [lc - p[0] for p in points]
        else:
            x = [p[0] - lc for p in points]
        y = [p[vi] for p in points]
        e = [p[ei] for p in points]
        keep = [k for k in range(len(x)) if x[k] > 0]
        if len(keep) < 4:
            return None
        return fit_exponent([x[k] for k in keep], [y[k] for k in keep],
                            [e[k] for k in keep])

    central = fit_at(lam_c)
    if central is None:
        return None
    sign = -1.0 if subcritical else 1.0
    exps = [sign * central.exponent]
    for lc in lam_c_ci:
        f = fit_at(lc)
        if f is not None:
            exps.append(sign * f.exponent)
    d = central.to_dict()
    d["exponent_hat"] = sign * central.exponent
    d["interval_low"] = min(exps) - 1.96 * central.stderr
    d["interval_high"] = max(exps) + 1.96 * central.stderr
    return d
