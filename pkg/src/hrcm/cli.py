"""Command-line front end.

Exit codes: 0 success, 1 assertion/verdict failure, 2 usage error.
All randomness flows from --seed; outputs are byte-identical across runs and
worker counts (the embedded command line omits concurrency flags).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .exponents import SweepPlan, config_help, parse_config, plan_from_mapping, run_sweep
from .gregtrees import enumerate_greg
from .render import RenderSpec, render_svg
from .sampling import Configuration, ConnectionSpec, sample_configuration


def _clean_command(argv: list[str]) -> str:
    """Reproducibility string: the invocation minus concurrency flags."""
    out = ["hrcm"]
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--threads":
            skip = True
            continue
        if tok.startswith("--threads="):
            continue
        out.append(tok)
    return " ".join(out)


CSV_COLUMNS = [
    "stage", "lam", "q", "R", "replicas", "margin",
    "chi_hat", "chi_stderr", "censored_fraction",
    "moment2_hat", "moment2_stderr",
    "theta_hat", "theta_stderr",
    "m_hat", "m_stderr", "chi_gf_hat", "chi_gf_stderr",
    "tail_n", "tail_ccdf", "tail_wilson_low", "tail_wilson_high",
]


def _write_csv(path: str, rows: list[dict], command: str) -> None:
    lines = [f"# command: {command}", f"# version: hrcm {__version__}",
             ",".join(CSV_COLUMNS)]
    for row in rows:
        cells = []
        for col in CSV_COLUMNS:
            v = row.get(col, "")
            if isinstance(v, float):
                cells.append(repr(v))
            elif isinstance(v, list):
                cells.append(";".join(repr(x) for x in v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload: dict, command: str) -> None:
    payload = {"command": command, "version": f"hrcm {__version__}", **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- subcommands --------------------------------------------------------------

def cmd_sample(args, command: str) -> int:
    phi = ConnectionSpec.parse(args.phi)
    cfg = sample_configuration(
        args.lam, args.radius, args.dim, phi, args.seed,
        replica=args.replica, palm=args.palm, q=args.q)
    cfg.provenance = {"command": command, "version": f"hrcm {__version__}"}
    cfg.save(args.out)
    print(f"points: {cfg.n_points}  edges: {cfg.edges.shape[0]}  -> {args.out}")
    return 0


def cmd_render(args, command: str) -> int:
    cfg = Configuration.load(args.config)
    spec = RenderSpec(
        point_radius_px=args.point_radius,
        edge_stroke=args.stroke,
        disc_size_px=args.size,
        highlight_largest=args.highlight_largest,
    )
    svg = render_svg(cfg, spec)
    with open(args.out, "w") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return 0


def cmd_gregtrees(args, command: str) -> int:
    rows = []
    print("n ", "N_n")
    for n in range(1, args.max + 1):
        trees = enumerate_greg(n)
        print(f"{n:<2} {len(trees)}")
        rows.append({"n": n, "N_n": len(trees)})
        if args.codes:
            for t in trees:
                print("   ", t.canonical_code)
    if args.json:
        _write_json(args.json, {"counts": rows}, command)
    return 0


def cmd_geomtest(args, command: str) -> int:
    from .selfcheck import run_all

    results = run_all()
    verdicts = {}
    ok_all = True
    for name, ok, detail in results:
        ok = bool(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        verdicts[name] = {"ok": ok, "detail": detail}
        ok_all &= ok
    if args.json:
        _write_json(args.json, {"ok": ok_all, "checks": verdicts}, command)
    return 0 if ok_all else 1


def _load_plan(args) -> SweepPlan:
    kv = parse_config(args.plan)
    if args.threads is not None:
        kv["threads"] = str(args.threads)
    return plan_from_mapping(kv)


def cmd_sweep(args, command: str) -> int:
    """Raw grid sweep: chi and theta rows on an explicit lambda grid."""
    from . import rng as rngmod
    from .clusters import estimate_chi, estimate_theta

    plan = _load_plan(args)
    if not plan.lambda_grid:
        print("sweep requires an explicit lambda_grid in the plan", file=sys.stderr)
        return 2
    rows = []
    R_big = plan.window_radii[-1]
    for i, lam in enumerate(plan.lambda_grid):
        chi = estimate_chi(lam, plan.phi, R_big, plan.margin, plan.replicas,
                           rngmod.derive_seed(plan.master_seed, 500 + i),
                           plan.d, plan.threads)
        theta = estimate_theta(lam, plan.phi, plan.window_radii, plan.margin,
                               plan.replicas,
                               rngmod.derive_seed(plan.master_seed, 600 + i),
                               plan.d, plan.threads)
        rows.append({"stage": "sweep", "lam": lam, "R": R_big,
                     "replicas": plan.replicas, "margin": plan.margin,
                     "chi_hat": chi.chi_hat, "chi_stderr": chi.stderr,
                     "censored_fraction": chi.censored_fraction,
                     "theta_hat": theta.limit_estimate,
                     "theta_stderr": theta.limit_stderr})
        print(f"lam={lam:g}: chi={chi.chi_hat:.4f} theta={theta.limit_estimate:.4f}")
    _write_csv(args.out, rows, command)
    return 0


def cmd_exponents(args, command: str) -> int:
    plan = _load_plan(args)
    result = run_sweep(plan)
    _write_csv(args.csv, result.rows, command)
    payload = {
        "lambda_c": result.lambda_c.to_dict() if result.lambda_c else
        {"lambda_c_hat": plan.lambda_c_override, "source": "override"},
        "fits": result.fits,
        "failures": result.failures,
        "ok": result.ok,
    }
    _write_json(args.json, payload, command)
    for name, fit in result.fits.items():
        if not fit:
            print(f"{name}: no fit")
            continue
        value = fit.get("exponent_hat", fit.get("delta_hat", fit.get("lambda_t_hat")))
        if value is not None:
            print(f"{name}: {value:+.4f} (stderr {fit.get('stderr', float('nan')):.4f})")
    for msg in result.failures:
        print("FAILURE:", msg, file=sys.stderr)
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hrcm",
        description="Random connection model on hyperbolic space: sampling, "
                    "rendering, cluster observables, critical exponents.")
    p.add_argument("--version", action="version", version=f"hrcm {__version__}")
    p.add_argument("--help-config", action="store_true",
                   help="print the sweep-plan config schema and exit")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("sample", help="sample a configuration to JSON")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--dim", type=int, choices=(2, 3), default=2)
    s.add_argument("--phi", required=True, help="boolean:R | exp:alpha | table:path")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--palm", action="store_true", help="include the origin as point 0")
    s.add_argument("--q", type=float, default=0.0, help="ghost probability")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sample)

    r = sub.add_parser("render", help="render a configuration JSON to SVG")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--size", type=int, default=640)
    r.add_argument("--point-radius", type=float, default=2.5)
    r.add_argument("--stroke", default="#2f6f8f")
    r.add_argument("--highlight-largest", action="store_true")
    r.set_defaults(fn=cmd_render)

    g = sub.add_parser("gregtrees", help="tabulate Greg-tree counts")
    g.add_argument("--max", type=int, default=6)
    g.add_argument("--codes", action="store_true", help="dump canonical codes")
    g.add_argument("--json", help="write counts to a JSON file")
    g.set_defaults(fn=cmd_gregtrees)

    t = sub.add_parser("geomtest", help="run the geometry property suite")
    t.add_argument("--json", help="write verdicts to a JSON file")
    t.set_defaults(fn=cmd_geomtest)

    w = sub.add_parser("sweep", help="raw chi/theta sweep over a lambda grid")
    w.add_argument("--plan", required=True, help="key=value plan file")
    w.add_argument("--out", required=True, help="CSV output path")
    w.add_argument("--threads", type=int, default=None)
    w.set_defaults(fn=cmd_sweep)

    e = sub.add_parser("exponents", help="full critical-exponent protocol")
    e.add_argument("--plan", required=True, help="key=value plan file")
    e.add_argument("--csv", required=True, help="CSV output path")
    e.add_argument("--json", required=True, help="fit-summary JSON path")
    e.add_argument("--threads", type=int, default=None)
    e.set_defaults(fn=cmd_exponents)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "help_config", False):
        print(config_help())
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    command = _clean_command(argv)
    try:
        return args.fn(args, command)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
