"""Command-line orchestration.

Subcommands: crossings, fracs, gaps, coverage, witness, cantor, mdp, theta,
distribution, sample-thm1, render.  Options can come from a flat key=value
config file (--config) with command-line flags taking precedence.  Artifacts
are CSV / JSON-lines / bitmap text / SVG, written under --out-dir.

Exit codes: 0 success, 2 a check-style subcommand failed its assertion,
1 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bigreal import BigReal, PrecisionOverflow
from . import cantor as ct
from . import density as dn
from . import distribution as dist
from . import figures as fg
from .spiral import ObliqueLine, crossings, frac_sequence, outward_indices

__all__ = ["main"]


class ConfigError(ValueError):
    pass


def parse_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment.  Errors carry line/column."""
    out = {}
    text = Path(path).read_text()
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if "=" not in stripped:
            col = len(stripped) - len(stripped.lstrip()) + 1
            raise ConfigError(f"{path}:{ln}:{col}: expected key=value, got {stripped.strip()!r}")
        key, val = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key.isidentifier():
            col = raw.index("=") + 1
            raise ConfigError(f"{path}:{ln}:1: invalid key {key!r} (before column {col})")
        out[key] = val.strip()
    return out


def _merge_config(args: argparse.Namespace, argv: list) -> argparse.Namespace:
    """Apply config-file values for keys not given explicitly on the command line."""
    if not getattr(args, "config", None):
        return args
    cfg = parse_config_file(args.config)
    ns = vars(args)
    given = set(argv)
    for key, val in cfg.items():
        if key in ("config", "fn", "command") or key not in ns:
            raise ConfigError(f"unknown config key {key!r}")
        if f"--{key.replace('_', '-')}" in given:
            continue
        cur = ns[key]
        if isinstance(cur, bool):
            ns[key] = val.lower() in ("1", "true", "yes", "on")
        elif isinstance(cur, int):
            ns[key] = int(val)
        elif isinstance(cur, float):
            ns[key] = float(val)
        else:
            ns[key] = val
    return args


def _build_line(args) -> ObliqueLine:
    if args.preset == "thm4":
        return dn.champernowne_line(args.prefix_bits).line
    if args.preset == "cor1":
        return dn.cor1_line(args.alpha, args.precision_bits)
    prec = args.precision_bits
    return ObliqueLine(BigReal(args.p_re, prec), BigReal(args.p_im, prec),
                       BigReal(args.alpha, prec))


def _add_line_options(sp, alpha_default="0.1"):
    sp.add_argument("--preset", choices=["none", "thm4", "cor1"], default="none",
                    help="thm4: the explicit dense line; cor1: log(2pi)+(pi/2)i base")
    sp.add_argument("--prefix-bits", type=int, default=1200,
                    help="expansion prefix bits for the thm4 preset")
    sp.add_argument("--p-re", default="0", help="Re(p), decimal string")
    sp.add_argument("--p-im", default="0", help="Im(p), decimal string")
    sp.add_argument("--alpha", default=alpha_default, help="slope, decimal string")
    sp.add_argument("--precision-bits", type=int, default=256)


def _out(args, name: str) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


# -- subcommand bodies --------------------------------------------------------------

def cmd_crossings(args) -> int:
    line = _build_line(args)
    xs = crossings(line, args.k_min, args.k_max, args.guard_bits)
    rows = []
    for c in xs:
        rows.append(json.dumps({
            "k": c.k,
            "t": c.t.decimal(),
            "log_radius": c.log_radius.decimal(),
            "sign": c.sign,
            "frac": c.frac.value.decimal(),
            "err": c.frac.error_bound.decimal(),
        }))
    _write(_out(args, "crossings.jsonl"), "\n".join(rows) + "\n")
    return 0


def cmd_fracs(args) -> int:
    line = _build_line(args)
    fr = frac_sequence(line, args.count, args.guard_bits)
    ks = outward_indices(line, args.count)
    lines = ["k,frac,error_bound"]
    for k, f in zip(ks, fr):
        lines.append(f"{k},{f.value.decimal()},{f.error_bound.decimal()}")
    _write(_out(args, "fracs.csv"), "\n".join(lines) + "\n")
    return 0


def cmd_gaps(args) -> int:
    line = _build_line(args)
    fr = frac_sequence(line, args.count, args.guard_bits)
    mg = dn.max_gap(fr)
    sd = dn.star_discrepancy(fr)
    _write(_out(args, "gaps.csv"),
           "K,max_gap,star_discrepancy\n" f"{args.count},{mg:.12e},{sd:.12e}\n")
    print(f"K={args.count} max_gap={mg:.6e} star_discrepancy={sd:.6e}")
    return 0


def cmd_coverage(args) -> int:
    line = _build_line(args)
    grid = dn.AnnulusGrid(args.R, args.n_logr, args.n_theta)
    dn.paint_coverage(line, args.count, grid, args.guard_bits)
    frac = grid.covered_fraction()
    _write(_out(args, "coverage.csv"),
           "K,R,n_logr,n_theta,covered_fraction\n"
           f"{args.count},{args.R},{args.n_logr},{args.n_theta},{frac:.10f}\n")
    _write(_out(args, "coverage_grid.txt"), grid.to_text() + "\n")
    if args.plot:
        fg.save_grid_figure(grid, _out(args, "coverage.svg"))
    print(f"covered_fraction={frac:.6f} at K={args.count}")
    return 0


def cmd_witness(args) -> int:
    line = _build_line(args)
    try:
        w = dn.witness(line, args.target_re, args.target_im, args.eps, args.k_max,
                       args.guard_bits)
    except dn.WitnessNotFound as exc:
        print(f"NOT FOUND: {exc}")
        return 2
    _write(_out(args, "witness.json"), json.dumps({
        "t": w.t.decimal(), "k": w.k, "residual": w.residual,
        "eps": args.eps, "scanned": w.scanned,
    }, indent=1) + "\n")
    print(f"witness at crossing k={w.k}, residual {w.residual:.3e} <= eps {args.eps}")
    return 0


def _base_point(args) -> ct.BasePoint:
    return ct.BasePoint.cor1() if args.base == "cor1" else ct.BasePoint.origin()


def cmd_cantor(args) -> int:
    p = _base_point(args)
    config = ct.choose_config(p, Fraction(args.alpha0), Fraction(args.alpha1), args.cap)
    try:
        tree = ct.build_tree(config, args.depth)
    except ct.Extinction as exc:
        print(f"EXTINCTION: {exc}")
        return 2
    ct.save_tree(tree, _out(args, "tree.txt"))
    lines = ["depth,count,min_survival_lb,max_len"]
    for n, level in enumerate(tree.levels, start=1):
        surv = [nd.survival_lb for nd in level if nd.survival_lb is not None]
        mx = max(float(nd.length(tree.scale_bits)) for nd in level)
        lines.append(f"{n},{len(level)},{min(surv) if surv else float('nan')},{mx:.6e}")
    _write(_out(args, "cantor_report.csv"), "\n".join(lines) + "\n")
    cfg = tree.config
    print(f"N={cfg.N} k0={cfg.k0} |I|={float(cfg.I_length):.3e} depth={tree.depth} "
          f"nodes={len(tree.levels[-1])}")
    if args.certify:
        margin = ct.certify_avoidance(tree, max_nodes=args.certify_nodes)
        print(f"avoidance margin (spiral oracle): {margin:.3e}")
        if margin <= 0:
            return 2
    return 0


def cmd_mdp(args) -> int:
    tree = ct.load_tree(args.tree)
    eps = args.eps if args.eps > 0 else 5.0 / tree.config.N
    res = ct.mdp_check(ct.tree_partitions(tree), eps, args.beta)
    if res.passed:
        print(f"MDP pass: dimension >= {res.dimension_bound:.6f} "
              f"(eps={eps:.6f}, beta={args.beta})")
        return 0
    print(f"MDP FAIL at depth {res.violation[0]}, part {res.violation[1]}: "
          f"mu={res.violation[2]:.3e} > cap={res.violation[3]:.3e}")
    return 2


def cmd_theta(args) -> int:
    tree = ct.load_tree(args.tree)
    cfg = tree.config
    alphas = ct.sample_retained_alphas(tree, args.count, args.seed)
    k_max = args.k_max if args.k_max > 0 else (tree.depth * cfg.N) // 2
    hw = cfg.window_halfwidth()
    rows = ["alpha,theta,min_margin"]
    worst = math.inf
    for a in alphas:
        th = ct.export_theta(a)
        m = ct.theta_window_check(a, k_max, cfg.omega, hw)
        worst = min(worst, m)
        rows.append(f"{float(a):.17g},{th.decimal()},{m:.6e}")
    _write(_out(args, "theta.csv"), "\n".join(rows) + "\n")
    print(f"theta export: {len(alphas)} slopes, k <= {k_max}, worst margin {worst:.3e}")
    return 0 if worst > 0 else 2


def cmd_distribution(args) -> int:
    line = _build_line(args)
    estimates = []
    for T in [float(s) for s in args.T.split(",")]:
        est = dist.estimate_mu_T(line, T, args.samples, args.M, args.eta)
        estimates.append(est)
    rows = ["T,M,eta,mass_0,mass_1,mass_inf,mass_other"]
    for e in estimates:
        rows.append(f"{e.T},{e.M_threshold},{e.eta},{e.mass_0:.8f},{e.mass_1:.8f},"
                    f"{e.mass_inf:.8f},{e.mass_other:.8f}")
    _write(_out(args, "distribution.csv"), "\n".join(rows) + "\n")
    if args.plot:
        fg.save_masses_figure(estimates, _out(args, "distribution.svg"))
    for e in estimates:
        print(f"T={e.T}: masses=({e.mass_0:.4f}, {e.mass_1:.4f}, {e.mass_inf:.4f}, "
              f"{e.mass_other:.4f}) distance_to_limit={e.distance_to_limit():.4f}")
    return 0


def cmd_sample_thm1(args) -> int:
    rng = np.random.default_rng(args.seed)
    alphas = rng.uniform(0.05, 1.0, args.count)
    prec = 192
    rows = ["alpha,covered_fraction"]
    covered = []
    for a in alphas:
        line = ObliqueLine(BigReal(0, prec), BigReal(0, prec), BigReal(float(a), prec))
        grid = dn.AnnulusGrid(math.e, args.n, args.n)
        dn.paint_coverage(line, args.count_k, grid, args.guard_bits)
        cv = grid.covered_fraction()
        covered.append(cv)
        rows.append(f"{float(a):.17g},{cv:.8f}")
    med = float(np.median(covered))
    above = int((np.asarray(covered) > 0.95).sum())
    rows.append(f"# median,{med:.8f}")
    rows.append(f"# above_0.95,{above}")
    _write(_out(args, "sample_thm1.csv"), "\n".join(rows) + "\n")
    print(f"median covered_fraction={med:.4f}; {above}/{args.count} lines above 0.95")
    return 0


def cmd_render(args) -> int:
    line = _build_line(args)
    window = tuple(float(s) for s in args.window.split(","))
    try:
        res = fg.render(args.figure, window, args.resolution,
                        out=_out(args, f"{args.figure.replace('-', '_')}.svg"),
                        line=line, R=args.R, k=args.k,
                        alpha0=float(args.alpha0), alpha1=float(args.alpha1))
    except fg.WindowEmpty as exc:
        print(f"window empty: {exc}")
        return 2
    rows = ["path,index,x,y"]
    for name, pts in sorted(res.paths.items()):
        for i, (xx, yy) in enumerate(pts):
            rows.append(f"{name},{i},{xx:.17g},{yy:.17g}")
    _write(_out(args, f"{args.figure.replace('-', '_')}_paths.csv"), "\n".join(rows) + "\n")
    print(f"rendered {args.figure} with {len(res.paths)} paths -> {res.svg_path}")
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="expexp", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="key=value config file; flags override")
    ap.add_argument("--out-dir", default=".", help="artifact directory")
    ap.add_argument("--guard-bits", type=int, default=48)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("crossings", help="crossing records as JSON lines")
    _add_line_options(sp)
    sp.add_argument("--k-min", type=int, default=0)
    sp.add_argument("--k-max", type=int, default=32)
    sp.set_defaults(fn=cmd_crossings)

    sp = sub.add_parser("fracs", help="signed residues as CSV")
    _add_line_options(sp)
    sp.add_argument("--count", type=int, default=64)
    sp.set_defaults(fn=cmd_fracs)

    sp = sub.add_parser("gaps", help="max circular gap and star discrepancy")
    _add_line_options(sp)
    sp.add_argument("--count", type=int, default=1000)
    sp.set_defaults(fn=cmd_gaps)

    sp = sub.add_parser("coverage", help="paint annulus cells hit by the image")
    _add_line_options(sp)
    sp.add_argument("--count", type=int, default=5000)
    sp.add_argument("--R", type=float, default=math.e)
    sp.add_argument("--n-logr", type=int, default=64)
    sp.add_argument("--n-theta", type=int, default=64)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(fn=cmd_coverage)

    sp = sub.add_parser("witness", help="find t with exp(exp(..)) near a target")
    _add_line_options(sp)
    sp.add_argument("--target-re", required=True)
    sp.add_argument("--target-im", required=True)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--k-max", type=int, default=100_000)
    sp.set_defaults(fn=cmd_witness)

    sp = sub.add_parser("cantor", help="build the avoiding-interval tree")
    sp.add_argument("--base", choices=["origin", "cor1"], default="origin")
    sp.add_argument("--alpha0", default="1/5")
    sp.add_argument("--alpha1", default="3/10")
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--cap", type=int, default=256)
    sp.add_argument("--certify", action="store_true",
                    help="cross-check arc avoidance through the spiral oracle")
    sp.add_argument("--certify-nodes", type=int, default=16)
    sp.set_defaults(fn=cmd_cantor)

    sp = sub.add_parser("mdp", help="mass distribution principle check on a tree")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--eps", type=float, default=-1.0, help="default 5/N")
    sp.add_argument("--beta", type=float, default=2.0)
    sp.set_defaults(fn=cmd_mdp)

    sp = sub.add_parser("theta", help="export theta = exp(2 pi alpha) certificates")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--k-max", type=int, default=-1, help="default depth*N/2")
    sp.set_defaults(fn=cmd_theta)

    sp = sub.add_parser("distribution", help="occupation-measure estimate")
    _add_line_options(sp, alpha_default="0.25")
    sp.add_argument("--T", default="500", help="comma-separated horizons")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--M", type=float, default=20.0)
    sp.add_argument("--eta", type=float, default=0.1)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(fn=cmd_distribution)

    sp = sub.add_parser("sample-thm1", help="seeded random-slope coverage statistics")
    sp.add_argument("--seed", type=int, default=20250809)
    sp.add_argument("--count", type=int, default=50)
    sp.add_argument("--count-k", type=int, default=10_000)
    sp.add_argument("--n", type=int, default=32)
    sp.set_defaults(fn=cmd_sample_thm1)

    sp = sub.add_parser("render", help="figure rendering")
    _add_line_options(sp)
    sp.add_argument("--figure", choices=list(fg.FIGURE_KINDS), default="spiral")
    sp.add_argument("--window", default="-2,2,-2,2")
    sp.add_argument("--resolution", type=int, default=2000)
    sp.add_argument("--R", type=float, default=math.e)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--alpha0", default="0.2")
    sp.add_argument("--alpha1", default="0.3")
    sp.set_defaults(fn=cmd_render)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = ap.parse_args(argv)
        args = _merge_config(args, argv)
        return args.fn(args)
    except (ConfigError, ValueError, ct.InfeasibleInterval) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PrecisionOverflow as exc:
        print(f"precision overflow: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
