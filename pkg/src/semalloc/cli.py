"""Command line: fit, solve, sweep, compare, verify."""
import argparse
import sys

import numpy as np

from . import harness
from .errors import DomainError, NonConvergenceError
from .link import LinkParams
from .scenario import load_scenario
from .task_perf import fit_perf_model, read_points_csv, save_model

COMPARE_DEFAULT = "crra,fcr,fra,msr"


def _common(p, algo_default="crra"):
    p.add_argument("--scenario", default="desk", help="JSON file, preset (paper, desk) or random[:U]")
    p.add_argument("--algo", default=algo_default, help="crra, crraus, fcr, fra, msr (comma list for compare)")
    p.add_argument("--model", default="resnet0dB", help="fixture name or model JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="results CSV path")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--timing", action="store_true", help="record wall_ms (makes the CSV run-dependent)")


def build_parser():
    ap = argparse.ArgumentParser(prog="semalloc", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("fit", help="fit the task-performance model to an o,eta CSV")
    p.add_argument("points")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=200_000)

    p = sub.add_parser("solve", help="run one algorithm on one scenario")
    _common(p)

    for name, default in (("sweep", "crra"), ("compare", COMPARE_DEFAULT)):
        p = sub.add_parser(name, help=f"{name} over a scenario axis")
        _common(p, default)
        p.add_argument("--axis", choices=harness.AXES)
        p.add_argument("--range", dest="range_", metavar="LO:HI:STEP")

    p = sub.add_parser("verify", help="Monte-Carlo check of the closed-form success probability")
    p.add_argument("--params", help="a,b,delta of one link")
    p.add_argument("--scenario", help="check every user of a scenario at the equal split")
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--trials", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path (default stdout)")
    return ap


def _config(args, multi):
    algos = tuple(a.strip() for a in args.algo.split(",") if a.strip())
    if not multi and len(algos) != 1:
        raise DomainError("solve and sweep take a single --algo")
    rng = getattr(args, "range_", None)
    return harness.RunConfig(
        scenario=args.scenario, algos=algos, model=args.model, seed=args.seed,
        axis=getattr(args, "axis", None), range=harness.parse_range(rng) if rng else None,
        out=args.out, timing=args.timing, grid_step=args.grid_step,
    )


def _print_rows(rows):
    for r in rows:
        at = f" {r.axis}={r.axis_value:g}" if r.axis else ""
        if r.error:
            print(f"{r.algo}{at}: error {r.error}")
        else:
            print(f"{r.algo}{at}: phi_exact={r.phi_exact:.6g} phi_surrogate={r.phi_surrogate:.6g} "
                  f"rounds={r.rounds} o={np.array2string(r.o, precision=2)} beta={r.beta.tolist()}")


def cmd_fit(args):
    D = read_points_csv(args.points)
    try:
        model = fit_perf_model(D, step=args.step, max_iters=args.max_iters)
    except NonConvergenceError as e:
        print(f"fit diverged; best model rmse={e.best.rmse:.4g}", file=sys.stderr)
        return 2
    save_model(model, args.out)
    print("zeta " + " ".join(f"{z:.6g}" for z in model.zeta) + f"  rmse {model.rmse:.4g}")
    return 0


def cmd_run(args, multi):
    rows = harness.run(_config(args, multi))
    _print_rows(rows)
    return 1 if any(r.error for r in rows) else 0


def cmd_verify(args):
    lines = []
    ok = True
    if args.params:
        a, b, d = (float(v) for v in args.params.split(","))
        links = [("link", LinkParams(a, b, d))]
    elif args.scenario:
        s = load_scenario(args.scenario, args.seed)
        B, P = s.equal_split()
        links = [(f"user_{i + 1}", s.link_params(i, B[i], P[i])) for i in range(s.U)]
    else:
        raise DomainError("verify needs --params or --scenario")
    for k, (name, p) in enumerate(links):
        rep = harness.verify_lemma1(p, args.ratio, int(args.trials), args.seed + k)
        ok &= rep.passed
        lines.append(f"[{name}] a={p.a:g} b={p.b:g} delta={p.delta:g} o={args.ratio:g}")
        lines += ["  " + ln for ln in rep.lines()]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "fit":
            return cmd_fit(args)
        if args.cmd == "verify":
            return cmd_verify(args)
        return cmd_run(args, multi=args.cmd == "compare")
    except (DomainError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
