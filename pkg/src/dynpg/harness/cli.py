"""Command line: ``dynpg verify | calibrate | leaves``.

Exit status is 0 exactly when every selected suite passes (``verify``), when
calibration succeeds (``calibrate``), or when the rank table shows orbit and
bivector ranks agreeing with the orbit inside the leaf (``leaves``).
"""
import argparse
import json
import sys

import numpy as np

from .. import doublegpd as D
from ..dynrmat import standard_r
from ..errors import DynPGError
from ..liealg import build_algebra
from ..numerics import sample_rng, small_vector
from ..pgroupoid import GroupoidPoint
from .config import SUITE_ORDER, ConfigError, load_config
from .report import _clean
from .suites import calibrate, run_suite


def _parser():
    ap = argparse.ArgumentParser(prog="dynpg", description="Residual suites for dynamical Poisson groupoids.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file (defaults apply to missing keys)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="directory for records.jsonl and summary.json")

    v = sub.add_parser("verify", help="run the residual suites")
    common(v)
    v.add_argument("--suite", action="append", choices=SUITE_ORDER, help="restrict to a suite (repeatable)")
    v.add_argument("--timing", action="store_true", help="include wall times (breaks byte-determinism)")

    c = sub.add_parser("calibrate", help="print the calibration table only")
    common(c)

    lv = sub.add_parser("leaves", help="orbit and bivector ranks at a point of U x SL(n) x U")
    common(lv)
    lv.add_argument("--model", choices=("standard", "additive"), default="standard",
                    help="standard r-matrix or its R = 0 degeneration")
    lv.add_argument("--p", type=float, nargs="+", help="source coordinates (rank values)")
    lv.add_argument("--q", type=float, nargs="+", help="target coordinates (rank values)")
    lv.add_argument("--xi", type=float, nargs="+", help="algebra coordinates of log x (dim values)")
    lv.add_argument("--orbit-samples", type=int, default=3, help="number of orbit points to print")
    return ap


def _emit(obj, out, name):
    text = json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if out:
        import os
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)


def _vector(values, size, rng, what):
    if values is None:
        return small_vector(rng, size)
    if len(values) != size:
        raise ConfigError(f"--{what} needs {size} values, got {len(values)}")
    return np.asarray(values, dtype=float)


def cmd_verify(args, cfg):
    report = run_suite(cfg, timing=args.timing)
    if args.out:
        report.write(args.out, timing=args.timing)
    sys.stdout.write(report.dumps_records())
    for s in report.suites:
        summary = s.summary(args.timing)
        line = f"# {s.name}: {summary['status']} ({summary['passed']}/{summary['residuals']} residuals"
        line += f", {summary['skipped_samples']} skipped samples, max {summary['max_residual']:.2e})"
        if summary.get("skip_reason") or summary.get("reason") or summary.get("error"):
            line += " " + (summary.get("skip_reason") or summary.get("reason") or summary.get("error"))
        sys.stderr.write(line + "\n")
    sys.stderr.write(f"# overall: {'pass' if report.passed else 'fail'}\n")
    return 0 if report.passed else 1


def cmd_calibrate(args, cfg):
    _emit(calibrate(cfg), args.out, "calibration.json")
    return 0


def cmd_leaves(args, cfg):
    g = build_algebra("A", min(cfg.rank, 2))
    model = D.StandardDual(g, standard_r(g).R()) if args.model == "standard" else D.AdditiveDual(g)
    rng = sample_rng(cfg.seed, "leaves")
    pt = GroupoidPoint(_vector(args.p, g.rank, rng, "p"), g.exp(_vector(args.xi, g.dim, rng, "xi")),
                       _vector(args.q, g.rank, rng, "q"))
    group = [(D.sample_torus(g, rng), D.sample_torus(g, rng), D.sample_dual(model, rng))
             for _ in range(args.orbit_samples)]
    orbit, table = D.leaves(model, pt, group, step=cfg.fd_step)
    ok = table["rank_bivector"] == table["rank_orbit"] and table["inclusion"] <= cfg.tol("leaves")
    out = {
        "model": model.kind, "rank": g.rank, "point": pt.as_point(), **table,
        "orbit": [o.as_point() for o in orbit], "pass": ok,
    }
    _emit(out, args.out, "leaves.json")
    return 0 if ok else 1


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, suites=getattr(args, "suite", None))
        return {"verify": cmd_verify, "calibrate": cmd_calibrate, "leaves": cmd_leaves}[args.command](args, cfg)
    except (ConfigError, OSError) as exc:
        sys.stderr.write(f"dynpg: {exc}\n")
        return 2
    except DynPGError as exc:
        sys.stderr.write(f"dynpg: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
