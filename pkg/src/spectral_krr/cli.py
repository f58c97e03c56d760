"""Command-line entry point: ``spectral-krr {regress,sweep,bounds,constants}``.

Exit codes: 0 success, 1 usage or config error, 2 asserted-bound violation,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import harness as hs
from . import kernels as kn
from . import manifolds as mf
from . import regression as rg
from .errors import NumericalError, SpectralKRRError

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        hs.write_text(path, text)


def _load_config(args):
    cfg = hs.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.tau is not None:
        cfg.kernel["tau"] = args.tau
        cfg = hs.ExperimentConfig.from_dict(cfg.to_dict())
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _finish_runs(result, args):
    cfg = result.config
    _emit(hs.records_csv(result.records, include_timing=args.timings), cfg.out)
    summary = result.to_json()
    if args.summary:
        hs.write_text(args.summary, json.dumps(_jsonable(summary), indent=2) + "\n")
    else:
        print(json.dumps(_jsonable({k: summary[k] for k in ("slopes", "coverage", "coverage_floor")})),
              file=sys.stderr)
    if any(r.failure and r.failure.startswith("numerical") for r in result.records):
        return EXIT_NUMERICAL
    gated = sum(s.n_gated for s in result.summaries)
    if gated and result.overall_coverage() < result.coverage_floor():
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_regress(args):
    cfg = _load_config(args)
    if len(cfg.grid()) != 1:
        raise hs.ConfigError("regress takes a single (n, omega) point; use sweep for grids")
    return _finish_runs(hs.run_sweep(cfg, workers=args.workers), args)


def cmd_sweep(args):
    return _finish_runs(hs.run_sweep(_load_config(args), workers=args.workers), args)


def cmd_bounds(args):
    rows = hs.report_bounds(args.suite, seed=args.seed, epsilon=args.epsilon)
    text = hs.rows_json(rows) + "\n" if args.format == "json" else hs.rows_csv(rows)
    _emit(text, args.out)
    return EXIT_VIOLATION if hs.any_violation(rows) else EXIT_OK


def cmd_constants(args):
    man = mf.get_manifold(args.manifold)
    spec = {"bandlimited": kn.bandlimited, "heat": kn.heat, "sobolev": kn.sobolev}[args.kernel](man, args.param)
    inp = rg.assumption_constants(man, spec, args.p)
    out = {k: v for k, v in inp.__dict__.items() if v is not None}
    out.update(manifold=man.name, kernel=args.kernel, param=args.param)
    _emit(json.dumps(_jsonable(out), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="spectral-krr", description="Kernel ridge regression on manifolds with closed-form spectra.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, func, help_ in (("regress", cmd_regress, "trials at one config point"),
                              ("sweep", cmd_sweep, "trials over an n- or omega-grid")):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--config", required=True, help="JSON experiment config")
        q.add_argument("--out", help="CSV path (overrides config 'out'; '-' for stdout)")
        q.add_argument("--summary", help="write aggregate JSON here")
        q.add_argument("--workers", type=int, default=1)
        q.add_argument("--seed", type=int)
        q.add_argument("--trials", type=int)
        q.add_argument("--tau", type=float, help="kernel truncation tolerance")
        q.add_argument("--timings", action="store_true", help="fill wall_ms (output no longer byte-stable)")
        q.set_defaults(func=func)

    q = sub.add_parser("bounds", help="bound-verification suite")
    q.add_argument("--suite", required=True, choices=hs.SUITES)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--epsilon", type=float, default=0.5)
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.add_argument("--out")
    q.set_defaults(func=cmd_bounds)

    q = sub.add_parser("constants", help="dump exact assumption constants")
    q.add_argument("--manifold", required=True)
    q.add_argument("--kernel", required=True, choices=kn.FAMILIES)
    q.add_argument("--param", required=True, type=float, help="omega, t or s")
    q.add_argument("--p", required=True, type=int)
    q.add_argument("--out")
    q.set_defaults(func=cmd_constants)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("spectral-krr: --workers must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"spectral-krr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SpectralKRRError, ValueError, OSError) as exc:
        print(f"spectral-krr: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
