"""Command line interface: ``endheat <subcommand>``.

Exit codes: 0 when every declared band is met, 1 on a band violation, 2 on a
configuration or solver error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import envelopes as env
from .config import TASKS, load_config, parse_overrides
from .errors import EndHeatError
from .harness import (
    PropertyCheck,
    RatioBand,
    ScenarioReport,
    builtin_scenarios,
    get_scenario,
    resolve_output_dir,
    run_scenario,
    validate_csv,
    write_csv,
)
from .volume_models import build_schedule, h2_at_a

log = logging.getLogger("endheat")

EXIT_OK, EXIT_BAND, EXIT_ERROR = 0, 1, 2


def _configs(args):
    overrides = parse_overrides(args.set)
    if getattr(args, "r_max", None) is not None:
        overrides["mesh.r_max"] = str(args.r_max)
    if getattr(args, "nodes_per_decade", None) is not None:
        overrides["mesh.nodes_per_decade"] = str(args.nodes_per_decade)
    cfgs = []
    names = args.scenario or []
    if "all" in names:
        names = [s.name for s in builtin_scenarios()]
    for name in names:
        try:
            scen = get_scenario(name)
        except KeyError:
            raise EndHeatError(f"unknown scenario {name!r}") from None
        cfgs.append(scen.config(overrides))
    for path in args.config or []:
        cfgs.append(load_config(path, overrides))
    if not cfgs:
        raise EndHeatError("give --scenario or --config")
    return cfgs


def _run_one(job):
    cfg, out, tasks = job
    return run_scenario(cfg, out, tasks)


def _print_report(rep: ScenarioReport, stream=None):
    stream = stream or sys.stdout
    status = "PASS" if rep.passed else ("ERROR" if rep.error else "FAIL")
    print(f"[{status}] {rep.scenario}", file=stream)
    if rep.error:
        print(f"    error: {rep.error}", file=stream)
    for b in rep.bands:
        flag = {True: "ok", False: "VIOLATED", None: "recorded"}[b.passed]
        bound = "" if b.max_spread is None else f" <= {b.max_spread:g}"
        print(f"    band {b.quantity}: spread {b.spread:.4g}{bound} [{b.min_ratio:.4g}, {b.max_ratio:.4g}] n={b.n} {flag}", file=stream)
    for p in rep.properties:
        print(f"    check {p.name}: {p.value if p.value is None else f'{p.value:.4g}'} {'ok' if p.passed else 'FAILED'} {p.detail}".rstrip(), file=stream)


def _exit_code(reports) -> int:
    if any(r.error for r in reports):
        return EXIT_ERROR
    return EXIT_OK if all(r.passed for r in reports) else EXIT_BAND


def _simulate(args, tasks=None) -> int:
    cfgs = _configs(args)
    jobs = [(c, args.output_dir, tasks or (args.tasks.split(",") if getattr(args, "tasks", None) else None)) for c in cfgs]
    for _, _, t in jobs[:1]:
        for name in t or ():
            if name not in TASKS:
                raise EndHeatError(f"unknown task {name!r}")
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    for rep, cfg in zip(reports, cfgs):
        _print_report(rep)
        log.info("wrote %s", resolve_output_dir(cfg, args.output_dir))
    return _exit_code(reports)


def cmd_simulate(args) -> int:
    return _simulate(args)


def cmd_poincare(args) -> int:
    return _simulate(args, ["poincare"])


def cmd_envelope(args) -> int:
    code = EXIT_OK
    for cfg in _configs(args):
        out = resolve_output_dir(cfg, args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.quantity == "p_oo":
            if cfg.t_grid is None:
                raise EndHeatError("grid.t is required for p_oo envelopes")
            t = cfg.t_grid.values()
            cols = {"p_oo:min_min": env.min_min_upper(cfg.spec, t)}
            for name, fn in (("smallest_end", env.smallest_end_envelope), ("largest_end", env.largest_end_envelope)):
                try:
                    cols[f"p_oo:{name}"] = fn(cfg.spec, t, r_max=cfg.r_max)
                except EndHeatError as exc:
                    log.info("%s: %s not applicable (%s)", cfg.scenario, name, exc)
            write_csv(out / "envelope_p_oo.csv", "t", t, cols)
            print(out / "envelope_p_oo.csv")
        else:
            if cfg.r_grid is None:
                raise EndHeatError("grid.r is required for poincare envelopes")
            r = cfg.r_grid.values()
            try:
                vals = env.poincare_envelope(cfg.spec, r, r_max=cfg.r_max)
            except EndHeatError as exc:
                print(f"{cfg.scenario}: {exc.code}: {exc}", file=sys.stderr)
                vals = env.poincare_envelope(cfg.spec, r, r_max=cfg.r_max, check=False)
                code = EXIT_BAND
            write_csv(out / "envelope_poincare.csv", "r", r, {"poincare:envelope": vals})
            print(out / "envelope_poincare.csv")
    return code


def cmd_schedule(args) -> int:
    s = build_schedule(args.alpha, args.beta, N=args.N, mode=args.mode, delta=args.delta,
                       log_a1=args.log_a1, plateau=math.exp(args.log_plateau))
    res = s.residuals()
    n = np.arange(1, s.N + 1)
    cols = {"log_r:a": s.log_terms[:, 0], "log_r:b": s.log_terms[:, 1], "log_r:c": s.log_terms[:, 2],
            "log_r:d": s.log_terms[:, 3], "h2:closed": np.array([h2_at_a(s, k) for k in n])}
    if args.output:
        write_csv(args.output, "n", n, cols)
    else:
        print("n," + ",".join(cols))
        for i, k in enumerate(n):
            print(f"{k}," + ",".join("%.17g" % cols[c][i] for c in cols))
    print(json.dumps({"residuals": res, "gamma": s.gamma, "theta": s.theta}), file=sys.stderr)
    if args.verify and not (res["bc"] <= 1e-10 and res["ad"] <= 1e-10 and res["ordered"]):
        return EXIT_BAND
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    bad_csv = False
    for path in args.paths:
        p = Path(path)
        summary = p / "summary.json" if p.is_dir() else p
        data = json.loads(summary.read_text())
        rep = ScenarioReport(data["scenario"], error=data.get("error"), records=data.get("records", {}), files=data.get("files", []))
        for b in data["bands"]:
            b = {k: v for k, v in b.items() if k != "passed"}
            rep.bands.append(RatioBand(**b))
        rep.properties = [PropertyCheck(**q) for q in data["properties"]]
        _print_report(rep)
        if args.validate:
            for f in rep.files:
                problems = validate_csv(summary.parent / f)
                for msg in problems:
                    print(f"    schema {f}: {msg}")
                bad_csv |= bool(problems)
        reports.append(rep)
    code = _exit_code(reports)
    return EXIT_BAND if code == EXIT_OK and bad_csv else code


def cmd_list(args) -> int:
    for s in builtin_scenarios():
        print(f"{s.name:16s} {s.description}")
    return EXIT_OK


def _add_run_args(p):
    p.add_argument("--scenario", action="append", help="built-in scenario name (repeatable, 'all' for every one)")
    p.add_argument("--config", action="append", help="scenario config file (repeatable)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--r-max", type=float, dest="r_max", help="same as --set mesh.r_max=...")
    p.add_argument("--nodes-per-decade", type=int, help="same as --set mesh.nodes_per_decade=...")
    p.add_argument("--output-dir", help="output root (default: $ENDHEAT_OUTPUT_DIR or output.dir)")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="endheat", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run scenario tasks and write CSV + summary")
    _add_run_args(p)
    p.add_argument("--tasks", help="comma-separated subset of the configured tasks")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("poincare", help="run only the Poincare-constant task")
    _add_run_args(p)
    p.set_defaults(func=cmd_poincare)

    p = sub.add_parser("envelope", help="evaluate envelope formulas on the config grid")
    _add_run_args(p)
    p.add_argument("--quantity", choices=("p_oo", "poincare"), default="p_oo")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("schedule", help="emit and verify an oscillation schedule")
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--log-a1", type=float, default=8.0)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--mode", choices=("example1", "example2"), default="example1")
    p.add_argument("--delta", type=float)
    p.add_argument("--log-plateau", type=float, default=0.0)
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.add_argument("--verify", action="store_true", help="exit 1 if the defining relations fail")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("report", help="summarize ratio bands from earlier runs")
    p.add_argument("paths", nargs="+", help="scenario output directories or summary.json files")
    p.add_argument("--validate", action="store_true", help="also schema-check the CSV files")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("list-scenarios", help="list built-in scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (EndHeatError, ValueError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"endheat: {code}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
