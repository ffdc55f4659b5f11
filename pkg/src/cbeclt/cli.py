"""Command-line entry point: ``cbeclt {theory,experiment,validate,sample}``.

Exit codes: 0 success, 1 assertion failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import stats as st
from . import testfn as tf
from . import theory
from .config import apply_overrides, load_config, parse_config, parse_theory_config, read_raw
from .ensemble import sample
from .errors import CBEError, ConfigError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field; dotted keys reach nested fields")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replicas")

    p = _Parser(prog="cbeclt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cbeclt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("theory", parents=[common], help="print closed-form predictions")
    sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment")
    v = sub.add_parser("validate", parents=[common], help="run the fast invariant suite")
    v.add_argument("--only", action="append", default=[], help="run only these check ids")
    sub.add_parser("sample", parents=[common], help="dump one configuration and its traces")
    return p


def _load(args, need_file=True):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.config is None:
        if need_file:
            raise ConfigError("--config is required")
        return parse_config(apply_overrides({}, overrides))
    if not args.config.exists():
        raise ConfigError(f"config file {args.config} not found")
    return load_config(args.config, overrides)


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def theory_rows(f, beta) -> list[tuple[str, float, float]]:
    rows = []
    if not f.circle_native:
        for pred in (theory.meso_pair_variance(f, beta), theory.meso_bipartite_variance(f, beta),
                     theory.local_pair_variance(f)):
            rows.append((pred.regime, pred.value, pred.error))
        for case in ("i", "ii", "iii"):
            pred = theory.local_bipartite_variance(f, case)
            rows.append((pred.regime, pred.value, pred.error))
    else:
        c = np.asarray(tf.circle_coefficient(f, 1.0, np.arange(1, f.degree + 1)))
        rows.append(("global_pair_limit", theory.global_pair_limit_variance(c, beta), 0.0))
        rows.append(("global_bipartite_limit", theory.global_bipartite_limit_variance(c, beta), 0.0))
    return rows


def cmd_theory(args) -> int:
    if args.config is None:
        raise ConfigError("--config is required")
    if not args.config.exists():
        raise ConfigError(f"config file {args.config} not found")
    raw, text = read_raw(args.config, args.overrides)
    cfg = parse_theory_config(raw, text)
    f = cfg.test_function
    rows = theory_rows(f, cfg.beta)
    if cfg.n is not None and not f.circle_native:
        if cfg.L is not None and cfg.L != cfg.n:
            rows.append(("bipartite_mean_meso", theory.bipartite_mean(f, cfg.n, cfg.L, "meso"), 0.0))
        rows.append(("bipartite_mean_local", theory.bipartite_mean(f, cfg.n, cfg.n, "local"), 0.0))
    print(f"test function {json.dumps(f.to_spec())}  beta={cfg.beta:g}")
    print(f"{'prediction':<26}{'value':>24}{'quad. error':>14}")
    for name, val, err in rows:
        print(f"{name:<26}{val:>24.16g}{err:>14.2e}")
    _write_json(args.out / "theory.json", {
        "version": __version__, "config": raw,
        "predictions": [{"name": n, "value": v, "error": e} for n, v, e in rows]})
    return EXIT_OK


def write_samples_csv(path: Path, result):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={result.config.config_hash()} version={__version__}\n")
        fh.write("value\n")
        for x in result.samples:
            fh.write(f"{x:.17g}\n")


def cmd_experiment(args) -> int:
    from .montecarlo import run_experiment

    cfg = _load(args)
    result = run_experiment(cfg, threads=args.threads)
    out = args.out
    payload = result.to_json()
    if not result.passed:
        payload["failures"] = [{"assertion": k, **v} for k, v in result.assertions.items() if not v["pass"]]
    _write_json(out / "result.json", payload)
    if cfg.save_samples:
        write_samples_csv(out / "samples.csv", result)
    for k, v in result.assertions.items():
        print(f"{'PASS' if v['pass'] else 'FAIL'} {k}: {v['value']:.6g} (limit {v['limit']:.6g})")
    print(f"normalized variance {result.variance / result.scale ** 2:.6g}"
          f"  predicted {result.theory.get('variance', float('nan')):.6g}")
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_validate(args) -> int:
    from .validate import run_suite

    report = run_suite(only=args.only or None)
    for item in report:
        status = "PASS" if item["pass"] else "FAIL"
        print(f"{status} {item['id']}: {item['detail']}")
    failed = [r for r in report if not r["pass"]]
    print(f"{len(report) - len(failed)}/{len(report)} checks passed")
    _write_json(args.out / "validate.json", {"version": __version__, "checks": report})
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_sample(args) -> int:
    from .montecarlo import replica_rng

    cfg = _load(args)
    rng = replica_rng(cfg.seed, 0)
    conf = sample(cfg.ensembles[0], cfg.n, rng, cfg.tol)
    tv = st.traces(conf, max(cfg.d, 1))
    _write_json(args.out / "sample.json", {
        "version": __version__, "config": cfg.to_json(), "angles": conf.to_json(),
        "traces": [[t.real, t.imag] for t in tv.values]})
    path = args.out / "samples.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={cfg.config_hash()} version={__version__}\n")
        fh.write("angle\n")
        for a in conf.angles:
            fh.write(f"{a:.17g}\n")
    print(f"wrote {cfg.n} angles and {tv.d} traces to {args.out}")
    return EXIT_OK


COMMANDS = {"theory": cmd_theory, "experiment": cmd_experiment,
            "validate": cmd_validate, "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc), "field": exc.field, "line": exc.line}),
              file=sys.stderr)
        return EXIT_USAGE
    except CBEError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
