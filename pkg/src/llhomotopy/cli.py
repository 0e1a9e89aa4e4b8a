"""Command-line entry point: ``llhomotopy {validate,decode,unmix,envelope}``.

Experiment settings come from a plain-text config of ``key = value``
lines, optionally grouped in ``[section]`` blocks (``[schedule]`` and
``[admm]``); ``#`` starts a comment.  Exit status is 0 on success, 1 when a
validation check fails and 2 for usage, configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .envelope import EnvelopeParams, ParameterError
from .experiments import (
    SWEEP_LAMBDAS,
    DecodingConfig,
    UnmixConfig,
    decoding_schedule,
    format_float,
    run_decoding,
    run_unmix_sweep,
    sweep_csv,
)
from .functions import DESCRIPTORS, parse_function
from .oracle import DEFAULT_HI, DEFAULT_LO, DEFAULT_STEP, Grid1D, grid_ll_at, grid_moreau
from .solvers import AdmmConfig, HomotopySchedule
from .validation import FUNCTIONS, SUITES, PerturbedFunction, results_csv, run_checks

logger = logging.getLogger("llhomotopy")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

ENVELOPE_COLUMNS = ("x", "h", "moreau_lambda", "moreau_lambda_minus_mu", "ll", "ll_grad",
                    "oracle_ll")


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> Dict[str, Tuple[str, int]]:
    """``{key: (raw value, line number)}``; keys inside ``[sec]`` become ``sec.key``."""
    out: Dict[str, Tuple[str, int]] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or not line[1:-1].strip().isidentifier():
                raise ConfigError(f"{source}:{lineno}: malformed section header {line!r}")
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        key = key.lower()
        if section:
            key = f"{section}.{key}"
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {out[key][1]})")
        out[key] = (value, lineno)
    return out


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


_SCHEDULE_TYPES = {f.name: f.type for f in fields(HomotopySchedule)}
_ADMM_TYPES = {f.name: f.type for f in fields(AdmmConfig)}
_CAST = {"float": float, "int": int, "bool": _bool, "str": str}


def _section(cfg, prefix, types):
    out = {}
    for key, (raw, line) in list(cfg.items()):
        if key.startswith(prefix + "."):
            name = key[len(prefix) + 1:]
            if name not in types:
                raise ConfigError(f"line {line}: unknown key {key!r}; "
                                  f"valid: {', '.join(prefix + '.' + k for k in types)}")
            out[name] = _convert(key, raw, line, _CAST[types[name]])
            del cfg[key]
    return out


def _convert(key, raw, line, cast):
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line}: bad value for {key!r}: {exc}") from None


def _take(cfg, spec):
    out = {}
    for key, (raw, line) in list(cfg.items()):
        if key in spec:
            out[key] = _convert(key, raw, line, spec[key])
            del cfg[key]
    if cfg:
        key, (_, line) = next(iter(cfg.items()))
        raise ConfigError(f"line {line}: unknown key {key!r}; valid: {', '.join(spec)}")
    return out


DECODE_KEYS = {"n": int, "p": int, "rho": float, "snr_db": float, "trials": int, "seed": int,
               "channel": str}
UNMIX_KEYS = {
    "n": int, "p": int, "sparsity": int, "snr_db": float, "beta": float, "trials": int,
    "seed": int, "lambda1": _floats, "inner_iters": int, "step_rule": str,
    "polish": _bool, "zero_tol": float, "dictionary": str,
}
ENVELOPE_KEYS = {"function": str, "lam": float, "mu": float, "lo": float, "hi": float,
                 "step": float}


def decoding_config(cfg, seed: Optional[int] = None) -> DecodingConfig:
    cfg = dict(cfg)
    sched = _section(cfg, "schedule", _SCHEDULE_TYPES)
    admm = _section(cfg, "admm", _ADMM_TYPES)
    kw = _take(cfg, DECODE_KEYS)
    kw = {k.upper() if k in ("n", "p") else k: v for k, v in kw.items()}
    if seed is not None:
        kw["seed"] = seed
    return DecodingConfig(schedule=decoding_schedule(**sched),
                          admm=AdmmConfig(**admm), **kw)


def unmix_config(cfg, seed: Optional[int] = None) -> Tuple[UnmixConfig, Tuple[float, ...]]:
    cfg = dict(cfg)
    admm = _section(cfg, "admm", _ADMM_TYPES)
    kw = _take(cfg, UNMIX_KEYS)
    kw = {k.upper() if k in ("n", "p") else k: v for k, v in kw.items()}
    lambdas = kw.pop("lambda1", SWEEP_LAMBDAS)
    if not lambdas:
        raise ConfigError("lambda1 needs at least one value")
    if seed is not None:
        kw["seed"] = seed
    base = UnmixConfig(lambda1=lambdas[0], admm=AdmmConfig(**admm), **kw)
    for lam in lambdas:
        replace(base, lambda1=lam)  # validates every sweep value up front
    return base, tuple(lambdas)


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text, path)


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    logger.info("wrote %s", path)
    return path


def cmd_validate(args) -> int:
    functions = dict(FUNCTIONS)
    if args.inject_fault:
        if args.inject_fault not in functions:
            raise ConfigError(f"--inject-fault expects one of {sorted(functions)}")
        functions[args.inject_fault] = PerturbedFunction(functions[args.inject_fault])
    results = run_checks(functions, args.suite or None, seed=args.seed or 0)
    _write(args.out, "validate_deviations.csv", results_csv(results))
    width = max(len(r.name) for r in results)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  "
              f"dev={r.deviation:.3e}  tol={r.tolerance:.1e}")
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed: "
              + ", ".join(r.name for r in failed), file=sys.stderr)
        return EXIT_FAILED
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def _report_errors(reports):
    for r in reports:
        for trial, method, msg in r.errors:
            print(f"warning: trial {trial} failed: {msg}", file=sys.stderr)


def cmd_decode(args) -> int:
    cfg = decoding_config(_read_config(args.config), args.seed)
    report = run_decoding(cfg, threads=args.threads)
    _write(args.out, "decode_trials.csv", report.trials_csv())
    _write(args.out, "decode_aggregate.csv", report.aggregate_csv())
    print("mean BER [%]")
    print(report.table("ber"), end="")
    _report_errors([report])
    return EXIT_OK


def cmd_unmix(args) -> int:
    base, lambdas = unmix_config(_read_config(args.config), args.seed)
    reports = run_unmix_sweep(base, lambdas, threads=args.threads)
    trials = "".join(r.trials_csv(header=(i == 0), lead=(("lambda1", r.config["lambda1"]),))
                     for i, r in enumerate(reports))
    agg = "".join(r.aggregate_csv(header=(i == 0)) for i, r in enumerate(reports))
    _write(args.out, "unmix_trials.csv", trials)
    _write(args.out, "unmix_aggregate.csv", agg)
    _write(args.out, "unmix_sweep.csv", sweep_csv(reports))
    head = ("lambda1", "RMSE", "Sens[%]", "Spec[%]", "CF[1e-3]")
    print("  ".join(f"{h:>10}" for h in head))
    for r in reports:
        cells = (f"{r.config['lambda1']:g}", f"{r.mean('LL', 'rmse'):.4f}",
                 f"{100 * r.mean('LL', 'sensitivity'):.2f}",
                 f"{100 * r.mean('LL', 'specificity'):.2f}",
                 f"{1e3 * r.mean('LL', 'cost'):.4f}")
        print("  ".join(f"{c:>10}" for c in cells))
    _report_errors(reports)
    return EXIT_OK


def envelope_table(fn, p: EnvelopeParams, lo, hi, step) -> str:
    """CSV text with :data:`ENVELOPE_COLUMNS` sampled on ``[lo, hi]``."""
    if not hi > lo or not step > 0:
        raise ConfigError("envelope range needs hi > lo and step > 0")
    x = Grid1D.points_for(lo, hi, step)
    g = Grid1D.sample(fn.eval_1d, min(DEFAULT_LO, lo - 1.0), max(DEFAULT_HI, hi + 1.0),
                      DEFAULT_STEP)
    oracle = grid_ll_at(g, p, x, refine=3, moreau=grid_moreau(g, p.lam))
    cols = (x, fn.eval_1d(x), fn.moreau_1d(p.lam, x), fn.moreau_1d(p.nu, x),
            fn.ll_value_1d(p, x), fn.ll_grad_1d(p, x), oracle)
    lines = [",".join(ENVELOPE_COLUMNS)]
    for row in np.column_stack([np.asarray(c, dtype=float) for c in cols]):
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def cmd_envelope(args) -> int:
    cfg = _take(dict(_read_config(args.config)), ENVELOPE_KEYS)
    desc = args.function or cfg.get("function")
    if desc is None:
        raise ConfigError(f"--function is required; valid descriptors: {', '.join(DESCRIPTORS)}")
    fn = parse_function(desc)
    lam = args.lam if args.lam is not None else cfg.get("lam", 1.0)
    mu = args.mu if args.mu is not None else cfg.get("mu", 0.5 * lam)
    lo, hi = args.range if args.range is not None else (cfg.get("lo", -1.0),
                                                        cfg.get("hi", 2.0))
    step = args.step if args.step is not None else cfg.get("step", 0.01)
    text = envelope_table(fn, EnvelopeParams(lam, mu), lo, hi, step)
    path = _write(args.out, "envelope.csv", text)
    print(f"{text.count(chr(10)) - 1} rows written to {path}")
    return EXIT_OK


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--seed", type=_nonneg_int, help="override the config seed")
    common.add_argument("--threads", type=_pos_int, default=1,
                        help="worker threads for experiment trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="llhomotopy",
        description="Lasry-Lions envelopes, homotopy solver and experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", parents=[common],
                       help="certify closed forms against the grid oracles")
    v.add_argument("--suite", action="append", choices=sorted(SUITES),
                   help="run only this suite (repeatable)")
    v.add_argument("--inject-fault", metavar="FUNCTION",
                   help="perturb the closed-form envelope of FUNCTION (self-test)")
    v.set_defaults(run=cmd_validate)

    d = sub.add_parser("decode", parents=[common], help="binary decoding experiment")
    d.set_defaults(run=cmd_decode)

    u = sub.add_parser("unmix", parents=[common], help="sparse unmixing experiment / sweep")
    u.set_defaults(run=cmd_unmix)

    e = sub.add_parser("envelope", parents=[common], help="sample envelopes to CSV")
    e.add_argument("--function", help=f"one of: {', '.join(DESCRIPTORS)}")
    e.add_argument("--lam", type=float)
    e.add_argument("--mu", type=float)
    e.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    e.add_argument("--step", type=float)
    e.set_defaults(run=cmd_envelope)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # fail before any long computation when the output dir is unusable
        os.makedirs(args.out, exist_ok=True)
        if not os.path.isdir(args.out) or not os.access(args.out, os.W_OK):
            raise OSError(f"output directory {args.out!r} is not writable")
        return args.run(args)
    except (ConfigError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
