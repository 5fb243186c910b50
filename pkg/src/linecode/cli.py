"""Command line entry point: ``linecode {simulate,bound,verify-lemmas,sweep}``.

Exit status is 0 on success, 2 when the run finished but some bound side
condition was violated (or a lemma check failed), and 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path


from . import bounds, harness, oracles
from .harness import ConfigError, ExperimentConfig
from .seeding import np_stream

EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2


def _common(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", required=config_required, help="TOML experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--trials", type=int, help="trial count (overrides the config)")
    p.add_argument("--out", help="output path; stdout when omitted")
    p.add_argument("--format", choices=harness.FORMATS, help="output format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linecode", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    _common(sub.add_parser("simulate", help="run trials and compare with bounds"), True)
    _common(sub.add_parser("sweep", help="simulate over a k/L/q grid"), True)
    b = sub.add_parser("bound", help="evaluate closed-form bounds only")
    _common(b, False)
    b.add_argument("--regime", action="append", choices=bounds.REGIMES)
    b.add_argument("--k", type=int)
    b.add_argument("--q", type=int)
    b.add_argument("--p", help="comma-separated per-link success probabilities")
    b.add_argument("--epsilon", type=float)
    _common(sub.add_parser("verify-lemmas", help="exact and Monte Carlo lemma checks"), False)
    return ap


def _load(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config)
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.format is not None:
        over["output_format"] = args.format
    if args.out is not None:
        over["output_path"] = args.out
    return replace(cfg, **over) if over else cfg


def _warn(lines) -> None:
    for line in lines:
        print(f"warning: {line}", file=sys.stderr)


def cmd_simulate(args, sweep: bool = False) -> int:
    cfg = _load(args)
    summary = harness.run_sweep(cfg) if sweep else harness.run_experiment(cfg)
    harness.emit(summary, cfg.output_format, cfg.output_path)
    _warn(summary.violations)
    return EXIT_WARN if summary.has_warnings else EXIT_OK


def _table(header, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def cmd_bound(args) -> int:
    if args.config:
        cfg = _load(args)
    else:
        if args.k is None or args.p is None:
            raise ConfigError("bound: give --config, or --k and --p")
        cfg = harness.config_from_dict({"network": {"k": args.k, "p": [float(x) for x in args.p.split(",")]}})
    net = cfg.network
    if args.k is not None or args.q is not None:
        code = replace(net.code, k=args.k or net.code.k, q=args.q or net.code.q)
        net = replace(net, code=code)
    if args.epsilon is not None:
        cfg = replace(cfg, epsilon=args.epsilon)
    regimes = tuple(args.regime or cfg.regimes or ("dense-delay",))
    header = ("regime", "k", "L", "q", "alpha", "epsilon", "bound", "w", "constraints_ok", "violations")
    rows, warned = [], False
    for regime in regimes:
        bv = bounds.evaluate(harness.bound_query(cfg, regime, net))
        warned |= not bv.constraints_ok
        rows.append((regime, net.code.k, net.L, net.code.q, net.code.alpha, cfg.epsilon,
                     repr(bv.value), bv.w_used if bv.w_used is not None else "",
                     bv.constraints_ok, "; ".join(bv.violations)))
    _write(_table(header, rows, cfg.output_format), cfg.output_path)
    return EXIT_WARN if warned else EXIT_OK


def verify_lemmas(seed: int, trials: int) -> list[tuple]:
    """Rows of ``(check, case, observed, bound, passed)``."""
    out = []
    for n in range(1, 21):
        for k in range(1, n + 1):
            if n * k <= 20:
                v = oracles.exact_rank_tail(n, k)
                lim = 2.0 ** -(n - k)
                out.append(("rank-tail-exact", f"n={n} k={k}", float(v), lim, float(v) <= lim))
    rng = np_stream(seed, 1)
    est = oracles.mc_rank_tail(74, 64, trials, rng)
    lim = 2.0**-10 + 3 * (2.0**-10 / trials) ** 0.5
    out.append(("rank-tail-mc", "n=74 k=64", est.value, lim, est.value <= lim))
    rng = np_stream(seed, 2)
    for params in oracles.grid_params():
        for g in range(min(params.n_star, 4)):
            b = oracles.rblt_tail_bound(params, g)
            e = oracles.mc_rblt_tail(params, g, max(1, trials // 25), rng)
            case = f"{params.orientation} w={params.w_star} r={params.r_star} r_l={list(params.r_l)} {params.filler} gamma={g}"
            out.append(("rblt-tail", case, e.value, b.value, e.value <= b.value + (e.hi - e.lo)))
    rng = np_stream(seed, 3)
    for rows_t, cols_t in ((2, 2), (3, 4), (4, 6), (6, 10)):
        budget = max(20_000, 10 * 4 ** min(rows_t, cols_t))
        c = oracles.density_transfer_check(rows_t, cols_t, budget, rng)
        out.append(("density-transfer", f"{rows_t}x{cols_t} gamma={c.gamma}", c.p_value, 1e-3, c.passed))
    return out


def cmd_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    trials = 100_000 if args.trials is None else args.trials
    rows = verify_lemmas(seed, trials)
    _write(_table(("check", "case", "observed", "bound", "passed"), rows, args.format or "csv"), args.out)
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_WARN


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "simulate":
            return cmd_simulate(args)
        if args.verb == "sweep":
            return cmd_simulate(args, sweep=True)
        if args.verb == "bound":
            return cmd_bound(args)
        return cmd_verify(args)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
