"""Command-line entry point: ``streamcode <subcommand> ...``.

Every output starts with ``#`` comment lines echoing the fully resolved
command, so a file can be regenerated from its own header.  Exit status is
0 when all requested checks pass, 1 on a failed check (with a ``FAIL`` line
on stdout) and 2 on bad input.
"""
from __future__ import annotations

import argparse
import logging
import shlex
import sys
from pathlib import Path

from . import __version__
from . import channel as ch
from . import metrics as mt
from . import sim
from .code import _GRAMMAR, build_erlc, parse_code
from .decode import EpisodeCache, run
from .errors import EnumerationSizeError, ParameterError, RegimeError
from .gf import default_m

log = logging.getLogger("streamcode")

# flags never echoed in headers: they do not change the output bytes
_NO_ECHO = {"out", "out_dir", "hist_out", "jobs", "verbose", "cmd"}


def _code_arg(text: str) -> str:
    try:
        parse_code(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _length(text: str) -> int:
    # accepts 1e6 style
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad length {text!r}") from None
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"length must be a positive integer, got {text!r}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="streamcode", description="Low-delay streaming erasure codes.")
    ap.add_argument("--version", action="version", version=f"streamcode {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, seed=True):
        p.add_argument("--field-m", type=int, default=None,
                       help="field size exponent (default: $STREAMCODE_FIELD_M or 16)")
        if seed:
            p.add_argument("--seed", type=int, default=sim.DEFAULT_MASTER_SEED)
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("metrics", help="column span and distance of an embedded code")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--oracle", nargs="?", const="all", choices=["all", "span"], default=None,
                   help="exhaustive check: 'all' (default) or 'span' only")
    p.add_argument("--limit", type=int, default=5_000_000, help="max patterns for the distance search")
    common(p)

    p = sub.add_parser("tradeoff", help="achievable pairs against the outer bound")
    p.add_argument("--R", type=_float_list, default=[0.5, 0.6, 0.7], help="comma-separated rates")
    p.add_argument("--T", type=int, default=80)
    p.add_argument("--out", default=None)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="loss rates over a Markov erasure channel")
    _channel_flags(p)
    p.add_argument("--eps-grid", type=_float_list, default=list(sim.default_eps_grid()))
    p.add_argument("--codes", type=_code_arg, nargs="+", required=True, metavar="CODE",
                   help=f"code specs: {_GRAMMAR}")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--hist-out", default=None, help="burst histogram side-file")
    common(p)

    p = sub.add_parser("histogram", help="burst-length histogram of a channel trace")
    _channel_flags(p)
    p.add_argument("--eps", type=float, default=0.0)
    common(p)

    p = sub.add_parser("adversary-check", help="exhaustive sliding-window adversary")
    p.add_argument("--code", type=_code_arg, required=True)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--W", type=int, default=None, help="window (default T+1)")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--limit", type=int, default=200_000)
    common(p)

    p = sub.add_parser("periodic-check", help="replay the periodic worst-case channel")
    p.add_argument("--code", type=_code_arg, required=True)
    p.add_argument("--periods", type=int, default=200)
    p.add_argument("--cT", type=int, default=None)
    p.add_argument("--dT", type=int, default=None)
    p.add_argument("--oracle", action="store_true", help="measure cT and dT exhaustively")
    common(p)

    p = sub.add_parser("bundle", help="write the CSV set for one named figure")
    p.add_argument("name", choices=sim.BUNDLE_NAMES)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--len", type=_length, default=1_000_000)
    p.add_argument("--eps-grid", type=_float_list, default=list(sim.default_eps_grid()))
    p.add_argument("--field-m", type=int, default=None)
    p.add_argument("--seed", type=int, default=sim.DEFAULT_MASTER_SEED)
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _channel_flags(p):
    p.add_argument("--model", choices=["ge", "fritchman"], required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n-states", type=int, default=2, help="total chain states (Fritchman)")
    p.add_argument("--len", type=_length, default=1_000_000)


def canonical_argv(parser: argparse.ArgumentParser, args: argparse.Namespace) -> list[str]:
    """Fully resolved argv that reproduces ``args`` (output paths excluded)."""
    subparser = parser._subparsers._group_actions[0].choices[args.cmd]
    out = [args.cmd]
    for action in subparser._actions:
        dest = action.dest
        if dest in _NO_ECHO or dest == "help" or not action.option_strings and dest != "name":
            continue
        val = getattr(args, dest)
        if not action.option_strings:
            out.append(str(val))
            continue
        flag = action.option_strings[-1] if action.option_strings[-1].startswith("--") else action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            if val:
                out.append(flag)
            continue
        if val is None:
            continue
        if isinstance(val, list):
            if action.nargs == "+":
                out.append(flag)
                out.extend(str(x) for x in val)
                continue
            val = ",".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        elif isinstance(val, float):
            val = repr(val)
        out.extend([flag, str(val)])
    return out


def _header(argv: list[str], extra: dict | None = None) -> str:
    lines = [f"# streamcode {__version__}", "# argv: " + shlex.join(["streamcode", *argv])]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}={v}")
    return "\n".join(lines) + "\n"


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_metrics(args, head):
    spec = build_erlc(args.u, args.v, args.delta, args.T, m=args.field_m, seed=args.seed)
    if args.oracle == "all":
        try:
            reach = mt.closed_form_dT(spec.u, spec.v, spec.delta, spec.T)
        except RegimeError:
            reach = spec.T + 1
        count = mt.pattern_count(spec.T, reach)
        if count > args.limit:
            raise EnumerationSizeError(
                f"distance oracle needs about {count} erasure patterns (limit {args.limit})", count)
    rep = mt.metric_report(spec, oracle=args.oracle is not None, dT_oracle=args.oracle == "all")
    _emit(head + mt.METRICS_CSV_HEADER + "\n" + mt.metrics_csv_row(spec, rep) + "\n", args.out)
    return 0


def cmd_tradeoff(args, head):
    _emit(head + sim.tradeoff_csv(tuple(args.R), args.T), args.out)
    return 0


def _config(args, eps_grid, codes=("uncoded",)):
    return sim.ExperimentConfig(
        model=args.model, alpha=args.alpha, beta=args.beta, codes=tuple(codes),
        eps_grid=tuple(eps_grid), n_states=args.n_states, channel_length=args.len,
        trials=getattr(args, "trials", 1), master_seed=args.seed, field_m=args.field_m,
    )


def cmd_simulate(args, head):
    cfg = _config(args, args.eps_grid, args.codes)
    report = sim.run_experiment(cfg, jobs=args.jobs)
    _emit(head + report.to_csv(), args.out)
    hist_path = args.hist_out
    if hist_path is None and args.out is not None:
        p = Path(args.out)
        hist_path = p.with_name(p.stem + "_bursts.csv")
    if hist_path is not None:
        Path(hist_path).write_text(head + sim.burst_histogram_csv(cfg), encoding="utf-8")
    return 0


def cmd_histogram(args, head):
    if args.model == "ge":
        params = ch.GilbertElliottParams(args.alpha, args.beta, args.eps)
        make = ch.ge_trace
    else:
        params = ch.FritchmanParams(args.n_states - 1, args.alpha, args.beta, args.eps)
        make = ch.fritchman_trace
    tr = make(params, args.len, sim.derive_seed(args.seed, sim._TAG_TRACE, 0))
    _emit(head + ch.histogram_csv(ch.burst_histogram(tr), params.burst_pmf), args.out)
    return 0


def cmd_adversary_check(args, head):
    spec = parse_code(args.code, m=args.field_m, seed=args.seed)
    W = spec.T + 1 if args.W is None else args.W
    cache = EpisodeCache()
    checked = 0
    for pattern in ch.adversary_patterns(args.B, args.N, W, args.horizon, limit=args.limit):
        checked += 1
        rep = run(spec, pattern, args.seed, cache)
        if rep.lost_packets:
            rle = ch.ErasureTrace(pattern).to_rle()
            _emit(head + f"FAIL adversary code={args.code} B={args.B} N={args.N} W={W} "
                  f"checked={checked} lost={rep.lost_packets} pattern={rle}\n", args.out)
            return 1
    _emit(head + f"PASS adversary code={args.code} B={args.B} N={args.N} W={W} "
          f"horizon={args.horizon} patterns={checked}\n", args.out)
    return 0


def cmd_periodic_check(args, head):
    spec = parse_code(args.code, m=args.field_m, seed=args.seed)
    if args.cT is not None and args.dT is not None:
        cT, dT = args.cT, args.dT
    elif args.oracle:
        cT, dT = mt.column_span_oracle(spec), mt.column_distance_oracle(spec)
    else:
        cT, dT = mt.closed_forms(spec)
    if args.periods < 1:
        raise ParameterError("need at least one period")
    tr = ch.periodic_trace(cT, dT, spec.T, args.periods)
    rep = run(spec, tr, args.seed)
    verdict = "PASS" if rep.lost_packets == 0 else "FAIL"
    _emit(head + f"{verdict} periodic code={args.code} cT={cT} dT={dT} periods={args.periods} "
          f"lost={rep.lost_packets} total={rep.total_packets} loss_rate={float(rep.loss_rate):.6g}\n",
          args.out)
    return 0 if rep.lost_packets == 0 else 1


def cmd_bundle(args, head):
    paths = sim.figure_bundle(args.name, args.out_dir, args.len, args.seed,
                              tuple(args.eps_grid), args.field_m, header=head)
    for p in paths:
        print(p)
    return 0


_COMMANDS = {
    "metrics": cmd_metrics,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "histogram": cmd_histogram,
    "adversary-check": cmd_adversary_check,
    "periodic-check": cmd_periodic_check,
    "bundle": cmd_bundle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "field_m") and args.field_m is None:
        args.field_m = default_m()
    head = _header(canonical_argv(parser, args))
    try:
        return _COMMANDS[args.cmd](args, head)
    except EnumerationSizeError as exc:
        print(f"FAIL error=enumeration-size estimate={exc.estimate} message={exc}", file=sys.stdout)
        print(f"streamcode: error: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, RegimeError) as exc:
        print(f"streamcode: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
