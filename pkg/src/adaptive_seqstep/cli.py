"""Command-line interface: ``reject``, ``power``, ``simulate`` and ``figure``.

Exit status is 0 on success, 1 on I/O failure and 2 on invalid usage or
input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import asymptotic, simulation
from .io import (
    REJECT_COLUMNS,
    PValueFileError,
    csv_text,
    json_text,
    outcome_rows,
    outcome_to_json,
    parse_pvalue_file,
    resolve_output,
)
from .procedures import AccumulationFn, ProcedureKind, ProcedureSpec, apply_procedure
from .simulation import ExperimentConfig, SummaryRow
from .vct_model import ModelError, VCTParams, b_max

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _accumulation(name: str, C: float | None) -> AccumulationFn:
    name = name.lower()
    if name == "forwardstop":
        return AccumulationFn.forward_stop()
    if name == "seqstep":
        return AccumulationFn.seqstep(2.0 if C is None else C)
    if name == "hingeexp":
        return AccumulationFn.hinge_exp(2.0 if C is None else C)
    raise UsageError(f"unknown accumulation function {name!r}")


def _spec_from_args(args) -> ProcedureSpec:
    m = args.method
    try:
        if m == "bh":
            return ProcedureSpec(ProcedureKind.BH, q=args.q)
        if m == "sbh":
            return ProcedureSpec(ProcedureKind.STOREY_BH, q=args.q, lam=_need(args, "lam"))
        if m == "ss":
            return ProcedureSpec(ProcedureKind.SELECTIVE_SEQSTEP, q=args.q, s=_need(args, "s"))
        if m == "as":
            return ProcedureSpec(ProcedureKind.ADAPTIVE_SEQSTEP, q=args.q,
                                 s=_need(args, "s"), lam=_need(args, "lam"))
        return ProcedureSpec(ProcedureKind.ACCUMULATION_TEST, q=args.q,
                             accumulation=_accumulation(args.accumulation, args.C))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _need(args, name):
    val = getattr(args, name)
    if val is None:
        flag = "--lambda" if name == "lam" else f"--{name}"
        raise UsageError(f"--method {args.method} requires {flag}")
    return val


def _emit(text: str, out) -> None:
    path = resolve_output(out)
    if path is None:
        sys.stdout.write(text)
        return
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _table(table, columns, rows, fmt, comments=(), extra=None) -> str:
    if fmt == "json":
        payload = dict(extra or {})
        payload["columns"] = list(columns)
        payload["rows"] = [{c: _jsonable(r.get(c)) for c in columns} for r in rows]
        return json_text(table, payload)
    return csv_text(table, columns, rows, comments)


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    return v


def _info(msg: str, to_stderr: bool) -> None:
    print(msg, file=sys.stderr if to_stderr else sys.stdout)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_reject(args) -> int:
    spec = _spec_from_args(args)
    pvals = parse_pvalue_file(args.input)
    outcome = apply_procedure(pvals, spec)
    if args.format == "json":
        text = outcome_to_json(outcome, pvals)
    else:
        text = csv_text("rejection", REJECT_COLUMNS, outcome_rows(pvals, outcome),
                        comments=[f"procedure: {spec.label}", f"q: {spec.q!r}",
                                  f"k_hat: {outcome.k_hat}"])
    _emit(text, args.out)
    _info(f"k_hat={outcome.k_hat} rejections={outcome.n_rejected}",
          to_stderr=resolve_output(args.out) is None)
    return EXIT_OK


POWER_COLUMNS = ("method", "gamma", "b", "mu", "q", "s", "lambda", "nu",
                 "pi0", "chi", "t_star", "power")


def _power_row(args, params: VCTParams) -> dict:
    m = args.method
    row = {"method": m, "gamma": params.gamma, "b": params.b, "mu": params.mu,
           "q": args.q, "pi0": params.pi0}
    if m == "as":
        s, lam = _need(args, "s"), _need(args, "lam")
        res = asymptotic.power_as(s, lam, args.q, params)
        row.update(s=s, **{"lambda": lam})
    elif m == "ss":
        s = _need(args, "s")
        res = asymptotic.power_ss(s, args.q, params)
        row.update(s=s, **{"lambda": s})
    else:
        if args.nu is not None:
            nu = args.nu
        elif args.accumulation is not None:
            nu = asymptotic.nu_of_h(_accumulation(args.accumulation, args.C), params.f1)
        else:
            raise UsageError("--method at requires --nu or --accumulation")
        res = asymptotic.power_at(nu, args.q, params)
        row["nu"] = nu
    row.update(chi=res.chi, t_star=res.t_star, power=res.power)
    return row


def cmd_power(args) -> int:
    if args.method not in ("as", "ss", "at"):
        raise UsageError("power supports --method as, ss or at")
    for name in ("gamma", "mu"):
        if getattr(args, name) is None:
            raise UsageError(f"power requires --{name}")
    if not 0.0 < args.gamma < 1.0:
        raise UsageError(f"--gamma must lie in (0, 1), got {args.gamma}")
    bm = b_max(args.gamma)
    if args.sweep == "b":
        b_lo = args.b_min
        grid = np.geomspace(b_lo, bm, args.points)
        grid[-1] = bm
        bs = [float(x) for x in grid]
    else:
        if args.b is None:
            raise UsageError("power requires --b (or --sweep b)")
        bs = [args.b]
    rows = []
    for b in bs:
        if b > bm:
            raise UsageError(
                f"b={b:g} exceeds b_max(gamma={args.gamma:g}) = {bm:.4f}; "
                "pi(0) would be above 1")
        try:
            params = VCTParams(args.gamma, b, args.mu)
            rows.append(_power_row(args, params))
        except (ValueError, ModelError) as exc:
            raise UsageError(str(exc)) from None
    _emit(_table("power", POWER_COLUMNS, rows, args.format), args.out)
    if len(rows) == 1:
        r = rows[0]
        _info(f"chi={r['chi']:.6g} t_star={r['t_star']:.6g} power={r['power']:.6g}",
              to_stderr=resolve_output(args.out) is None)
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise UsageError("simulate requires --config")
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
    if args.reps is not None:
        raw["n_reps"] = args.reps
    if args.seed is not None:
        raw["base_seed"] = args.seed
    try:
        return ExperimentConfig.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def cmd_simulate(args) -> int:
    config = _load_config(args)
    try:
        rows = simulation.run_experiment(config, workers=args.threads)
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    out = args.out if args.out is not None else config.output
    _emit(_table("summary", SummaryRow.FIELDS, [r.as_dict() for r in rows], args.format), out)
    return EXIT_OK


FIG1_COLUMNS = ("k", "t", "fdp_hat", "Pi", "fdp_star")
FIG2_COLUMNS = ("regime", "gamma", "mu", "b", "method", "asym_power", "pi0", "chi", "t_star")
FIG3_COLUMNS = ("lam", "s_choice", "s", "n", "n_reps", "mean_power", "power_q05",
                "power_q25", "power_q50", "power_q75", "power_q95", "power_iqr",
                "mean_k_hat_frac", "sd_k_hat_frac", "mean_fdr", "asym_power", "asym_t_star")


def cmd_figure(args) -> int:
    seed = args.seed
    if args.which == "1":
        n = args.n[0] if args.n else 3000
        res = simulation.fig1_experiment(n=n, seed=1 if seed is None else seed)
        notes = {"chi": res["chi"], "t_star": res["t_star"], "k_hat": res["k_hat"], "q": res["q"]}
        text = _table("figure1", FIG1_COLUMNS, res["rows"], args.format,
                      comments=[f"{k}: {v!r}" for k, v in notes.items()], extra=notes)
    elif args.which == "2":
        rows = simulation.fig2_experiment(n_points=args.points)
        text = _table("figure2", FIG2_COLUMNS, rows, args.format)
    else:
        rows = simulation.fig3_experiment(
            ns=tuple(args.n) if args.n else (100, 500, 1000, 10000),
            n_reps=args.reps if args.reps is not None else 500,
            base_seed=3 if seed is None else seed, workers=args.threads)
        text = _table("figure3", FIG3_COLUMNS, rows, args.format)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_procedure_flags(p, methods):
    p.add_argument("--method", required=True, choices=methods)
    p.add_argument("--q", type=float, required=True, help="target FDR level")
    p.add_argument("--s", type=float, help="rejection threshold (as, ss)")
    p.add_argument("--lambda", dest="lam", type=float, help="null-count cutoff (as, sbh)")
    p.add_argument("--accumulation", choices=("forwardstop", "seqstep", "hingeexp"),
                   help="accumulation function (at)")
    p.add_argument("--C", type=float, help="parameter C of seqstep/hingeexp (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-seqstep",
        description="Ordered multiple testing: Adaptive SeqStep and related procedures.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("reject", parents=[common],
                       help="run a procedure on an ordered p-value file")
    _add_procedure_flags(p, ("bh", "sbh", "ss", "as", "at"))
    p.add_argument("--in", dest="input", required=True, help="p-value file")
    p.set_defaults(func=cmd_reject)

    p = sub.add_parser("power", parents=[common], help="asymptotic power under the VCT model")
    _add_procedure_flags(p, ("as", "ss", "at"))
    p.add_argument("--nu", type=float, help="E_F1 h(p) for --method at")
    p.add_argument("--gamma", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--sweep", choices=("b",), help="sweep b over (b-min, b_max]")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--b-min", type=float, default=0.01)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("simulate", parents=[common, threads],
                       help="Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figure", parents=[common, threads], help="figure data tables")
    p.add_argument("--which", required=True, choices=("1", "2", "3"))
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--seed", type=int)
    p.add_argument("--points", type=int, default=100, help="b-grid size for figure 2")
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PValueFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
