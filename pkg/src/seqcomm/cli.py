"""Command-line front end: ``seqcomm simulate | detect | select-alpha``.

Reports go to stdout as aligned text and, with ``--out``, to a JSON file.
Exit status is 0 on success, 2 on invalid input and 3 when alpha
calibration does not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from collections import Counter

from . import seeding
from .alpha import DEFAULT_EPS_ALPHA, DEFAULT_MAX_ROUNDS, calibrate_many
from .detect import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_K_MAX,
    REFINE_MODES,
    DivisionConfig,
    detect,
    k_hat,
    step_function,
)
from .errors import NonConvergence, ValidationError
from .io import load_graph
from .sbm import generate, planted_params

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3


def _num(x):
    """JSON-safe float: full precision, infinities as strings."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _fmt(x):
    return f"{x:.6g}"


class _Timer:
    def __init__(self):
        self.phases = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.phases[name] = timer.phases.get(name, 0.0) + time.perf_counter() - self.t0

        return _Ctx()


def _trace_json(trace):
    sf = step_function(trace)
    return {
        "stages": [
            {
                "j": st.j,
                "observed_gain": _num(st.observed_gain),
                "p_value": _num(st.p_value),
                "indivisible": st.indivisible,
            }
            for st in trace.stages
        ],
        "step_function": [{"lo": _num(p.lo), "hi": _num(p.hi), "k_hat": p.value} for p in sf.pieces],
        "k_star": sf.k_star,
    }


def _table(headers, rows):
    cells = [headers] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _config(args):
    return DivisionConfig(refine=args.refine)


def cmd_simulate(args, timer):
    if args.reps < 1:
        raise ValidationError("--reps must be at least 1")
    alphas = sorted(args.alphas)
    if any(not 0.0 <= a < 1.0 for a in alphas):
        raise ValidationError("every alpha must lie in [0, 1)")
    params = planted_params(args.k0, args.n, args.eps)
    estimates = {a: [] for a in alphas}
    for r in range(args.reps):
        A, _ = generate(params, seeding.substream(args.seed, seeding.SIM_NET, 0, r))
        if A.m == 0:
            for a in alphas:
                estimates[a].append(1)
            continue
        with timer("detect"):
            trace = detect(
                A, args.kmax, args.bootstrap, seeding.subseed(args.seed, seeding.SIM_DETECT, 0, r),
                workers=args.workers, alpha_stop=alphas[-1], config=_config(args),
            )
        for a in alphas:
            estimates[a].append(k_hat(trace, a))
    rows = []
    for a in alphas:
        counts = Counter(estimates[a])
        # ties in the mode go to the smaller K
        mode = min(counts, key=lambda k: (-counts[k], k))
        rows.append(
            {
                "alpha": _num(a),
                "mode": mode,
                "proportion_correct": counts[args.k0] / args.reps,
                "k_hat": estimates[a],
            }
        )
    text = _table(
        ["alpha", "mode", "prop_correct"],
        [[_fmt(r["alpha"]), r["mode"], _fmt(r["proportion_correct"])] for r in rows],
    )
    return {"results": rows}, text


def _load(args, tau=None):
    return load_graph(args.input, args.format, tau, args.absolute)


def cmd_detect(args, timer):
    if args.format == "corr" and args.tau is None:
        raise ValidationError("--tau is required for correlation input")
    A = _load(args, args.tau)
    with timer("detect"):
        trace = detect(A, args.kmax, args.bootstrap, args.seed, workers=args.workers, config=_config(args))
    out = _trace_json(trace)
    lines = [
        _table(
            ["stage", "gain", "p_value"],
            [[st.j, _fmt(st.observed_gain), _fmt(st.p_value)] for st in trace.stages],
        ),
        "",
        _table(["alpha_lo", "alpha_hi", "k_hat"], [[_fmt(p["lo"]), _fmt(p["hi"]), p["k_hat"]] for p in out["step_function"]]),
        "",
        f"K* = {out['k_star']}",
    ]
    if args.alpha is not None:
        out["k_hat"] = k_hat(trace, args.alpha)
        lines.append(f"K_hat({_fmt(args.alpha)}) = {out['k_hat']}")
    out["labels"] = trace.partition_for(out["k_star"]).labels.tolist()
    return out, "\n".join(lines)


def cmd_select_alpha(args, timer):
    gammas = args.gammas if args.gammas else [args.gamma]
    if args.format == "corr":
        if not args.tau:
            raise ValidationError("--tau is required for correlation input")
        taus = args.tau
    else:
        if args.tau:
            raise ValidationError("--tau only applies to correlation input")
        taus = [None]
    rows = []
    failed = False
    for tau in taus:
        A = _load(args, tau)
        with timer("calibrate"):
            reports = calibrate_many(
                A, gammas, args.eps_alpha, args.bootstrap, args.kmax, args.max_rounds, args.seed,
                workers=args.workers, config=_config(args),
            )
        for rep in reports:
            failed |= not rep.converged
            rows.append(
                {
                    "tau": None if tau is None else _num(tau),
                    "gamma": _num(rep.target_gamma),
                    "alpha": _num(rep.selected_alpha),
                    "achieved_gamma": _num(rep.achieved_gamma),
                    "k_hat": rep.k_hat_at_alpha,
                    "k_star": rep.k_star,
                    "underfit": rep.underfit_count,
                    "overfit": rep.overfit_count,
                    "equal": rep.equal_count,
                    "iterations": rep.iterations,
                    "converged": rep.converged,
                    "alpha_history": [_num(a) for a in rep.alpha_history],
                }
            )
    headers = ["tau", "gamma", "alpha", "k_hat", "gamma_hat", "rounds", "converged"]
    table_rows = [
        [
            "-" if r["tau"] is None else _fmt(r["tau"]),
            _fmt(r["gamma"]),
            _fmt(r["alpha"]),
            r["k_hat"],
            r["achieved_gamma"] if isinstance(r["achieved_gamma"], str) else _fmt(r["achieved_gamma"]),
            r["iterations"],
            "yes" if r["converged"] else "no",
        ]
        for r in rows
    ]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(headers)
            w.writerows(table_rows)
    out = {"results": rows}
    if failed:
        out["error"] = "alpha calibration did not converge"
    return out, _table(headers, table_rows), failed


def _add_common(p):
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP, help="bootstrap replicates per test")
    p.add_argument("--kmax", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default ${seeding.SEED_ENV} or {seeding.DEFAULT_SEED})")
    p.add_argument("--refine", choices=REFINE_MODES, default="sweep", help="partition refinement after each split")
    p.add_argument("--workers", type=int, default=1, help="processes for bootstrap replicates")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--timings", action="store_true", help="include wall-clock times per phase in the report")


def _add_input(p):
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("edge", "adj", "corr"), required=True)
    p.add_argument("--absolute", action="store_true", help="threshold |correlation| instead of the signed value")


def build_parser():
    ap = argparse.ArgumentParser(prog="seqcomm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="replicate detection on planted-partition networks")
    p.add_argument("--k0", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--alphas", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    p.add_argument("--reps", type=int, default=100)
    _add_common(p)

    p = sub.add_parser("detect", help="sequential tests on one network")
    _add_input(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    _add_common(p)

    p = sub.add_parser("select-alpha", help="calibrate alpha to a tolerance ratio")
    _add_input(p)
    p.add_argument("--tau", type=float, nargs="+", help="one or more correlation thresholds")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--gammas", type=float, nargs="+")
    p.add_argument("--eps-alpha", type=float, default=DEFAULT_EPS_ALPHA)
    p.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    p.add_argument("--csv", help="also write the tau x gamma table as CSV")
    _add_common(p)
    return ap


# arguments that never change the result and are left out of the echo
_NOT_ECHOED = {"out", "timings", "workers", "csv"}

COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "select-alpha": cmd_select_alpha}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = seeding.default_seed()
    timer = _Timer()
    failed = False
    try:
        result = COMMANDS[args.command](args, timer)
    except (ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if len(result) == 3:
        out, text, failed = result
    else:
        out, text = result
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    report = {"command": args.command, "parameters": params, **out}
    if args.timings:
        report["timings"] = {k: round(v, 6) for k, v in timer.phases.items()}
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=False)
            fh.write("\n")
    if failed:
        print("error: alpha calibration did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
