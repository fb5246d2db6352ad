"""Command-line entry point ``netmimo-overlay``.

Exit codes: 0 success, 1 domain failure (infeasible scenario, solver did not
converge), 2 usage error (bad flag, unknown key, missing file). Failures
print one line ``error kind=<kind> exit=<code> msg=<text>`` on stderr, and
every run prints ``seed=<n>`` there. Output files are written to a
temporary file and renamed into place, so a failed run leaves nothing
behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import ConfigError, fig3_path, load_scenario, parse_overrides, read_toml
from .core import ScenarioError
from .fading import ApproxCheckConfig, approx_check
from .game import (SolverConfig, best_response_dynamics, centralized_oracle, solve_ne,
                   verify_ne)
from .harness import campaign_config_from_dict, plot_tables, run_campaign
from .scheduling import schedule_scenario
from .throughput import OverlayModel

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
BUILTIN = {"@fig3": fig3_path}


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------
def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(rows, columns=None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.path.abspath(path)
    d = os.path.dirname(path)
    if not os.path.isdir(d):
        raise UsageError(f"output directory does not exist: {d}")
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Sink:
    """Collects outputs and commits them only once the command succeeded."""

    def __init__(self):
        self.files = []
        self.stdout = []

    def emit(self, text, path=None, mkdir=False):
        if path is None:
            self.stdout.append(text)
        else:
            self.files.append((path, text, mkdir))

    def commit(self):
        for path, text, mkdir in self.files:
            if mkdir:
                os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            atomic_write(path, text)
        for text in self.stdout:
            sys.stdout.write(text)
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# Shared argument handling
# ---------------------------------------------------------------------------
def _resolve_path(p):
    return BUILTIN[p]() if p in BUILTIN else p


def _scenario(args):
    overrides = parse_overrides(args.set)
    path = _resolve_path(args.scenario)
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    sc = load_scenario(path, overrides)
    args._seed = sc.rng_seed
    return sc, sc.rng_seed


def _float_list(text, name):
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"{name}: expected comma-separated numbers") from exc
    if not vals:
        raise UsageError(f"{name}: empty list")
    return vals


def _theta_arg(text, n_bs, name="--theta"):
    vals = _float_list(text, name)
    if len(vals) == 1:
        vals = vals * n_bs
    if len(vals) != n_bs:
        raise UsageError(f"{name}: need 1 or {n_bs} values")
    th = np.array(vals)
    if np.any((th < 0) | (th > 1)):
        raise UsageError(f"{name}: values must lie in [0, 1]")
    return th


def _solver_cfg(args):
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["tol_a"] = args.tol
    if getattr(args, "grid_step", None) is not None:
        kw["grid_step"] = args.grid_step
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _model(args):
    sc, seed = _scenario(args)
    sets = schedule_scenario(sc)
    return sc, sets, OverlayModel(sc, sets), seed


def _theta_rows(theta, model, extra=None):
    rows = []
    payoff = model.payoff(theta)
    for k in range(model.n_bs):
        row = {"bs": k + 1, "theta": float(theta[k]), "payoff": float(payoff[k])}
        if extra:
            row.update({key: float(v[k]) for key, v in extra.items()})
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_schedule(args, sink):
    sc, sets, _, seed = _model(args)
    rows = []
    for r in sets.records(sc.ms_ids):
        bs = r["serving_bs"]
        rows.append({"id": r["id"], "label": r["label"],
                     "serving_bs": None if bs is None else bs + 1})
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "mobiles": rows}), args.out)
    else:
        sink.emit(to_csv(rows, ["id", "label", "serving_bs"]), args.out)
    return EXIT_OK


def cmd_solve(args, sink):
    sc, sets, model, seed = _model(args)
    cfg = _solver_cfg(args)
    trace = solve_ne(model, cfg)
    th = trace.ne
    if args.format == "json":
        doc = {"seed": seed, "theta_star": th, "objective": trace.objective,
               "iterations": trace.n_iterations, "converged": trace.converged,
               "anchor": trace.anchor, "initial_bracket": trace.initial_bracket,
               "private": [m for m in sets.private], "common": list(sets.common),
               "tol_a": cfg.tol_a}
        if args.trace:
            doc["trace"] = trace.rows()
        sink.emit(to_json(doc), args.out)
    else:
        sink.emit(to_csv(_theta_rows(th, model, {"anchor": trace.anchor})), args.out)
    if not trace.converged:
        raise DomainError(f"equilibrium solver did not converge in {cfg.max_iter} iterations")
    return EXIT_OK


def cmd_convergence(args, sink):
    sc, sets, model, seed = _model(args)
    cfg = _solver_cfg(args)
    trace = solve_ne(model, cfg)
    rows = trace.rows()
    cols = ["i", "a_target", "a_achieved"] + [f"theta_{k + 1}" for k in range(model.n_bs)] \
        + ["bracket_width"]
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "converged": trace.converged, "iterations": rows}), args.out)
    else:
        sink.emit(to_csv(rows, cols), args.out)
    if not trace.converged:
        raise DomainError("equilibrium solver did not converge")
    return EXIT_OK


def cmd_centralized(args, sink):
    sc, sets, model, seed = _model(args)
    cfg = _solver_cfg(args)
    th = centralized_oracle(model, cfg.grid_step)
    obj = float(model.objective(th))
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "theta": th, "objective": obj,
                           "grid_step": cfg.grid_step}), args.out)
    else:
        sink.emit(to_csv(_theta_rows(th, model)), args.out)
    return EXIT_OK


def cmd_evaluate(args, sink):
    sc, sets, model, seed = _model(args)
    th = _theta_arg(args.theta, model.n_bs)
    rep = model.report(th)
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "theta": th, "objective": float(model.objective(th)),
                           "binding_ms": rep.binding_ms, "per_ms": rep.rows(),
                           "is_ne": verify_ne(th, model)}), args.out)
    else:
        sink.emit(to_csv(rep.rows(), ["ms_id", "raw", "weighted", "binding"]), args.out)
    return EXIT_OK


def cmd_best_response(args, sink):
    sc, sets, model, seed = _model(args)
    th0 = None if args.theta0 is None else _theta_arg(args.theta0, model.n_bs, "--theta0")
    res = best_response_dynamics(model, th0, n_steps=args.steps,
                                 simultaneous=not args.sequential, cfg=_solver_cfg(args))
    rows = [dict({"step": i}, **{f"theta_{k + 1}": float(v) for k, v in enumerate(h)},
                 objective=float(model.objective(h))) for i, h in enumerate(res.history)]
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "converged": res.converged, "cycling": res.cycling,
                           "theta": res.theta, "steps": len(res.history) - 1,
                           "history": rows}), args.out)
    else:
        sink.emit(to_csv(rows), args.out)
    return EXIT_OK


def cmd_approx_check(args, sink):
    seed = args._seed = 0 if args.seed is None else args.seed
    kw = dict(n_t_p=args.n_t_p, n_t_c=args.n_t_c, n_r=args.n_r, theta=args.theta,
              n_draws=args.n_draws, seed=seed)
    if args.snr_db is not None:
        kw["snr_grid_db"] = tuple(_float_list(args.snr_db, "--snr-db"))
    try:
        cfg = ApproxCheckConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = approx_check(cfg)
    rows = [r.row() for r in res]
    if args.format == "json":
        sink.emit(to_json({"seed": seed, "config": {k: v for k, v in kw.items()},
                           "points": [dict(r.row(), **r.moments) for r in res]}), args.out)
    else:
        sink.emit(to_csv(rows, ["snr_db", "mc_mean", "ci95", "closed_form", "rel_error"]),
                  args.out)
    return EXIT_OK


def cmd_campaign(args, sink):
    data = read_toml(_resolve_path(args.config)) if args.config else {}
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = campaign_config_from_dict(data, overrides)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from exc
    args._seed = cfg.seed
    res = run_campaign(cfg, jobs=args.jobs)
    if args.format == "json":
        doc = res.summary()
        doc["rows"] = res.rows
        sink.emit(to_json(doc), args.out)
    else:
        sink.emit(res.rows_csv(), args.out)
        if args.out:
            stem = os.path.splitext(args.out)[0]
            sink.emit(to_json(res.summary()), stem + ".summary.json")
    if args.emit_plots_data:
        for name, text in plot_tables(res).items():
            sink.emit(text, os.path.join(args.emit_plots_data, name), mkdir=True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netmimo-overlay",
                description="Open-loop network-MIMO overlay: scheduling, power-split game, checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, fmt, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True,
                            help="scenario TOML file (or @fig3 for the bundled one)")
            sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                            help="override a scenario key (repeatable)")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)
        sp.add_argument("--seed", type=int, help="override the scenario/config seed")

    sp = sub.add_parser("schedule", help="label MSs as private/common/unassigned")
    common(sp, "csv")
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("solve", help="distributive equilibrium power split")
    common(sp, "json")
    sp.add_argument("--tol", type=float, help="relative stopping gap of the bisection")
    sp.add_argument("--max-iter", type=int, help="bisection iteration cap")
    sp.add_argument("--trace", action="store_true", help="include per-iteration records")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("convergence", help="per-iteration bisection report")
    common(sp, "csv")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("centralized", help="exhaustive grid search of the max-min split")
    common(sp, "json")
    sp.add_argument("--grid-step", type=float)
    sp.set_defaults(func=cmd_centralized)

    sp = sub.add_parser("evaluate", help="throughput report at a given split")
    common(sp, "json")
    sp.add_argument("--theta", required=True, help="one value or one per BS, comma separated")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("best-response", help="iterate best replies (may cycle)")
    common(sp, "json")
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--theta0", help="starting split (default 0.5 everywhere)")
    sp.add_argument("--sequential", action="store_true", help="update BSs one at a time")
    sp.set_defaults(func=cmd_best_response)

    sp = sub.add_parser("approx-check", help="Monte-Carlo check of the closed-form rate")
    common(sp, "csv", scenario=False)
    sp.add_argument("--n-draws", type=int, default=10_000)
    sp.add_argument("--snr-db", help="comma-separated SNR grid in dB (default 0..20 step 2.5)")
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--n-r", type=int, default=4)
    sp.add_argument("--n-t-p", type=int, default=2)
    sp.add_argument("--n-t-c", type=int, default=2)
    sp.set_defaults(func=cmd_approx_check)

    sp = sub.add_parser("campaign", help="drop-based comparison of all schemes")
    common(sp, "csv", scenario=False)
    sp.add_argument("--config", help="campaign TOML file (default: built-in desk-scale settings)")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a campaign field (repeatable)")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--emit-plots-data", metavar="DIR",
                    help="write fig_power/fig_xi_p/fig_xi_c/fig_convergence CSVs to DIR")
    sp.set_defaults(func=cmd_campaign)
    return p


def _fail(kind, code, msg):
    msg = " ".join(str(msg).split())
    sys.stderr.write(f"error kind={kind} exit={code} msg={msg}\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    sink = _Sink()
    try:
        args = parser.parse_args(argv)
        args._seed = None
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        code = args.func(args, sink)
        sys.stderr.write(f"seed={args._seed}\n")
        sink.commit()
        return code
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except ConfigError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except DomainError as exc:
        sys.stderr.write(f"seed={getattr(args, '_seed', None)}\n")
        sink.commit()
        return _fail("domain", EXIT_DOMAIN, exc)
    except ScenarioError as exc:
        return _fail("domain", EXIT_DOMAIN, exc)


if __name__ == "__main__":
    sys.exit(main())
