"""Command-line front end.

Exit status: 0 success, 1 failed check or invariant, 2 usage or config error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import config as config_mod
from .bounds import (
    AlphaVerdict,
    BoundInputs,
    ConvexityConstants,
    asymptotic_bound,
    comparison_surface,
    phi,
    validate_alpha,
)
from .config import ConfigError
from .experiment import (
    ExperimentConfig,
    check_fisher_trace,
    check_one_step_contraction,
    check_sampler_mean,
    check_score_mean,
    compare_with_suff_stat,
    run_experiment,
)
from .expfam import ExpFamSpec, convexity_constants, score_fd_error
from .paths import verify_drift_bound
from .rng import stream
from .tracker import DivergenceError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FD_TOLERANCE = 1e-6
DRIFT_RTOL = 1e-12


def fmt(value) -> str:
    """Locale-independent 17-significant-digit rendering."""
    return format(float(value), ".17g")


def _json_value(value):
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, AlphaVerdict):
        return value.value
    return value


def write_json(path, record):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_value(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, columns, chash):
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


class _Context:
    def __init__(self, args, require_model=True):
        overrides = list(args.set or [])
        if args.seed is not None:
            overrides.append(f"experiment.seed={args.seed}")
        self.cfg = config_mod.load(args.config, overrides, require_model=require_model)
        self.hash = config_mod.config_hash(self.cfg)
        self.out = args.out
        self.workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def summary(self, **fields):
        return {**fields, "config": self.cfg, "config_hash": self.hash}


def _alpha_setting(cfg):
    alpha = cfg["tracker.alpha"]
    if isinstance(alpha, str) and alpha != "optimal":
        raise ConfigError(f"tracker.alpha must be a number or 'optimal', got {alpha!r}")
    return alpha


def experiment_config(cfg, replications=None, horizon=None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a flat config mapping."""
    model = config_mod.build_model_from(cfg)
    box = config_mod.build_box(cfg)
    path = config_mod.build_path(cfg, box)
    try:
        return ExperimentConfig(
            model=model,
            path=path,
            alpha=_alpha_setting(cfg),
            lambda1=cfg["tracker.lambda1"],
            projection=config_mod.build_projection(cfg, box),
            replications=int(replications or cfg["experiment.replications"]),
            horizon=int(horizon or cfg["experiment.horizon"]),
            tail_window=None if horizon else cfg["experiment.tail_window"],
            master_seed=int(cfg["experiment.seed"]),
            resolution=int(cfg["experiment.resolution"]),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def cmd_simulate(args) -> int:
    ctx = _Context(args)
    exp = experiment_config(ctx.cfg)
    try:
        rep = run_experiment(exp, workers=ctx.workers)
    except DivergenceError as err:
        print(f"tvsgd simulate: {err}", file=sys.stderr)
        return EXIT_FAIL
    t = np.arange(1, rep.horizon + 1)
    comparator = rep.comparator_rmse if rep.comparator_rmse is not None else np.full(rep.horizon, np.nan)
    write_csv(ctx.path("simulate.csv"), ["t", "rmse", "rmse_se", "comparator_rmse", "bound"],
              [t, rep.rmse, rep.rmse_se, comparator, np.full(rep.horizon, rep.theoretical_bound)],
              ctx.hash)
    asserted = rep.verdict is AlphaVerdict.ADMISSIBLE
    ok = rep.bound_respected or not asserted
    write_json(ctx.path("simulate.json"), ctx.summary(
        alpha=rep.alpha,
        ell=rep.constants.ell,
        lip=rep.constants.lip,
        alpha_verdict=rep.verdict,
        tail_sup=rep.tail_sup,
        tail_sup_se=rep.tail_sup_se,
        theoretical_bound=rep.theoretical_bound,
        bound_asserted=asserted,
        bound_respected=rep.bound_respected,
        violations=rep.contraction_violations,
    ))
    if not ok:
        print(f"tvsgd simulate: tail_sup {rep.tail_sup} exceeds bound {rep.theoretical_bound}",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def bound_record(cfg) -> dict:
    """The ``{alpha, phi, bound, admissible, C1, C2}`` record for a config."""
    if cfg["bound.ell"] is not None or cfg["bound.lip"] is not None:
        if cfg["bound.ell"] is None or cfg["bound.lip"] is None:
            raise ConfigError("bound.ell and bound.lip must be given together")
        try:
            cc = ConvexityConstants(cfg["bound.ell"], cfg["bound.lip"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
        d = cfg["bound.d"] if cfg["bound.d"] is not None else 1
        k = cfg["bound.k"]
    else:
        if not cfg["model.id"]:
            raise ConfigError("give bound.ell and bound.lip, or model.id")
        model = config_mod.build_model_from(cfg)
        box = config_mod.build_box(cfg)
        try:
            cc = convexity_constants(model, box, int(cfg["experiment.resolution"]))
        except ValueError as err:
            raise ConfigError(str(err)) from None
        d = cfg["bound.d"] if cfg["bound.d"] is not None else model.param_dim
        k = cfg["bound.k"]
        if k is None:
            k = config_mod.build_path(cfg, box).declared_k
    if k is None:
        k = 0.0
    alpha = _alpha_setting(cfg)
    alpha = cc.optimal_alpha if alpha == "optimal" else float(alpha)
    try:
        inp = BoundInputs(cc, float(k), int(d), alpha)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    f = phi(alpha, cc.lip)
    return {
        "alpha": alpha,
        "phi": f,
        "bound": asymptotic_bound(inp) if f < 1.0 else None,
        "admissible": validate_alpha(alpha, cc) is AlphaVerdict.ADMISSIBLE,
        "C1": cc.c1,
        "C2": cc.c2,
    }


def cmd_bound(args) -> int:
    ctx = _Context(args, require_model=False)
    record = bound_record(ctx.cfg)
    write_json(ctx.path("bound.json"), record)
    print(json.dumps(_json_value(record), sort_keys=True))
    return EXIT_OK


def surface_grid(cfg):
    n_ell, n_gap = int(cfg["surface.n_ell"]), int(cfg["surface.n_gap"])
    if n_ell < 1 or n_gap < 1:
        raise ConfigError("surface grids must be nonempty")
    if not 0 < cfg["surface.ell_min"] <= cfg["surface.ell_max"]:
        raise ConfigError("need 0 < surface.ell_min <= surface.ell_max")
    if not 0 <= cfg["surface.gap_min"] <= cfg["surface.gap_max"]:
        raise ConfigError("need 0 <= surface.gap_min <= surface.gap_max")
    x = np.geomspace(cfg["surface.ell_min"], cfg["surface.ell_max"], n_ell)
    y = np.linspace(cfg["surface.gap_min"], cfg["surface.gap_max"], n_gap)
    return x, y


def cmd_surface(args) -> int:
    ctx = _Context(args, require_model=False)
    cfg = ctx.cfg
    x, y = surface_grid(cfg)
    k = float(cfg["surface.k"])
    try:
        raw = comparison_surface(k, x, y, clamp=False)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    ell, gap = np.meshgrid(x, y, indexing="ij")
    header = ["ell", "L_minus_ell", "z"]
    columns = [ell.ravel(), gap.ravel(), np.minimum(raw, 0.0).ravel()]
    if cfg["surface.raw"]:
        header.append("margin")
        columns.append(raw.ravel())
    write_csv(ctx.path(f"surface_K{fmt(k)}.csv"), header, columns, ctx.hash)
    return EXIT_OK


def cmd_compare(args) -> int:
    ctx = _Context(args)
    exp = experiment_config(ctx.cfg)
    try:
        rec = compare_with_suff_stat(exp, workers=ctx.workers)
    except DivergenceError as err:
        print(f"tvsgd compare: {err}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as err:
        raise ConfigError(str(err)) from None
    rep = rec.report
    write_csv(ctx.path("compare.csv"),
              ["t", "rmse", "comparator_rmse", "comparator_analytic", "comparator_mse_se"],
              [np.arange(1, rep.horizon + 1), rep.rmse, rec.comparator_rmse,
               rec.comparator_analytic, rec.comparator_mse_se], ctx.hash)
    write_json(ctx.path("compare.json"), ctx.summary(
        tracker_tail_sup=rec.tracker_tail_sup,
        comparator_tail_min=rec.comparator_tail_min,
        margin=rec.margin,
        margin_sign=rec.margin_sign,
        tracker_wins_empirically=rec.tracker_wins_empirically,
        sampler_flags=rec.sampler_flags,
    ))
    if rec.sampler_flags.size:
        print(f"tvsgd compare: comparator mismatch at {rec.sampler_flags.size} steps "
              "(sampler bug?)", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def run_checks(cfg, workers=1) -> dict:
    """All verdicts for ``cmd_check``; each entry has a boolean ``passed``."""
    model = config_mod.build_model_from(cfg)
    box = config_mod.build_box(cfg)
    path = config_mod.build_path(cfg, box)
    seed = int(cfg["experiment.seed"])
    n = int(cfg["check.n_samples"])
    checks = {}

    gen = stream(seed, 5)
    n_fd = int(cfg["check.fd_points"])
    lam = box.lo + (box.hi - box.lo) * gen.random((n_fd, box.dim))
    x = model.sampler(lam, gen)
    err = score_fd_error(model, x, lam)
    checks["score_finite_difference"] = {
        "passed": bool(np.all(err <= FD_TOLERANCE)), "max_rel_error": float(err.max()),
        "tolerance": FD_TOLERANCE, "points": n_fd,
    }

    grid_pts = int(cfg["check.grid_points"])
    cc = None
    if isinstance(model, ExpFamSpec):
        try:
            cc = convexity_constants(model, box, int(cfg["experiment.resolution"]))
        except ValueError as err_:
            checks["convexity"] = {"passed": False, "error": str(err_)}
    if cc is not None:
        fisher = check_fisher_trace(model, box, n, grid_pts, seed, cc)
        checks["fisher_trace"] = {
            "passed": all(r.passed for r in fisher),
            "bound": fisher[0].bound,
            "points": [{"lam": r.lam, "estimate": r.estimate, "se": r.se, "passed": r.passed}
                       for r in fisher],
        }
        grid = [r.lam for r in fisher]
        score_means = [check_score_mean(model, g, n, seed, i) for i, g in enumerate(grid)]
        checks["score_mean"] = {
            "passed": all(c.passed for c in score_means),
            "max_z": float(max(c.z.max() for c in score_means)),
        }
        sampler = [check_sampler_mean(model, g, n, seed, i) for i, g in enumerate(grid)]
        checks["sampler_mean"] = {
            "passed": all(c.passed for c in sampler),
            "max_z": float(max(c.z.max() for c in sampler)),
        }

    observed = verify_drift_bound(path, int(cfg["check.drift_horizon"]))
    checks["drift_bound"] = {
        "passed": observed <= path.declared_k * (1 + DRIFT_RTOL),
        "max_step": observed, "declared_k": path.declared_k,
    }

    if cc is not None:
        exp = experiment_config(cfg, int(cfg["check.replications"]), int(cfg["check.horizon"]))
        try:
            con = check_one_step_contraction(exp, workers)
        except DivergenceError as err_:
            checks["contraction"] = {"passed": False, "verdict": "diverged", "error": str(err_)}
        else:
            checks["contraction"] = {
                "passed": con.passed(), "verdict": con.verdict,
                "flagged_steps": con.flagged_steps, "fraction_flagged": con.fraction_flagged,
            }
    return checks


def cmd_check(args) -> int:
    ctx = _Context(args)
    checks = run_checks(ctx.cfg, ctx.workers)
    passed = all(c["passed"] for c in checks.values())
    write_json(ctx.path("check.json"), ctx.summary(passed=passed, checks=checks))
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}")
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "surface": cmd_surface,
    "compare": cmd_compare,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        help="override a config key (repeatable)")
    common.add_argument("--workers", type=int, metavar="N",
                        help="worker processes (default: all cores); never changes results")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (experiment.seed)")
    parser = argparse.ArgumentParser(prog="tvsgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo tracking error vs the bound")
    sub.add_parser("bound", parents=[common], help="closed-form bound for one step size")
    sub.add_parser("surface", parents=[common], help="comparison-margin surface grid")
    sub.add_parser("compare", parents=[common], help="tracker vs the sufficient statistic")
    sub.add_parser("check", parents=[common], help="numerical checks of the model assumptions")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is not None and args.workers < 1:
        parser.error("--workers must be positive")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be a 64-bit unsigned integer")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"tvsgd {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
