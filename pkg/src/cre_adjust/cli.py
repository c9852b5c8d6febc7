"""Command-line entry point.

Exit codes: 0 success, 1 a numerical check failed, 2 usage or input error.
"""
import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, fields

from . import moments
from .adversarial import SearchOptions, adversarial_search, optimal_center
from .checks import CHECK_TOLERANCE, check_passed, enum_check
from .dgp import ERROR_KINDS, HAT_LEVELS, OUTCOME_MODELS, DgpConfig, generate_population
from .errors import DegenerateDesignError, InputError, ResourceError, UsageError
from .estimators import ObservedDataset, batch_estimates, parse_kind
from .files import load_config, read_dataset, write_manifest, write_table
from .randomization import DEFAULT_ENUM_CAP, bernoulli, cre, cre_from_ratio
from .simulate import (DEFAULT_SIM_ESTIMATORS, METRIC_COLUMNS, ORACLE_COLUMNS, OracleGrid,
                       coefficient_of_variation_sq, oracle_sim, realistic_sim)
from .varest import batch_variance_for, wald_ci

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2
DEFAULT_ESTIMATORS = "unadj,adj2,adj2_dagger,db,adj3"

_ints = {"type": "integer"}
_model = {"enum": list(OUTCOME_MODELS)}
_error = {"enum": list(ERROR_KINDS)}
_ratio = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_alpha = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}
_gamma = {"type": "number", "exclusiveMinimum": 0}
_varest = {"enum": ["unbiased", "conservative"]}


def _list_of(item):
    return {"type": "array", "items": item, "minItems": 1}


ORACLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": _list_of({"type": "integer", "minimum": 5}),
        "alpha": _list_of(_alpha),
        "outcome_model": _list_of(_model),
        "error_kind": _list_of(_error),
        "gamma": _list_of(_gamma),
        "pi1": _list_of(_ratio),
        "N": {"type": "integer", "minimum": 5},
        "seed": _ints,
    },
}

_DGP_PROPS = {
    "n": {"type": "integer", "minimum": 5},
    "alpha": _alpha,
    "outcome_model": _model,
    "error_kind": _error,
    "gamma": _gamma,
    "pi1": _ratio,
    "N": {"type": "integer", "minimum": 5},
    "cov_decay": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "seed": _ints,
    "worst_case_hat": {"enum": list(HAT_LEVELS)},
}

MC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        **_DGP_PROPS,
        "K": {"type": "integer", "minimum": 2},
        "estimators": _list_of({"enum": ["unadj", "adj2", "adj2_dagger", "db", "adj3"]}),
        "var_estimators": _list_of(_varest),
        "level": _ratio,
    },
}

ADVERSARIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        **{k: _DGP_PROPS[k] for k in ("n", "alpha", "pi1", "N", "cov_decay", "seed")},
        "starts": {"type": "integer", "minimum": 1},
        "offset_dagger": {"type": "number"},
        "offset_unadj": {"type": "number"},
        "floor_unadj": {"type": "number"},
        "outer_iterations": {"type": "integer", "minimum": 1},
        "inner_iterations": {"type": "integer", "minimum": 1},
    },
}


def _design_for(args, n, t=None):
    if args.design == "bernoulli":
        if args.pi1 is None:
            raise UsageError("--pi1 is required for a Bernoulli design")
        return bernoulli(n, args.pi1)
    if args.n1 is not None:
        n1 = args.n1
    elif t is not None:
        n1 = int(t.sum())
    elif args.pi1 is not None:
        return cre_from_ratio(n, args.pi1)
    else:
        raise UsageError("a CRE design needs --n1 or --pi1")
    if t is not None and n1 != int(t.sum()):
        raise InputError(f"--n1 {n1} disagrees with the {int(t.sum())} treated units in the data")
    if t is not None and args.pi1 is not None and not math.isclose(args.pi1, n1 / n, abs_tol=0.5 / n):
        raise InputError(f"--pi1 {args.pi1} disagrees with n1/n = {n1}/{n} in the data")
    return cre(n, n1)


def _varest_kinds(choice):
    return ("unbiased", "conservative") if choice == "both" else (choice,)


def estimate_table(data, estimators, varest_kinds, level=0.95):
    """Point estimates, standard errors and Wald intervals, one row per estimator."""
    hat = data.hat()
    rows = []
    for name in estimators:
        kind = parse_kind(name)
        point = float(batch_estimates(kind, data.t, data.y, hat.H, data.design.pi1)[0])
        row = {"estimator": kind.value, "estimate": point}
        for v in varest_kinds:
            try:
                nu = float(batch_variance_for(kind, v, data.t, data.y, hat.H, data.design.pi1)[0])
            except UsageError:
                continue  # no variance estimator for this estimator; cells stay empty
            ci = wald_ci(point, nu, data.n, level)
            row.update({f"se_{v}": ci.se, f"ci_lower_{v}": ci.ci_lower, f"ci_upper_{v}": ci.ci_upper})
        rows.append(row)
    columns = ["estimator", "estimate"] + [f"{c}_{v}" for v in varest_kinds
                                           for c in ("se", "ci_lower", "ci_upper")]
    return columns, rows


def _print_rows(columns, rows, out=None):
    out = sys.stdout if out is None else out
    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return "" if v is None else str(v)
    widths = [max(len(c), *(len(cell(r.get(c))) for r in rows)) if rows else len(c) for c in columns]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)), file=out)
    for r in rows:
        print("  ".join(cell(r.get(c)).ljust(w) for c, w in zip(columns, widths)), file=out)


def cmd_estimate(args):
    X, t, y = read_dataset(args.data)
    d = _design_for(args, len(y), t)
    data = ObservedDataset(X, t, y, d)
    estimators = [s for s in args.estimators.split(",") if s.strip()]
    columns, rows = estimate_table(data, estimators, _varest_kinds(args.varest), args.level)
    _print_rows(columns, rows)
    if args.out:
        write_table(args.out, columns, rows)
        write_manifest(args.out, "estimate", {"data": str(args.data), "design": args.design,
                                              "pi1": d.pi1, "n1": d.n1, "estimators": estimators,
                                              "varest": args.varest, "level": args.level}, None)
    return EXIT_OK


def moment_rows(pop, d):
    rows = [("var_unadj", moments.var_unadj(pop, d)),
            ("bias_adj2", moments.bias_adj2(pop, d))]
    nf = moments.nu_f(pop, d)
    rows += [("nu_f", nf.variance), ("nu_f1", nf.components["nu1"]), ("nu_f2", nf.components["nu2"])]
    if pop.n >= 5:
        rows += [("exact_var_adj2", moments.exact_var_adj2(pop, d).variance),
                 ("var_adj3", moments.moments_adj3(pop, d).variance)]
    if pop.n >= 3:
        rows.append(("bias_db", moments.bias_db(pop, d)))
    rows.append(("nu_f_dagger", moments.nu_f_dagger(pop, d).variance))
    eff = moments.efficiency_criterion(pop, d)
    rows += [("criterion_lhs", eff["lhs"]), ("criterion_rhs", eff["rhs"]),
             ("criterion_improves", float(eff["improves"]))]
    c = optimal_center(pop, d)
    rows.append(("c_star", c.c_star))
    rows.append(("cov2", coefficient_of_variation_sq(pop)))
    return [{"quantity": k, "value": float(v)} for k, v in rows]


def cmd_moments(args):
    from .population import FixedPopulation

    X, _, y = read_dataset(args.data, require_treatment=False)
    d = _design_for(args, len(y))
    if not d.is_cre:
        raise UsageError("closed-form moments are available for CRE designs only")
    rows = moment_rows(FixedPopulation(X, y), d)
    _print_rows(["quantity", "value"], rows)
    if args.out:
        write_table(args.out, ["quantity", "value"], rows)
        write_manifest(args.out, "moments", {"data": str(args.data), "n1": d.n1}, None)
    return EXIT_OK


def cmd_enum_check(args):
    if not 1 <= args.n1 <= args.n:
        raise UsageError(f"need 1 <= n1 <= n, got n={args.n}, n1={args.n1}")
    worst = enum_check(args.n, args.n1, args.p, args.seed, args.reps, args.cap, args.threads)
    rows = [{"formula": k, "max_rel_discrepancy": v, "ok": v <= CHECK_TOLERANCE} for k, v in worst.items()]
    _print_rows(["formula", "max_rel_discrepancy", "ok"], rows)
    if args.out:
        write_table(args.out, ["formula", "max_rel_discrepancy", "ok"], rows)
        write_manifest(args.out, "enum-check", {"n": args.n, "n1": args.n1, "p": args.p,
                                                "reps": args.reps}, args.seed)
    return EXIT_OK if check_passed(worst) else EXIT_CHECK_FAILED


def cmd_oracle_sim(args):
    doc = load_config(args.config, ORACLE_SCHEMA) if args.config else {}
    grid = OracleGrid(**{k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()})
    rows = oracle_sim(grid, workers=args.threads)
    write_table(args.out, ORACLE_COLUMNS, rows)
    write_manifest(args.out, "oracle-sim", _jsonable(asdict(grid)), grid.seed, {"rows": len(rows)})
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _jsonable(d):
    return json.loads(json.dumps(d, default=list))


def cmd_mc_sim(args):
    doc = load_config(args.config, MC_SCHEMA) if args.config else {}
    dgp_keys = {f.name for f in fields(DgpConfig)}
    cfg = DgpConfig(**{k: v for k, v in doc.items() if k in dgp_keys})
    K = doc.get("K", 20000)
    estimators = doc.get("estimators", list(DEFAULT_SIM_ESTIMATORS))
    varests = doc.get("var_estimators", ["unbiased", "conservative"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = realistic_sim(cfg, K, estimators, varests, cfg.seed, args.threads, doc.get("level", 0.95))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    keyed = [{**_config_key(cfg), **r} for r in res.rows]
    columns = list(_config_key(cfg)) + list(METRIC_COLUMNS)
    write_table(args.out, columns, keyed)
    write_manifest(args.out, "mc-sim", {**cfg.as_dict(), "K": K, "estimators": estimators,
                                        "var_estimators": varests}, cfg.seed,
                   {"taubar": res.taubar, "low_replicates": res.low_replicates})
    _print_rows(["estimator", "varest", "coverage", "sd_inflation_ratio", "rmse"], res.rows)
    return EXIT_OK


def _config_key(cfg):
    return {"n": cfg.n, "alpha": cfg.alpha, "p": cfg.p, "outcome_model": cfg.outcome_model,
            "error_kind": cfg.error_kind, "gamma": cfg.gamma, "pi1": cre_from_ratio(cfg.n, cfg.pi1).pi1}


def cmd_adversarial(args):
    doc = load_config(args.config, ADVERSARIAL_SCHEMA) if args.config else {}
    dgp = {k: doc[k] for k in ("n", "alpha", "pi1", "N", "cov_decay", "seed") if k in doc}
    dgp.setdefault("n", 50)
    dgp.setdefault("alpha", 0.2)
    cfg = DgpConfig(**dgp)
    opt_keys = {f.name for f in fields(SearchOptions)} - {"seed", "workers"}
    opts = SearchOptions(**{k: v for k, v in doc.items() if k in opt_keys},
                         seed=cfg.seed, workers=args.threads)
    pop = generate_population(cfg)
    d = cre_from_ratio(cfg.n, cfg.pi1)
    res = adversarial_search(pop.hat, d, opts)
    rows = [{"unit": i + 1, "v": float(x)} for i, x in enumerate(res.v)]
    write_table(args.out, ["unit", "v"], rows)
    summary = {"converged": res.converged, "objective": res.objective,
               "constraint_slacks": list(res.constraint_slacks), "iterations": res.iterations,
               "best_start": res.start, "feasible_starts": res.feasible_starts, **res.details}
    write_manifest(args.out, "adversarial", {**cfg.as_dict(), **asdict(opts)}, cfg.seed,
                   {"result": summary})
    print(json.dumps(summary, indent=2))
    return EXIT_OK if res.converged else EXIT_CHECK_FAILED


def build_parser():
    ap = argparse.ArgumentParser(prog="cre-adjust", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--threads", type=int, default=1, help="cap on worker threads")
        return p

    e = common(sub.add_parser("estimate", help="estimate the treated mean from a dataset CSV"))
    e.add_argument("--data", required=True)
    e.add_argument("--design", choices=["cre", "bernoulli"], default="cre")
    e.add_argument("--pi1", type=float)
    e.add_argument("--n1", type=int)
    e.add_argument("--estimators", default=DEFAULT_ESTIMATORS)
    e.add_argument("--varest", choices=["unbiased", "conservative", "both"], default="both")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    m = common(sub.add_parser("moments", help="closed-form bias/variance for a population CSV (y, x1..xp)"))
    m.add_argument("--data", required=True)
    m.add_argument("--design", choices=["cre"], default="cre")
    m.add_argument("--pi1", type=float)
    m.add_argument("--n1", type=int)
    m.add_argument("--out")
    m.set_defaults(func=cmd_moments)

    c = common(sub.add_parser("enum-check", help="closed forms vs exhaustive enumeration"))
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--n1", type=int, required=True)
    c.add_argument("--p", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--reps", type=int, default=20)
    c.add_argument("--cap", type=int, default=DEFAULT_ENUM_CAP)
    c.add_argument("--out")
    c.set_defaults(func=cmd_enum_check)

    for name, func, helptext in (("oracle-sim", cmd_oracle_sim, "formula-only relative efficiencies"),
                                 ("mc-sim", cmd_mc_sim, "Monte Carlo metrics on one population"),
                                 ("adversarial", cmd_adversarial, "search for a witness outcome vector")):
        s = common(sub.add_parser(name, help=helptext))
        s.add_argument("--config", help="JSON config; omitted keys take their defaults")
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, InputError, ResourceError, DegenerateDesignError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
