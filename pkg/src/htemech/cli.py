"""Command-line interface: ``htemech <command> [options]``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or configuration
error, 3 input/output error.  Options can also be given in a JSON file via
``--config``; keys use the long option names with underscores, and explicit
command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .csvio import SCHEMAS, CsvSchemaError, write_table
from .dgp import DGPError, TransformSpec, builtin_dgp, dgp_from_dict, sample_units
from .effects import (EffectsError, check_effective, check_exclusion, conditional_effects, effects_rows,
                      exact_available, is_mdv, is_relevant, oracle_voter_cate, verify_identification,
                      verify_linear_invariance)
from .estimate import (DesignSpec, EstimationError, diff_cate_test, fit_logit, fit_ols, read_dataset,
                       recover_utility, simulate_rum, utility_interaction_fit)
from .inference import (BayesConfig, ExclusionRoutingError, InferenceError, MonotoneSpec, bayes_density,
                        bayes_point, check_sign_conditions, classify_case, monotone_hte, noise_from_dict)
from .numerics import Grid1D, NumericalDomainError, std_normal_cdf
from .simulate import (DEFAULT_NS, DEFAULT_QS, ESTIMATORS, OUTCOMES, SimGrid, SimulationError, mu_for_support,
                       power_table, run_grid, write_power_csv, write_results_csv)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _words(text):
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _out_path(args, name):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "__dict__"):
        return o.__dict__
    raise TypeError(type(o).__name__)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# DGP selection
# ---------------------------------------------------------------------------

def _load_dgp(args):
    cfg = getattr(args, "dgp", None)
    if isinstance(cfg, dict):
        return dgp_from_dict(cfg)
    preset = args.preset
    if preset == "voter":
        mu = args.mu if args.mu is not None else (mu_for_support(args.q) if args.q is not None else 0.0)
        return builtin_dgp("voter", mu=mu)
    if preset in ("two_mech_shared",):
        return builtin_dgp("two_mech", shared_moderator=True)
    if preset == "two_mech":
        return builtin_dgp("two_mech", shared_moderator=bool(getattr(args, "shared_moderator", False)))
    return builtin_dgp(preset)


def _add_dgp_options(p):
    p.add_argument("--preset", default="voter", choices=("voter", "turnout", "two_mech", "two_mech_shared"))
    p.add_argument("--mu", type=float, default=None, help="voter noise mean")
    p.add_argument("--q", type=float, default=None, help="voter support share (sets mu)")
    p.add_argument("--shared-moderator", action="store_true", help="two_mech: lambda moderates both mechanisms")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    if args.n < 1:
        raise UsageError("n must be a positive integer")
    dgp = _load_dgp(args)
    rng = np.random.default_rng(args.seed)
    u = sample_units(dgp, args.n, rng)
    path = _out_path(args, args.file or "dataset.csv")
    if dgp.name == "voter":
        header = SCHEMAS["voter_dataset"]
        cols = [u["z"], u["lambda"], u["a"], u["eps"], u["y"], u["y_t"]]
        schema = "voter_dataset"
    else:
        med = dgp.mediator_names
        header = ("unit_id", "z", *dgp.covariate_names, *(f"m_{j + 1}" for j in range(len(med))), "y", "y_t")
        cols = [u["z"], *(u[c] for c in dgp.covariate_names), *(u[m] for m in med), u["y"], u["y_t"]]
        schema = "dataset"
    rows = ([i, *(float(c[i]) for c in cols)] for i in range(args.n))
    write_table(path, schema, header, rows)
    print(f"wrote {args.n} units to {path}")
    return EXIT_OK


def _design_from_args(args):
    if args.design == "custom":
        if not args.terms:
            raise UsageError("custom design needs --terms")
        return DesignSpec.custom(_words(args.terms), args.response)
    if args.design == "factor":
        return DesignSpec.factor(args.response)
    return DesignSpec.linear(args.response)


def cmd_estimate(args):
    data = read_dataset(args.data)
    design = _design_from_args(args)
    fit = fit_ols(data, design, errors=args.errors)
    inter = [t for t in fit.names if ":" in t]
    print(f"OLS ({fit.errors} errors), n={fit.n}, df={fit.df}")
    print(f"{'coef':<12}{'estimate':>12}{'se':>12}{'t':>10}{'p':>10}")
    for r in fit.summary_rows(args.alpha):
        print(f"{r['coef']:<12}{r['estimate']:>12.5f}{r['se']:>12.5f}{r['t']:>10.3f}{r['p']:>10.4f}")
    payload = {"fit": fit.to_dict()}
    if inter:
        test = diff_cate_test(fit, inter, args.alpha, bonferroni=True)
        payload["diff_cate_test"] = test.to_dict()
        print(f"joint test of {', '.join(inter)}: F={test.joint_stat:.4f}, p={test.joint_p:.4g}, "
              f"reject={test.joint_reject}, bonferroni={test.bonferroni_reject}")
    if args.out:
        rows = [[r["coef"], r["estimate"], r["se"], r["t"], r["p"], r["reject"]] for r in fit.summary_rows(args.alpha)]
        write_table(_out_path(args, "fit.csv"), "fit", ("coef", "estimate", "se", "t", "p", "reject"), rows)
        _write_json(_out_path(args, "fit.json"), payload)
    return EXIT_OK


def cmd_power(args):
    estimators = _words(args.estimators)
    outcomes = _words(args.outcomes)
    for e in estimators:
        if e not in ESTIMATORS:
            raise UsageError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
    for o in outcomes:
        if o not in OUTCOMES:
            raise UsageError(f"unknown outcome {o!r}; choose from {OUTCOMES}")
    ns = [int(v) for v in _floats(args.ns)]
    qs = _floats(args.qs)
    grid = SimGrid.default(reps=args.reps, root_seed=args.seed, alpha=args.alpha, ns=ns, qs=qs,
                           outcomes=outcomes, estimators=estimators, errors=args.errors)
    results = run_grid(grid, workers=args.workers)
    table = power_table(results, grid)
    power_path = _out_path(args, "power.csv")
    write_power_csv(power_path, table)
    if not args.skip_results:
        write_results_csv(_out_path(args, "results.csv"), results, grid)
    invalid = sum(1 for r in results if not r.valid)
    print(f"{len(grid.cells)} cells x {grid.reps} reps; {invalid} invalid replications; power table in {power_path}")
    if table.low_precision:
        print(f"warning: reps={grid.reps} gives low-precision power estimates")
    return EXIT_OK


def cmd_oracle(args):
    mu = args.mu if args.mu is not None else (mu_for_support(args.q) if args.q is not None else 0.0)
    rows = []
    for lam in _floats(args.lambdas):
        rows.append(("lambda", lam, oracle_voter_cate("y1", "lambda", lam, mu), oracle_voter_cate("y2", "lambda", lam, mu)))
    for a in (-1.0, 0.0, 1.0):
        rows.append(("a", a, oracle_voter_cate("y1", "a", a, mu), oracle_voter_cate("y2", "a", a, mu)))
    print(f"closed-form voter CATEs at mu={mu:g}")
    print(f"{'moderator':<10}{'value':>8}{'cate_y1':>12}{'cate_y2':>12}")
    for m, v, c1, c2 in rows:
        print(f"{m:<10}{v:>8.2f}{c1:>12.6f}{c2:>12.6f}")
    if args.out:
        write_table(_out_path(args, "oracle.csv"), "oracle", ("moderator", "value", "cate_y1", "cate_y2"), rows)
    return EXIT_OK


def _default_grid(dgp, covariate):
    cov = dgp.covariate(covariate)
    if cov.dist == "discrete_uniform":
        return list(cov.params["values"])
    if cov.dist == "uniform":
        lo, hi = cov.params["lo"], cov.params["hi"]
        return [lo + (hi - lo) * k / 10 for k in range(1, 10)]
    if cov.dist == "normal":
        m, s = cov.params["mean"], cov.params["sd"]
        return [m + s * k for k in (-2, -1, 0, 1, 2)]
    return [cov.params["value"]]


def cmd_decompose(args):
    dgp = _load_dgp(args)
    covariate = args.covariate or dgp.covariate_names[0]
    grid = _floats(args.grid) if args.grid else _default_grid(dgp, covariate)
    exact = {"exact": True, "mc": False, "auto": None}[args.method]
    if exact is None:
        exact = exact_available(dgp, args.outcome, covariate)
    rows = [conditional_effects(dgp, args.outcome, covariate, x, n_draws=args.draws, rng=args.seed, exact=exact)
            for x in grid]
    header, body = effects_rows(rows)
    print(",".join(header))
    for r in rows:
        print(",".join([r.x_k, _fmt(r.x_value), _fmt(r.ade), *(_fmt(v) for v in r.aie), _fmt(r.cate), _fmt(r.cate_se)]))
    if args.out:
        write_table(_out_path(args, "effects.csv"), "effects", header, body)
    return EXIT_OK


# -- verify ------------------------------------------------------------------

class _Checks:
    def __init__(self):
        self.items = []

    def add(self, claim, passed, **values):
        self.items.append({"claim": claim, "passed": bool(passed), **values})

    @property
    def ok(self):
        return all(c["passed"] for c in self.items)


def _verify_voter(dgp, args, checks):
    tol = 1e-5
    cates = {a: conditional_effects(dgp, "y_t", "a", a, exact=True).cate for a in (-1.0, 0.0, 1.0)}
    oracle = {a: oracle_voter_cate("y2", "a", a, dgp.covariate("eps").params["mean"]) for a in cates}
    checks.add("transformed CATEs in a match the closed form", all(abs(cates[a] - oracle[a]) < tol for a in cates),
               computed=cates, expected=oracle, tolerance=tol)
    if dgp.covariate("eps").params["mean"] == 0.0:
        ordered = abs(cates[-1.0]) < abs(cates[1.0]) < abs(cates[0.0])
        checks.add("|CATE(a=-1)| < |CATE(a=1)| < |CATE(a=0)| on the vote outcome", ordered, computed=cates)
    lam = [0.1 * k for k in range(1, 10)]
    y1 = [conditional_effects(dgp, "y", "lambda", v, exact=True).cate for v in lam]
    checks.add("structural CATE in lambda equals -lambda", all(abs(c + v) < 1e-9 for c, v in zip(y1, lam)),
               computed=y1)
    y2 = [conditional_effects(dgp, "y_t", "lambda", v, exact=True).cate for v in lam]
    checks.add("vote-outcome CATE magnitude increases in lambda", all(abs(b) > abs(a) for a, b in zip(y2, y2[1:])),
               computed=y2)
    ex = check_exclusion(dgp, "y", "lambda", lam, exact=True)
    checks.add("exclusion assumptions hold for lambda (structural outcome)", ex.passed, report=ex.to_dict())
    worst = 0.0
    for i, x in enumerate(lam):
        for xp in lam[i + 1:]:
            r = verify_identification(dgp, "y", "lambda", x, xp, exact=True)
            worst = max(worst, abs(r.residual))
    checks.add("identification residual is zero for lambda", worst <= 1e-6, max_abs_residual=worst, tolerance=1e-6)
    aff = verify_linear_invariance(dgp, "lambda", 0.9, 0.1, TransformSpec.affine(-2.0, 1.0), exact=True)
    checks.add("affine transform scales the CATE difference", aff.holds, report=aff.to_dict())
    thr = verify_linear_invariance(dgp, "a", 0.0, -1.0, TransformSpec.threshold(0.0), exact=True)
    checks.add("threshold transform creates a CATE difference in a (relevance only)", not thr.holds,
               report=thr.to_dict())


def _verify_turnout(dgp, args, checks):
    c1 = conditional_effects(dgp, "y_t", "x2", 1.0, exact=True).cate
    c0 = conditional_effects(dgp, "y_t", "x2", 0.0, exact=True).cate
    oracle = std_normal_cdf(-1.0) - std_normal_cdf(-0.5)
    want = oracle
    checks.add("transformed CATE pair at x2 = 1, 0", abs(c1 - want) < 1e-5 and abs(c0) < 1e-5,
               computed=[c1, c0], expected=[oracle, 0.0], tolerance=1e-5)
    mdv = is_mdv(dgp, "y", 1, "x2", [0.0, 1.0], exact=True)
    rel = is_relevant(dgp, "y", "x2", [0.0, 1.0], exact=True)
    checks.add("x2 is relevant but not a mechanism detector (structural outcome)", rel.member and not mdv.member,
               mdv=mdv.to_dict(), relevant=rel.to_dict(), classification="R \\ MDV")
    eff = check_effective(dgp, "x2", 0.0, 1.0, exact=True)
    checks.add("x2 is effective for the binary outcome", eff.effective, report=eff.to_dict())


def _verify_two_mech(dgp, args, checks):
    lam = [0.1 * k for k in range(1, 10)]
    ex = check_exclusion(dgp, "y", "lambda", lam, focal=1, exact=True)
    checks.add("assumption 1 (ADE unaffected by lambda)", ex.assumption1_pass, max_dev=ex.assumption1_max_dev)
    checks.add("assumption 2 (non-focal AIE unaffected by lambda)", ex.assumption2_pass,
               max_dev=ex.assumption2_max_dev, witness=ex.assumption2_witness)
    r = verify_identification(dgp, "y", "lambda", 0.9, 0.1, exact=True)
    checks.add("identification residual equals ADE + non-focal AIE differences",
               abs(r.residual - r.non_focal_sum) <= 1e-9, report=r.to_dict())


def cmd_verify(args):
    dgp = _load_dgp(args)
    checks = _Checks()
    if dgp.name == "voter":
        _verify_voter(dgp, args, checks)
    elif dgp.name == "turnout":
        _verify_turnout(dgp, args, checks)
    elif dgp.name.startswith("two_mech"):
        _verify_two_mech(dgp, args, checks)
    else:
        covariate = args.covariate or dgp.covariate_names[0]
        grid = _floats(args.grid) if args.grid else _default_grid(dgp, covariate)
        ex = check_exclusion(dgp, "y", covariate, grid, n_draws=args.draws, seed=args.seed)
        checks.add(f"exclusion assumptions for {covariate}", ex.passed, report=ex.to_dict())
    for c in checks.items:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['claim']}")
    if args.out:
        _write_json(_out_path(args, "verify.json"), {"dgp": dgp.name, "passed": checks.ok, "checks": checks.items})
    return EXIT_OK if checks.ok else EXIT_CHECK


def cmd_classify(args):
    try:
        v = classify_case(args.exclusion, args.transformed, args.hte)
    except ExclusionRoutingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(v.render())
    return EXIT_OK


def cmd_bayes(args):
    if args.prior_beta is not None:
        prior = {"prior_beta": tuple(_floats(args.prior_beta))}
    else:
        prior = {"prior_p": args.prior_p if args.prior_p is not None else 0.5}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = BayesConfig(args.hte, args.mu1, args.mu2, args.sigma1, args.sigma2, convolution=args.convolution,
                          **prior)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    la, li = cfg.likelihoods()
    print(f"L_active={la:.6g}  L_inert={li:.6g}")
    if cfg.prior_p is not None:
        post = bayes_point(cfg)
        print(f"posterior P(active) = {post:.12f} (prior {cfg.prior_p})")
        if args.out:
            _write_json(_out_path(args, "bayes.json"), {"prior_p": cfg.prior_p, "posterior": post})
        return EXIT_OK
    res = bayes_density(cfg, Grid1D(0.0, 1.0, args.grid_points))
    print(f"prior mean {res.prior_mean:.6f} -> posterior mean {res.posterior_mean:.6f}")
    if args.out:
        write_table(_out_path(args, "bayes_density.csv"), "bayes_density", SCHEMAS["bayes_density"], res.rows())
        write_table(_out_path(args, "bayes_summary.csv"), "bayes_summary",
                    ("prior_mean", "posterior_mean", "normalizer"),
                    [(res.prior_mean, res.posterior_mean, res.normalizer)])
    return EXIT_OK


def cmd_rum(args):
    if args.simulate:
        data = simulate_rum(args.simulate, np.random.default_rng(args.seed))
    elif args.data:
        data = read_dataset(args.data)
    else:
        raise UsageError("rum needs --data CSV or --simulate N")
    terms = _words(args.terms)
    design = DesignSpec.custom(terms, args.response)
    fit = fit_logit(data, design)
    v_hat = recover_utility(fit, data)
    inter = utility_interaction_fit(fit, {**{k: data[k] for k in data}, "v_hat": v_hat}, design.with_response("v_hat"))
    print(f"logit converged in {fit.iterations} iterations, log-likelihood {fit.loglik:.4f}")
    print(f"{'coef':<12}{'logit':>10}{'se':>10}{'V-fit':>10}{'se':>10}")
    for i, name in enumerate(fit.names):
        print(f"{name:<12}{fit.coef[i]:>10.4f}{fit.se[i]:>10.4f}{inter.coef[i]:>10.4f}{inter.se[i]:>10.4f}")
    if args.out:
        n = len(v_hat)
        write_table(_out_path(args, "utilities.csv"), "utilities", ("unit_id", "v_hat"),
                    ((i, float(v_hat[i])) for i in range(n)))
        write_table(_out_path(args, "utility_fit.csv"), "fit", ("coef", "estimate", "se", "t", "p"),
                    [[r["coef"], r["estimate"], r["se"], r["t"], r["p"]] for r in inter.summary_rows()])
        _write_json(_out_path(args, "rum.json"), {"logit": fit.to_dict(), "utility_fit": inter.to_dict()})
    return EXIT_OK


def cmd_monotone(args):
    if args.noise == "uniform":
        noise = noise_from_dict({"family": "uniform", "lo": args.lo, "hi": args.hi})
    else:
        noise = noise_from_dict({"family": "normal", "mean": args.noise_mean, "sd": args.sd})
    g0, gx, gz, gxz = _floats(args.g)
    b0, bx, bz = _floats(args.beta)
    spec = MonotoneSpec(lambda x, z: g0 + gx * x + gz * z + gxz * x * z, noise, args.cut,
                        beta=lambda x, z: b0 + bx * x + bz * z,
                        g_x=lambda x, z: gx + gxz * z, g_z=lambda x, z: gz + gxz * x)
    xs, zs = _floats(args.x), _floats(args.z)
    if len(xs) != len(zs):
        raise UsageError("--x and --z need the same number of values")
    header = ("x", "z", "hte_moderated", "hte_unmoderated", "condition_2a", "condition_2b", "corollary_hint")
    rows = []
    for x, z in zip(xs, zs):
        s = check_sign_conditions(spec, x, z)
        rows.append((x, z, monotone_hte(spec, "moderated", x, z), monotone_hte(spec, "unmoderated", x, z),
                     s.condition_2a, s.condition_2b, s.corollary_hint))
    print(",".join(header))
    for r in rows:
        print(",".join(_fmt(v) for v in r))
    if args.out:
        write_table(_out_path(args, "monotone.csv"), "monotone", header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--workers", type=_positive_int, default=1)
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--reps", type=_positive_int, default=1000)
    common.add_argument("--errors", choices=("classical", "hc1"), default="classical")

    parser = argparse.ArgumentParser(prog="htemech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw a dataset from a DGP")
    _add_dgp_options(p)
    p.add_argument("-n", "--n", type=int, default=1000)
    p.add_argument("--file", help="output file name inside --out (default dataset.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="OLS interaction fit on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--design", choices=("linear", "factor", "custom"), default="linear")
    p.add_argument("--response", default="y1")
    p.add_argument("--terms", help="comma-separated terms for a custom design")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("power", parents=[common], help="seeded power study over the voter grid")
    p.add_argument("--ns", default=",".join(str(n) for n in DEFAULT_NS))
    p.add_argument("--qs", default=",".join(str(q) for q in DEFAULT_QS))
    p.add_argument("--outcomes", default=",".join(OUTCOMES))
    p.add_argument("--estimators", default=",".join(ESTIMATORS))
    p.add_argument("--skip-results", action="store_true", help="write only the power table")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("oracle", parents=[common], help="closed-form voter CATEs")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--lambdas", default="0,0.25,0.5,0.75,1")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("decompose", parents=[common], help="conditional ADE/AIE/CATE table")
    _add_dgp_options(p)
    p.add_argument("--outcome", choices=("y", "y_t"), default="y")
    p.add_argument("--covariate")
    p.add_argument("--grid", help="comma-separated covariate values")
    p.add_argument("--draws", type=_positive_int, default=100_000)
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", parents=[common], help="run the identification checks for a DGP")
    _add_dgp_options(p)
    p.add_argument("--covariate")
    p.add_argument("--grid")
    p.add_argument("--draws", type=_positive_int, default=100_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", parents=[common], help="interpret an HTE test result")
    p.add_argument("--exclusion", choices=("verified", "asserted", "failed"), required=True)
    p.add_argument("--transformed", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--hte", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bayes", parents=[common], help="posterior probability of activation")
    p.add_argument("--hte", type=float, default=5.0)
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--mu2", type=float, default=0.5)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--prior-p", type=float)
    p.add_argument("--prior-beta", help="a,b of a Beta prior")
    p.add_argument("--convolution", action="store_true", help="use sqrt(sigma1^2 + sigma2^2)")
    p.add_argument("--grid-points", type=int, default=2001)
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("rum", parents=[common], help="logit fit and recovered-utility regression")
    p.add_argument("--data")
    p.add_argument("--simulate", type=_positive_int, help="simulate N logit units instead of reading --data")
    p.add_argument("--response", default="y")
    p.add_argument("--terms", default="const,c,lambda,a,c:lambda,c:a")
    p.set_defaults(func=cmd_rum)

    p = sub.add_parser("monotone", parents=[common], help="thresholded-outcome cross-partials and sign conditions")
    p.add_argument("--noise", choices=("normal", "uniform"), default="normal")
    p.add_argument("--noise-mean", type=float, default=0.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--lo", type=float, default=-0.5)
    p.add_argument("--hi", type=float, default=0.5)
    p.add_argument("--cut", type=float, default=0.0)
    p.add_argument("--g", default="0,1,1,0", help="g0,gx,gz,gxz of g = g0 + gx x + gz z + gxz x z")
    p.add_argument("--beta", default="0,0,0", help="b0,bx,bz of beta = b0 + bx x + bz z")
    p.add_argument("--x", default="0.5")
    p.add_argument("--z", default="0.5")
    p.set_defaults(func=cmd_monotone)
    return parser


def _apply_config(parser, argv):
    """Re-parse ``argv`` with defaults taken from the ``--config`` JSON file."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    extra = {"dgp"}
    unknown = set(cfg) - known - extra
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (OSError, CsvSchemaError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DGPError, EffectsError, EstimationError, SimulationError, InferenceError,
            NumericalDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
