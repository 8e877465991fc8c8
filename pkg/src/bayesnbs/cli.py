"""
Command line interface: ``bayesnbs simulate | bench | calibrate | search``
"""
import itertools
import sys
from argparse import ArgumentParser

from .harness import (ALGORITHMS, DISTRIBUTIONS, BudgetCalibrator, CalibrationError, CampaignResult,
                      DistributionSpec, binomial_interval, check_expectation_floor, emit_calibration_csv,
                      emit_csv, load_instance, make_algorithm, make_instance, predicted_flips, run_campaign)
from .oracles import CommandOracle, ExternalCommandError, SimulatedOracle, is_good
from .screening import ScreeningConfig, bayesian_screening_search, silly_bayesian_screening_search
from .utils import resolve_seed, trial_rng


def _seed(args):
    seed = resolve_seed(args.seed)
    if args.seed is None:
        print("seed: %d" % seed)
    return seed


def _simulate(args):
    seed = _seed(args)
    rng = trial_rng(seed, 0)
    if args.coins:
        instance, padded = load_instance(args.coins, args.tau, args.eps)
        if padded:
            print("padded: coin i of %s is coin i + 1" % args.coins)
    else:
        instance = make_instance(DistributionSpec(args.dist, args.n), rng, crossing=args.crossing)
    n, tau, eps = instance.n, instance.tau, instance.eps
    oracle = SimulatedOracle(instance, rng)
    name, algo = make_algorithm(args.algo, args.delta)
    if name == "screening":
        answer, report = bayesian_screening_search(oracle, n, tau, eps,
                                                   ScreeningConfig(delta=args.delta, budget_cap=args.budget,
                                                                   verbose=args.verbose))
    elif name == "silly":
        answer, report = silly_bayesian_screening_search(oracle, n, tau, eps, args.delta, rng=rng)
    else:
        if args.budget is None:
            print("error: %s needs --budget" % name, file=sys.stderr)
            return 2
        algo.set_params(verbose=args.verbose)
        if "random_state" in algo.get_params():
            algo.set_params(random_state=rng)
        answer, report = algo.run(oracle, n, tau, eps, args.budget)
    print(report.summary())
    if answer is not None:
        print("good: %s" % is_good(instance, answer, eps))
    return 0


def _bench(args):
    seed = _seed(args)
    budgets = args.budget if args.budget else [None]
    result = CampaignResult()
    for algo, dist, n, budget in itertools.product(args.algo, args.dist, args.n, budgets):
        spec = DistributionSpec(dist, n)
        row = run_campaign(algo, spec, budget, args.trials, seed, args.delta, args.n_jobs, verbose=args.verbose)
        low, high = binomial_interval(row.rows[0]["successes"], args.trials)
        r = row.rows[0]
        predicted = predicted_flips(algo, spec, args.delta)
        print("%-16s %-10s n=%-10d budget=%-10s success=%d/%d [%.3f, %.3f] mean_flips=%.1f predicted=%s"
              % (r["algorithm"], dist, n, budget, r["successes"], r["trials"], low, high, r["mean_flips"],
                 "-" if predicted is None else "%.0f" % predicted))
        result.extend(row)
    if args.out:
        emit_csv(result, args.out)
    violations = check_expectation_floor(result, args.delta)
    for v in violations:
        print("floor violated: %s %s n=%d mean_flips=%.1f < %.1f"
              % (v["algorithm"], v["distribution"], v["n"], v["mean_flips"], v["floor"]), file=sys.stderr)
    return 1 if violations else 0


def _calibrate(args):
    seed = _seed(args)
    calibrator = BudgetCalibrator(grid_ratio=args.grid_ratio, n_jobs=args.n_jobs, verbose=args.verbose)
    rows = []
    status = 0
    for algo, n in itertools.product(args.algo, args.n):
        spec = DistributionSpec(args.dist, n)
        try:
            lower, upper = calibrator.calibrate(algo, spec, seed=seed)
        except CalibrationError as e:
            print("%s n=%d: %s" % (algo, n, e), file=sys.stderr)
            status = 1
            continue
        print("%-16s %-10s n=%-10d lower=%d upper=%d" % (algo, args.dist, n, lower, upper))
        rows.append(dict(algorithm=algo, distribution=args.dist, n=n, lower_budget=lower, upper_budget=upper,
                         grid_ratio=args.grid_ratio, seed=seed))
    if args.out:
        emit_calibration_csv(rows, args.out)
    return status


def _search(args):
    oracle = CommandOracle(args.cmd, args.n, cwd=args.cwd, timeout=args.timeout)
    cfg = ScreeningConfig(delta=args.delta, verbose=args.verbose)
    try:
        answer, report = bayesian_screening_search(oracle, args.n, args.tau, args.eps, cfg)
    except ExternalCommandError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    print(report.summary())
    print("coins %d and %d bracket the threshold" % (answer, answer + 1))
    return 0


def build_parser():
    parser = ArgumentParser(prog="bayesnbs", description="Noisy binary search with the Bayesian screening search")
    parser.add_argument("--verbose", action="store_true", help="Print progress")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    p = sub.add_parser("simulate", help="Run one search on a simulated instance and print its report")
    p.add_argument("--algo", choices=ALGORITHMS, default="screening")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="standard")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--crossing", type=int, default=None, help="Fix the transition position")
    p.add_argument("--coins", default=None, help="File of nondecreasing heads probabilities; replaces --dist and --n")
    p.add_argument("--tau", type=float, default=0.5, help="Threshold for --coins")
    p.add_argument("--eps", type=float, default=0.1, help="Half-width for --coins")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_simulate)

    p = sub.add_parser("bench", help="Campaign over algorithms x distributions x n")
    p.add_argument("--algo", nargs="+", choices=ALGORITHMS, default=["screening"])
    p.add_argument("--dist", nargs="+", choices=DISTRIBUTIONS, default=["standard"])
    p.add_argument("--n", nargs="+", type=int, default=[1000])
    p.add_argument("--budget", nargs="+", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-jobs", dest="n_jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_bench)

    p = sub.add_parser("calibrate", help="Budget at which success crosses 0.8 and 0.9")
    p.add_argument("--algo", nargs="+", choices=ALGORITHMS, default=["naive"])
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="standard")
    p.add_argument("--n", nargs="+", type=int, default=[1000])
    p.add_argument("--grid-ratio", dest="grid_ratio", type=float, default=1.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-jobs", dest="n_jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_calibrate)

    p = sub.add_parser("search", help="Search coins answered by an external command")
    p.add_argument("--cmd", required=True, help='Command template; "{coin}" is replaced by the coin index')
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--timeout", type=float, default=None, help="Seconds per command run")
    p.add_argument("--cwd", default=None)
    p.set_defaults(func=_search)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
