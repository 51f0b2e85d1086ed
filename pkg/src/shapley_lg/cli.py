"""Command-line front end.

Verbs: ``compute`` (exact indices of a model file), ``estimate``
(permutation estimators), ``generate`` (random benchmark instances),
``benchmark`` (timing table as CSV) and ``mc`` (black-box estimation from
an expression file). Exit codes: 0 success, 2 validation error, 3 cap or
budget error, 4 file parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time

import numpy as np

from . import files
from .blocks import lg_groups_indices
from .errors import (BudgetExceededError, DimensionCapError, FileFormatError,
                     ModelValidationError, ValidationKind)
from .indices import lg_indices
from .model import generate_block_instance, generate_random_instance
from .montecarlo import (GaussianInput, McConfig, block_additive_shapley,
                         mc_shapley)
from .permutations import (EXACT_ENUMERATION_CAP, PermutationEstimate,
                           cv_summary_from_replicates,
                           exact_permutation_shapley,
                           random_permutation_shapley, replicate_estimates)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAP = 3
EXIT_PARSE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapley-lg",
        description="Sobol indices and Shapley effects for linear Gaussian "
                    "models, with Monte Carlo estimators for black-box models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compute = sub.add_parser(
        "compute", help="exact indices of a model file")
    p_compute.add_argument("--model", required=True, help="model JSON file")
    p_compute.add_argument("--out", help="report path (default: stdout)")
    p_compute.add_argument("--groups", action="store_true",
                           help="exploit independent groups of the covariance")
    p_compute.add_argument("--eps-block", type=float, default=0.0,
                           help="threshold below which covariance entries "
                                "count as zero for group detection")
    p_compute.add_argument("--fast-sobol", action=argparse.BooleanOptionalAction,
                           default=True,
                           help="use the lattice transform for Sobol indices")

    p_estimate = sub.add_parser(
        "estimate", help="permutation-based Shapley computation")
    p_estimate.add_argument("--model", required=True)
    p_estimate.add_argument("--method", choices=["exact-perm", "random-perm"],
                            default="random-perm")
    p_estimate.add_argument("--m", type=int, default=100,
                            help="number of sampled orderings")
    p_estimate.add_argument("--seed", type=int, default=0)
    p_estimate.add_argument("--reps", type=int, default=1,
                            help="replicates; above 1 a CV summary is added")
    p_estimate.add_argument("--out")

    p_generate = sub.add_parser(
        "generate", help="random benchmark model files")
    p_generate.add_argument("--p", type=int, help="dense instance dimension")
    p_generate.add_argument("--k", type=int, help="number of independent groups")
    p_generate.add_argument("--n", type=int, help="variables per group")
    p_generate.add_argument("--seed", type=int, default=0)
    p_generate.add_argument("--out", help="model path (default: stdout)")

    p_bench = sub.add_parser(
        "benchmark", help="timing table (CSV) of the computation routes")
    p_bench.add_argument("--sizes", required=True,
                         help="comma-separated p values, or KxN pairs "
                              "with --groups (e.g. 3x3,4x4)")
    p_bench.add_argument("--groups", action="store_true",
                         help="compare the grouped route on block instances")
    p_bench.add_argument("--repetitions", type=int, default=3)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="CSV path (default: stdout)")

    p_mc = sub.add_parser(
        "mc", help="black-box Shapley estimation from an expression file")
    p_mc.add_argument("--model", required=True, help="expression JSON file")
    p_mc.add_argument("--dist", required=True,
                      help="Gaussian input distribution JSON file")
    p_mc.add_argument("--blocks", action="store_true",
                      help="estimate per block and combine")
    p_mc.add_argument("--m", type=int, default=100)
    p_mc.add_argument("--n-var", type=int, default=10_000)
    p_mc.add_argument("--n-outer", type=int, default=100)
    p_mc.add_argument("--n-inner", type=int, default=2)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--budget", type=int, default=100_000_000,
                      help="cap on m * n_outer * n_inner")
    p_mc.add_argument("--out")
    return parser


def cmd_compute(args) -> int:
    model = files.read_model(args.model)
    if args.groups:
        grouped = lg_groups_indices(model, args.eps_block,
                                    fast_sobol=args.fast_sobol)
        doc = files.report_from_grouped(grouped, "lg-groups-indices")
    else:
        report = lg_indices(model, fast_sobol=args.fast_sobol)
        doc = files.report_from_sensitivity(report, "lg-indices")
    files.write_report(doc, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    model = files.read_model(args.model)
    if args.m < 1:
        raise FileFormatError("--m must be >= 1")
    if args.reps < 1:
        raise FileFormatError("--reps must be >= 1")
    config = {"method": args.method, "m": args.m, "reps": args.reps}
    var_y = float(model.beta @ model.gamma @ model.beta)
    if args.method == "exact-perm":
        shapley = exact_permutation_shapley(model)
        doc = files.report_from_estimate(shapley, var_y, "exact-permutations",
                                         config={"method": args.method})
    elif args.reps == 1:
        est = random_permutation_shapley(model, args.m, args.seed)
        doc = files.report_from_estimate(est.shapley_hat, var_y,
                                         "random-permutations",
                                         seed=args.seed, config=config)
    else:
        samples = replicate_estimates(model, args.m, args.reps, args.seed)
        summary = cv_summary_from_replicates(samples, args.m, args.seed)
        aggregate = PermutationEstimate(
            shapley_hat=samples.mean(axis=0), m=args.m, seed=args.seed,
            per_i_variance=samples.var(axis=0, ddof=1),
        )
        doc = files.report_from_estimate(aggregate.shapley_hat, var_y,
                                         "random-permutations",
                                         seed=args.seed, config=config,
                                         cv=summary)
        if args.out is not None:
            cv_text = "nan" if math.isnan(summary.mean_cv) \
                else f"{summary.mean_cv:.2f}"
            sys.stdout.write("m,mean_cv_percent\n"
                             f"{args.m},{cv_text}\n")
    files.write_report(doc, args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    dense = args.p is not None
    grouped = args.k is not None or args.n is not None
    if dense == grouped or (grouped and (args.k is None or args.n is None)):
        raise FileFormatError("give either --p, or both --k and --n")
    if dense:
        model = generate_random_instance(args.p, args.seed)
    else:
        model = generate_block_instance(args.k, args.n, args.seed)
    files.write_model(model, args.out)
    return EXIT_OK


def _median_seconds(fn, repetitions: int) -> float:
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _parse_sizes(text: str, grouped: bool):
    sizes = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if grouped:
                k_text, n_text = item.lower().split("x")
                sizes.append((int(k_text), int(n_text)))
            else:
                sizes.append(int(item))
        except ValueError as err:
            raise FileFormatError(
                f"bad size {item!r}: expected "
                + ("KxN pairs like 4x4" if grouped else "integers")
            ) from err
    if not sizes:
        raise FileFormatError("--sizes is empty")
    return sizes


def cmd_benchmark(args) -> int:
    if args.repetitions < 1:
        raise FileFormatError("--repetitions must be >= 1")
    rows = []
    for size in _parse_sizes(args.sizes, args.groups):
        if args.groups:
            k, n = size
            model = generate_block_instance(k, n, args.seed)
            label = f"{k}x{n}"
            rows.append((
                "lg-indices", label,
                _median_seconds(lambda: lg_indices(model), args.repetitions),
                1 << model.p,
            ))
            grouped = lg_groups_indices(model)
            rows.append((
                "lg-groups-indices", label,
                _median_seconds(lambda: lg_groups_indices(model),
                                args.repetitions),
                grouped.eval_count,
            ))
        else:
            p = size
            model = generate_random_instance(p, args.seed)
            label = str(p)
            rows.append((
                "lg-indices", label,
                _median_seconds(lambda: lg_indices(model), args.repetitions),
                1 << p,
            ))
            if p <= EXACT_ENUMERATION_CAP:
                rows.append((
                    "exact-permutations", label,
                    _median_seconds(
                        lambda: exact_permutation_shapley(model, memoize=False),
                        args.repetitions,
                    ),
                    math.factorial(p) * p,
                ))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["algorithm", "size", "median_seconds", "eval_count"])
    for algorithm, label, seconds, evals in rows:
        writer.writerow([algorithm, label, f"{seconds:.6f}", evals])
    text = buffer.getvalue()
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as handle:
            handle.write(text)
    return EXIT_OK


def cmd_mc(args) -> int:
    expr = files.read_expression_file(args.model)
    inp = files.read_distribution(args.dist)
    p = inp.p
    full_model = files.build_function(expr, p)

    seed_root = np.random.SeedSequence(args.seed)
    var_child, mc_child = seed_root.spawn(2)
    cfg = McConfig(
        m=args.m, n_var=args.n_var, n_outer=args.n_outer,
        n_inner=args.n_inner, budget=args.budget,
        seed=int(mc_child.generate_state(1)[0]),
    )
    rng = np.random.default_rng(var_child)
    var_y = float(np.var(full_model(inp.sample(cfg.n_var, rng)), ddof=1))
    if var_y <= 0.0:
        raise ModelValidationError(
            ValidationKind.ZERO_OUTPUT_VARIANCE,
            "estimated output variance is zero; the expression looks constant",
        )

    config = {
        "m": args.m, "n_var": args.n_var, "n_outer": args.n_outer,
        "n_inner": args.n_inner, "budget": args.budget,
        "blocks": bool(args.blocks),
    }
    if args.blocks:
        models, partition = files.build_block_functions(expr, p)
        pairs = []
        for group, block_model in zip(partition.groups, models):
            idx = np.asarray(group) - 1
            marginal = GaussianInput(
                mu=inp.mu[idx], gamma=inp.gamma[np.ix_(idx, idx)]
            )
            pairs.append((block_model, marginal))
        shapley = block_additive_shapley(pairs, cfg, partition)
        doc = files.report_from_estimate(shapley, var_y, "block-additive-mc",
                                         seed=args.seed, config=config)
    else:
        est = mc_shapley(full_model, inp, cfg, var_y=var_y)
        doc = files.report_from_estimate(est.shapley_hat, var_y, "mc-shapley",
                                         seed=args.seed, config=config)
    files.write_report(doc, args.out)
    return EXIT_OK


_COMMANDS = {
    "compute": cmd_compute,
    "estimate": cmd_estimate,
    "generate": cmd_generate,
    "benchmark": cmd_benchmark,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ModelValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DimensionCapError, BudgetExceededError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CAP
    except FileFormatError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
