import logging
import sys

from analysis_pipeline import build_plan, run_analysis
from dataset_loader import DatasetLoader
from demo_studies import berkeley_analysis, dataset_frame, simulate_dataset, stein_shrinkage
from errors import MetaLPError
from models.metalp import AnalysisConfig, SimulationSpec
from report_store import ReportStore

logger = logging.getLogger('metalp.commands')

EXIT_OK = 0
EXIT_DATA_ERROR = 1

DEMOS = ('berkeley', 'stein')


def fail(message):
    """Log a failure and tell the user on stderr"""
    logger.error(message)
    print(f"Error: {message}", file=sys.stderr)
    return EXIT_DATA_ERROR


def simulation_schema(p):
    columns = [{'name': 'X1', 'type': 'continuous'},
               {'name': 'X2', 'type': 'discrete'},
               {'name': 'X3', 'type': 'binary'}]
    columns += [{'name': f'X{i}', 'type': 'continuous'} for i in range(4, p + 1)]
    columns.append({'name': 'Y', 'type': 'binary', 'target': True})
    return {'target': 'Y', 'columns': columns}


def print_ranking(report, top):
    print(f"MetaLP ranking ({report.config.method.value}, k={report.k}, n={report.n_rows})")
    print(f"{'rank':>4}  {'variable':<20} {'j':>2} {'lp':>9} {'ci_lo':>9} {'ci_hi':>9} "
          f"{'i2_pre':>7} {'i2_post':>7}")
    for result in report.top(top):
        best = max(result.orders, key=lambda o: (abs(o.lp), -o.order))
        i2_post = '-' if best.i2_post is None else f"{best.i2_post:.3f}"
        marker = '*' if result.significant else ''
        print(f"{result.rank:>4}  {result.variable:<20} {best.order:>2} {best.lp:>9.4f} "
              f"{best.ci_low:>9.4f} {best.ci_high:>9.4f} {best.i2_pre:>7.3f} {i2_post:>7}{marker}")
    if report.untestable:
        print(f"Untestable: {', '.join(report.untestable)}")


def cmd_analyze(args, runtime):
    """Plan, map, reduce and rank; writes report.json and report.csv"""
    try:
        dataset = DatasetLoader(args.input, args.schema).load()
        config = AnalysisConfig(
            target=dataset.target.name,
            m=args.m if args.m is not None else runtime.default_m,
            m_overrides=dataset.m_overrides,
            method=args.method or runtime.default_method,
            partitions=args.partitions,
            gamma=args.gamma,
            partition_by=args.partition_by,
            group_by=args.group_by,
            seed=args.seed,
            ci_level=args.ci,
            worker_count=runtime.resolve_workers(args.workers)
        ).validate()

        report = run_analysis(dataset, config)
        store = ReportStore(runtime.resolve_output_dir(args.output))
        paths = store.write_report(report)
        if args.emit_plan:
            plan, _ = build_plan(dataset, config)
            store.write_plan(plan, args.emit_plan)
    except MetaLPError as e:
        return fail(str(e))
    except OSError as e:
        return fail(f"I/O error: {e}")

    print_ranking(report, args.top)
    print(f"Report written to {paths['json']} and {paths['csv']}")
    return EXIT_OK


def cmd_simulate(args, runtime):
    """Synthetic logistic datasets, one CSV per seed plus schema.json"""
    try:
        store = ReportStore(runtime.resolve_output_dir(args.output))
        schema = simulation_schema(args.p)
        for seed in range(args.seed, args.seed + args.reps):
            dataset = simulate_dataset(SimulationSpec(n=args.n, p=args.p, seed=seed))
            paths = store.write_dataset(dataset_frame(dataset), schema, seed)
            print(f"Wrote {paths['data']}")
    except MetaLPError as e:
        return fail(str(e))
    except OSError as e:
        return fail(f"I/O error: {e}")
    return EXIT_OK


def _demo_berkeley(args, store):
    report = berkeley_analysis(args.method or 'reml')
    print(f"Admissions by department ({report.method.value})")
    for row in report.departments:
        print(f"  {row['department']}: lp={row['lp']:+.4f}  n={row['n']:>4}  "
              f"CI=({row['ci_low']:+.4f}, {row['ci_high']:+.4f})")
    low, high = report.aggregate_ci
    print(f"Pooled data:  lp={report.aggregate.mean:+.4f}  CI=({low:+.4f}, {high:+.4f})")
    low, high = report.combined_ci
    print(f"Combined:     lp={report.combined.mean:+.4f}  CI=({low:+.4f}, {high:+.4f})  "
          f"tau2={report.combined.tau2:.6f}")
    print(f"p-value for H0: LP <= 0 is {report.p_value:.3f}")
    return store.write_json('berkeley.json', report.to_dict())


def _demo_stein(args, store):
    report = stein_shrinkage()
    print(f"{'player':<14} {'mle':>6} {'rest':>6} {'lp':>6} {'js':>6}")
    for i, player in enumerate(report.players):
        print(f"{player:<14} {report.mle[i]:>6.3f} {report.remainder[i]:>6.3f} "
              f"{report.lp_estimates[i]:>6.3f} {report.js_estimates[i]:>6.3f}")
    print(f"MSE ratio: MetaLP {report.mse_ratio_lp:.3f}, James-Stein {report.mse_ratio_js:.3f}")
    return store.write_json('stein.json', report.to_dict())


def cmd_demo(args, runtime):
    handlers = {'berkeley': _demo_berkeley, 'stein': _demo_stein}
    try:
        store = ReportStore(runtime.resolve_output_dir(args.output))
        path = handlers[args.name](args, store)
    except MetaLPError as e:
        return fail(str(e))
    except OSError as e:
        return fail(f"I/O error: {e}")
    print(f"Wrote {path}")
    return EXIT_OK
