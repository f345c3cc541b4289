"""
Command-line interface

Subcommands: simulate, fit, infer, benchmark, coverage, align-demo, split,
sweep, compare. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numeric failure.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .baselines import MethodConfig
from .baselines.factory import PLACEHOLDERS, canonical_name
from .config import env_seed, load_config, load_environment
from .dataio import (ColumnRoles, SplitSpec, atomic_write_csv, atomic_write_text, load_csv,
                     parse_path_list, save_csv, split_dataset)
from .errors import ConfigError, DataError, RTLError, UnknownSubcommand
from .estimator import (TargetFit, TrainConfig, align_representation, component_errors, fit_sources,
                        fit_target)
from .evaluation import Scenario, compare_on_data, coverage_study, run_benchmark, run_sweep, simulate_replication
from .inference import (TargetInference, coefficient_intervals, estimate_covariance, estimate_mu,
                        identifiability_diagnostics, intervals_to_frame, linear_combination_inference)
from .repnet import NetworkConfig, forward
from .seeding import derive_rng, derive_seed
from .simgen import DesignFamily, Regime, generate_domain, make_coefficients, make_design, true_representation

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("simulate", "fit", "infer", "benchmark", "coverage", "align-demo", "split", "sweep", "compare")

# Align-demo defaults: toy design, 8 sources of 2000 rows
DEMO_SOURCES = 8
DEMO_ROWS = 2000
DEMO_POINTS = 2000


def configure_logging(verbose: bool = False):
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def _parse_floats(value: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in value.split(",") if v.strip()], dtype=np.float64)
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers, got {value!r}")


def _parse_ints(value: str, name: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of integers, got {value!r}")


def _network_template(path: Optional[str]) -> Dict:
    data = load_config(path) if path else {}
    if "input_dim" in data:
        logger.warning("input_dim in the network config is ignored; it is taken from the data")
    return {k: v for k, v in data.items() if k != "input_dim"}


def _train_config(path: Optional[str]) -> TrainConfig:
    return TrainConfig.from_dict(load_config(path) if path else {})


def _load_scenario(path: str) -> Scenario:
    return Scenario.from_dict(load_config(path))


def _rep_path(out: Path) -> Path:
    """Network document stored beside a fit document: fit.json -> fit.rep.json"""
    return out.with_name(f"{out.stem}.rep.json")


def cmd_simulate(args) -> int:
    """Write the design, coefficients, roles and one CSV per domain"""
    scenario = _load_scenario(args.scenario)
    design = scenario.make_design()
    replication = simulate_replication(scenario, design, args.replication)
    out = Path(args.out)

    task = replication.task
    for ds in (task.target,) + task.sources:
        save_csv(ds, out / f"{ds.domain_id}.csv")
    save_csv(task.target_validation, out / "target-val.csv")
    target = task.target
    atomic_write_text(out / "roles.json", json.dumps(
        ColumnRoles(target.y_name, target.x_names, target.z_names).to_dict(), indent=2))
    atomic_write_text(out / "design.json", json.dumps({
        "design": design.to_dict(),
        "coefficients": replication.coefficients.to_dict(),
        "scenario": scenario.to_dict(),
        "replication": args.replication,
    }, indent=2))
    logger.info(f"Wrote design and {len(task.sources) + 1} datasets to {out}")
    return 0


def cmd_fit(args) -> int:
    roles = ColumnRoles.from_dict(load_config(args.roles))
    sources = [load_csv(p, roles) for p in parse_path_list(args.sources)]
    if not sources:
        raise ConfigError("--sources must name at least one CSV file")
    target = load_csv(args.target, roles)

    net_cfg = NetworkConfig.from_dict(_network_template(args.net), input_dim=target.q)
    train_cfg = _train_config(args.train)
    logger.info(f"Fitting {len(sources)} source(s), target n0={target.n}, d={target.d}, q={target.q}")

    source_fit = fit_sources(sources, net_cfg, train_cfg)
    target_fit = fit_target(target, source_fit.rep, train_cfg.ridge)
    mu_hat = estimate_mu(target.X, target_fit.rep_values, train_cfg.ridge)
    inference = estimate_covariance(target_fit, mu_hat, target.X, train_cfg.ridge)
    report = identifiability_diagnostics(source_fit.gammas, target_fit.rep_values)

    out = Path(args.out)
    rep_path = _rep_path(out)
    source_fit.rep.save(rep_path)
    document = {
        "roles": roles.to_dict(),
        "sources": [str(p) for p in parse_path_list(args.sources)],
        "target": str(args.target),
        "network": net_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "source_fit": source_fit.to_dict(rep_path.name),
        "target_fit": target_fit.to_dict(),
        "inference": inference.to_dict(),
        "identifiability": report.to_dict(),
    }
    atomic_write_text(out, json.dumps(document, indent=2))
    logger.info(f"✓ Fit written to {out} (representation in {rep_path.name}), "
                f"best epoch {source_fit.best_epoch}/{source_fit.stopped_epoch}")
    return 0


def cmd_infer(args) -> int:
    path = Path(args.fit)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        target_fit = TargetFit.from_dict(document["target_fit"])
        inference = TargetInference.from_dict(document["inference"])
        names = document["roles"]["x"]
    except FileNotFoundError:
        raise ConfigError("fit document not found", str(path))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"not a fit document: {e}", str(path))

    intervals = coefficient_intervals(target_fit.beta0, inference, args.level, names)
    if args.alpha:
        alpha = _parse_floats(args.alpha, "--alpha")
        intervals.append(linear_combination_inference(
            target_fit.beta0, inference.Sigma_hat, inference.n0, alpha, args.level, "alpha'beta"))
    atomic_write_csv(Path(args.out), intervals_to_frame(intervals))
    for ci in intervals:
        logger.info(f"{ci.name}: {ci.estimate:.4f} [{ci.lower:.4f}, {ci.upper:.4f}] (se {ci.se:.4f})")
    return 0


def print_summary(report, elapsed: float, out: Path):
    """Print per-method aggregates of a benchmark run"""
    print("\n" + "="*60)
    print(f"BENCHMARK COMPLETE: {report.scenario.name}")
    print("="*60)
    print(f"Rows: {len(report.ok_rows())}/{len(report.rows)} ok")
    print(f"Time: {elapsed:.1f} seconds")
    print(f"Output: {out}")
    print(f"\n{'method':<10}{'mean mse0':>14}{'mean err_beta':>16}{'failed':>8}")
    for method, agg in report.aggregates().items():
        print(f"{method:<10}{agg['mean_mse0']:>14.6f}{agg['mean_err_beta']:>16.6f}{agg['n_failed']:>8}")
    for name, note in PLACEHOLDERS.items():
        if name in report.scenario.methods:
            print(f"{name:<10}  ({note})")
    print("="*60)


def cmd_benchmark(args) -> int:
    scenario = _load_scenario(args.scenario)
    start = time.time()
    report = run_benchmark(scenario, args.workers)
    out = Path(args.out)
    report.write(out)
    print_summary(report, time.time() - start, out)
    return 0


def cmd_coverage(args) -> int:
    scenario = _load_scenario(args.scenario)
    alpha = _parse_floats(args.alpha, "--alpha") if args.alpha else None
    summary = coverage_study(scenario, alpha, args.level, args.bins, args.workers)
    summary.write(Path(args.out), scenario)
    return 0


def cmd_align_demo(args) -> int:
    """Fit the toy design, align R-hat to R* on uniform draws over [-1, 1]^p, write both"""
    seed = args.seed if args.seed is not None else (env_seed() or 0)
    p = args.variant
    design = make_design(DesignFamily.TOY, 1, p, p, seed, args.noise_sd)
    coefs = make_coefficients(DEMO_SOURCES, 1, p, Regime.HETEROGENEOUS, seed)
    sources = [generate_domain(design, coefs.betas[k], coefs.gammas[k], args.rows,
                               derive_seed(seed, "align-source", k), f"source{k}")
               for k in range(1, DEMO_SOURCES + 1)]

    template = _network_template(args.net)
    template.setdefault("output_dim", p)
    net_cfg = NetworkConfig.from_dict(template, input_dim=p)
    source_fit = fit_sources(sources, net_cfg, _train_config(args.train))

    points = derive_rng(seed, "align-points").uniform(-1.0, 1.0, size=(DEMO_POINTS, p))
    learned = forward(source_fit.rep, points)
    truth = true_representation(design, points)
    alignment = align_representation(learned, truth)
    errors = component_errors(alignment.aligned, truth)

    frame = pd.DataFrame(points, columns=[f"z{j + 1}" for j in range(p)])
    for j in range(p):
        frame[f"true_{j + 1}"] = truth[:, j]
        frame[f"aligned_{j + 1}"] = alignment.aligned[:, j]
        frame[f"learned_{j + 1}"] = learned[:, j]
    out = Path(args.out)
    atomic_write_csv(out / "align.csv", frame)
    atomic_write_text(out / "align.json", json.dumps({
        "variant": p,
        "Lambda": alignment.Lambda.tolist(),
        "rel_error": alignment.rel_error,
        "component_errors": errors.tolist(),
        "best_epoch": source_fit.best_epoch,
        "design": design.to_dict(),
    }, indent=2))
    logger.info(f"Alignment relative error {alignment.rel_error:.4f}, per component {np.round(errors, 4).tolist()}")
    return 0


def cmd_split(args) -> int:
    roles = ColumnRoles.from_dict(load_config(args.roles))
    data = load_csv(args.data, roles)
    fractions = SplitSpec(args.train_fraction, args.val_fraction, args.test_fraction, args.seed)
    out = Path(args.out)
    for part in split_dataset(data, fractions):
        save_csv(part, out / f"{part.domain_id}.csv")
    return 0


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args.scenario)
    report = run_sweep(scenario, _parse_ints(args.n_k, "--n-k"), _parse_ints(args.r_working, "--r-working"),
                       args.workers)
    report.write(Path(args.out))
    return 0


def cmd_compare(args) -> int:
    roles = ColumnRoles.from_dict(load_config(args.roles))
    sources = [load_csv(p, roles) for p in parse_path_list(args.sources)]
    target = load_csv(args.target, roles)
    methods = [m for m in args.methods.split(",") if m.strip()]

    template = _network_template(args.net)
    r_working = int(template.pop("output_dim", 5))
    train_cfg = _train_config(args.train)
    configs = {}
    for name in methods:
        configs[name] = MethodConfig(name=name, network=template, r_working=r_working,
                                     train=train_cfg, solve=train_cfg.ridge)
    fractions = SplitSpec(args.train_fraction, args.val_fraction, args.test_fraction, args.seed)
    report = compare_on_data(sources, target, fractions, methods, _canonical_configs(configs))
    report.write(Path(args.out))
    return 0


def _canonical_configs(configs: Dict[str, MethodConfig]) -> Dict[str, MethodConfig]:
    result = {}
    for name, cfg in configs.items():
        canonical = canonical_name(name)
        if canonical not in PLACEHOLDERS:
            result[canonical] = cfg
    return result


def _add_split_args(parser: argparse.ArgumentParser):
    parser.add_argument('--train-fraction', type=float, default=0.3, help='Training fraction (default: 0.3)')
    parser.add_argument('--val-fraction', type=float, default=0.4, help='Validation fraction (default: 0.4)')
    parser.add_argument('--test-fraction', type=float, default=0.3, help='Test fraction (default: 0.3)')
    parser.add_argument('--seed', type=int, default=0, help='Split seed')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rtl', description='Representation transfer for partially linear models')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='Generate one replication of a scenario as CSV files')
    p.add_argument('--scenario', required=True, help='Scenario config (JSON or YAML)')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--replication', type=int, default=0, help='Replication index (default: 0)')
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('fit', help='Learn the representation on sources and fit the target')
    p.add_argument('--sources', required=True, help='Comma-separated source CSV files')
    p.add_argument('--target', required=True, help='Target CSV file')
    p.add_argument('--roles', required=True, help='Column roles config')
    p.add_argument('--net', required=True, help='Network config (output_dim, depth, width, ...)')
    p.add_argument('--train', help='Training config')
    p.add_argument('--out', required=True, help='Fit document (JSON)')
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser('infer', help='Confidence intervals from a fit document')
    p.add_argument('--fit', required=True, help='Fit document written by fit')
    p.add_argument('--level', type=float, default=0.95, help='Confidence level (default: 0.95)')
    p.add_argument('--alpha', help='Comma-separated weights for an extra alpha\'beta row')
    p.add_argument('--out', required=True, help='Interval table (CSV)')
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser('benchmark', help='Run all methods over replications of a scenario')
    p.add_argument('--scenario', required=True, help='Scenario config')
    p.add_argument('--out', required=True, help='Report directory')
    p.add_argument('--workers', type=int, help='Worker threads (default: RTL_WORKERS or core count)')
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser('coverage', help='Normality and coverage of alpha\'beta0 intervals')
    p.add_argument('--scenario', required=True, help='Scenario config')
    p.add_argument('--out', required=True, help='Report directory')
    p.add_argument('--alpha', help='Comma-separated weights (default: (1,...,1)/sqrt(d))')
    p.add_argument('--level', type=float, default=0.95, help='Confidence level (default: 0.95)')
    p.add_argument('--bins', type=int, default=20, help='Histogram bins (default: 20)')
    p.add_argument('--workers', type=int, help='Worker threads')
    p.set_defaults(handler=cmd_coverage)

    p = sub.add_parser('align-demo', help='Align a learned toy representation with the truth on uniform points')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--variant', type=int, choices=[2, 3, 5], default=2, help='Toy representation dimension')
    p.add_argument('--rows', type=int, default=DEMO_ROWS, help=f'Rows per source (default: {DEMO_ROWS})')
    p.add_argument('--noise-sd', type=float, default=0.3, help='Noise standard deviation (default: 0.3)')
    p.add_argument('--net', help='Network config')
    p.add_argument('--train', help='Training config')
    p.add_argument('--seed', type=int, help='Seed (default: RTL_SEED or 0)')
    p.set_defaults(handler=cmd_align_demo)

    p = sub.add_parser('split', help='Seeded train/validation/test split of a CSV file')
    p.add_argument('--data', required=True, help='CSV file')
    p.add_argument('--roles', required=True, help='Column roles config')
    p.add_argument('--out', required=True, help='Output directory')
    _add_split_args(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser('sweep', help='Benchmark over a grid of source sizes and working dimensions')
    p.add_argument('--scenario', required=True, help='Scenario config')
    p.add_argument('--n-k', required=True, help='Comma-separated source sizes')
    p.add_argument('--r-working', required=True, help='Comma-separated working dimensions')
    p.add_argument('--out', required=True, help='Report directory')
    p.add_argument('--workers', type=int, help='Worker threads')
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser('compare', help='Test-set prediction error of each method on observed data')
    p.add_argument('--sources', required=True, help='Comma-separated source CSV files')
    p.add_argument('--target', required=True, help='Target CSV file')
    p.add_argument('--roles', required=True, help='Column roles config')
    p.add_argument('--methods', default='RTL,STL,Pool,Meta', help='Comma-separated methods')
    p.add_argument('--net', help='Network config')
    p.add_argument('--train', help='Training config')
    p.add_argument('--out', required=True, help='Report directory')
    _add_split_args(p)
    p.set_defaults(handler=cmd_compare)

    return parser


def _first_positional(argv: Sequence[str]) -> Optional[str]:
    for arg in argv:
        if not arg.startswith('-'):
            return arg
    return None


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes

    Returns:
        0 on success, the error family's exit code otherwise
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    load_environment()

    try:
        command = _first_positional(argv)
        if command is not None and command not in SUBCOMMANDS:
            raise UnknownSubcommand(f"unknown subcommand {command!r}; choose from {', '.join(SUBCOMMANDS)}")
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else 2
        configure_logging(args.verbose)
        return args.handler(args)
    except RTLError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return DataError.exit_code


def main():
    sys.exit(run_cli())
