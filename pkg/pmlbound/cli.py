"""
Command-line front end for pmlbound.

Subcommands:
- gen            write a generated workload as CSV
- bound          evaluate one or more bounds at a single (b, alpha)
- calibrate      minimal noise scale for a target budget
- sweep-alpha    every bound along an alpha grid
- sweep-epsilon  minimal noise scale per bound along an epsilon grid
- certify        check the exact bound against the exact leakage oracle

Every output starts with one ``#`` metadata line (version, config hash,
seeds). Exit codes: 0 success, 1 usage error, 2 numeric or enumeration
error; failures print one ``error kind=... exit=... detail="..."`` line on
stderr.
"""

import argparse
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .bounds import (
    BoundKind,
    PriorClass,
    dp_epsilon,
    exact_pml_bound,
    simplified_pml_bound,
    trivial_bound,
)
from .calibration import min_noise_for_epsilon
from .config import Config
from .csv_io import ResultsWriter, open_output, read_workload_csv, write_workload_csv
from .errors import InvalidParameterError, PMLBoundError, UsageError
from .oracle import certify_bound
from .run_config import GridSpec, RunConfig, load_run_config
from .sweep_orchestrator import SweepOrchestrator
from .workload import RNG_NAME, Workload, parse_workload_spec

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

BOUND_COLUMNS = ['kind', 'value_nats', 'alpha', 'b', 'witness', 'argmin_class', 'argmax_class']
CALIBRATE_COLUMNS = ['kind', 'epsilon', 'b_min', 'achieved_nats', 'iterations', 'monotone_verified', 'noise_variance']
SWEEP_ALPHA_COLUMNS = [
    'alpha', 'exact_pml_nats', 'simplified_pml_nats', 'dp_nats', 'trivial_nats',
    'exact_witness', 'exact_argmin_class', 'exact_argmax_class', 'simplified_witness', 'dp_witness',
]
SWEEP_EPSILON_COLUMNS = [
    'epsilon', 'b_exact_pml', 'b_simplified_pml', 'b_dp',
    'exact_monotone_verified', 'simplified_monotone_verified', 'error',
]
CERTIFY_COLUMNS = ['trials', 'violations', 'max_leakage_nats', 'bound_nats', 'attainment_gap_nats', 'seed']

ALL_KINDS = [BoundKind.EXACT_PML, BoundKind.SIMPLIFIED_PML, BoundKind.DP, BoundKind.TRIVIAL]
CALIBRATABLE_KINDS = [BoundKind.EXACT_PML, BoundKind.SIMPLIFIED_PML, BoundKind.DP]

DEFAULT_ALPHA_GRID_START = 1e-3
DEFAULT_ALPHA_GRID_POINTS = 50
DEFAULT_EPS_GRID = GridSpec(start=0.1, stop=2.2, points=30, scale='lin')


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    shared = _ArgumentParser(add_help=False)
    shared.add_argument('--workload', help="histogram:k, range:k[:m[:seed]], haar:k or @path.csv")
    shared.add_argument('--b', type=float, help="Laplace noise scale (default 1.0)")
    shared.add_argument('--alpha', type=float, help="minimum class probability (default 1/k)")
    shared.add_argument('--alpha-grid', dest='alpha_grid', help="start:stop:points:lin|log")
    shared.add_argument('--eps', type=float, help="target budget in nats")
    shared.add_argument('--eps-grid', dest='eps_grid', help="start:stop:points:lin|log")
    shared.add_argument('--kind', dest='kinds', action='append', choices=[kind.value for kind in BoundKind])
    shared.add_argument('--n', type=int, help="records in the oracle dataset")
    shared.add_argument('--trials', type=int, help="oracle samples")
    shared.add_argument('--seed', type=int, help="oracle seed")
    shared.add_argument('--subset-cap', dest='subset_cap', type=int, help="largest m for the exact bound")
    shared.add_argument('--tol-rel', dest='tol_rel', type=float, help="calibration tolerance")
    shared.add_argument('--out', help="output file (default stdout)")
    shared.add_argument('--config', help="RunConfig JSON file; flags override its values")

    parser = _ArgumentParser(prog='pmlbound', description="Context-aware leakage bounds for linear query workloads")
    parser.add_argument('--version', action='version', version=f"pmlbound {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('gen', parents=[shared], help="write a workload CSV")
    sub.add_parser('bound', parents=[shared], help="evaluate bounds at one (b, alpha)")
    sub.add_parser('calibrate', parents=[shared], help="minimal b for a target budget")
    sub.add_parser('sweep-alpha', parents=[shared], help="bounds along an alpha grid")
    sub.add_parser('sweep-epsilon', parents=[shared], help="minimal b along an epsilon grid")
    sub.add_parser('certify', parents=[shared], help="check the exact bound against the oracle")
    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config file with explicit flags into a RunConfig."""
    overrides = {key: value for key, value in vars(args).items() if key != 'config'}
    return load_run_config(args.config, overrides)


def resolve_workload(config: RunConfig) -> Workload:
    """Generator spec or ``@path.csv`` to a Workload."""
    source = config.workload_source()
    if source.startswith('@'):
        return read_workload_csv(source[1:])
    return parse_workload_spec(source)


def resolve_prior(config: RunConfig, workload: Workload) -> PriorClass:
    alpha = config.alpha if config.alpha is not None else 1.0 / workload.k
    return make_prior(alpha, workload.k)


def make_prior(alpha: float, k: int) -> PriorClass:
    try:
        return PriorClass(alpha=alpha, k=k)
    except ValidationError as e:
        raise InvalidParameterError(f"alpha={alpha} is invalid for k={k}: {e.errors()[0]['msg']}")


def resolve_kinds(config: RunConfig, allowed: Sequence[BoundKind]) -> List[BoundKind]:
    """Requested kinds in canonical order, or every allowed kind."""
    if not config.kinds:
        return list(allowed)
    unsupported = [kind.value for kind in config.kinds if kind not in allowed]
    if unsupported:
        raise UsageError(f"{config.command} does not support kind(s) {', '.join(unsupported)}")
    return [kind for kind in allowed if kind in config.kinds]


def metadata_line(config: RunConfig, workload: Workload) -> str:
    parts = [
        f"# pmlbound {__version__}",
        f"command={config.command}",
        f"config_sha256={config.config_hash()}",
        f"seed={config.seed}",
        f"rng={RNG_NAME}",
    ]
    family = workload.metadata.get('family')
    if family:
        parts.append(f"workload_family={family}")
    if 'seed' in workload.metadata:
        parts.append(f"workload_seed={workload.metadata['seed']}")
    return ' '.join(parts)


def _write_results(config: RunConfig, workload: Workload, columns: List[str], records: List[Dict[str, Any]]):
    with open_output(config.out) as stream:
        ResultsWriter(columns).write(stream, records, metadata_line(config, workload))
    if config.out:
        logger.info(f"Wrote {len(records)} rows to {config.out}")


def cmd_gen(config: RunConfig):
    """Write the configured workload as CSV."""
    workload = resolve_workload(config)
    with open_output(config.out) as stream:
        write_workload_csv(workload, stream, metadata_line(config, workload))


def cmd_bound(config: RunConfig):
    """One record per requested kind at a single (b, alpha)."""
    workload = resolve_workload(config)
    prior = resolve_prior(config, workload)
    b = config.noise_scale()

    records = []
    for kind in resolve_kinds(config, ALL_KINDS):
        if kind == BoundKind.EXACT_PML:
            result = exact_pml_bound(workload, b, prior, subset_cap=config.subset_cap)
        elif kind == BoundKind.SIMPLIFIED_PML:
            result = simplified_pml_bound(workload, b, prior)
        elif kind == BoundKind.DP:
            result = dp_epsilon(workload, b)
        else:
            result = trivial_bound(prior)
        records.append(result.to_record())

    _write_results(config, workload, BOUND_COLUMNS, records)


def cmd_calibrate(config: RunConfig):
    """Minimal b per requested kind for ``--eps`` (or every point of ``--eps-grid``)."""
    workload = resolve_workload(config)
    if config.eps is not None:
        targets = [config.eps]
    elif config.eps_grid is not None:
        targets = [float(eps) for eps in config.eps_grid.values()]
    else:
        raise UsageError("calibrate needs --eps or --eps-grid")
    kinds = resolve_kinds(config, CALIBRATABLE_KINDS)
    prior = resolve_prior(config, workload)

    records = []
    for eps in targets:
        for kind in kinds:
            result = min_noise_for_epsilon(
                workload,
                eps,
                prior=None if kind == BoundKind.DP else prior,
                kind=kind,
                tol_rel=config.tol_rel,
                subset_cap=config.subset_cap,
            )
            records.append(result.to_record())

    _write_results(config, workload, CALIBRATE_COLUMNS, records)


def _alpha_row_builder(
    config: RunConfig,
    workload: Workload,
    b: float,
    kinds: List[BoundKind]
) -> Callable[[float], Dict[str, Any]]:
    dp = dp_epsilon(workload, b) if BoundKind.DP in kinds else None

    def build(alpha: float) -> Dict[str, Any]:
        prior = make_prior(alpha, workload.k)
        row: Dict[str, Any] = {'alpha': alpha}
        if BoundKind.EXACT_PML in kinds:
            exact = exact_pml_bound(workload, b, prior, subset_cap=config.subset_cap)
            row.update({
                'exact_pml_nats': exact.value,
                'exact_witness': exact.witness.encode(),
                'exact_argmin_class': exact.witness.argmin_class,
                'exact_argmax_class': exact.witness.argmax_class,
            })
        if BoundKind.SIMPLIFIED_PML in kinds:
            simplified = simplified_pml_bound(workload, b, prior)
            row.update({'simplified_pml_nats': simplified.value, 'simplified_witness': simplified.witness.encode()})
        if dp is not None:
            row.update({'dp_nats': dp.value, 'dp_witness': dp.witness.encode()})
        if BoundKind.TRIVIAL in kinds:
            row['trivial_nats'] = trivial_bound(prior).value
        return row

    return build


def cmd_sweep_alpha(config: RunConfig):
    """Every requested bound along the alpha grid; any failing point aborts the sweep."""
    workload = resolve_workload(config)
    b = config.noise_scale()
    kinds = resolve_kinds(config, ALL_KINDS)
    ceiling = 1.0 / workload.k

    grid = config.alpha_grid
    if grid is None:
        grid = GridSpec(start=DEFAULT_ALPHA_GRID_START, stop=ceiling, points=DEFAULT_ALPHA_GRID_POINTS, scale='log')
    if grid.stop > ceiling * (1.0 + 1e-12):
        raise InvalidParameterError(f"alpha grid must end at or below 1/k = {ceiling:.6g}, got {grid.stop}")

    orchestrator = SweepOrchestrator()
    rows = orchestrator.run_grid(_alpha_row_builder(config, workload, b, kinds), grid.values(), capture_errors=False)
    _write_results(config, workload, SWEEP_ALPHA_COLUMNS, rows)


def _epsilon_row_builder(
    config: RunConfig,
    workload: Workload,
    prior: PriorClass,
    kinds: List[BoundKind]
) -> Callable[[float], Dict[str, Any]]:
    columns = {
        BoundKind.EXACT_PML: ('b_exact_pml', 'exact_monotone_verified'),
        BoundKind.SIMPLIFIED_PML: ('b_simplified_pml', 'simplified_monotone_verified'),
        BoundKind.DP: ('b_dp', None),
    }

    def build(eps: float) -> Dict[str, Any]:
        row: Dict[str, Any] = {'epsilon': eps}
        errors = []
        for kind in kinds:
            value_column, flag_column = columns[kind]
            try:
                result = min_noise_for_epsilon(
                    workload,
                    eps,
                    prior=None if kind == BoundKind.DP else prior,
                    kind=kind,
                    tol_rel=config.tol_rel,
                    subset_cap=config.subset_cap,
                )
            except PMLBoundError as e:
                errors.append(f"{kind.value}: {type(e).__name__}: {e.detail}")
                continue
            row[value_column] = result.b_min
            if flag_column:
                row[flag_column] = result.monotone_verified
        if errors:
            row['error'] = '; '.join(errors)
        return row

    return build


def cmd_sweep_epsilon(config: RunConfig):
    """Minimal b per requested kind along the epsilon grid; failures land in the error column."""
    workload = resolve_workload(config)
    prior = resolve_prior(config, workload)
    kinds = resolve_kinds(config, CALIBRATABLE_KINDS)
    grid = config.eps_grid or DEFAULT_EPS_GRID
    epsilons = [float(eps) for eps in grid.values()]

    orchestrator = SweepOrchestrator()
    rows = orchestrator.run_grid(_epsilon_row_builder(config, workload, prior, kinds), epsilons, capture_errors=True)
    for eps, row in zip(epsilons, rows):
        row.setdefault('epsilon', eps)
    _write_results(config, workload, SWEEP_EPSILON_COLUMNS, rows)


def cmd_certify(config: RunConfig):
    """Dominance and attainment check of the exact bound on a small instance."""
    workload = resolve_workload(config)
    prior = resolve_prior(config, workload)
    report = certify_bound(
        workload,
        config.noise_scale(),
        prior,
        n=config.n,
        trials=config.trials,
        seed=config.seed,
        subset_cap=config.subset_cap,
    )
    _write_results(config, workload, CERTIFY_COLUMNS, [report.to_record()])


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    'gen': cmd_gen,
    'bound': cmd_bound,
    'calibrate': cmd_calibrate,
    'sweep-alpha': cmd_sweep_alpha,
    'sweep-epsilon': cmd_sweep_epsilon,
    'certify': cmd_certify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one CLI invocation and return its exit code."""
    logging.basicConfig(level=Config.log_level(), format=LOG_FORMAT)
    Config.validate()

    try:
        args = build_parser().parse_args(argv)
        config = build_run_config(args)
        logger.info(f"Running {config.command} (config {config.config_hash()[:12]})")
        COMMANDS[config.command](config)
    except PMLBoundError as e:
        if Config.DEBUG:
            logger.exception("Command failed")
        print(e.diagnostic(), file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(InvalidParameterError(str(e.errors()[0]['msg'])).diagnostic(), file=sys.stderr)
        return InvalidParameterError.exit_code
    except OSError as e:
        print(UsageError(f"{e.strerror or e}: {e.filename}").diagnostic(), file=sys.stderr)
        return UsageError.exit_code
    return 0
