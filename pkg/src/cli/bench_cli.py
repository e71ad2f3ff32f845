"""
Command-line driver: dictionary and signal generation, single solves,
benchmark experiments and dimension bounds
"""

import argparse
import logging
import sys
from typing import List, Optional

from src.algorithms import icpa_solver
from src.algorithms.baselines import MBMP_MAX_ITERS, MfocussParams, solve_mbmp, solve_mfocuss
from src.algorithms.cpa_solver import DEFAULT_LAMBDA, solve_cpa_batch, solve_cpa_regularized
from src.errors import ConfigError, SparseRecoveryError
from src.simulation.dictionary import (
    asymptotic_coherence,
    cpa_dimension_bound,
    generate_dictionary,
    mutual_coherence,
    rip_dimension_bound,
)
from src.simulation.experiment_engine import EXPERIMENTS, ExperimentEngine
from src.simulation.signal_model import (
    add_noise,
    choose_active_set,
    generate_novel_atom,
    inject_novel_atom,
    synthesize,
)
from src.utils.config import ALGORITHMS, load_experiment_config, save_config
from src.utils.metrics_exporter import MetricsExporter
from src.utils.storage import (
    load_dictionary,
    load_icpa_state,
    load_observations,
    load_observations_csv,
    save_dictionary,
    save_icpa_state,
    save_observations_any,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
SOLVE_ALGORITHMS = ("cpa", "cpa-reg", "icpa", "mbmp", "mfocuss")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-bench",
        description="Corrected Projections sparse recovery with M-BMP and M-FOCUSS baselines",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='log at DEBUG level')
    verbosity.add_argument('--quiet', action='store_true', help='log warnings and errors only')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    gen = commands.add_parser('gen-dict', help='generate a random unit-norm dictionary')
    gen.add_argument('--n-dims', type=int, default=200, help='atom dimension N')
    gen.add_argument('--atoms', type=int, default=2000, help='number of atoms M')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--output', required=True, help='SPDICT01 output file')
    gen.add_argument('--coherence', action='store_true',
                     help='also report mutual coherence against its random-dictionary limit')
    gen.set_defaults(handler=_cmd_gen_dict)

    synth = commands.add_parser('synth', help='synthesize an observation record')
    synth.add_argument('--dict', dest='dict_path', required=True, help='SPDICT01 dictionary')
    synth.add_argument('--k', type=int, required=True, help='number of active atoms')
    synth.add_argument('--steps', type=int, default=10, help='number of observations T')
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--amp-std', type=float, default=1.0, help='std of the active-atom amplitudes')
    synth.add_argument('--noise-ratio', type=float, default=0.1, help='noise std over signal std')
    synth.add_argument('--novel-std', type=float, default=None, help='add a novel atom with this amplitude std')
    synth.add_argument('--output', required=True, help='observation file (.csv or SPOBS001)')
    synth.add_argument('--truth', default=None, help='write the active atom indices to this file')
    synth.set_defaults(handler=_cmd_synth)

    solve = commands.add_parser('solve', help='run one algorithm on an observation record')
    solve.add_argument('--algo', choices=SOLVE_ALGORITHMS, required=True)
    solve.add_argument('--dict', dest='dict_path', required=True, help='SPDICT01 dictionary')
    solve.add_argument('--obs', dest='obs_path', required=True, help='observation file (.csv or SPOBS001)')
    solve.add_argument('--lambda', dest='lam', type=float, default=None,
                       help=f'regularization constant (CPA default {DEFAULT_LAMBDA})')
    solve.add_argument('--max-iters', type=int, default=None, help='M-BMP / M-FOCUSS iteration cap')
    solve.add_argument('--p-norm', type=float, default=None, help='M-FOCUSS diversity exponent p')
    solve.add_argument('--state', default=None,
                       help='iCPA checkpoint: resumed from when it exists, written after the run')
    solve.add_argument('--output', required=True, help='CSV of presence parameters or coefficients')
    solve.set_defaults(handler=_cmd_solve)

    bench = commands.add_parser('bench', help='run a benchmark experiment')
    bench.add_argument('experiment', choices=EXPERIMENTS)
    bench.add_argument('--config', default=None, help='ExperimentConfig JSON file')
    bench.add_argument('--seed', type=int, default=None, help='base seed (trial t uses seed + t)')
    bench.add_argument('--n-dims', type=int, default=None)
    bench.add_argument('--atoms', type=int, default=None)
    bench.add_argument('--steps', type=int, default=None)
    bench.add_argument('--trials', type=int, default=None)
    bench.add_argument('--k', type=int, nargs='+', default=None, help='k values')
    bench.add_argument('--noise-ratio', type=float, default=None)
    bench.add_argument('--novel-std', type=float, default=None)
    bench.add_argument('--lambda', dest='lam', type=float, default=None, help='CPA regularization constant')
    bench.add_argument('--algorithms', nargs='+', choices=ALGORITHMS, default=None)
    bench.add_argument('--workers', type=int, default=None, help='worker threads (overrides SP_THREADS)')
    bench.add_argument('--reuse-dictionary', action='store_true', default=None,
                       help='one dictionary for every trial instead of one per trial')
    bench.add_argument('--paper-scale', '--full-scale', dest='full_scale', action='store_true', default=None,
                       help='N=500, M=10000 (slow)')
    bench.add_argument('--output', default=None, help='results CSV (default results/<experiment>.csv)')
    bench.add_argument('--save-config', default=None,
                       help='also write the resolved configuration to this JSON file')
    bench.set_defaults(handler=_cmd_bench)

    bounds = commands.add_parser('bounds', help='print the dimension bounds for k active atoms out of M')
    bounds.add_argument('--k', type=int, required=True)
    bounds.add_argument('--atoms', type=int, required=True)
    bounds.add_argument('--n-dims', type=int, default=None,
                        help='also print the coherence limit 2 sqrt(ln M / N) for this N')
    bounds.set_defaults(handler=_cmd_bounds)

    return parser


def _cmd_gen_dict(args) -> int:
    dictionary = generate_dictionary(args.n_dims, args.atoms, args.seed)
    save_dictionary(dictionary, args.output)
    logger.info("Dictionary N=%d, M=%d (seed %d) written to %s", args.n_dims, args.atoms, args.seed, args.output)
    if args.coherence:
        report = mutual_coherence(dictionary)
        print(f"mutual coherence {report.coherence:.6f} at atoms {report.argmax_pair}")
        if args.atoms >= 2:
            print(f"random-dictionary limit {asymptotic_coherence(args.n_dims, args.atoms):.6f}")
    print(args.output)
    return 0


def _cmd_synth(args) -> int:
    dictionary = load_dictionary(args.dict_path)
    active = choose_active_set(dictionary.n_atoms, args.k, args.seed)
    obs, _ = synthesize(dictionary, active, args.steps, args.seed, amp_std=args.amp_std)
    if args.noise_ratio > 0:
        obs = add_noise(obs, args.noise_ratio, seed=args.seed)
    if args.novel_std:
        obs = inject_novel_atom(obs, generate_novel_atom(dictionary.n_dims, args.seed, args.novel_std), args.seed)
    save_observations_any(obs, args.output)
    if args.truth:
        with open(args.truth, 'w') as f:
            f.write("".join(f"{i}\n" for i in sorted(active.indices)))
    logger.info("Record with T=%d, k=%d written to %s", obs.n_steps, active.k, args.output)
    print(",".join(str(i) for i in sorted(active.indices)))
    return 0


def _cmd_solve(args) -> int:
    dictionary = load_dictionary(args.dict_path)
    if args.obs_path.lower().endswith('.csv'):
        obs = load_observations_csv(args.obs_path, n_dims=dictionary.n_dims)
    else:
        obs = load_observations(args.obs_path)
    lam = args.lam if args.lam is not None else DEFAULT_LAMBDA

    if args.algo == "cpa":
        MetricsExporter.export_presence_csv(solve_cpa_batch(dictionary, obs).theta, args.output)
    elif args.algo == "cpa-reg":
        MetricsExporter.export_presence_csv(solve_cpa_regularized(dictionary, obs, lam).theta, args.output)
    elif args.algo == "icpa":
        stream = icpa_solver.StreamingCpa(dictionary, lam, state=_resume_state(args.state))
        stream.update_batch(obs)
        if args.state:
            save_icpa_state(stream.snapshot(), args.state)
        MetricsExporter.export_presence_csv(stream.theta, args.output)
    elif args.algo == "mbmp":
        max_iters = args.max_iters if args.max_iters is not None else MBMP_MAX_ITERS
        coefficients = solve_mbmp(dictionary, obs, max_iters)
        MetricsExporter.export_coefficients_csv(coefficients.values, args.output)
    else:
        defaults = MfocussParams()
        params = MfocussParams(
            lam=args.lam if args.lam is not None else defaults.lam,
            p_norm=args.p_norm if args.p_norm is not None else defaults.p_norm,
            max_iters=args.max_iters if args.max_iters is not None else defaults.max_iters,
        )
        coefficients = solve_mfocuss(dictionary, obs, params)
        if not coefficients.converged:
            logger.warning("M-FOCUSS stopped at max_iters=%d without converging", params.max_iters)
        MetricsExporter.export_coefficients_csv(coefficients.values, args.output)

    logger.info("%s on T=%d observations written to %s", args.algo, obs.n_steps, args.output)
    print(args.output)
    return 0


def _resume_state(path: Optional[str]):
    if not path:
        return None
    try:
        state = load_icpa_state(path)
    except FileNotFoundError:
        return None
    logger.info("Resuming iCPA from %s after %d observations", path, state.steps_processed)
    return state


def _cmd_bench(args) -> int:
    overrides = {
        "base_seed": args.seed,
        "n_dims": args.n_dims,
        "n_atoms": args.atoms,
        "n_steps": args.steps,
        "n_trials": args.trials,
        "k_values": args.k,
        "noise_ratio": args.noise_ratio,
        "novel_std": args.novel_std,
        "cpa_lambda": args.lam,
        "algorithms": args.algorithms,
        "n_workers": args.workers,
        "reuse_dictionary": args.reuse_dictionary,
        "full_scale": args.full_scale,
        "output_path": args.output,
    }
    config = load_experiment_config(args.config, overrides)
    if args.save_config:
        save_config(config, args.save_config)
        logger.info("Resolved configuration written to %s", args.save_config)
    engine = ExperimentEngine(config)
    result = engine.run(args.experiment)
    path = engine.write_results(result)
    print(path)
    print(MetricsExporter.summary_path(path))
    return 0


def _cmd_bounds(args) -> int:
    print(f"rip_bound  k ln(M/k)   = {rip_dimension_bound(args.k, args.atoms):.1f}")
    print(f"cpa_bound  4 k^2 ln M  = {cpa_dimension_bound(args.k, args.atoms):.1f}")
    if args.n_dims is not None:
        print(f"coherence_limit 2 sqrt(ln M / N) = {asymptotic_coherence(args.n_dims, args.atoms):.4f}")
    return 0


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def cli_entry(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the command and return the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return int(exc.code or 0)

    _configure_logging(args)
    try:
        return args.handler(args)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return 2
    except (SparseRecoveryError, OSError) as exc:
        logger.error("%s", exc)
        return 1
