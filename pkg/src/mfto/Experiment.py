# coding: utf8

"""
Batch runner: assembles full and mean-field spatial transfer operators,
extracts their dominant eigenpairs and compares the two.
"""
import argparse
import glob
import logging
import os
import sys

import numpy as np
import simplejson

# Logging has to be configured first before we do anything.  The handler
# sits on the package logger so every mfto.* module logs through it.
logger = logging.getLogger('mfto')
logger.setLevel(logging.INFO)
__logger_channel = logging.StreamHandler()
__logger_formatter = logging.Formatter(
    '%(asctime)s - %(levelname)s - %(module)s:%(lineno)d: %(message)s'
    )
__logger_formatter.default_time_format = '%Y-%m-%d %H:%M:%S'
__logger_formatter.default_msec_format = '%s.%03d'
__logger_channel.setFormatter(__logger_formatter)
logger.addHandler(__logger_channel)

from mfto.conf.Presets import preset
from mfto.conf.Settings import Settings, loadConfig
from mfto.core import Artifacts
from mfto.core.Comparison import compare
from mfto.core.Errors import (
    ComparisonError,
    ConfigError,
    DegenerateDecompositionError,
    MftoError,
    UndefinedProbabilityError,
)
from mfto.core.ExperimentConfig import ExperimentConfig
from mfto.core.MeanField import (
    ProductFunction,
    assemble_mf_component_spatial,
    boltzmann_factors,
    component_factors,
    component_residual,
    component_spectra,
    product_eigenfunction,
    reference_inertia,
    roothaan_iterate,
)
from mfto.core.Partition import TensorPartition
from mfto.core.Spectral import (
    SpectralResult,
    almost_invariant_sets,
    dominant_eigs,
    invariance_ratio,
    perron_vector,
    sign_normalize,
)
from mfto.core.StatsCollector import StatsCollector
from mfto.core.Ulam import assemble_full_spatial

FULL_DIR = 'full'
MEANFIELD_DIR = 'meanfield'
INVARIANCE_COLUMNS = ('rank', 'eigenvalue', 'rho_plus', 'rho_minus', 'rho_sum', 'lambda_plus_one', 'identity_defect')

# Flags that mirror ExperimentConfig fields, with where they live in a config file
OVERRIDE_FLAGS = {
    'T': ('integrator', 'T'),
    'steps': ('integrator', 'steps'),
    'scheme': ('integrator', 'scheme'),
    'seed': ('seed',),
    'temperature': ('temperature',),
    'beta': ('beta',),
    'K': ('K',),
    'iters': ('roothaan', 'iterations'),
    'coupling': ('model', 'coupling'),
    'output': ('output',),
}


def parse_cl_args(argv=None):
    common = argparse.ArgumentParser(add_help=False)

    common.add_argument(
        '--loglevel',
        help='Logging level to output at',
    )

    common.add_argument(
        '-c', '--config',
        metavar='experiment filename',
        default=None,
        help='Experiment config file; its values win over the flags below',
    )

    common.add_argument(
        '--settings',
        metavar='settings filename',
        default=None,
        help='JSON file overriding tool settings (see docs/config-EXAMPLE.json)',
    )

    common.add_argument('--preset', help='Preset to start from when no config file is given')
    common.add_argument('--output', help='Output directory (default $MFTO_OUTPUT_DIR)')
    common.add_argument('--T', type=float, help='Lag time in seconds')
    common.add_argument('--steps', type=int, help='Integration steps')
    common.add_argument('--scheme', choices=('explicit-euler', 'rk4'))
    common.add_argument('--seed', type=int)
    common.add_argument('--temperature', type=float, help='Kelvin')
    common.add_argument('--beta', type=float)
    common.add_argument('--K', type=int, help='Samples per cell')
    common.add_argument('--iters', type=int, help='Roothaan sweeps')
    common.add_argument('--coupling', type=float, help='Interaction strength of double_well_2d')
    common.add_argument('--threads', type=int, help='Worker threads for the assembly')

    parser = argparse.ArgumentParser(
        prog='mfto',
        description='Full and mean-field transfer operators of molecular models',
    )
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    commands.add_parser('assemble-full', parents=[common],
                        help='Assemble the full spatial operator and export its eigenpairs')
    commands.add_parser('roothaan', parents=[common],
                        help='Self-consistent mean-field factors, component spectra and products')

    mf = commands.add_parser('assemble-mf', parents=[common],
                             help='Assemble one component map from saved factor files')
    mf.add_argument('--subsystem', type=int, required=True)
    mf.add_argument('--factors', nargs='+', required=True, metavar='FILE',
                    help='One factor file per subsystem')

    eigs = commands.add_parser('eigs', parents=[common], help='Eigenpairs of a saved matrix')
    eigs.add_argument('--matrix', required=True, metavar='FILE')
    eigs.add_argument('--k', type=int, default=4)

    cmp = commands.add_parser('compare', parents=[common], help='Compare a full run with a mean-field run')
    cmp.add_argument('--full', required=True, metavar='DIR')
    cmp.add_argument('--meanfield', required=True, metavar='DIR')

    for name, help_text in (('run-paper-butane', 'Full, mean-field and comparison runs for butane'),
                            ('run-paper-2d', 'Full, mean-field and comparison runs for the 2D double well')):
        run = commands.add_parser(name, parents=[common], help=help_text)
        run.add_argument('--dump-config', metavar='FILE',
                         help='Write the effective experiment config and exit')

    return parser.parse_args(argv)


def _present(config, path):
    node = config
    for key in path:
        if not isinstance(node, dict) or key not in node:
            return False
        node = node[key]
    return True


def load_experiment(cl_args, default_preset='double_well_2d'):
    """
    Preset (or config file) plus command line flags.  A value set in the
    config file is never overridden by a flag.
    """
    flags = {k: getattr(cl_args, k, None) for k in OVERRIDE_FLAGS}
    if cl_args.config:
        try:
            with open(cl_args.config, 'r') as f:
                config = simplejson.load(f)
        except (IOError, simplejson.errors.JSONDecodeError) as e:
            raise ConfigError("Cannot read experiment config %s: %s" % (cl_args.config, e))
        flags = {k: v for k, v in flags.items() if not _present(config, OVERRIDE_FLAGS[k])}
        if 'temperature' in config or 'beta' in config:
            flags.pop('temperature', None)
            flags.pop('beta', None)
    else:
        config = preset(cl_args.preset or default_preset)
    return ExperimentConfig.from_dict(config).with_overrides(**flags)


def _invariant_mass(invariant):
    return invariant / invariant.sum()


def run_full(exp, threads=None):
    """Assemble the full spatial operator, extract eigenpairs, write every artifact."""
    model = exp.build_model()
    part = exp.build_partition(model)
    ens = exp.build_ensemble(model)
    spec = exp.build_integrator(model)
    rng = exp.build_rng()
    stats = StatsCollector()
    writer = Artifacts.ArtifactWriter(os.path.join(exp.output_dir, FULL_DIR), exp.identity(), rng.seed)

    logger.info('Assembling the full operator of %s on %s cells, K=%d', model.name, part.counts, exp.K)
    P = assemble_full_spatial(model, ens, part, exp.K, spec, rng, threads, stats)
    writer.write_matrix('matrix.txt', P)

    k = min(exp.eigenpairs, part.n)
    result = dominant_eigs(P, k, verify=True)
    writer.write_spectrum('eigenvalues.csv', result)
    invariant = _invariant_mass(perron_vector(P))
    writer.write_grid('invariant.txt', part, invariant, rank=1)

    rows = []
    for rank in range(1, k + 1):
        value = complex(result.eigenvalues[rank - 1])
        name = 'eigenvector-%d' % rank
        writer.write_grid(name + '.txt', part, result.vector(rank - 1), rank=rank,
                          eigenvalue=[value.real, value.imag])
        if exp.slice:
            writer.write_grid_slice(name + '-slice.txt', part, result.vector(rank - 1), exp.slice['axis'],
                                    exp.slice['coordinate'], rank=rank, eigenvalue=[value.real, value.imag])
        if rank == 1:
            continue
        try:
            v = result.vector(rank - 1)
            plus, minus = almost_invariant_sets(v, part)
            # |v| is the measure for which rho(A+) + rho(A-) = lambda + 1 holds exactly
            rho_plus = invariance_ratio(P, plus, np.abs(v))
            rho_minus = invariance_ratio(P, minus, np.abs(v))
        except (DegenerateDecompositionError, UndefinedProbabilityError) as e:
            logger.warning('Eigenvector %d: %s', rank, e)
            continue
        logger.info('Eigenvector %d: rho(A+) + rho(A-) = %.4f, lambda + 1 = %.4f',
                    rank, rho_plus + rho_minus, value.real + 1.0)
        rows.append((rank, value.real, rho_plus, rho_minus, rho_plus + rho_minus, value.real + 1.0,
                     rho_plus + rho_minus - value.real - 1.0))
    writer.write_csv('invariance.csv', INVARIANCE_COLUMNS, rows)

    logger.info('Full run done: %s', stats.getSummary())
    return {'part': part, 'matrix': P, 'spectrum': result, 'invariant': invariant}


def run_meanfield(exp, threads=None):
    """Roothaan iteration, component spectra and the configured product eigenfunctions."""
    model = exp.build_model()
    layout = exp.build_layout()
    parts = exp.build_subsystem_partitions(model)
    full_part = exp.build_partition(model)
    ens = exp.build_ensemble(model)
    spec = exp.build_integrator(model)
    rng = exp.build_rng()
    stats = StatsCollector()
    writer = Artifacts.ArtifactWriter(os.path.join(exp.output_dir, MEANFIELD_DIR), exp.identity(), rng.seed)

    initial = boltzmann_factors(ens, layout, parts)
    inertia = reference_inertia(ens, layout, parts, initial)

    def on_sweep(sweep, factors):
        for w in factors:
            writer.write_factor('factor-%d-sweep-%02d.txt' % (w.index, sweep), w, sweep=sweep)

    roothaan = exp.roothaan
    result = roothaan_iterate(model, layout, initial, parts, ens, exp.K, spec, exp.iterations, rng,
                              order=roothaan.get('order'), damping=roothaan.get('damping'),
                              inertia=inertia, threads=threads, stats=stats, on_sweep=on_sweep)
    writer.write_csv('roothaan.csv', ['sweep'] + ['change_%d' % i for i in range(layout.n)],
                     [[s + 1] + c for s, c in enumerate(result.changes)], order=result.order,
                     converging=result.converging)

    spectra = component_spectra(model, layout, result.factors, parts, ens, exp.K, spec, rng, exp.eigenpairs,
                                 inertia, threads, stats)
    factor_sets = []
    for i, (P, spectrum) in enumerate(spectra):
        w = result.factors[i]
        writer.write_factor('factor-%d.txt' % i, w)
        writer.write_spectrum('component-%d-eigenvalues.csv' % i, spectrum, subsystem=i,
                              fixed_point_residual=component_residual(P, w))
        factors = component_factors(i, parts[i], w, spectrum)
        for rank, f in enumerate(factors[1:], start=2):
            writer.write_factor('component-%d-eigen-%d.txt' % (i, rank), f, rank=rank)
        factor_sets.append(factors)

    products = []
    for entry in exp.products:
        product = product_eigenfunction(factor_sets, entry['factors'], full_part)
        value = complex(product.eigenvalue)
        name = 'product-' + '_'.join(entry['factors'])
        header = {'selection': entry['factors'], 'full_rank': entry['full_rank'],
                  'eigenvalue': [value.real, value.imag]}
        writer.write_grid(name + '.txt', full_part, product.values, **header)
        if exp.slice:
            writer.write_grid_slice(name + '-slice.txt', full_part, product.values, exp.slice['axis'],
                                    exp.slice['coordinate'], **header)
        products.append(product)

    logger.info('Mean-field run done: %s', stats.getSummary())
    return {'part': full_part, 'factors': result.factors, 'spectra': spectra, 'products': products,
            'roothaan': result}


def load_full_run(directory):
    """Eigenvectors and invariant masses written by run_full."""
    files = glob.glob(os.path.join(directory, 'eigenvector-*.txt'))
    ranks = sorted(int(os.path.basename(f)[len('eigenvector-'):-len('.txt')]) for f in files
                   if not f.endswith('-slice.txt'))
    if not ranks:
        raise ComparisonError("No eigenvector dumps in %s" % directory)
    part, invariant, _ = Artifacts.read_grid(os.path.join(directory, 'invariant.txt'))
    vectors, values = [], []
    for rank in ranks:
        vpart, v, header = Artifacts.read_grid(os.path.join(directory, 'eigenvector-%d.txt' % rank))
        if not vpart.same_grid(part):
            raise ComparisonError("Eigenvector %d of %s is on another grid" % (rank, directory))
        vectors.append(v)
        values.append(complex(*header['eigenvalue']))
    values = np.array(values)
    spectrum = SpectralResult(values, np.stack(vectors, axis=1), np.zeros(len(values)), 'loaded')
    return part, spectrum, invariant


def load_products(directory):
    products, ranks = [], []
    for path in sorted(glob.glob(os.path.join(directory, 'product-*.txt'))):
        if path.endswith('-slice.txt'):
            continue
        part, values, header = Artifacts.read_grid(path)
        products.append(ProductFunction(part, values, complex(*header['eigenvalue']), header['selection']))
        ranks.append(int(header['full_rank']))
    if not products:
        raise ComparisonError("No product dumps in %s" % directory)
    return products, ranks


def write_report(report, output_dir, config, seed):
    writer = Artifacts.ArtifactWriter(output_dir, config, seed)
    path = writer.write_report('comparison', report)
    print(report.table())
    return path


def run_paper(cl_args, default_preset):
    exp = load_experiment(cl_args, default_preset)
    if cl_args.dump_config:
        with open(cl_args.dump_config, 'w') as f:
            f.write(exp.dumps() + '\n')
        logger.info('Wrote experiment config to %s', cl_args.dump_config)
        return 0
    full = run_full(exp, cl_args.threads)
    mf = run_meanfield(exp, cl_args.threads)
    ranks = [entry['full_rank'] for entry in exp.products]
    report = compare(full['part'], full['spectrum'], full['invariant'], mf['products'], ranks)
    write_report(report, exp.output_dir, exp.identity(), exp.seed)
    return 0


def cmd_assemble_full(cl_args):
    run_full(load_experiment(cl_args), cl_args.threads)
    return 0


def cmd_roothaan(cl_args):
    run_meanfield(load_experiment(cl_args), cl_args.threads)
    return 0


def cmd_assemble_mf(cl_args):
    exp = load_experiment(cl_args)
    model = exp.build_model()
    layout = exp.build_layout()
    factors = sorted((Artifacts.read_factor(f) for f in cl_args.factors), key=lambda w: w.index)
    if [w.index for w in factors] != list(range(layout.n)):
        raise ConfigError("Need exactly one factor file per subsystem, got subsystems %s"
                          % [w.index for w in factors])
    i = cl_args.subsystem
    if not 0 <= i < layout.n:
        raise ConfigError("No subsystem %d in a layout of %d" % (i, layout.n))
    parts = [w.part for w in factors]
    ens = exp.build_ensemble(model)
    rng = exp.build_rng()
    stats = StatsCollector()
    P = assemble_mf_component_spatial(model, layout, i, factors, ens, parts[i], exp.K, exp.build_integrator(model),
                                      rng, reference_inertia(ens, layout, parts), cl_args.threads, stats)
    writer = Artifacts.ArtifactWriter(exp.output_dir, exp.identity(), rng.seed)
    writer.write_matrix('component-%d-matrix.txt' % i, P)
    return 0


def cmd_eigs(cl_args):
    P, header = Artifacts.read_matrix(cl_args.matrix)
    part = TensorPartition.from_description(P.metadata['grid'])
    result = dominant_eigs(P, min(cl_args.k, P.n), verify=True)
    output = cl_args.output or os.path.dirname(os.path.abspath(cl_args.matrix))
    writer = Artifacts.ArtifactWriter(output, {'matrix': header['config_hash']}, header['seed'])
    stem = os.path.splitext(os.path.basename(cl_args.matrix))[0]
    writer.write_spectrum(stem + '-eigenvalues.csv', result, matrix_hash=header['config_hash'])
    for rank in range(1, result.k + 1):
        value = complex(result.eigenvalues[rank - 1])
        writer.write_grid('%s-eigenvector-%d.txt' % (stem, rank), part, sign_normalize(result.vector(rank - 1)),
                          rank=rank, eigenvalue=[value.real, value.imag])
    return 0


def cmd_compare(cl_args):
    part, spectrum, invariant = load_full_run(cl_args.full)
    products, ranks = load_products(cl_args.meanfield)
    report = compare(part, spectrum, invariant, products, ranks)
    output = cl_args.output or Settings.OUTPUT_DIR
    write_report(report, output, {'full': os.path.abspath(cl_args.full),
                                  'meanfield': os.path.abspath(cl_args.meanfield)}, 0)
    return 0


COMMANDS = {
    'assemble-full': cmd_assemble_full,
    'roothaan': cmd_roothaan,
    'assemble-mf': cmd_assemble_mf,
    'eigs': cmd_eigs,
    'compare': cmd_compare,
    'run-paper-butane': lambda cl_args: run_paper(cl_args, 'butane_ua'),
    'run-paper-2d': lambda cl_args: run_paper(cl_args, 'double_well_2d'),
}


def main(argv=None):
    cl_args = parse_cl_args(argv)
    if cl_args.loglevel:
        logger.setLevel(cl_args.loglevel.upper())

    try:
        loadConfig(cl_args)
        if cl_args.threads:
            Settings.THREADS = cl_args.threads
        return COMMANDS[cl_args.command](cl_args)

    except MftoError as e:
        logger.error('%s: %s', type(e).__name__, e)
        sys.exit(e.exit_code)


if __name__ == '__main__':
    sys.exit(main())
