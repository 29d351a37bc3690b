# -*- coding: utf-8 -*-
"""
Command-line interface to the experiment harness

Usage::

    spavid [--seed N] [--out-dir DIR] [--config FILE] [--set KEY=VALUE ...] [--verbose] \\
           COMMAND [OPTIONS]

Global options apply to every command; `--set` overrides any config-file key. Commands:
gen-data, train, attack, sparsity-sweep, propagation-report, splice-attack, transfer-matrix,
universal, timing.
"""
import logging
import click
import matplotlib

from spavid.errors import SpavidError
from spavid.harness.config import load_config, parse_value
from spavid.harness import harness

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'


@click.group()
@click.option('--seed', type=int, default=None, help="Random seed (default 0)")
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help="Root output directory (default 'results')")
@click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
              default=None, help="Flat key = value config file")
@click.option('--set', 'settings', multiple=True, metavar='KEY=VALUE',
              help="Override a config key (repeatable)")
@click.option('--n-jobs', type=int, default=None, help="Worker processes for attack jobs")
@click.option('--verbose', '-v', is_flag=True, help="Log debug messages")
@click.pass_context
def cli(ctx, seed, out_dir, config_file, settings, n_jobs, verbose):
    """Sparse adversarial perturbations for video classifiers: experiment harness."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)
    matplotlib.use('Agg')

    overrides = {}
    for setting in settings:
        if '=' not in setting:
            raise click.BadParameter("expected KEY=VALUE, got '%s'" % setting, param_hint='--set')
        key, value = setting.split('=', 1)
        overrides[key.strip()] = parse_value(value)
    overrides.update(seed=seed, out_dir=out_dir, n_jobs=n_jobs, verbose=verbose or None)

    ctx.obj = {'config_file': config_file, 'overrides': overrides}


def _config(ctx, **overrides):
    """ Resolve ExperimentConfig from global options plus command-specific overrides """
    values = dict(ctx.obj['overrides'])
    values.update({key: value for key,value in overrides.items() if value is not None})
    try:
        return load_config(ctx.obj['config_file'], **values)
    except SpavidError as err:
        raise click.ClickException(str(err))


def _run(command, *args, **kwargs):
    """ Run harness command, reporting library errors as CLI errors """
    try:
        results = command(*args, **kwargs)
    except SpavidError as err:
        raise click.ClickException(str(err))
    click.echo(results['table'].to_string(index=False))


@cli.command('gen-data')
@click.option('--dest', type=click.Path(file_okay=False), default=None,
              help="Dataset directory (default <out-dir>/data)")
@click.pass_context
def gen_data(ctx, dest):
    """Simulate a synthetic moving-shape dataset and save it."""
    _run(harness.cmd_gen_data, _config(ctx), dest)


@cli.command()
@click.option('--data-dir', default=None, help="Saved dataset directory")
@click.option('--head-kind', 'head_kinds', multiple=True,
              help="Head kind(s) to train (default: all four)")
@click.option('--epochs', type=int, default=None)
@click.pass_context
def train(ctx, data_dir, head_kinds, epochs):
    """Train and save threat models."""
    _run(harness.cmd_train, _config(ctx, data_dir=data_dir, epochs=epochs,
                                    head_kinds=list(head_kinds) or None))


@cli.command()
@click.option('--video-id', default=None, help="Attack one clip (default: whole test set)")
@click.option('--head-kind', default=None)
@click.option('--mode', type=click.Choice(['single', 'universal', 'masked', 'targeted']),
              default=None)
@click.option('--norm', type=click.Choice(['L2', 'L21'], case_sensitive=False), default=None)
@click.option('--lambda', 'lam', type=float, default=None, help="Regularization weight")
@click.option('--iters', type=int, default=None)
@click.option('--target', 'target_label', type=int, default=None,
              help="Target class (targeted mode)")
@click.option('--mask', default=None, help="Comma-separated per-frame mask bits")
@click.pass_context
def attack(ctx, video_id, head_kind, mode, norm, lam, iters, target_label, mask):
    """Run an attack on one clip or the test set."""
    mask = parse_value(mask + ',') if mask is not None else None
    _run(harness.cmd_attack, _config(ctx, head_kind=head_kind, mode=mode, norm=norm, lam=lam,
                                     iters=iters, target_label=target_label, mask=mask),
         video_id)


@cli.command('sparsity-sweep')
@click.option('--head-kind', default=None)
@click.option('--polluted', default=None, help="Comma-separated polluted-prefix lengths")
@click.pass_context
def sparsity_sweep(ctx, head_kind, polluted):
    """Fooling rate and perceptibility vs number of polluted frames."""
    polluted = parse_value(polluted + ',') if polluted is not None else None
    _run(harness.cmd_sparsity_sweep, _config(ctx, head_kind=head_kind, polluted=polluted))


@cli.command('propagation-report')
@click.option('--video-id', default=None, help="Report one clip (default: test-set statistic)")
@click.option('--head-kind', default=None)
@click.option('--polluted', 'propagation_polluted', type=int, default=None,
              help="Polluted-prefix length")
@click.pass_context
def propagation_report(ctx, video_id, head_kind, propagation_polluted):
    """Per-frame MAP and label flips of l2,1 vs l2 attacks."""
    _run(harness.cmd_propagation_report,
         _config(ctx, head_kind=head_kind, propagation_polluted=propagation_polluted), video_id)


@cli.command('splice-attack')
@click.option('--head-kind', default=None)
@click.option('-n', '--n-frames', 'lengths', type=int, multiple=True,
              help="Sub-clip length N (repeatable)")
@click.option('--universal', 'splice_universal', is_flag=True, default=None,
              help="One perturbation shared by all sub-clips")
@click.pass_context
def splice_attack(ctx, head_kind, lengths, splice_universal):
    """Attack the first N frames only and splice into the full clip."""
    _run(harness.cmd_splice_attack,
         _config(ctx, head_kind=head_kind, splice_universal=splice_universal),
         list(lengths) or None)


@cli.command('transfer-matrix')
@click.option('--universal', 'transfer_universal', is_flag=True, default=None,
              help="Transfer universal instead of per-clip perturbations")
@click.pass_context
def transfer_matrix(ctx, transfer_universal):
    """Fooling rates of perturbations across threat models."""
    _run(harness.cmd_transfer_matrix, _config(ctx, transfer_universal=transfer_universal))


@cli.command()
@click.option('--head-kind', default=None)
@click.option('--lambda', 'lam', type=float, default=None, help="Regularization weight")
@click.pass_context
def universal(ctx, head_kind, lam):
    """One perturbation across train clips, evaluated on train and test."""
    _run(harness.cmd_universal, _config(ctx, head_kind=head_kind, lam=lam))


@cli.command()
@click.option('--head-kind', default=None)
@click.option('--iters', 'timing_iters', type=int, default=None,
              help="Timed iterations per point")
@click.pass_context
def timing(ctx, head_kind, timing_iters):
    """Seconds per attack iteration vs sparsity."""
    _run(harness.cmd_timing, _config(ctx, head_kind=head_kind, timing_iters=timing_iters))


if __name__ == '__main__':
    cli()
