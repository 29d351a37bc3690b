# -*- coding: utf-8 -*-
"""
Experiment commands: train threat models, run attacks, and emit tables, reports, and curves

Overview
--------
Each `cmd_*` function runs one experiment from an :class:`ExperimentConfig` and writes its
outputs into ``<out_dir>/<command>/``:

- table.csv :   Result table. Every row carries the config hash and seed. Floats are written
                with a fixed format, so re-running gives byte-identical files (timing columns
                excepted).
- report.json : Summary values, the resolved config, config hash, and seed
- curve.svg :   Per-frame MAP or trend curve (some commands also write frames.svg/matrix.svg)

Commands also return ``{'table': DataFrame, 'report': dict}``.

Per-clip attacks run in batches of `batch_size` clips, optionally in a process pool of
`n_jobs` workers. Batch composition does not depend on `n_jobs`, and results are sorted
by clip id, so outputs are identical for any worker count.

Function list
-------------
Commands
^^^^^^^^
- cmd_gen_data :            Simulate and save a synthetic dataset
- cmd_train :               Train and save threat models of each head kind
- cmd_attack :              Run the configured attack on one clip or the test set
- cmd_sparsity_sweep :      Fooling rate/perceptibility vs number of polluted frames
- cmd_propagation_report :  Per-frame MAP and labels of l2,1 vs l2 attacks, propagated frames
- cmd_splice_attack :       Attack first N frames only, splice into full clip
- cmd_transfer_matrix :     Fooling rates of perturbations across threat models
- cmd_universal :           One perturbation across clips, train and test fooling rates
- cmd_timing :              Seconds per attack iteration vs sparsity (shortened clips)

Building blocks
^^^^^^^^^^^^^^^
- load_data :               Load saved dataset or simulate it from config
- load_threat_model :       Load saved model of given head kind
- attackable_clips :        Test clips a model classifies correctly
- run_attacks :             Batched (optionally parallel) independent attacks
- propagated_frames :       Frames with ~zero perturbation whose frame label flipped

Function reference
------------------
"""
import os
import json
import logging
from warnings import warn
from concurrent.futures import ProcessPoolExecutor
import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

from spavid.errors import ConfigError, AttackError
from spavid.helpers import _to_builtin
from spavid.utils import set_random_seed, derive_seed, rank_correlation, is_monotonic, \
                         hardware_info
from spavid.data import generate, load_dataset, save_dataset, stack_videos, \
                        frame_probe_accuracy
from spavid.metrics import metric_set, fooling_rate, map_perceptibility
from spavid.models import init_model, train, evaluate, save_model, load_model, predict
from spavid.attack import prefix_mask, attack_single, attack_masked, attack_targeted, \
                          attack_universal, attack_each, correctly_classified
from spavid.plots import plot_map_curves, plot_perturbation_frames, plot_heatmap, \
                         plot_line_with_error_fill, savefig
from spavid.harness.config import config_hash

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.6g'
TIMING_WARMUP_ITERS = 5


# =============================================================================
# Commands
# =============================================================================
def cmd_gen_data(cfg, dirname=None):
    """
    Simulate synthetic dataset from `cfg.spec` and save it

    Parameters
    ----------
    cfg : ExperimentConfig

    dirname : str, default: `cfg.data_dir` or <out_dir>/data
        Dataset directory to write

    Returns
    -------
    results : dict {'table','report'}
        table has one row per clip: id, label, split
    """
    set_random_seed(cfg.seed)
    if dirname is None:
        dirname = cfg.data_dir if cfg.data_dir is not None else os.path.join(cfg.out_dir, 'data')

    train_items, test_items = generate(cfg.spec)
    save_dataset(dirname, train_items, test_items, cfg.spec)

    table = pd.DataFrame([{'id': item.id, 'label': item.label, 'split': split}
                          for split,items in (('train',train_items), ('test',test_items))
                          for item in items])
    videos, labels, _ = stack_videos(train_items + test_items)
    report = {'dataset_id': cfg.spec.dataset_id, 'dirname': dirname,
              'n_train': len(train_items), 'n_test': len(test_items),
              'frame_probe_direction_accuracy': frame_probe_accuracy(videos, labels, cfg.seed)}
    logger.info("Saved dataset %s to '%s' (%d train, %d test clips)", cfg.spec.dataset_id,
                dirname, len(train_items), len(test_items))

    return _write_outputs(cfg, 'gen-data', table, report)


def cmd_train(cfg):
    """
    Train a threat model of each head kind in `cfg.head_kinds`, save to `cfg.models_path`

    Initialization and shuffling seeds derive from `cfg.seed` and the head kind, so a re-run
    with the same seed reproduces identical weights.

    Returns
    -------
    results : dict {'table','report'}
        table has one row per head kind: head_kind, train, test, direction_train, direction_test

    Raises
    ------
    DivergenceError
        If training diverges
    """
    set_random_seed(cfg.seed)
    train_items, test_items, spec = load_data(cfg)
    videos, labels, _ = stack_videos(train_items)
    test_videos, test_labels, _ = stack_videos(test_items)
    num_classes = spec.num_classes if spec is not None \
                  else int(max(labels.max(), test_labels.max())) + 1
    dataset_id = spec.dataset_id if spec is not None else ''

    rows = []
    models = {}
    for kind in cfg.head_kinds:
        model = init_model(kind, videos.shape[2:], num_classes, hidden_size=cfg.hidden_size,
                           encoder_dim=cfg.encoder_dim, seed=derive_seed(cfg.seed, kind),
                           dataset_id=dataset_id)
        model, accuracy = train(model, videos, labels, test_videos, test_labels,
                                epochs=cfg.epochs, lr=cfg.train_lr,
                                batch_size=cfg.train_batch_size,
                                seed=derive_seed(cfg.seed, kind + '/shuffle'), verbose=cfg.verbose)
        filename = cfg.model_file(kind)
        save_model(filename, model)
        models[kind] = filename
        rows.append({'head_kind': kind, **accuracy})
        logger.info("Trained %s: train acc %.3f, test acc %.3f -> '%s'",
                    kind, accuracy['train'], accuracy['test'], filename)

    table = pd.DataFrame(rows, columns=['head_kind', 'train', 'test', 'direction_train',
                                        'direction_test'])
    report = {'dataset_id': dataset_id, 'models': models,
              'accuracy': {row['head_kind']: {k: v for k,v in row.items() if k != 'head_kind'}
                           for row in rows}}

    return _write_outputs(cfg, 'train', table, report)


def cmd_attack(cfg, video_id=None):
    """
    Run the attack configured in `cfg.attack` on one clip or on the test set

    Universal mode delegates to :func:`cmd_universal`. Perturbations are written as VTEN
    files under perturbations/<id>.vten.

    Parameters
    ----------
    cfg : ExperimentConfig

    video_id : str, optional
        Clip to attack (searched in test, then train split). If None, every correctly
        classified test clip (up to `cfg.max_clips`) is attacked independently.

    Returns
    -------
    results : dict {'table','report'}
        table has one row per attacked clip

    Raises
    ------
    AttackError
        Misclassified clip, or target equal to the true label
    """
    config = cfg.attack
    if config.mode == 'universal': return cmd_universal(cfg)

    set_random_seed(cfg.seed)
    model = load_threat_model(cfg)
    train_items, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)

    if video_id is not None:
        item = _find_clip(test_items + train_items, video_id)
        if config.mode == 'single':
            perturbation, report = attack_single(model, item.video, item.label, config)
        elif config.mode == 'masked':
            perturbation, report = attack_masked(model, item.video, item.label, config)
        else:
            perturbation, report = attack_targeted(model, item.video, item.label,
                                                   config.target_label, config)
        report.clip_ids = [item.id]
        perturbations, reports, ids, labels = [perturbation], [report], [item.id], [item.label]
    else:
        videos, labels, ids = attackable_clips(model, test_items, cfg.max_clips)
        perturbations, reports = run_attacks(model, videos, labels, ids, config,
                                             batch_size=cfg.batch_size, n_jobs=cfg.n_jobs)

    dirname = _output_dir(cfg, 'attack')
    for clip_id,perturbation in zip(ids, perturbations):
        perturbation.save(os.path.join(dirname, 'perturbations', '%s.vten' % clip_id))

    table = pd.DataFrame([{'id': clip_id, 'label': int(label),
                           'video_label_after': report.video_label_after,
                           'success': report.success,
                           'perceptibility_map': report.perceptibility_map,
                           'sparsity': report.sparsity,
                           'objective_final': report.objective_final}
                          for clip_id,label,report in zip(ids, labels, reports)])
    successes = [report.success for report in reports]
    metrics = metric_set(np.stack([p.data for p in perturbations]), successes,
                         config.pixel_scale, config.zero_threshold)
    report = {'head_kind': model.head_kind, 'mode': config.mode, 'norm': config.norm,
              'lam': config.lam, 'n_clips': len(reports),
              'fooling_rate': metrics.fooling_rate, 'perceptibility_map': metrics.perceptibility,
              'sparsity': metrics.sparsity, 'per_frame_map': metrics.per_frame_map,
              'reports': [report.to_dict() for report in reports]}

    fig = plt.figure()
    plot_map_curves(metrics.per_frame_map, polluted=_n_polluted(config.mask), ax=fig.gca())

    return _write_outputs(cfg, 'attack', table, report, figures={'curve.svg': fig})


def cmd_sparsity_sweep(cfg):
    """
    Fooling rate and perceptibility of masked attacks vs number of polluted leading frames

    For each n in `cfg.polluted`, attacks every attackable test clip with a prefix mask
    polluting only frames 1..n (sparsity S = (T-n)/T).

    Returns
    -------
    results : dict {'table','report'}
        table columns: n_polluted, K, S, F, P, measured_S, n_clips, clean_error
    """
    set_random_seed(cfg.seed)
    model = load_threat_model(cfg)
    _, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)

    test_videos, test_labels, _ = stack_videos(test_items)
    n_frames = test_videos.shape[1]
    _check_lengths(cfg.polluted, n_frames, 'polluted')
    clean_error = 1.0 - evaluate(model, test_videos, test_labels)[0]
    videos, labels, ids = attackable_clips(model, test_items, cfg.max_clips)

    rows, frame_maps = [], []
    for n_polluted in cfg.polluted:
        mask = prefix_mask(n_frames, n_polluted)
        config = cfg.attack.replace(mode='masked', mask=mask, target_label=None)
        perturbations, reports = run_attacks(model, videos, labels, ids, config,
                                             batch_size=cfg.batch_size, n_jobs=cfg.n_jobs)
        metrics = metric_set(np.stack([p.data for p in perturbations]),
                             [report.success for report in reports],
                             config.pixel_scale, config.zero_threshold)
        rows.append({'n_polluted': n_polluted, 'K': mask.K, 'S': mask.sparsity,
                     'F': metrics.fooling_rate, 'P': metrics.perceptibility,
                     'measured_S': metrics.sparsity, 'n_clips': len(ids),
                     'clean_error': clean_error})
        frame_maps.append(metrics.per_frame_map)
        logger.info("Sparsity sweep %s, %d polluted frames: F = %.3f, P = %.4g",
                    model.head_kind, n_polluted, metrics.fooling_rate, metrics.perceptibility)

    table = pd.DataFrame(rows)
    report = {'head_kind': model.head_kind, 'rows': rows,
              'spearman_S_F': rank_correlation(table['S'], table['F']),
              'spearman_S_P': rank_correlation(table['S'], table['P'])}

    fig = plt.figure()
    plot_map_curves(np.stack(frame_maps), labels=['%d polluted' % n for n in cfg.polluted],
                    ax=fig.gca())

    return _write_outputs(cfg, 'sparsity-sweep', table, report, figures={'curve.svg': fig})


def cmd_propagation_report(cfg, video_id=None):
    """
    Propagation of perturbations from polluted frames to later, clean frames

    With a `video_id`, attacks that clip with both l2,1 and l2 norms (prefix mask of
    `cfg.propagation_polluted` frames, or no mask if None), and reports per-frame MAP and
    frame labels before/after each attack. A frame is "propagated" if its MAP is below the
    zero threshold yet its frame label flipped.

    Without a `video_id`, runs the l2,1 attack on every attackable test clip and reports the
    fraction of successfully attacked clips with at least one propagated frame.

    Returns
    -------
    results : dict {'table','report'}
        Per-frame table (single clip) or per-clip table (batch)

    Raises
    ------
    AttackError
        If the given clip is misclassified
    """
    set_random_seed(cfg.seed)
    model = load_threat_model(cfg)
    train_items, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)

    n_frames = test_items[0].video.shape[0]
    n_polluted = cfg.propagation_polluted
    if n_polluted is not None: _check_lengths([n_polluted], n_frames, 'propagation_polluted')
    mask = prefix_mask(n_frames, n_polluted) if n_polluted is not None else None
    configs = {norm: cfg.attack.replace(mode='masked' if mask is not None else 'single',
                                        mask=mask, norm=norm, target_label=None)
               for norm in ('L21', 'L2')}
    clean = mask.bits == 0 if mask is not None else np.ones(n_frames, dtype=bool)

    if video_id is not None:
        return _propagation_single(cfg, model, _find_clip(test_items + train_items, video_id),
                                   configs, clean, n_polluted)

    config = configs['L21']
    videos, labels, ids = attackable_clips(model, test_items, cfg.max_clips)
    perturbations, reports = run_attacks(model, videos, labels, ids, config,
                                         batch_size=cfg.batch_size, n_jobs=cfg.n_jobs)

    rows = []
    for clip_id,label,report in zip(ids, labels, reports):
        flags = propagated_frames(report.per_frame_map, report.frame_labels_before,
                                  report.frame_labels_after, config.zero_threshold,
                                  config.pixel_scale) & clean
        rows.append({'id': clip_id, 'label': int(label), 'success': report.success,
                     'video_label_after': report.video_label_after,
                     'n_propagated': int(flags.sum())})
    table = pd.DataFrame(rows)

    successful = table[table['success']]
    propagated_fraction = float(np.mean(successful['n_propagated'] > 0)) \
                          if len(successful) > 0 else np.nan
    if len(successful) == 0: warn("No clip was successfully attacked")

    frame_map = metric_set(np.stack([p.data for p in perturbations]),
                           [row['success'] for row in rows], config.pixel_scale).per_frame_map
    report = {'head_kind': model.head_kind, 'n_polluted': n_polluted, 'n_clips': len(ids),
              'n_success': len(successful), 'propagated_fraction': propagated_fraction,
              'per_frame_map': frame_map}

    fig = plt.figure()
    plot_map_curves(frame_map, polluted=n_polluted, ax=fig.gca())

    return _write_outputs(cfg, 'propagation-report', table, report, figures={'curve.svg': fig})


def cmd_splice_attack(cfg, lengths=None):
    """
    Attack the first N frames of each clip only, then splice the perturbation into the full clip

    For each N and each of the l2 and l2,1 norms, optimizes a non-targeted attack on the
    sub-clips X[:N], pastes the perturbed frames into the full clips (later frames unchanged),
    and evaluates the full clips' video labels. N = T is an ordinary full attack.
    If `cfg.splice_universal`, each N instead uses one perturbation shared by all sub-clips.

    Parameters
    ----------
    cfg : ExperimentConfig

    lengths : list of int, default: `cfg.splice_lengths`
        Sub-clip lengths N, each 1 <= N <= T

    Returns
    -------
    results : dict {'table','report'}
        table columns: N, norm, F, P, sub_F, n_clips

    Raises
    ------
    ConfigError
        If any N is out of range
    """
    set_random_seed(cfg.seed)
    lengths = list(cfg.splice_lengths if lengths is None else np.atleast_1d(lengths))
    model = load_threat_model(cfg)
    _, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)

    videos, labels, ids = attackable_clips(model, test_items, cfg.max_clips)
    _check_lengths(lengths, videos.shape[1], 'splice length N')

    rows = []
    mode = 'universal' if cfg.splice_universal else 'single'
    for norm in ('L2', 'L21'):
        config = cfg.attack.replace(mode=mode, norm=norm, mask=None, target_label=None)
        for n_sub in lengths:
            spliced = np.zeros_like(videos)
            if cfg.splice_universal:
                perturbation, attack_report = attack_universal(model, videos[:, :n_sub],
                                                               labels, config)
                spliced[:, :n_sub] = perturbation.data
                reports = [attack_report]
            else:
                perturbations, reports = run_attacks(model, videos[:, :n_sub], labels, ids,
                                                     config, batch_size=cfg.batch_size,
                                                     n_jobs=cfg.n_jobs, check_correct=False)
                spliced[:, :n_sub] = np.stack([p.data for p in perturbations])
            spliced = np.clip(videos + spliced, 0.0, 1.0) - videos
            fooled = ~correctly_classified(model, videos + spliced, labels)
            rows.append({'N': int(n_sub), 'norm': norm, 'F': fooling_rate(fooled),
                         'P': map_perceptibility(spliced, config.pixel_scale),
                         'sub_F': fooling_rate(np.concatenate([report.successes
                                                               for report in reports])),
                         'n_clips': len(ids)})
            logger.info("Splice attack %s, N=%d, %s: F = %.3f",
                        model.head_kind, n_sub, norm, rows[-1]['F'])

    table = pd.DataFrame(rows)
    report = {'head_kind': model.head_kind, 'universal': cfg.splice_universal, 'rows': rows}

    fig = plt.figure()
    curves = np.stack([table[table['norm'] == norm]['F'].values for norm in ('L2', 'L21')])
    lines, _, ax = plot_line_with_error_fill(lengths, curves, ax=fig.gca(), marker='*',
                                             xlabel='N', ylabel='Fooling rate')
    ax.legend([line[0] for line in lines], ['l2', 'l2,1'], frameon=False)

    return _write_outputs(cfg, 'splice-attack', table, report, figures={'curve.svg': fig})


def cmd_transfer_matrix(cfg):
    """
    Fooling rates of perturbations generated on each threat model, evaluated on each model

    Rows are generating models, columns evaluating models (head kinds `cfg.head_kinds`).
    Per-clip perturbations (or one universal perturbation computed on the train split, if
    `cfg.transfer_universal`) are generated on each row model's correctly classified test
    clips. Each entry is computed over clips correctly classified by both models.

    Returns
    -------
    results : dict {'table','report'}
        table is the matrix, indexed by generating model

    Raises
    ------
    ConfigError
        If the models were trained on different datasets
    """
    set_random_seed(cfg.seed)
    kinds = cfg.head_kinds
    models = {kind: load_threat_model(cfg, kind) for kind in kinds}
    train_items, test_items, spec = load_data(cfg)
    _check_dataset(list(models.values()), spec)

    test_videos, test_labels, test_ids = stack_videos(test_items)
    correct = {kind: correctly_classified(models[kind], test_videos, test_labels)
               for kind in kinds}

    matrix = pd.DataFrame(np.nan, index=pd.Index(kinds, name='generate'), columns=kinds)
    counts = {}
    for row in kinds:
        attacked = _select(correct[row], cfg.max_clips)
        if not attacked.any():
            raise AttackError("%s model classifies no test clip correctly" % row)
        if cfg.transfer_universal:
            videos, labels, _ = stack_videos(train_items)
            config = cfg.attack.replace(mode='universal', target_label=None)
            perturbation, _ = attack_universal(models[row], videos, labels, config)
            adversarial = np.clip(test_videos[attacked] + perturbation.data, 0.0, 1.0)
        else:
            config = cfg.attack.replace(mode='single', mask=None, target_label=None)
            perturbations, _ = run_attacks(models[row], test_videos[attacked],
                                           test_labels[attacked],
                                           [test_ids[i] for i in np.flatnonzero(attacked)],
                                           config, batch_size=cfg.batch_size, n_jobs=cfg.n_jobs)
            adversarial = test_videos[attacked] + np.stack([p.data for p in perturbations])

        for col in kinds:
            both = correct[col][attacked]
            counts[(row, col)] = int(both.sum())
            if not both.any():
                warn("No clips correctly classified by both %s and %s models" % (row, col))
                continue
            fooled = ~correctly_classified(models[col], adversarial[both],
                                           test_labels[attacked][both])
            matrix.loc[row, col] = fooling_rate(fooled)
        logger.info("Transfer matrix row %s: %s", row, matrix.loc[row].values)

    values = matrix.values
    report = {'matrix': {row: matrix.loc[row].to_dict() for row in kinds},
              'n_clips': {'%s->%s' % key: n for key,n in counts.items()},
              'column_means': matrix.mean(axis=0).to_dict(),
              'diagonal_dominant': {row: bool(np.nanmax(values[i]) <= values[i,i])
                                    for i,row in enumerate(kinds)},
              'universal': cfg.transfer_universal}

    fig = plt.figure()
    img, ax = plot_heatmap(np.arange(len(kinds)), np.arange(len(kinds)), values, ax=fig.gca(),
                           clim=(0,1))
    ax.invert_yaxis()
    ax.set_xticks(np.arange(len(kinds)), labels=kinds)
    ax.set_yticks(np.arange(len(kinds)), labels=kinds)
    ax.set(xlabel='Evaluate', ylabel='Generate')
    fig.colorbar(img, ax=ax)

    return _write_outputs(cfg, 'transfer-matrix', matrix.reset_index(), report,
                          figures={'matrix.svg': fig})


def cmd_universal(cfg):
    """
    One perturbation shared by all train clips; fooling rates on train and test splits

    Returns
    -------
    results : dict {'table','report'}
        table has one row per split: split, n_clips, fooling_rate, clean_error

    Raises
    ------
    ConfigError
        If either split is empty
    """
    set_random_seed(cfg.seed)
    model = load_threat_model(cfg)
    train_items, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)
    if (len(train_items) == 0) or (len(test_items) == 0):
        raise ConfigError("Universal attack requires nonempty train and test splits")

    videos, labels, _ = stack_videos(train_items)
    test_videos, test_labels, _ = stack_videos(test_items)
    config = cfg.attack.replace(mode='universal', target_label=None)
    perturbation, attack_report = attack_universal(model, videos, labels, config,
                                                   test_videos, test_labels)
    attack_report.seed = cfg.seed

    table = pd.DataFrame([
        {'split': 'train', 'n_clips': len(labels), 'fooling_rate': attack_report.fooling_rate,
         'clean_error': 1.0 - evaluate(model, videos, labels)[0]},
        {'split': 'test', 'n_clips': len(test_labels),
         'fooling_rate': attack_report.heldout_fooling_rate,
         'clean_error': 1.0 - evaluate(model, test_videos, test_labels)[0]}])

    dirname = _output_dir(cfg, 'universal')
    perturbation.save(os.path.join(dirname, 'perturbation.vten'))
    report = {'head_kind': model.head_kind, **attack_report.to_dict()}

    fig = plt.figure()
    plot_map_curves(attack_report.per_frame_map, polluted=_n_polluted(config.mask),
                    ax=fig.gca())
    frames_fig, _ = plot_perturbation_frames(perturbation.data, scale=config.pixel_scale)

    return _write_outputs(cfg, 'universal', table, report,
                          figures={'curve.svg': fig, 'frames.svg': frames_fig})


def cmd_timing(cfg):
    """
    Wall-clock seconds per attack iteration vs sparsity, using shortened clips

    For each S in `cfg.sparsities`, attacks the first round(T*(1-S)) frames (at least 1) of
    the first attackable test clip, with a short warm-up run followed by `cfg.timing_iters`
    timed iterations. Runs in the calling process only.

    Returns
    -------
    results : dict {'table','report'}
        table columns: S, n_frames, seconds_per_iteration. report includes hardware metadata.
    """
    set_random_seed(cfg.seed)
    model = load_threat_model(cfg)
    _, test_items, spec = load_data(cfg)
    _check_dataset([model], spec)
    videos, labels, ids = attackable_clips(model, test_items, max_clips=1)
    n_frames = videos.shape[1]

    config = cfg.attack.replace(mode='single', mask=None, target_label=None,
                                iters=cfg.timing_iters)
    rows = []
    for S in cfg.sparsities:
        n_sub = max(1, int(round(n_frames*(1.0 - S))))
        sub = videos[:, :n_sub]
        attack_each(model, sub, labels, config.replace(iters=TIMING_WARMUP_ITERS),
                    check_correct=False)
        _, reports = attack_each(model, sub, labels, config, check_correct=False)
        rows.append({'S': S, 'n_frames': n_sub,
                     'seconds_per_iteration': reports[0].seconds_per_iteration})
        logger.info("Timing %s, S=%.3f (%d frames): %.4g s/iteration",
                    model.head_kind, S, n_sub, rows[-1]['seconds_per_iteration'])

    table = pd.DataFrame(rows)
    report = {'head_kind': model.head_kind, 'clip_id': ids[0], 'iterations': cfg.timing_iters,
              'rows': rows, 'hardware': hardware_info(),
              'decreasing_within_20pct': is_monotonic(table['seconds_per_iteration'],
                                                      increasing=False, tol=0.2, relative=True)}

    fig = plt.figure()
    plot_line_with_error_fill(table['S'].values, table['seconds_per_iteration'].values,
                              ax=fig.gca(), marker='*', xlabel='Sparsity',
                              ylabel='Seconds per iteration')

    return _write_outputs(cfg, 'timing', table, report, figures={'curve.svg': fig})


# =============================================================================
# Building blocks
# =============================================================================
def load_data(cfg):
    """
    Load dataset from `cfg.data_dir`, or simulate it from `cfg.spec` if no directory is set

    Returns
    -------
    train, test : list of LabeledVideo
    spec : SyntheticSpec or None
        Generating spec (None for a saved dataset without spec.json)
    """
    if cfg.data_dir is not None:
        train_items, test_items, spec = load_dataset(cfg.data_dir)
    else:
        spec = cfg.spec
        train_items, test_items = generate(spec)
    if len(test_items) == 0:
        raise ConfigError("Dataset has no test clips")
    return train_items, test_items, spec


def load_threat_model(cfg, head_kind=None):
    """ Load saved model of given head kind (default: `cfg.head_kind`) """
    filename = cfg.model_file(head_kind)
    if not os.path.isfile(filename):
        raise ConfigError("No trained model at '%s'. Run the train command first." % filename)
    return load_model(filename)


def attackable_clips(model, items, max_clips=None):
    """
    Clips (of list of LabeledVideo) that a model classifies correctly, in id order

    Parameters
    ----------
    max_clips : int, optional
        Keep only the first `max_clips` correctly classified clips

    Returns
    -------
    videos : ndarray, shape=(n,T,W,H,C)
    labels : ndarray of int, shape=(n,)
    ids : list of str

    Raises
    ------
    AttackError
        If no clip is correctly classified
    """
    items = sorted(items, key=lambda item: item.id)
    videos, labels, ids = stack_videos(items)
    keep = _select(correctly_classified(model, videos, labels), max_clips)
    if not keep.any():
        raise AttackError("%s model classifies none of %d clips correctly"
                          % (model.head_kind, len(items)))
    return videos[keep], labels[keep], [ids[i] for i in np.flatnonzero(keep)]


def run_attacks(model, videos, labels, ids, config, batch_size=8, n_jobs=1, check_correct=True):
    """
    Independent attacks on each clip, in fixed-size batches, optionally in a process pool

    Returns
    -------
    perturbations : list of Perturbation
    reports : list of AttackReport
        Both sorted by clip id
    """
    batches = [(model, videos[start:start+batch_size], labels[start:start+batch_size],
                list(ids[start:start+batch_size]), config, check_correct)
               for start in range(0, len(videos), batch_size)]

    if (n_jobs > 1) and (len(batches) > 1):
        with ProcessPoolExecutor(max_workers=n_jobs) as executor:
            results = list(executor.map(_attack_batch, batches))
    else:
        results = [_attack_batch(batch) for batch in batches]

    perturbations = [p for batch_perturbations,_ in results for p in batch_perturbations]
    reports = [r for _,batch_reports in results for r in batch_reports]
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    return [perturbations[i] for i in order], [reports[i] for i in order]


def propagated_frames(frame_map, labels_before, labels_after, zero_threshold=1e-4,
                      pixel_scale=255.0):
    """
    Frames carrying ~no perturbation whose frame-level label nevertheless changed

    Parameters
    ----------
    frame_map : array-like, shape=(T,)
        Per-frame MAP, in `pixel_scale` units
    labels_before, labels_after : array-like of int, shape=(T,)
        Frame labels on clean and adversarial clip

    Returns
    -------
    flags : ndarray of bool, shape=(T,)
    """
    frame_map = np.asarray(frame_map, dtype=float)
    flipped = np.asarray(labels_before) != np.asarray(labels_after)
    return (frame_map < zero_threshold*pixel_scale) & flipped


# =============================================================================
# Private helper functions
# =============================================================================
def _propagation_single(cfg, model, item, configs, clean, n_polluted):
    """ Propagation report of one clip: l2,1 and l2 attacks side by side, per frame """
    frame_maps, reports, perturbations = {}, {}, {}
    for norm,config in configs.items():
        perts, reps = attack_each(model, item.video[np.newaxis], [item.label], config,
                                  clip_ids=[item.id])
        perturbations[norm], reports[norm] = perts[0], reps[0]
        frame_maps[norm] = np.asarray(reps[0].per_frame_map)

    before = predict(model, item.video[np.newaxis])[0]
    config = configs['L21']
    table = pd.DataFrame({'frame': np.arange(1, len(clean)+1),
                          'polluted': (~clean).astype(int) if n_polluted is not None
                                      else np.ones(len(clean), dtype=int),
                          'label_before': before.frame_labels})
    report = {'id': item.id, 'label': item.label, 'head_kind': model.head_kind,
              'n_polluted': n_polluted, 'video_label_before': before.video_label}
    for norm in configs:
        flags = propagated_frames(frame_maps[norm], reports[norm].frame_labels_before,
                                  reports[norm].frame_labels_after, config.zero_threshold,
                                  config.pixel_scale)
        table['map_%s' % norm] = frame_maps[norm]
        table['label_after_%s' % norm] = reports[norm].frame_labels_after
        table['propagated_%s' % norm] = flags.astype(int)
        report.update({'video_label_after_%s' % norm: reports[norm].video_label_after,
                       'success_%s' % norm: reports[norm].success,
                       'n_propagated_%s' % norm: int(flags.sum()),
                       'n_zero_frames_%s' % norm:
                           int(np.sum(frame_maps[norm] < config.zero_threshold*config.pixel_scale))})

    dirname = _output_dir(cfg, 'propagation-report')
    for norm,perturbation in perturbations.items():
        perturbation.save(os.path.join(dirname, 'perturbations', '%s_%s.vten' % (item.id, norm)))

    fig = plt.figure()
    plot_map_curves(np.stack([frame_maps['L21'], frame_maps['L2']]), labels=['l2,1', 'l2'],
                    polluted=n_polluted, ax=fig.gca())
    frames_fig, _ = plot_perturbation_frames(perturbations['L21'].data,
                                             scale=config.pixel_scale)

    return _write_outputs(cfg, 'propagation-report', table, report,
                          figures={'curve.svg': fig, 'frames.svg': frames_fig})


def _attack_batch(args):
    """ Process-pool job: independent attacks on one batch of clips """
    model, videos, labels, ids, config, check_correct = args
    return attack_each(model, videos, labels, config, check_correct=check_correct, clip_ids=ids)


def _select(keep, max_clips):
    """ Limit boolean selection to its first `max_clips` True entries """
    keep = np.asarray(keep, dtype=bool).copy()
    if max_clips is not None: keep[np.flatnonzero(keep)[max_clips:]] = False
    return keep


def _find_clip(items, video_id):
    """ Find LabeledVideo with given id """
    for item in items:
        if item.id == video_id: return item
    raise ConfigError("No clip with id '%s' in dataset" % video_id)


def _check_lengths(lengths, n_frames, name):
    """ Frame counts must each be in range 1..T """
    for n in lengths:
        if not 1 <= n <= n_frames:
            raise ConfigError("%s = %s out of range 1-%d" % (name, n, n_frames))


def _check_dataset(models, spec):
    """ Models must all be trained on the dataset in use """
    dataset_ids = {model.dataset_id for model in models if model.dataset_id}
    if spec is not None: dataset_ids.add(spec.dataset_id)
    if len(dataset_ids) > 1:
        raise ConfigError("Model/dataset mismatch: dataset ids %s" % sorted(dataset_ids))
    frame_shapes = {model.frame_shape for model in models}
    if len(frame_shapes) > 1:
        raise ConfigError("Models have different frame shapes %s" % sorted(frame_shapes))


def _n_polluted(mask):
    """ Polluted-prefix length of a prefix mask (None if no mask or not a prefix mask) """
    if mask is None: return None
    n_polluted = mask.T - mask.K
    return n_polluted if np.all(mask.bits[:n_polluted] == 1) else None


def _output_dir(cfg, name):
    dirname = os.path.join(cfg.out_dir, name)
    os.makedirs(dirname, exist_ok=True)
    return dirname


def _write_outputs(cfg, name, table, report, figures=None):
    """ Write table.csv, report.json and figures of a command; close figures """
    dirname = _output_dir(cfg, name)
    chash = config_hash(cfg)

    table = table.copy()
    table['config_hash'] = chash
    table['seed'] = cfg.seed
    table.to_csv(os.path.join(dirname, 'table.csv'), index=False, float_format=FLOAT_FORMAT)

    report = {'command': name, 'config_hash': chash, 'seed': cfg.seed, **report,
              'config': cfg.to_dict()}
    with open(os.path.join(dirname, 'report.json'), 'w') as f:
        json.dump(_to_builtin(report), f, indent=2)

    for filename,fig in (figures or {}).items():
        savefig(os.path.join(dirname, filename), fig=fig, figsize=(8.0,6.0))
        plt.close(fig)

    logger.info("Wrote %s outputs to '%s'", name, dirname)
    return {'table': table, 'report': report}
