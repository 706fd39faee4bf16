"""Seeded simulation sweeps and their summaries.

The estimation sweep samples N sequences of length T from a ground truth,
re-learns an HMM by VB and compares the two. The calibration sweep applies
known distortions to a ground truth and compares without learning. Every
trial's seed derives from the master seed and the trial's cell, so results
do not depend on how trials are scheduled across workers.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd

from .dissim import compare
from .distort import apply_distortion
from .exceptions import LabError, NonMonotoneCurve, OutOfRange
from .groundtruth import generate_ground_truths
from .hmm import sample_sequences
from .rng import RngStream, derive_seed
from .serializers import (
    DISTORTION_KINDS,
    METRICS,
    CalibrationRecord,
    DistortionSpec,
    TrialRecord,
)
from .utils import load_hmm
from .vb import learn_hmm

logger = logging.getLogger(__name__)

ESTIMATION_STREAM = 1
CALIBRATION_STREAM = 2

# sub-streams inside one trial
PICK, SAMPLE, LEARN, KLD, DISTORT = range(5)

_worker_state = {}


def load_ground_truths(cfg):
    truths = []
    for source in cfg.ground_truths:
        if source.path is not None:
            truths.append(load_hmm(source.path))
        else:
            truths.extend(generate_ground_truths(source.generator))
    if not truths:
        raise LabError('no ground-truth HMMs configured')
    return truths


def _pick_truth(n_truths, selection, rng, trial):
    if selection == 'round_robin':
        return trial % n_truths
    return int(rng.generator.integers(n_truths))


def _estimation_trial(item):
    cfg, truths, timings = _worker_state['cfg'], _worker_state['truths'], _worker_state['timings']
    n, t, trial = item
    seed = derive_seed(cfg.master_seed, ESTIMATION_STREAM, n, t, trial)
    rng = RngStream(seed)
    gt_id = _pick_truth(len(truths), cfg.selection, rng.child(PICK), trial)
    truth = truths[gt_id]
    record = {'trial_id': trial, 'gt_id': gt_id, 'N': n, 'T': t, 'seed': seed, 'k_true': truth.K}
    started = time.perf_counter()
    try:
        data = sample_sequences(truth, n, t, rng.child(SAMPLE))
        result = learn_hmm(data, cfg.learn, cfg.hp, rng.child(LEARN))
        report = compare(truth, result.estimated, t, cfg.kld_samples, rng.child(KLD))
    except (LabError, np.linalg.LinAlgError) as exc:
        logger.warning('trial N=%d T=%d #%d failed: %s', n, t, trial, exc)
        record['failed'] = True
    else:
        record.update(
            k_hat=result.k_hat,
            d_hmm=report.d_hmm,
            mc_stderr=report.mc_stderr,
            l_roi=report.l_roi,
            l_trans=report.l_trans,
            l_prior=report.l_prior,
        )
    if timings:
        record['wall_ms'] = int(round(1000 * (time.perf_counter() - started)))
    return TrialRecord(**record)


def _calibration_trial(item):
    cfg, truths, timings = _worker_state['cfg'], _worker_state['truths'], _worker_state['timings']
    kind, param_index, parameter, trial = item
    seed = derive_seed(cfg.master_seed, CALIBRATION_STREAM, DISTORTION_KINDS.index(kind), param_index, trial)
    rng = RngStream(seed)
    gt_id = _pick_truth(len(truths), cfg.selection, rng.child(PICK), trial)
    truth = truths[gt_id]
    record = {'trial_id': trial, 'gt_id': gt_id, 'kind': kind, 'parameter': parameter, 'seed': seed}
    started = time.perf_counter()
    roi = None
    if cfg.single_roi and kind in ('roi_mean', 'roi_cov'):
        roi = int(rng.child(DISTORT, 1).generator.integers(truth.K))
    try:
        noisy = apply_distortion(truth, DistortionSpec(kind=kind, parameter=parameter, roi=roi), rng.child(DISTORT))
        report = compare(truth, noisy, cfg.calibration_t, cfg.kld_samples, rng.child(KLD))
    except (LabError, np.linalg.LinAlgError) as exc:
        logger.warning('calibration %s=%g #%d skipped: %s', kind, parameter, trial, exc)
        record['failed'] = True
    else:
        record.update(
            d_hmm=report.d_hmm,
            mc_stderr=report.mc_stderr,
            l_roi=report.l_roi,
            l_trans=report.l_trans,
            l_prior=report.l_prior,
        )
    if timings:
        record['wall_ms'] = int(round(1000 * (time.perf_counter() - started)))
    return CalibrationRecord(**record)


def _init_worker(cfg, truths, timings):
    _worker_state.update(cfg=cfg, truths=truths, timings=timings)


def _run(worker, items, cfg, truths, threads, timings):
    """Map worker over items, serially or on a process pool, in item order."""
    if threads <= 1 or len(items) <= 1:
        _init_worker(cfg, truths, timings)
        return [worker(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_init_worker, initargs=(cfg, truths, timings)
    ) as pool:
        return list(pool.map(worker, items, chunksize=max(1, len(items) // (4 * threads))))


def run_estimation_sweep(cfg, threads=1, truths=None, timings=False):
    """One TrialRecord per (N, T, trial), failures included.

    wall_ms is only measured when timings is set, so that default output is
    byte-reproducible.
    """
    truths = truths if truths is not None else load_ground_truths(cfg)
    items = [(n, t, trial) for n in cfg.n_grid for t in cfg.t_grid for trial in range(cfg.trials)]
    logger.info(
        'estimation sweep: %d cells x %d trials on %d ground truths',
        len(cfg.n_grid) * len(cfg.t_grid), cfg.trials, len(truths),
    )
    records = _run(_estimation_trial, items, cfg, truths, threads, timings)
    failed = sum(r.failed for r in records)
    logger.info('estimation sweep finished: %d records, %d failed', len(records), failed)
    return records


def run_calibration_sweep(cfg, threads=1, truths=None, timings=False):
    """One CalibrationRecord per (kind, parameter, trial); infeasible cells are flagged."""
    truths = truths if truths is not None else load_ground_truths(cfg)
    items = [
        (kind, index, float(parameter), trial)
        for kind in DISTORTION_KINDS if kind in cfg.distortion_grids
        for index, parameter in enumerate(cfg.distortion_grids[kind])
        for trial in range(cfg.trials)
    ]
    logger.info('calibration sweep: %d trials', len(items))
    records = _run(_calibration_trial, items, cfg, truths, threads, timings)
    skipped = sum(r.failed for r in records)
    if skipped:
        logger.warning('%d calibration trials skipped as infeasible', skipped)
    return records


def records_frame(records):
    if isinstance(records, pd.DataFrame):
        return records.copy()
    return pd.DataFrame([r.model_dump() if hasattr(r, 'model_dump') else dict(r) for r in records])


def aggregate(records, group_keys):
    """Per group: record count, failure count, and mean/median/quartiles of each metric.

    Failed records are counted but excluded from the statistics.
    """
    if not group_keys:
        raise ValueError('aggregate needs at least one group key')
    frame = records_frame(records)
    if frame.empty:
        raise ValueError('no records to aggregate')
    group_keys = list(group_keys)
    if 'failed' not in frame.columns:
        frame['failed'] = False
    frame['failed'] = frame['failed'].fillna(False).astype(bool)
    metrics = [m for m in METRICS if m in frame.columns]
    rows = []
    for key, group in frame.groupby(group_keys, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        row = dict(zip(group_keys, key))
        row['count'] = len(group)
        row['failed'] = int(group['failed'].sum())
        ok = group.loc[~group['failed']]
        for metric in metrics:
            values = pd.to_numeric(ok[metric], errors='coerce').dropna().to_numpy(dtype=float)
            if len(values):
                row[f"{metric}_mean"] = float(values.mean())
                row[f"{metric}_median"] = float(np.median(values))
                row[f"{metric}_q25"] = float(np.percentile(values, 25))
                row[f"{metric}_q75"] = float(np.percentile(values, 75))
            else:
                for stat in ('mean', 'median', 'q25', 'q75'):
                    row[f"{metric}_{stat}"] = np.nan
        rows.append(row)
    return pd.DataFrame(rows)


def calibration_curve(summary, metric, kind=None):
    """(parameters, mean metric) sorted by parameter."""
    frame = summary
    if kind is not None and 'kind' in frame.columns:
        frame = frame[frame['kind'] == kind]
    frame = frame.sort_values('parameter')
    column = f"{metric}_mean"
    curve = frame[['parameter', column]].dropna()
    return curve['parameter'].to_numpy(dtype=float), curve[column].to_numpy(dtype=float)


def equivalent_distortion(summary, metric, observed, kind=None):
    """Invert a calibration curve by piecewise-linear interpolation.

    Raises NonMonotoneCurve when the mean metric decreases anywhere along the
    grid and OutOfRange when the observed value lies outside the curve.
    """
    params, values = calibration_curve(summary, metric, kind)
    if len(params) == 0:
        raise LabError(f"no calibration cells for {metric}" + (f" / {kind}" if kind else ''))
    drops = [
        (float(params[i]), float(params[i + 1])) for i in range(len(values) - 1) if values[i + 1] < values[i]
    ]
    if drops:
        raise NonMonotoneCurve(f"{metric} decreases between parameters", drops)
    if observed < values[0] or observed > values[-1]:
        raise OutOfRange(observed, float(values[0]), float(values[-1]))
    for i, value in enumerate(values):
        if observed == value:
            return float(params[i])
    i = int(np.searchsorted(values, observed, side='right')) - 1
    fraction = (observed - values[i]) / (values[i + 1] - values[i])
    return float(params[i] + fraction * (params[i + 1] - params[i]))


def recommend_sample_sizes(summary, metric='d_hmm', threshold=0.05, statistic='median'):
    """Smallest N per T whose summary statistic meets the threshold.

    Cells that never reach it report N and fixations as missing.
    """
    column = f"{metric}_{statistic}"
    rows = []
    for t, group in summary.sort_values(['T', 'N']).groupby('T', sort=True):
        hits = group[group[column] <= threshold]
        if len(hits):
            n = int(hits['N'].iloc[0])
            rows.append({'T': int(t), 'N': n, 'fixations': n * int(t), column: float(hits[column].iloc[0])})
        else:
            rows.append({'T': int(t), 'N': None, 'fixations': None, column: None})
    return pd.DataFrame(rows, columns=['T', 'N', 'fixations', column])


def smallest_fixation_budget(summary, metric='d_hmm', threshold=0.05, statistic='median'):
    """Smallest N*T over all cells whose statistic meets the threshold, or None."""
    column = f"{metric}_{statistic}"
    hits = summary[summary[column] <= threshold]
    if hits.empty:
        return None
    return int((hits['N'] * hits['T']).min())
