import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag

from hmmlab.exceptions import EstimationFailure, LabError, NonMonotoneCurve, OutOfRange
from hmmlab.groundtruth import face_box, generate_ground_truths
from hmmlab.harness import (
    aggregate,
    equivalent_distortion,
    load_ground_truths,
    recommend_sample_sizes,
    run_calibration_sweep,
    run_estimation_sweep,
    smallest_fixation_budget,
)
from hmmlab.hmm import validate_hmm
from hmmlab.serializers import (
    CALIBRATION_COLUMNS,
    TRIAL_COLUMNS,
    GeneratorSpec,
    GroundTruthSource,
    LearnConfig,
    SimConfig,
    TrialRecord,
)
from hmmlab.utils import save_hmm, write_records_csv

from .factories import separated_hmm

SMALL_LEARN = LearnConfig(k_min=1, k_max=3, restarts=1, max_iters=50)


def small_config(**overrides):
    values = {
        'ground_truths': [GroundTruthSource(generator=GeneratorSpec(count=2, k_choices=[2], std_range=(20.0, 40.0)))],
        'n_grid': [5],
        't_grid': [5],
        'trials': 2,
        'learn': SMALL_LEARN,
        'kld_samples': 50,
        'master_seed': 7,
    }
    values.update(overrides)
    return SimConfig(**values)


def record(**values):
    base = {'trial_id': 0, 'gt_id': 0, 'N': 5, 'T': 5, 'seed': 1, 'k_true': 2, 'k_hat': 2}
    base.update(values)
    return TrialRecord(**base)


class GroundTruthTests(SimpleTestCase):
    def test_means_inside_face_region(self):
        spec = GeneratorSpec(count=10, k_choices=[2, 3, 4], seed=3)
        low, high = face_box(spec)
        truths = generate_ground_truths(spec)
        self.assertEqual(len(truths), 10)
        self.assertTrue({h.K for h in truths} <= {2, 3, 4})
        for h in truths:
            self.assertTrue(validate_hmm(h).ok)
            self.assertTrue(np.all(h.means >= low) and np.all(h.means <= high))

    def test_seeded(self):
        spec = GeneratorSpec(count=3, seed=11)
        a, b = generate_ground_truths(spec), generate_ground_truths(spec)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.means, y.means)
            np.testing.assert_array_equal(x.transition, y.transition)

    def test_minimum_separation(self):
        spec = GeneratorSpec(count=5, k_choices=[3], std_range=(4.0, 6.0), min_separation=10.0, seed=2)
        for h in generate_ground_truths(spec):
            dists = [np.linalg.norm(h.means[i] - h.means[j]) for i in range(3) for j in range(i + 1, 3)]
            largest_std = max(np.sqrt(np.linalg.eigvalsh(c)).max() for c in h.covs)
            self.assertGreaterEqual(min(dists), 10.0 * largest_std - 1e-9)

    def test_impossible_separation(self):
        spec = GeneratorSpec(count=1, k_choices=[4], std_range=(50.0, 60.0), min_separation=10.0)
        with self.assertRaises(LabError):
            generate_ground_truths(spec)

    def test_load_from_files_and_generator(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'gt.json'
            save_hmm(separated_hmm(), path)
            cfg = small_config(ground_truths=[
                GroundTruthSource(path=str(path)),
                GroundTruthSource(generator=GeneratorSpec(count=2)),
            ])
            truths = load_ground_truths(cfg)
        self.assertEqual(len(truths), 3)
        np.testing.assert_allclose(truths[0].means, separated_hmm().means)


class EstimationSweepTests(SimpleTestCase):
    def test_record_count(self):
        records = run_estimation_sweep(small_config())
        self.assertEqual(len(records), 2)
        self.assertTrue(all(r.N == 5 and r.T == 5 for r in records))
        self.assertEqual([r.trial_id for r in records], [0, 1])
        for r in records:
            self.assertFalse(r.failed)
            self.assertGreaterEqual(r.k_hat, 1)
            self.assertTrue(np.isfinite(r.d_hmm))
            self.assertEqual(r.wall_ms, 0)

    def test_every_cell_is_covered(self):
        cfg = small_config(n_grid=[3, 4], t_grid=[2, 3], trials=2)
        records = run_estimation_sweep(cfg)
        self.assertEqual(len(records), 8)
        cells = sorted({(r.N, r.T) for r in records})
        self.assertEqual(cells, [(3, 2), (3, 3), (4, 2), (4, 3)])

    def test_byte_identical_reruns(self):
        cfg = small_config(n_grid=[3, 6], trials=2)
        with tempfile.TemporaryDirectory() as tmp:
            first, second, pooled = (Path(tmp) / name for name in ('a.csv', 'b.csv', 'c.csv'))
            write_records_csv(run_estimation_sweep(cfg), TRIAL_COLUMNS, first)
            write_records_csv(run_estimation_sweep(cfg), TRIAL_COLUMNS, second)
            write_records_csv(run_estimation_sweep(cfg, threads=2), TRIAL_COLUMNS, pooled)
            self.assertEqual(first.read_bytes(), second.read_bytes())
            self.assertEqual(first.read_bytes(), pooled.read_bytes())

    def test_master_seed_changes_records(self):
        a = run_estimation_sweep(small_config(master_seed=1))
        b = run_estimation_sweep(small_config(master_seed=2))
        self.assertNotEqual([r.seed for r in a], [r.seed for r in b])

    def test_round_robin_selection(self):
        records = run_estimation_sweep(small_config(trials=4, selection='round_robin'))
        self.assertEqual([r.gt_id for r in records], [0, 1, 0, 1])

    def test_failures_are_recorded(self):
        with mock.patch('hmmlab.harness.learn_hmm', side_effect=EstimationFailure('degenerate')):
            records = run_estimation_sweep(small_config())
        self.assertEqual(len(records), 2)
        self.assertTrue(all(r.failed for r in records))
        self.assertIsNone(records[0].d_hmm)

    def test_timings(self):
        records = run_estimation_sweep(small_config(trials=1), timings=True)
        self.assertGreaterEqual(records[0].wall_ms, 0)

    @tag('slow')
    def test_desk_scale_trend(self):
        cfg = small_config(
            n_grid=[5, 10, 25, 50],
            t_grid=[5, 10, 25],
            trials=50,
            learn=LearnConfig(k_min=1, k_max=5, restarts=2),
            kld_samples=500,
        )
        summary = aggregate(run_estimation_sweep(cfg, truths=[separated_hmm()]), ['N', 'T'])
        median = summary.set_index(['N', 'T'])['d_hmm_median']
        self.assertLess(median[(50, 25)], median[(5, 5)])
        for t in cfg.t_grid:
            values = [median[(n, t)] for n in cfg.n_grid]
            self.assertLessEqual(sum(b > a for a, b in zip(values, values[1:])), 1)
        for n in cfg.n_grid:
            values = [median[(n, t)] for t in cfg.t_grid]
            self.assertTrue(all(b <= a for a, b in zip(values, values[1:])), f"N={n}: {values}")
        fixations = summary['N'] * summary['T']
        self.assertLess(
            summary.loc[fixations >= 250, 'd_hmm_median'].median() * 2,
            summary.loc[fixations <= 50, 'd_hmm_median'].median(),
        )
        budget = smallest_fixation_budget(summary, 'd_hmm', 0.05)
        self.assertIsNotNone(budget)
        self.assertGreaterEqual(budget, 100)
        self.assertLessEqual(budget, 1000)


class CalibrationSweepTests(SimpleTestCase):
    def config(self, grids, trials=4):
        return small_config(distortion_grids=grids, trials=trials, kld_samples=100)

    def test_zero_prior_distortion(self):
        records = run_calibration_sweep(self.config({'prior': [0.0]}), truths=[separated_hmm()])
        self.assertEqual(len(records), 4)
        for r in records:
            self.assertEqual((r.l_roi, r.l_trans, r.l_prior), (0.0, 0.0, 0.0))
            self.assertLessEqual(abs(r.d_hmm), 3 * r.mc_stderr + 1e-12)

    def test_prior_distortion_doubles_in_unhalved_metric(self):
        records = run_calibration_sweep(self.config({'prior': [0.1]}), truths=[separated_hmm()])
        self.assertAlmostEqual(np.mean([r.l_prior for r in records]), 0.2, places=12)

    def test_mean_distortion_curve_increases(self):
        grid = [0.0, 2.0, 5.0, 10.0]
        records = run_calibration_sweep(self.config({'roi_mean': grid}), truths=[separated_hmm()])
        summary = aggregate(records, ['kind', 'parameter'])
        curve = summary.sort_values('parameter')['l_roi_mean'].to_numpy()
        self.assertTrue(np.all(np.diff(curve) > 0))
        self.assertEqual(equivalent_distortion(summary, 'l_roi', curve[2], kind='roi_mean'), 5.0)

    def test_infeasible_cells_are_skipped(self):
        records = run_calibration_sweep(self.config({'prior': [0.9]}, trials=2), truths=[separated_hmm()])
        self.assertTrue(all(r.failed for r in records))
        self.assertIsNone(records[0].l_prior)

    def test_columns(self):
        self.assertEqual(
            CALIBRATION_COLUMNS,
            ['trial_id', 'gt_id', 'kind', 'parameter', 'seed', 'd_hmm', 'mc_stderr',
             'l_roi', 'l_trans', 'l_prior', 'failed', 'wall_ms'],
        )

    @tag('slow')
    def test_matched_metric_curves(self):
        cfg = small_config(
            ground_truths=[GroundTruthSource(generator=GeneratorSpec(count=10, seed=5))],
            trials=200,
            kld_samples=100,
        )
        summary = aggregate(run_calibration_sweep(cfg), ['kind', 'parameter'])
        for kind, metric in (('roi_mean', 'l_roi'), ('roi_cov', 'l_roi'), ('prior', 'l_prior'), ('transition', 'l_trans')):
            rows = summary[summary['kind'] == kind].sort_values('parameter')
            curve = rows[f"{metric}_mean"].to_numpy()
            self.assertTrue(np.all(np.diff(curve) > 0), msg=kind)
            for parameter, value in zip(rows['parameter'], curve):
                self.assertAlmostEqual(equivalent_distortion(summary, metric, value, kind=kind), parameter)


class AggregateTests(SimpleTestCase):
    def test_single_record(self):
        summary = aggregate([record(d_hmm=0.3)], ['N', 'T'])
        self.assertEqual(summary.loc[0, 'd_hmm_mean'], 0.3)
        self.assertEqual(summary.loc[0, 'd_hmm_median'], 0.3)
        self.assertEqual(summary.loc[0, 'count'], 1)

    def test_mean_and_median(self):
        summary = aggregate([record(d_hmm=0.0), record(trial_id=1, d_hmm=0.1)], ['N', 'T'])
        self.assertAlmostEqual(summary.loc[0, 'd_hmm_mean'], 0.05)
        self.assertAlmostEqual(summary.loc[0, 'd_hmm_median'], 0.05)

    def test_failures_counted_not_averaged(self):
        rows = [record(d_hmm=0.2), record(trial_id=1, failed=True, k_hat=None)]
        summary = aggregate(rows, ['N', 'T'])
        self.assertEqual(summary.loc[0, 'count'], 2)
        self.assertEqual(summary.loc[0, 'failed'], 1)
        self.assertEqual(summary.loc[0, 'd_hmm_mean'], 0.2)

    def test_rejects_empty_inputs(self):
        with self.assertRaises(ValueError):
            aggregate([record(d_hmm=0.1)], [])
        with self.assertRaises(ValueError):
            aggregate([], ['N'])

    def test_matches_recomputation_from_csv(self):
        cfg = small_config(n_grid=[3, 5, 8], trials=3)
        records = run_estimation_sweep(cfg)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'records.csv'
            write_records_csv(records, TRIAL_COLUMNS, path)
            raw = pd.read_csv(path)
        summary = aggregate(records, ['N', 'T']).set_index('N')
        for n, group in raw.groupby('N'):
            ok = group[group['failed'] == 0]
            self.assertAlmostEqual(summary.loc[n, 'd_hmm_median'], ok['d_hmm'].median(), places=7)
            self.assertAlmostEqual(summary.loc[n, 'l_roi_q75'], ok['l_roi'].quantile(0.75), places=7)


def curve(values, parameters=(0.0, 2.0, 5.0, 10.0)):
    return pd.DataFrame({'kind': 'roi_mean', 'parameter': parameters, 'l_roi_mean': values})


class EquivalentDistortionTests(SimpleTestCase):
    def test_grid_point(self):
        self.assertEqual(equivalent_distortion(curve([0.0, 0.1, 0.2, 0.4]), 'l_roi', 0.2), 5.0)

    def test_midpoint(self):
        self.assertAlmostEqual(equivalent_distortion(curve([0.0, 0.1, 0.2, 0.4]), 'l_roi', 0.15), 3.5)

    def test_out_of_range(self):
        with self.assertRaises(OutOfRange) as ctx:
            equivalent_distortion(curve([0.01, 0.1, 0.2, 0.4]), 'l_roi', 0.5)
        self.assertEqual(ctx.exception.side, 'above')
        with self.assertRaises(OutOfRange):
            equivalent_distortion(curve([0.01, 0.1, 0.2, 0.4]), 'l_roi', 0.0)

    def test_non_monotone(self):
        with self.assertRaises(NonMonotoneCurve) as ctx:
            equivalent_distortion(curve([0.0, 0.3, 0.2, 0.4]), 'l_roi', 0.25)
        self.assertEqual(ctx.exception.cells, [(2.0, 5.0)])

    def test_flat_segment_returns_first_parameter(self):
        self.assertEqual(equivalent_distortion(curve([0.0, 0.1, 0.1, 0.4]), 'l_roi', 0.1), 2.0)


class RecommendTests(SimpleTestCase):
    def summary(self):
        return pd.DataFrame({
            'N': [5, 10, 25, 5, 10, 25],
            'T': [5, 5, 5, 10, 10, 10],
            'd_hmm_median': [0.4, 0.2, 0.08, 0.2, 0.04, 0.02],
        })

    def test_smallest_n_per_t(self):
        table = recommend_sample_sizes(self.summary(), 'd_hmm', 0.05)
        by_t = table.set_index('T')
        self.assertTrue(pd.isna(by_t.loc[5, 'N']))
        self.assertEqual(by_t.loc[10, 'N'], 10)
        self.assertEqual(by_t.loc[10, 'fixations'], 100)

    def test_fixation_budget(self):
        self.assertEqual(smallest_fixation_budget(self.summary(), 'd_hmm', 0.05), 100)
        self.assertIsNone(smallest_fixation_budget(self.summary(), 'd_hmm', 0.001))
