from hmmlab.decorators import lab_command
from hmmlab.exceptions import LabError
from hmmlab.harness import aggregate, run_estimation_sweep, smallest_fixation_budget
from hmmlab.management.base import LabCommand
from hmmlab.serializers import TRIAL_COLUMNS, SimConfig
from hmmlab.utils import write_frame_csv, write_records_csv


class Command(LabCommand):
    help = 'Run the (N, T) estimation-error sweep'
    config_model = SimConfig
    group_keys = ['N', 'T']
    columns = TRIAL_COLUMNS

    def add_command_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Per-trial records CSV')
        parser.add_argument('--summary', default=None, help='Per-cell summary CSV')
        parser.add_argument('--trials', type=int, default=None, help='Trials per grid cell')
        parser.add_argument('--timings', action='store_true', help='Record wall_ms (output no longer byte-reproducible)')

    def load_sim_config(self, options):
        return self.load_config(
            options,
            from_settings={'kld_samples': self.lab.kld_samples},
            trials=options['trials'],
            master_seed=options['seed'],
        )

    def sweep(self, cfg, threads, timings):
        return run_estimation_sweep(cfg, threads=threads, timings=timings)

    @lab_command
    def handle(self, *args, **options):
        cfg = self.load_sim_config(options)
        records = self.sweep(cfg, self.threads(options), options['timings'])
        if not records:
            raise LabError('the sweep has no trials to run')
        write_records_csv(records, self.columns, options['out'])
        failed = sum(r.failed for r in records)
        self.stdout.write(f"{len(records)} records ({failed} failed) written to {options['out']}")
        summary = aggregate(records, self.group_keys)
        if options['summary']:
            write_frame_csv(summary, options['summary'])
        self.report(summary)

    def report(self, summary):
        budget = smallest_fixation_budget(summary, 'd_hmm', self.lab.kld_threshold)
        if budget is None:
            self.stdout.write(f"no cell reaches median d_hmm <= {self.lab.kld_threshold}")
        else:
            self.stdout.write(f"smallest N*T with median d_hmm <= {self.lab.kld_threshold}: {budget} fixations")
