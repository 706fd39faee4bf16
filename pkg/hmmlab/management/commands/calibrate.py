from hmmlab.harness import run_calibration_sweep
from hmmlab.serializers import CALIBRATION_COLUMNS, MATCHED_METRIC

from .simulate import Command as SimulateCommand


class Command(SimulateCommand):
    help = 'Run the known-distortion calibration sweep'
    group_keys = ['kind', 'parameter']
    columns = CALIBRATION_COLUMNS

    def sweep(self, cfg, threads, timings):
        return run_calibration_sweep(cfg, threads=threads, timings=timings)

    def report(self, summary):
        for _, row in summary.iterrows():
            metric = MATCHED_METRIC[row['kind']]
            value = row[f"{metric}_mean"]
            shown = 'n/a' if value != value else f"{value:.6g}"
            self.stdout.write(f"{row['kind']}={row['parameter']:g}: mean {metric} {shown} ({row['failed']} skipped)")
