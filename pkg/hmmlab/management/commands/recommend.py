from hmmlab.decorators import lab_command
from hmmlab.harness import aggregate, recommend_sample_sizes
from hmmlab.management.base import LabCommand
from hmmlab.serializers import METRICS
from hmmlab.utils import format_value, read_table, write_frame_csv


class Command(LabCommand):
    help = 'Smallest N per T whose median metric meets a threshold'

    def add_command_arguments(self, parser):
        parser.add_argument('input', help='Estimation records or summary CSV')
        parser.add_argument('--metric', choices=METRICS, default='d_hmm')
        parser.add_argument('--threshold', type=float, default=None)
        parser.add_argument('--statistic', choices=['median', 'mean'], default='median')
        parser.add_argument('--out', default=None, help='Recommendation CSV')

    @lab_command
    def handle(self, *args, **options):
        metric, statistic = options['metric'], options['statistic']
        threshold = options['threshold']
        if threshold is None:
            threshold = self.lab.kld_threshold if metric == 'd_hmm' else self.lab.overlap_threshold
        frame = read_table(options['input'], required=['N', 'T'])
        if f"{metric}_{statistic}" not in frame.columns:
            frame = aggregate(read_table(options['input'], required=['N', 'T', metric]), ['N', 'T'])
        table = recommend_sample_sizes(frame, metric, threshold, statistic)
        if options['out']:
            write_frame_csv(table, options['out'])
        self.stdout.write(f"{statistic} {metric} <= {format_value(threshold)}")
        for _, row in table.iterrows():
            if row['N'] is None or row['N'] != row['N']:
                self.stdout.write(f"  T={int(row['T'])}: not reached")
            else:
                self.stdout.write(f"  T={int(row['T'])}: N={int(row['N'])} ({int(row['fixations'])} fixations)")
