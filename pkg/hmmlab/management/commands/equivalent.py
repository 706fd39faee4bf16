from hmmlab.decorators import lab_command
from hmmlab.exceptions import OutOfRange
from hmmlab.harness import aggregate, equivalent_distortion
from hmmlab.management.base import LabCommand
from hmmlab.serializers import DISTORTION_KINDS, MATCHED_METRIC, METRICS
from hmmlab.utils import format_value, read_table


class Command(LabCommand):
    help = 'Map an observed metric value to the equivalent known distortion'

    def add_command_arguments(self, parser):
        parser.add_argument('input', help='Calibration records or summary CSV')
        parser.add_argument('--kind', choices=DISTORTION_KINDS, required=True)
        parser.add_argument('--metric', choices=METRICS, default=None, help='Default: the metric matched to --kind')
        parser.add_argument('--value', type=float, required=True, help='Observed metric value')

    @lab_command
    def handle(self, *args, **options):
        kind = options['kind']
        metric = options['metric'] or MATCHED_METRIC[kind]
        frame = read_table(options['input'], required=['kind', 'parameter'])
        if f"{metric}_mean" not in frame.columns:
            frame = aggregate(read_table(options['input'], required=['kind', 'parameter', metric]), ['kind', 'parameter'])
        try:
            parameter = equivalent_distortion(frame, metric, options['value'], kind=kind)
        except OutOfRange as exc:
            self.stdout.write(f"out of range ({exc.side}): {exc}")
            return
        self.stdout.write(f"{metric}={format_value(options['value'])} ~ {kind} parameter {format_value(parameter)}")
