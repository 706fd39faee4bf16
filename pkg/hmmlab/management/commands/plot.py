from hmmlab.decorators import lab_command
from hmmlab.management.base import LabCommand
from hmmlab.plotting import render_chart
from hmmlab.serializers import PlotSpec


class Command(LabCommand):
    help = 'Render a sweep CSV as an SVG line chart with interquartile bands'
    config_model = PlotSpec

    def add_command_arguments(self, parser):
        parser.add_argument('input', nargs='?', default=None, help='Records or summary CSV')
        parser.add_argument('--x', choices=['N', 'T', 'NT', 'parameter'], default=None)
        parser.add_argument('--metric', choices=['d_hmm', 'l_roi', 'l_trans', 'l_prior'], default=None)
        parser.add_argument('--group', default=None, help="Column with one line per value, or 'none'")
        parser.add_argument('--output', default=None, help='SVG file')
        parser.add_argument('--log-x', action='store_true', default=None)

    @lab_command
    def handle(self, *args, **options):
        group = options['group']
        overrides = {
            'input': options['input'],
            'x': options['x'],
            'metric': options['metric'],
            'output': options['output'],
            'log_x': options['log_x'],
        }
        spec = self.load_config(options, **overrides)
        if group is not None:
            spec = PlotSpec.model_validate({**spec.model_dump(), 'group': None if group.lower() == 'none' else group})
        path = render_chart(spec)
        self.stdout.write(f"wrote {path}")
