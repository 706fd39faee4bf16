from pathlib import Path

import numpy as np

from hmmlab.decorators import lab_command
from hmmlab.groundtruth import generate_ground_truths
from hmmlab.management.base import LabCommand
from hmmlab.serializers import GeneratorSpec
from hmmlab.utils import save_hmm


class Command(LabCommand):
    help = 'Generate synthetic ground-truth HMMs as JSON files'
    config_model = GeneratorSpec

    def add_command_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--count', type=int, default=None, help='Number of HMMs')
        parser.add_argument('--k', type=int, nargs='+', default=None, dest='k_choices', help='State counts to draw from')
        parser.add_argument(
            '--min-separation', type=float, default=None, help='Minimum ROI mean distance in largest stds'
        )

    @lab_command
    def handle(self, *args, **options):
        lab = self.lab
        spec = self.load_config(
            options,
            from_settings={'frame': lab.frame, 'face_region': lab.face_region},
            count=options['count'],
            k_choices=options['k_choices'],
            min_separation=options['min_separation'],
            seed=options['seed'],
        )
        out = Path(options['out'])
        out.mkdir(parents=True, exist_ok=True)
        for i, h in enumerate(generate_ground_truths(spec)):
            path = out / f"gt_{i:03d}.json"
            save_hmm(h, path)
            means = ' '.join(f"({m[0]:.1f},{m[1]:.1f})" for m in h.means)
            stds = ' '.join(f"{float(np.sqrt(np.linalg.eigvalsh(c)).mean()):.1f}" for c in h.covs)
            self.stdout.write(f"{path.name}: K={h.K} means={means} std={stds}")
