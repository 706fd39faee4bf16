import json
from pathlib import Path

from django.core.management.base import CommandError

from hmmlab.decorators import USAGE_ERROR, lab_command
from hmmlab.dissim import compare, report_interpretation
from hmmlab.management.base import LabCommand
from hmmlab.utils import dump_model, load_hmm


class Command(LabCommand):
    help = 'Compare a true and an estimated HMM with every error metric'

    def add_command_arguments(self, parser):
        parser.add_argument('true_hmm', help='Ground-truth HMM JSON')
        parser.add_argument('estimated_hmm', help='Estimated HMM JSON')
        parser.add_argument('--t', type=int, default=10, help='Sequence length for the KLD rate')
        parser.add_argument('--samples', type=int, default=None, help='Monte-Carlo sequences (default: HMMLAB_KLD_SAMPLES)')
        parser.add_argument('--out', default=None, help='Report JSON')

    @lab_command
    def handle(self, *args, **options):
        lab = self.lab
        samples = options['samples'] if options['samples'] is not None else lab.kld_samples
        if options['t'] < 1 or samples < 2:
            raise CommandError('--t must be >= 1 and --samples >= 2', returncode=USAGE_ERROR)
        true_h = load_hmm(options['true_hmm'])
        est_h = load_hmm(options['estimated_hmm'])
        report = compare(true_h, est_h, options['t'], samples, self.rng(options))
        if options['out']:
            dump_model(report, Path(options['out']))
        self.stdout.write(report.model_dump_json(indent=2))
        labels = report_interpretation(report, lab.kld_threshold, lab.overlap_threshold)
        self.stdout.write(json.dumps(labels))
