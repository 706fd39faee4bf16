from django.core.management.base import CommandError

from hmmlab.decorators import USAGE_ERROR, lab_command
from hmmlab.hmm import sample_sequences
from hmmlab.management.base import LabCommand
from hmmlab.utils import load_hmm, write_fixations_csv


class Command(LabCommand):
    help = 'Sample fixation sequences from an HMM into a seq_id,t,x,y CSV'

    def add_command_arguments(self, parser):
        parser.add_argument('hmm', help='HMM JSON file')
        parser.add_argument('--n', type=int, required=True, help='Number of sequences')
        parser.add_argument('--t', type=int, required=True, help='Fixations per sequence')
        parser.add_argument('--out', required=True, help='Output CSV')

    @lab_command
    def handle(self, *args, **options):
        if options['n'] < 1 or options['t'] < 1:
            raise CommandError('--n and --t must be positive', returncode=USAGE_ERROR)
        h = load_hmm(options['hmm'])
        sequences = sample_sequences(h, options['n'], options['t'], self.rng(options))
        write_fixations_csv(sequences, options['out'])
        self.stdout.write(f"wrote {len(sequences)} sequences of length {options['t']} to {options['out']}")
