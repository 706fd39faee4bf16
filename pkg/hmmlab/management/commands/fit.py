from pathlib import Path

from hmmlab.decorators import lab_command
from hmmlab.management.base import LabCommand
from hmmlab.serializers import FitConfig, LearnConfig, LearnResultSchema
from hmmlab.utils import dump_model, read_fixations_csv, save_hmm
from hmmlab.vb import learn_hmm


class Command(LabCommand):
    help = 'Learn an HMM from a fixation CSV by variational Bayes, selecting K by free energy'
    config_model = FitConfig

    def add_command_arguments(self, parser):
        parser.add_argument('data', help='Fixation CSV (seq_id,t,x,y)')
        parser.add_argument('--out', required=True, help='Estimated HMM JSON')
        parser.add_argument('--result', default=None, help='Diagnostics JSON (default: <out>.fit.json)')
        parser.add_argument('--k-min', type=int, default=None)
        parser.add_argument('--k-max', type=int, default=None)
        parser.add_argument('--restarts', type=int, default=None)

    @lab_command
    def handle(self, *args, **options):
        cfg = self.load_config(options)
        flags = {
            key: options[key] for key in ('k_min', 'k_max', 'restarts') if options[key] is not None
        }
        if flags:
            cfg = cfg.model_copy(update={'learn': LearnConfig.model_validate({**cfg.learn.model_dump(), **flags})})
        sequences = read_fixations_csv(options['data'])
        self.stdout.write(f"fitting {len(sequences)} sequences, K in [{cfg.learn.k_min}, {cfg.learn.k_max}]")
        result = learn_hmm(sequences, cfg.learn, cfg.hp, self.rng(options))
        out = Path(options['out'])
        save_hmm(result.estimated, out)
        result_path = Path(options['result']) if options['result'] else out.with_suffix('.fit.json')
        dump_model(LearnResultSchema.from_result(result), result_path)
        for k, energy in result.per_k_free_energy.items():
            shown = 'n/a' if energy is None else f"{energy:.6f}"
            self.stdout.write(f"  K={k}: free energy {shown}")
        if result.fit_k != result.k_hat:
            self.stdout.write(f"  pruned the K={result.fit_k} fit to {result.k_hat} states")
        self.stdout.write(f"k_hat={result.k_hat} written to {out}")
