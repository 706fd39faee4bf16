"""Shared plumbing for the lab's management commands."""
import logging
import sys

from django.core.management.base import BaseCommand, CommandError

from ..conf import lab_settings
from ..decorators import USAGE_ERROR
from ..rng import RngStream
from ..utils import load_model


def _usage_error(parser, message):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {message}\n")
        sys.exit(USAGE_ERROR)
    raise CommandError(f"Error: {message}", returncode=USAGE_ERROR)


class LabCommand(BaseCommand):
    """Base command with the global --seed and --threads flags.

    Commands that set config_model also take --config <json>.

    Precedence for every tunable: command-line flag, then the JSON config
    file, then Django settings, then the built-in default.
    """

    config_model = None

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = lambda message: _usage_error(parser, message)
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Seed for every random draw')
        parser.add_argument(
            '--threads', type=int, default=None, help='Worker processes (default: HMMLAB_THREADS)'
        )
        if self.config_model is not None:
            parser.add_argument('--config', default=None, help=f"JSON {self.config_model.__name__} file")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def execute(self, *args, **options):
        if options.get('verbosity', 1) >= 2:
            logging.getLogger('hmmlab').setLevel(logging.DEBUG)
        return super().execute(*args, **options)

    @property
    def lab(self):
        return lab_settings()

    def load_config(self, options, from_settings=None, **overrides):
        """config_model built from settings values, then --config, then non-None flag overrides."""
        data = dict(from_settings or {})
        if options.get('config'):
            data.update(load_model(options['config'], self.config_model).model_dump(exclude_unset=True))
        data.update({k: v for k, v in overrides.items() if v is not None})
        return self.config_model.model_validate(data)

    def threads(self, options):
        threads = options.get('threads')
        if threads is None:
            threads = self.lab.threads
        if threads < 1:
            raise CommandError('--threads must be at least 1', returncode=USAGE_ERROR)
        return threads


    def rng(self, options):
        seed = options.get('seed')
        return RngStream(0 if seed is None else seed)
