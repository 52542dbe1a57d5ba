import logging

from django.core.management.base import BaseCommand, CommandError

from extra_backend.exceptions import ExtraError
from pipeline.services import PipelineService

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """
    Shared flags and error translation for the pipeline commands.
    Errors leave with the exit code of their class: 2 for validation and
    schema failures, 3 for numeric divergence.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Run config JSON document')
        parser.add_argument('--out', help='Output directory (overrides out_dir in the config)')
        parser.add_argument('--seed', type=int, help='Seed (overrides seed in the config)')

    def load_config(self, options):
        return PipelineService.load_config(options['config'], seed=options.get('seed'), out_dir=options.get('out'))

    def run(self, config, options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            config = self.load_config(options)
            paths = self.run(config, options)
        except ExtraError as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {e}")
            raise CommandError(str(e), returncode=e.exit_code) from e

        for name, path in paths.items():
            self.stdout.write(f'  - {name}: {path}')
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(paths)} files to {config.out_dir}'))
