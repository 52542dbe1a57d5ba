from pipeline.services import PipelineService
from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Fit the exponential tilt model and write params.json, weights.csv and trace.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--source', required=True, help='Labeled source CSV (f0..f{d-1},u)')
        parser.add_argument('--target', required=True, help='Unlabeled target CSV (f0..f{d-1})')
        parser.add_argument(
            '--classifier',
            help='Source classifier JSON; trained from the source and written out when omitted',
        )

    def run(self, config, options):
        self.stdout.write('Fitting tilt model...')
        return PipelineService.fit(config, options['source'], options['target'], options.get('classifier'))
