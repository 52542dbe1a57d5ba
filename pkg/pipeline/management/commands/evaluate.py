from pipeline.services import PipelineService
from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Estimate target risk from reweighted source rows and write report.json and hist.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--source', required=True, help='Labeled source CSV')
        parser.add_argument('--weights', required=True, help='weights.csv aligned with the source rows')
        parser.add_argument('--classifier', required=True, help='Classifier JSON providing the predictions')
        parser.add_argument('--params', help='params.json to attach to the report')
        parser.add_argument('--labeled-target', help='Labeled target CSV, held out for the true target risk')
        parser.add_argument('--loss', choices=['zero_one', 'log_loss'], default='zero_one')
        parser.add_argument(
            '--fine-tune',
            action='store_true',
            help='Also train a classifier on the reweighted source and report its risks',
        )

    def run(self, config, options):
        self.stdout.write('Evaluating...')
        return PipelineService.evaluate(
            config,
            options['source'],
            options['weights'],
            options['classifier'],
            labeled_target_path=options.get('labeled_target'),
            params_path=options.get('params'),
            loss=options['loss'],
            fine_tune=options['fine_tune'],
        )
