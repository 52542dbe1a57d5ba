from pipeline.services import PipelineService
from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Simulate an auction stream and write source, target and stream CSVs plus truth.json'

    def run(self, config, options):
        self.stdout.write(f'Simulating {config.n_stream} auctions (seed {config.seed})...')
        return PipelineService.simulate(config)
