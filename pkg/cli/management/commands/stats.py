from annotations.documents import load_corpus
from annotations.stats import StatsAccumulator

from cli.base import ScenePickCommand


class Command(ScenePickCommand):
    help = "Summarize an annotation corpus: scenes, chapters, queries and relevance scores."

    def add_command_arguments(self, parser):
        parser.add_argument("paths", nargs="+", help=".json record, .jsonl corpus, or a directory of them")

    def run(self, paths, **options):
        accumulator = StatsAccumulator()
        for record in load_corpus(paths):
            accumulator.add(record)
        self.stats = accumulator.finish()
        return self.stats.to_json()

    def table(self, payload):
        return ("metric", "value"), self.stats.table_rows()
