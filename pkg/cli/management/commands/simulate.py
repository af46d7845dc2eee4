from engine.sampling import SamplingStrategy
from engine.simulation import ExperimentConfig, run_experiment

from cli.base import ScenePickCommand, int_list, non_negative_int, positive_int


def strategy_list(value: str):
    names = tuple(part.strip() for part in value.split(",") if part.strip())
    return tuple(SamplingStrategy.parse(name).value for name in names)


class Command(ScenePickCommand):
    help = "Run selection strategies on synthetic needle videos and report evidence recall and reward."

    def add_command_arguments(self, parser):
        parser.add_argument("--strategies", default="uniform,focused,hybrid")
        parser.add_argument("--k", dest="ks", type=int_list, default=(8,), help="Comma-separated budgets")
        parser.add_argument("--T", dest="frame_count", type=positive_int, default=256, help="Frames per video")
        parser.add_argument("--needle", dest="needle_len", type=positive_int, default=8)
        parser.add_argument("--needles", type=positive_int, default=1, help="Planted evidence spans per video")
        parser.add_argument("--seeds", type=positive_int, default=100, help="Seeds 0..N-1")
        parser.add_argument("--jobs", type=positive_int, help="Worker processes")
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--rmin", type=float)
        parser.add_argument("--tolerance", type=non_negative_int)
        parser.add_argument("--focused-max-k", dest="focused_max_k", type=positive_int)
        parser.add_argument("--tau", type=float)

    def run(self, strategies, ks, frame_count, needle_len, needles, seeds, out=None, **options):
        config = ExperimentConfig(
            strategies=strategy_list(strategies),
            ks=tuple(ks),
            seeds=tuple(range(seeds)),
            frame_count=frame_count,
            needle_len=needle_len,
            needles=needles,
            reward_config=self.config.reward(),
            sampling=self.config.sampling(),
        )
        report = run_experiment(config, jobs=self.config["jobs"])
        if out and out.lower().endswith(".csv"):
            return report.to_csv()
        return report.to_json()

    def table(self, payload):
        headers = ("strategy", "k", "seeds", "recall", "hit", "reward")
        rows = [
            (s["strategy"], s["k"], s["seeds"], f"{s['recall_mean']:.3f} ± {s['recall_std']:.3f}",
             f"{s['hit_mean']:.3f}", f"{s['reward_mean']:.3f} ± {s['reward_std']:.3f}")
            for s in payload["summary"]
        ]
        return headers, rows
