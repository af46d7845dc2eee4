from engine.errors import DimensionError
from engine.segmentation import METRICS, boundary_scores, load_histograms, segment

from cli.base import ScenePickCommand, positive_int


class Command(ScenePickCommand):
    help = "Split a video into scenes from its per-frame colour histograms."

    def add_command_arguments(self, parser):
        parser.add_argument("histograms", help="CSV (bin_0..bin_{B-1} header) or JSON histogram file")
        parser.add_argument("--lambda", dest="lambda", type=float,
                            help="Threshold multiplier on the boundary-score standard deviation")
        parser.add_argument("--min-scene-len", dest="min_scene_len", type=positive_int)
        parser.add_argument("--bins", type=positive_int, help="Expected bins per histogram; defaults to the width the file declares")
        parser.add_argument("--metric", choices=sorted(METRICS), default="l1")

    def run(self, histograms, metric, **options):
        frames = load_histograms(histograms)
        bins = self.config["bins"]
        if "bins" in self.config.explicit and frames and frames[0].size != bins:
            raise DimensionError(f"{histograms}: expected {bins} bins per frame, found {frames[0].size}")
        partition = segment(boundary_scores(frames, metric), self.config.policy())
        return partition.to_json()

    def table(self, payload):
        return ("scene", "start", "end"), [(s["scene_id"], s["start"], s["end"]) for s in payload["scenes"]]
