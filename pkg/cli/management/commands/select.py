from pathlib import Path

from annotations.payload import parse_clips
from engine.sampling import SamplingStrategy, select
from engine.timeline import Timeline

from cli.base import ScenePickCommand, non_negative_int, positive_int


class Command(ScenePickCommand):
    help = "Pick exactly k frame indices from key clips under a sampling strategy."

    def add_command_arguments(self, parser):
        parser.add_argument("--clips", required=True,
                            help="Clip list, an object with a 'clips' key, or raw model text holding one")
        parser.add_argument("--k", type=positive_int, required=True, help="Frame budget")
        parser.add_argument("--total-frames", dest="total_frames", type=positive_int, required=True)
        parser.add_argument("--strategy", choices=[s.value for s in SamplingStrategy])
        parser.add_argument("--alpha", type=float, help="Weight of predicted frames against background")
        parser.add_argument("--rmin", type=float, help="Minimum predicted share of the budget")
        parser.add_argument("--tolerance", type=non_negative_int, help="Merge gap for focused sampling")
        parser.add_argument("--focused-max-k", dest="focused_max_k", type=positive_int,
                            help="Largest budget auto dispatch sends to focused sampling")
        parser.add_argument("--fps", type=float, help="Adds HH:MM:SS.mmm timestamps to the output")

    def run(self, clips, k, total_frames, fps, **options):
        timeline = Timeline(total_frames, fps)
        key_clips = parse_clips(Path(clips).read_bytes())
        result = select(self.config["strategy"], key_clips, k, timeline, self.config.sampling())
        return result.to_json(timeline)

    def table(self, payload):
        timestamps = payload.get("timestamps") or [None] * len(payload["indices"])
        return ("frame", "timestamp"), list(zip(payload["indices"], timestamps))
