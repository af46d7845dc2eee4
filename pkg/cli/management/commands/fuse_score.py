import json
from pathlib import Path

from annotations.pipeline import parse_llm_scores
from engine.relevance import load_similarities, score_scenes
from engine.segmentation import ScenePartition

from cli.base import ScenePickCommand


class Command(ScenePickCommand):
    help = "Fuse per-scene LLM relevance scores with frame similarities and extract key clips."

    def add_command_arguments(self, parser):
        parser.add_argument("--scenes", required=True, help="Partition JSON as written by `segment`")
        parser.add_argument("--llm-scores", dest="llm_scores", required=True,
                            help='{"entries": [{scene_id, relevance_score, reason}]} or raw model text holding it')
        parser.add_argument("--similarities", required=True, help="CSV (frame_index, similarity) or JSON")
        parser.add_argument("--fusion-lambda", dest="fusion_lambda", type=float)
        parser.add_argument("--frame-level", dest="frame_level", action="store_true",
                            help="Add per-frame fused scores to every scene record")

    def run(self, scenes, llm_scores, similarities, frame_level, **options):
        partition = ScenePartition.from_json(json.loads(Path(scenes).read_bytes()))
        scores = parse_llm_scores(Path(llm_scores).read_bytes(), partition.scene_ids)
        sims = load_similarities(similarities, partition.frame_count)
        records, clips = score_scenes(partition, scores, sims, self.config["fusion_lambda"], frame_level)
        return {"scenes": [r.to_json() for r in records], "clips": clips.to_json()}

    def table(self, payload):
        return ("scene", "fused", "priority", "reason"), [
            (r["scene_id"], f"{r['fused']:.3f}", r["priority"], r["reason"]) for r in payload["scenes"]
        ]
