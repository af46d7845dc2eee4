"""
Offline provider. Answers are pure functions of (seed, request), so every
pipeline stage can be exercised without network access.
"""

import hashlib
import json
from typing import Dict, List, Sequence

from .client import CompletionRequest, CompletionResponse, ProviderClient

DESCRIPTIONS = (
    "a person walks across a kitchen",
    "close-up of hands writing on a whiteboard",
    "a car drives along a coastal road",
    "crowd cheering in a stadium",
    "text slide with a chart of yearly figures",
    "two people talking at a table",
    "drone shot over a forest",
    "a dog running on a beach",
)


def _digest(*parts) -> bytes:
    return hashlib.blake2b("|".join(str(p) for p in parts).encode("utf-8"), digest_size=16).digest()


def _unit(*parts) -> float:
    """Deterministic value in [0, 1]."""
    return int.from_bytes(_digest(*parts)[:8], "big") / float(2 ** 64 - 1)


def _fenced(payload) -> str:
    return "```json\n" + json.dumps(payload, indent=2) + "\n```"


class MockProviderClient(ProviderClient):
    """
    Understands the `task` key of request metadata:

    - caption: metadata carries video_id and scenes [{scene_id, start, end}]
    - relevance: metadata carries query and scene_ids
    - clips: metadata carries query and frame_count
    """

    CHAPTER_SIZE = 3

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self._count_call()
        task = request.metadata.get("task")
        handler = {
            "caption": self._caption,
            "relevance": self._relevance,
            "clips": self._clips,
        }.get(task)
        if handler is None:
            text = f"mock response {_digest(self.config.seed, request.prompt).hex()}"
        else:
            text = _fenced(handler(request.metadata))
        return CompletionResponse(request_id=request.request_id, text=text)

    def _caption(self, meta: Dict) -> Dict:
        seed, video_id = self.config.seed, meta.get("video_id", "")
        scenes = []
        for scene in meta.get("scenes", []):
            index = int(_unit(seed, video_id, scene["scene_id"]) * len(DESCRIPTIONS)) % len(DESCRIPTIONS)
            scenes.append({
                "scene_id": scene["scene_id"],
                "start": scene["start"],
                "end": scene["end"],
                "description": f"{DESCRIPTIONS[index]} (frames {scene['start']}-{scene['end']})",
            })
        chapters = []
        for number, offset in enumerate(range(0, len(scenes), self.CHAPTER_SIZE), start=1):
            members = [s["scene_id"] for s in scenes[offset:offset + self.CHAPTER_SIZE]]
            chapters.append({
                "chapter_id": f"c{number}",
                "scene_ids": members,
                "summary": f"chapter {number} covering {', '.join(members)}",
            })
        return {
            "scenes": scenes,
            "chapters": chapters,
            "video_summary": f"synthetic video {video_id} with {len(scenes)} scenes",
        }

    def _relevance(self, meta: Dict) -> Dict:
        seed, query = self.config.seed, meta.get("query", "")
        entries = []
        for scene_id in meta.get("scene_ids", []):
            score = 1 + int(_unit(seed, "relevance", query, scene_id) * 5) % 5
            entries.append({"scene_id": scene_id, "relevance_score": score, "reason": f"mock score for {scene_id}"})
        return {"entries": entries}

    def _clips(self, meta: Dict) -> Dict:
        seed, query = self.config.seed, meta.get("query", "")
        frame_count = max(int(meta.get("frame_count", 1)), 1)
        length = max(1, frame_count // 32)
        start = int(_unit(seed, "clips", query) * frame_count) % frame_count
        return {"clips": [{"start": start, "end": min(start + length - 1, frame_count - 1), "priority": "P1",
                           "reason": "mock evidence"}]}

    def similarity_batch(self, query: str, frame_refs: Sequence[str]) -> List[float]:
        self._count_call()
        return [2.0 * _unit(self.config.seed, "similarity", query, ref) - 1.0 for ref in frame_refs]
