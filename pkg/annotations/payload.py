"""
Model responses wrap their JSON in prose and markdown fences. These helpers
pull the JSON back out.
"""

import json
from typing import Any, List, Union

from engine.timeline import KeyClip, clips_from_json

from .errors import NoJsonPayloadError

_DECODER = json.JSONDecoder()


def strip_json_payload(text: Union[str, bytes]) -> bytes:
    """
    Return the first JSON object found in `text`, tolerating leading prose
    and code fences. Braces that do not open a valid object are skipped.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    start = text.find("{")
    while start >= 0:
        try:
            _, end = _DECODER.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        return text[start:end].encode("utf-8")
    raise NoJsonPayloadError("No JSON object found in response text")


def load_json_payload(text: Union[str, bytes]) -> Any:
    return json.loads(strip_json_payload(text))


def parse_clips(source: Union[str, bytes, list, dict]) -> List[KeyClip]:
    """
    Key clips from a JSON list, an object with a 'clips' key, or raw model
    text with a {"clips": [...]} object somewhere inside it.
    """
    if isinstance(source, (str, bytes)):
        try:
            source = json.loads(source)
        except ValueError:
            source = load_json_payload(source)
    return clips_from_json(source)
