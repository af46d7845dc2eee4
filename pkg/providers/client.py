"""
Provider Client Module
Captioner/scorer completions and query-frame similarities over HTTP, with
bounded concurrency and retries using exponential backoff with full jitter.
"""

import logging
import os
import random
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import httpx

from engine.errors import ScenePickError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}
MOCK_SCHEME = "mock:"


class ProviderError(ScenePickError):
    """Base class for provider failures."""


class ProviderConfigurationError(ProviderError):
    pass


class ProviderTransportError(ProviderError):
    pass


class RateLimitError(ProviderTransportError):
    pass


class NonRetryableProviderError(ProviderError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "mock:"
    credential_env: str = "SCENEPICK_PROVIDER_TOKEN"
    timeout: float = 30.0
    max_retries: int = 3
    max_concurrent_requests: int = 4
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_cap: float = 32.0
    seed: int = 0

    def __post_init__(self):
        if not self.endpoint:
            raise ProviderConfigurationError("Provider endpoint is required")
        if self.timeout <= 0:
            raise ProviderConfigurationError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise ProviderConfigurationError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.max_concurrent_requests < 1:
            raise ProviderConfigurationError(
                f"max_concurrent_requests must be >= 1, got {self.max_concurrent_requests}"
            )

    @property
    def is_mock(self) -> bool:
        return self.endpoint.startswith(MOCK_SCHEME)

    @classmethod
    def from_settings(cls, **overrides) -> "ProviderConfig":
        from django.conf import settings

        provider = settings.SCENEPICK["PROVIDER"]
        values = {
            "endpoint": provider["ENDPOINT"],
            "credential_env": provider["CREDENTIAL_ENV"],
            "timeout": float(provider["TIMEOUT"]),
            "max_retries": int(provider["MAX_RETRIES"]),
            "max_concurrent_requests": int(provider["MAX_CONCURRENT_REQUESTS"]),
            "backoff_base": float(provider["BACKOFF_BASE"]),
            "backoff_factor": float(provider["BACKOFF_FACTOR"]),
            "backoff_cap": float(provider["BACKOFF_CAP"]),
            "seed": int(provider["SEED"]),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    frame_refs: Tuple[str, ...] = ()
    metadata: Dict = field(default_factory=dict)
    request_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def __post_init__(self):
        if not self.prompt or not self.prompt.strip():
            raise ProviderConfigurationError("A completion request needs a non-empty prompt")
        object.__setattr__(self, "frame_refs", tuple(self.frame_refs))

    def to_payload(self) -> Dict:
        return {
            "request_id": self.request_id,
            "prompt": self.prompt,
            "frame_refs": list(self.frame_refs),
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class CompletionResponse:
    request_id: str
    text: str
    status: int = 200
    attempts: int = 1


class ProviderClient:
    """Shared batching on top of `complete` and `similarity_batch`."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return self._calls

    def _count_call(self):
        with self._lock:
            self._calls += 1

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError

    def similarity_batch(self, query: str, frame_refs: Sequence[str]) -> List[float]:
        raise NotImplementedError

    def similarity(self, query: str, frame_ref: str) -> float:
        return self.similarity_batch(query, [frame_ref])[0]

    def complete_many(self, requests: Sequence[CompletionRequest]) -> Dict[str, CompletionResponse]:
        """Runs requests under the concurrency bound; results are keyed by request id."""
        with ThreadPoolExecutor(max_workers=self.config.max_concurrent_requests) as pool:
            responses = list(pool.map(self.complete, requests))
        return {response.request_id: response for response in responses}

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class HttpProviderClient(ProviderClient):
    """
    JSON over HTTP. POST /complete takes a CompletionRequest payload and
    answers {"text": ...}; POST /similarity takes {"query", "frame_refs"} and
    answers {"similarities": [...]} in input order.
    """

    def __init__(self, config: ProviderConfig, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep, rng: Optional[random.Random] = None):
        super().__init__(config)
        token = os.environ.get(config.credential_env)
        if not token:
            raise ProviderConfigurationError(
                f"Provider credential missing: set the {config.credential_env} environment variable"
            )
        self._sleep = sleep
        self._rng = rng or random.Random()
        # caps in-flight requests across all threads sharing this client
        self._slots = threading.BoundedSemaphore(config.max_concurrent_requests)
        self._http = httpx.Client(
            base_url=config.endpoint.rstrip("/"),
            timeout=config.timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {token}"},
        )

    def backoff_delay(self, attempt: int) -> float:
        ceiling = min(self.config.backoff_cap, self.config.backoff_base * self.config.backoff_factor ** attempt)
        return self._rng.uniform(0, ceiling)

    def _post(self, path: str, payload: Dict) -> Tuple[Dict, int, int]:
        last_error: Optional[ProviderError] = None
        for attempt in range(self.config.max_retries + 1):
            self._count_call()
            try:
                with self._slots:
                    response = self._http.post(path, json=payload)
            except httpx.TimeoutException as exc:
                last_error = ProviderTransportError(f"{path}: timed out after {self.config.timeout}s ({exc})")
            except httpx.TransportError as exc:
                last_error = ProviderTransportError(f"{path}: transport failure ({exc})")
            else:
                if response.status_code == 429:
                    last_error = RateLimitError(f"{path}: rate limited (HTTP 429)")
                elif response.status_code in RETRYABLE_STATUS or response.status_code >= 500:
                    last_error = ProviderTransportError(f"{path}: HTTP {response.status_code}")
                elif response.status_code >= 400:
                    raise NonRetryableProviderError(f"{path}: HTTP {response.status_code}: {response.text[:200]}")
                else:
                    try:
                        return response.json(), response.status_code, attempt + 1
                    except ValueError as exc:
                        raise NonRetryableProviderError(f"{path}: response body is not JSON") from exc

            if attempt < self.config.max_retries:
                delay = self.backoff_delay(attempt)
                logger.warning(f"{last_error}; retry {attempt + 1}/{self.config.max_retries} in {delay:.2f}s")
                self._sleep(delay)

        logger.error(f"{path}: giving up after {self.config.max_retries + 1} attempts")
        raise last_error

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        body, status, attempts = self._post("/complete", request.to_payload())
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise NonRetryableProviderError("/complete: response has no 'text' field")
        return CompletionResponse(request_id=request.request_id, text=text, status=status, attempts=attempts)

    def similarity_batch(self, query: str, frame_refs: Sequence[str]) -> List[float]:
        if not frame_refs:
            return []
        body, _, _ = self._post("/similarity", {"query": query, "frame_refs": list(frame_refs)})
        values = body.get("similarities") if isinstance(body, dict) else None
        if not isinstance(values, list) or len(values) != len(frame_refs):
            raise NonRetryableProviderError(f"/similarity: expected {len(frame_refs)} similarities")
        values = [float(v) for v in values]
        if any(not -1.0 <= v <= 1.0 for v in values):
            raise NonRetryableProviderError("/similarity: values outside [-1, 1]")
        return values

    def close(self):
        self._http.close()


def parse_mock_seed(endpoint: str, default: int = 0) -> int:
    """`mock:` or `mock:seed=N`."""
    options = endpoint[len(MOCK_SCHEME):]
    for part in filter(None, options.split(",")):
        key, _, value = part.partition("=")
        if key.strip() == "seed":
            try:
                return int(value)
            except ValueError as exc:
                raise ProviderConfigurationError(f"Invalid mock seed in endpoint {endpoint!r}") from exc
    return default


def build_client(config: ProviderConfig, **kwargs) -> ProviderClient:
    if config.is_mock:
        from .mock import MockProviderClient

        return MockProviderClient(replace(config, seed=parse_mock_seed(config.endpoint, config.seed)))
    return HttpProviderClient(config, **kwargs)
