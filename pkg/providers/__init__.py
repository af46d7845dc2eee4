"""Captioner, scorer and similarity providers. No other package performs network I/O."""

from .client import (
    CompletionRequest,
    CompletionResponse,
    HttpProviderClient,
    NonRetryableProviderError,
    ProviderClient,
    ProviderConfig,
    ProviderConfigurationError,
    ProviderError,
    ProviderTransportError,
    RateLimitError,
    build_client,
)
from .mock import MockProviderClient

__all__ = [
    "CompletionRequest",
    "CompletionResponse",
    "HttpProviderClient",
    "MockProviderClient",
    "NonRetryableProviderError",
    "ProviderClient",
    "ProviderConfig",
    "ProviderConfigurationError",
    "ProviderError",
    "ProviderTransportError",
    "RateLimitError",
    "build_client",
]
