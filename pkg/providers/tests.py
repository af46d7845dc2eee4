import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from unittest.mock import patch

import httpx
from django.test import SimpleTestCase, override_settings

from .client import (
    CompletionRequest,
    HttpProviderClient,
    NonRetryableProviderError,
    ProviderConfig,
    ProviderConfigurationError,
    ProviderTransportError,
    RateLimitError,
    build_client,
)
from .mock import MockProviderClient

TOKEN_ENV = "SCENEPICK_TEST_TOKEN"


def scripted_transport(statuses, seen):
    """Answers with the scripted status codes in order, then 200."""
    script = list(statuses)

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        status = script.pop(0) if script else 200
        if status != 200:
            return httpx.Response(status, json={"error": "scripted"})
        body = json.loads(request.content)
        if request.url.path.endswith("/similarity"):
            return httpx.Response(200, json={"similarities": [0.1 * i for i in range(len(body["frame_refs"]))]})
        return httpx.Response(200, json={"text": f"echo:{body['prompt']}"})

    return httpx.MockTransport(handler)


@patch.dict(os.environ, {TOKEN_ENV: "secret-token"})
class HttpProviderClientTests(SimpleTestCase):

    def setUp(self):
        self.sleeps = []
        self.seen = []
        self.config = ProviderConfig(endpoint="http://provider.test/v1", credential_env=TOKEN_ENV, max_retries=2)

    def make_client(self, statuses=(), **overrides):
        config = replace(self.config, **overrides)
        return HttpProviderClient(config, transport=scripted_transport(statuses, self.seen), sleep=self.sleeps.append)

    def test_success_carries_credential(self):
        response = self.make_client().complete(CompletionRequest("describe", request_id="r1"))
        self.assertEqual(response.text, "echo:describe")
        self.assertEqual(response.request_id, "r1")
        self.assertEqual(self.seen[0].headers["Authorization"], "Bearer secret-token")
        self.assertEqual(self.seen[0].url.path, "/v1/complete")

    def test_rate_limit_twice_then_success(self):
        client = self.make_client(statuses=(429, 429))
        response = client.complete(CompletionRequest("describe"))
        self.assertEqual(response.attempts, 3)
        self.assertEqual(len(self.sleeps), 2)
        self.assertEqual(client.call_count, 3)

    def test_gives_up_after_retries(self):
        with self.assertRaises(RateLimitError):
            self.make_client(statuses=(429, 429, 429)).complete(CompletionRequest("describe"))
        with self.assertRaises(ProviderTransportError):
            self.make_client(statuses=(503,), max_retries=0).complete(CompletionRequest("describe"))

    def test_client_errors_are_not_retried(self):
        with self.assertRaises(NonRetryableProviderError):
            self.make_client(statuses=(400,)).complete(CompletionRequest("describe"))
        self.assertEqual(len(self.seen), 1)
        self.assertEqual(self.sleeps, [])

    def test_transport_failures_are_retried(self):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) == 1:
                raise httpx.ConnectError("refused", request=request)
            return httpx.Response(200, json={"text": "ok"})

        client = HttpProviderClient(self.config, transport=httpx.MockTransport(handler), sleep=self.sleeps.append)
        self.assertEqual(client.complete(CompletionRequest("x")).text, "ok")
        self.assertEqual(len(calls), 2)

    def test_backoff_is_capped_full_jitter(self):
        client = self.make_client(backoff_cap=32.0)
        for attempt in range(10):
            ceiling = min(32.0, 2.0 ** attempt)
            for _ in range(20):
                self.assertTrue(0.0 <= client.backoff_delay(attempt) <= ceiling)

    def test_similarity_batch_preserves_order(self):
        values = self.make_client().similarity_batch("red car", ["f0", "f1", "f2"])
        self.assertEqual(len(values), 3)
        self.assertAlmostEqual(values[2], 0.2)

    def test_complete_many_keys_by_request_id(self):
        requests = [CompletionRequest(f"prompt {i}", request_id=f"id{i}") for i in range(6)]
        responses = self.make_client(max_concurrent_requests=3).complete_many(requests)
        self.assertEqual(sorted(responses), [f"id{i}" for i in range(6)])
        self.assertEqual(responses["id4"].text, "echo:prompt 4")

    def test_direct_calls_share_the_concurrency_bound(self):
        lock = threading.Lock()
        in_flight, peak = [0], [0]

        def handler(request):
            with lock:
                in_flight[0] += 1
                peak[0] = max(peak[0], in_flight[0])
            time.sleep(0.02)
            with lock:
                in_flight[0] -= 1
            return httpx.Response(200, json={"text": "ok"})

        config = replace(self.config, max_concurrent_requests=2)
        client = HttpProviderClient(config, transport=httpx.MockTransport(handler), sleep=self.sleeps.append)
        with ThreadPoolExecutor(max_workers=8) as pool:
            texts = list(pool.map(lambda i: client.complete(CompletionRequest(f"p{i}")).text, range(16)))
        self.assertEqual(texts, ["ok"] * 16)
        self.assertLessEqual(peak[0], 2)
        self.assertEqual(client.call_count, 16)


class ProviderConfigTests(SimpleTestCase):

    def test_missing_credential_fails_before_network(self):
        seen = []
        with patch.dict(os.environ, {}, clear=True):
            with self.assertRaises(ProviderConfigurationError):
                HttpProviderClient(ProviderConfig(endpoint="http://provider.test", credential_env=TOKEN_ENV),
                                   transport=scripted_transport((), seen))
        self.assertEqual(seen, [])

    def test_invalid_values(self):
        with self.assertRaises(ProviderConfigurationError):
            ProviderConfig(timeout=0)
        with self.assertRaises(ProviderConfigurationError):
            ProviderConfig(max_retries=-1)
        with self.assertRaises(ProviderConfigurationError):
            ProviderConfig(max_concurrent_requests=0)
        with self.assertRaises(ProviderConfigurationError):
            CompletionRequest("   ")

    @override_settings(SCENEPICK={"PROVIDER": {
        "ENDPOINT": "mock:seed=5", "CREDENTIAL_ENV": TOKEN_ENV, "TIMEOUT": "12", "MAX_RETRIES": "1",
        "MAX_CONCURRENT_REQUESTS": "2", "BACKOFF_BASE": 1, "BACKOFF_FACTOR": 2, "BACKOFF_CAP": 32, "SEED": "0",
    }})
    def test_from_settings_with_overrides(self):
        config = ProviderConfig.from_settings(max_retries=4, timeout=None)
        self.assertEqual((config.endpoint, config.timeout, config.max_retries), ("mock:seed=5", 12.0, 4))

    def test_build_client_selects_mock(self):
        client = build_client(ProviderConfig(endpoint="mock:seed=9"))
        self.assertIsInstance(client, MockProviderClient)
        self.assertEqual(client.config.seed, 9)
        with self.assertRaises(ProviderConfigurationError):
            build_client(ProviderConfig(endpoint="mock:seed=x"))


class MockProviderTests(SimpleTestCase):

    def setUp(self):
        self.client = MockProviderClient(ProviderConfig(endpoint="mock:", seed=3))

    def test_same_prompt_same_response(self):
        first = self.client.complete(CompletionRequest("hello", request_id="a"))
        second = self.client.complete(CompletionRequest("hello", request_id="b"))
        self.assertEqual(first.text, second.text)
        other = MockProviderClient(ProviderConfig(seed=4)).complete(CompletionRequest("hello"))
        self.assertNotEqual(first.text, other.text)

    def test_similarity_range_and_determinism(self):
        refs = [f"frame_{i:04d}.jpg" for i in range(500)]
        values = self.client.similarity_batch("a dog on a beach", refs)
        self.assertEqual(len(values), 500)
        self.assertTrue(all(-1.0 <= v <= 1.0 for v in values))
        self.assertEqual(values[17], self.client.similarity("a dog on a beach", refs[17]))

    def test_task_answers_are_fenced_json(self):
        meta = {"task": "relevance", "query": "who scores?", "scene_ids": ["s1", "s2"]}
        text = self.client.complete(CompletionRequest("score", metadata=meta)).text
        self.assertTrue(text.startswith("```json"))
        entries = json.loads(text.strip("`").removeprefix("json"))["entries"]
        self.assertEqual([e["scene_id"] for e in entries], ["s1", "s2"])
        self.assertTrue(all(1 <= e["relevance_score"] <= 5 for e in entries))

    def test_calls_are_counted(self):
        self.client.complete(CompletionRequest("x"))
        self.client.similarity_batch("q", ["a", "b"])
        self.assertEqual(self.client.call_count, 2)
