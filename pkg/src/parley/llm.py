"""Provider-agnostic chat-completion client.

Speaks the de-facto `POST {base_url}/chat/completions` contract, so any
OpenAI-compatible endpoint (hosted gateway, local server, test stub)
works. Credentials come from the environment only — MODEL_BASE_URL and
MODEL_API_KEY, or MODEL_BASE_URL_<NAME> / MODEL_API_KEY_<NAME> for a
named endpoint — and are never written into persisted configs.
"""

from __future__ import annotations

import asyncio
import logging
import os
from dataclasses import dataclass, field

import httpx

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_CONCURRENCY = 16


class TransportError(RuntimeError):
    """Timeout, non-2xx status, or malformed body; retryable by callers."""


class EndpointNotConfigured(RuntimeError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    name: str
    base_url: str
    api_key: str
    timeout: float = DEFAULT_TIMEOUT


def endpoint_from_env(name: str = "default") -> EndpointConfig:
    """Resolve an endpoint from the environment; raises if unconfigured."""
    suffix = "" if name == "default" else f"_{name.upper()}"
    base_url = os.environ.get(f"MODEL_BASE_URL{suffix}") or os.environ.get("MODEL_BASE_URL")
    api_key = os.environ.get(f"MODEL_API_KEY{suffix}") or os.environ.get("MODEL_API_KEY")
    if not base_url:
        raise EndpointNotConfigured(
            f"no base URL for endpoint {name!r}: set MODEL_BASE_URL{suffix or ''}"
        )
    if not api_key:
        raise EndpointNotConfigured(
            f"no API key for endpoint {name!r}: set MODEL_API_KEY{suffix or ''}"
        )
    return EndpointConfig(name=name, base_url=base_url.rstrip("/"), api_key=api_key)


@dataclass
class ChatReply:
    text: str
    usage: dict[str, int] = field(default_factory=dict)


class ChatClient:
    """Async chat-completion caller with bounded concurrency and retries.

    One client is shared across an engine run; the semaphore is the global
    in-flight limit the provider sees.
    """

    def __init__(
        self,
        endpoint: EndpointConfig | None = None,
        *,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff_base: float = 0.25,
        concurrency: int = DEFAULT_CONCURRENCY,
    ) -> None:
        self._endpoint = endpoint
        self._max_retries = max_retries
        self._backoff_base = backoff_base
        self._semaphore = asyncio.Semaphore(concurrency)
        self.total_usage: dict[str, int] = {}
        self.retry_count = 0

    def endpoint_for(self, name: str) -> EndpointConfig:
        if self._endpoint is not None and self._endpoint.name == name:
            return self._endpoint
        return endpoint_from_env(name)

    async def complete(
        self,
        messages: list[dict[str, str]],
        *,
        model: str,
        endpoint: str = "default",
        temperature: float = 0.7,
        max_tokens: int = 512,
        timeout: float | None = None,
    ) -> ChatReply:
        config = self.endpoint_for(endpoint)
        payload = {
            "model": model,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Authorization": f"Bearer {config.api_key}"}
        url = f"{config.base_url}/chat/completions"
        request_timeout = timeout if timeout is not None else config.timeout

        last_error: Exception | None = None
        async with self._semaphore:
            for attempt in range(self._max_retries + 1):
                if attempt:
                    delay = self._backoff_base * (2 ** (attempt - 1))
                    self.retry_count += 1
                    logger.info("retrying chat completion (attempt %d) after %s", attempt + 1, last_error)
                    await asyncio.sleep(delay)
                try:
                    async with httpx.AsyncClient(timeout=request_timeout) as client:
                        response = await client.post(url, json=payload, headers=headers)
                    if response.status_code // 100 != 2:
                        raise TransportError(f"HTTP {response.status_code}: {response.text[:500]}")
                    return self._parse_reply(response)
                except (httpx.TimeoutException, httpx.TransportError) as exc:
                    last_error = TransportError(f"transport failure: {exc}")
                except TransportError as exc:
                    last_error = exc
        raise last_error if last_error is not None else TransportError("chat completion failed")

    def _parse_reply(self, response: httpx.Response) -> ChatReply:
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {exc}") from exc
        usage = body.get("usage") or {}
        usage = {k: v for k, v in usage.items() if isinstance(v, int)}
        for key, value in usage.items():
            self.total_usage[key] = self.total_usage.get(key, 0) + value
        return ChatReply(text=str(text), usage=usage)
