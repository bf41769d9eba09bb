"""Text-generation service clients: HTTP+JSON chat contract and a local mock."""

from __future__ import annotations

import os
import threading
from typing import Callable, Protocol

import requests

API_KEY_ENV = "SENTAUG_API_KEY"


class ServiceError(Exception):
    """Generation service failure, retryable; carries the attempt count."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class GenerationClient(Protocol):
    def complete(self, messages: list[dict], temperature: float) -> str:
        """Return the completion text for a chat-style message list."""
        ...


def extract_query(prompt: str) -> str:
    """Pull the final Example block (the query) out of a rendered prompt."""
    marker = "Example:"
    start = prompt.rfind(marker)
    if start < 0:
        return prompt.strip()
    body = prompt[start + len(marker):]
    end = body.find("Counterfactual:")
    if end >= 0:
        body = body[:end]
    return body.strip()


class HttpGenerationClient:
    """Chat-completion client: POST {model, temperature, messages} as JSON.

    The API key is read from the environment only. Concurrent requests are
    capped by a semaphore so callers can fan out safely.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "default",
        timeout: float = 30.0,
        max_retries: int = 3,
        max_concurrency: int = 4,
        api_key_env: str = API_KEY_ENV,
    ):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.api_key_env = api_key_env
        self._gate = threading.Semaphore(max_concurrency)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    @staticmethod
    def _completion_text(payload: dict) -> str:
        if "completion" in payload:
            return str(payload["completion"])
        choices = payload.get("choices")
        if choices:
            first = choices[0]
            if "message" in first:
                return str(first["message"].get("content", ""))
            if "text" in first:
                return str(first["text"])
        raise ServiceError(f"no completion text in response keys {sorted(payload)}")

    def complete(self, messages: list[dict], temperature: float) -> str:
        body = {"model": self.model, "temperature": temperature, "messages": messages}
        last_error = None
        for attempt in range(1, self.max_retries + 1):
            try:
                with self._gate:
                    response = requests.post(
                        self.endpoint, json=body, headers=self._headers(), timeout=self.timeout
                    )
                response.raise_for_status()
                return self._completion_text(response.json())
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
        raise ServiceError(
            f"service call failed after {self.max_retries} attempts: {last_error}",
            attempts=self.max_retries,
        )


class MockGenerationClient:
    """Deterministic in-process stand-in honoring the same chat contract.

    Resolution order for the query found in the prompt's final Example
    block: exact canned response, then the ``responder`` callable, then a
    lexicon polarity flip. Thread-safe; counts calls for tests.
    """

    def __init__(
        self,
        responses: dict[str, str] | None = None,
        responder: Callable[[str], str] | None = None,
        flip: Callable[[str], str] | None = None,
    ):
        if flip is None:
            from .synthetic import flip_polarity as flip
        self.responses = dict(responses or {})
        self.responder = responder
        self.flip = flip
        self.calls: list[str] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, messages: list[dict], temperature: float) -> str:
        prompt = messages[-1]["content"]
        query = extract_query(prompt)
        with self._lock:
            self.calls.append(query)
        if query in self.responses:
            return self.responses[query]
        if self.responder is not None:
            return self.responder(query)
        return self.flip(query)
