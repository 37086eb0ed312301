from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import requests
from tenacity import RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt

from selfplay_lab.errors import PermanentGatewayError, TransientGatewayError
from selfplay_lab.gateway.base import ChatBackend
from selfplay_lab.gateway.retry import RateLimiter, RetryPolicy, retry_schedule
from selfplay_lab.types import ChatMessage, ChatRequest

logger = logging.getLogger(__name__)

ENV_BASE_URL = "SELFPLAY_LLM_BASE_URL"
ENV_COMPLETIONS_PATH = "SELFPLAY_LLM_COMPLETIONS_PATH"
ENV_API_KEY_ENV = "SELFPLAY_LLM_API_KEY_ENV"
ENV_TIMEOUT = "SELFPLAY_LLM_TIMEOUT"
ENV_RATE_LIMIT = "SELFPLAY_LLM_RATE_LIMIT"


@dataclass(frozen=True)
class LiveBackendConfig:
    base_url: str = "https://api.openai.com/v1"
    completions_path: str = "/chat/completions"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    retry: RetryPolicy = RetryPolicy()

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/" + self.completions_path.lstrip("/")

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "LiveBackendConfig":
        env = os.environ if environ is None else environ
        defaults = cls()
        rate = int(env.get(ENV_RATE_LIMIT, defaults.retry.rate_limit_requests))
        return cls(
            base_url=env.get(ENV_BASE_URL, defaults.base_url),
            completions_path=env.get(ENV_COMPLETIONS_PATH, defaults.completions_path),
            api_key_env=env.get(ENV_API_KEY_ENV, defaults.api_key_env),
            timeout=float(env.get(ENV_TIMEOUT, defaults.timeout)),
            retry=RetryPolicy(rate_limit_requests=rate, rate_limit_window=60.0),
        )


class LiveBackend(ChatBackend):
    """Chat-completion client for any endpoint speaking the de-facto wire format.

    TRANSIENT failures (timeouts, connection errors, 429, 5xx) are retried on
    the ``retry_schedule`` delays; PERMANENT failures surface immediately.
    Requests from all threads share one token-bucket rate limiter.
    """

    def __init__(
        self,
        config: LiveBackendConfig,
        session: Optional[requests.Session] = None,
        environ: Optional[Mapping[str, str]] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        env = os.environ if environ is None else environ
        token = env.get(config.api_key_env, "")
        if not token:
            raise PermanentGatewayError(
                f"environment variable {config.api_key_env} holds no API token", code="AUTH_MISSING"
            )
        self.config = config
        self._token = token
        self._http = session or requests.Session()
        self._sleep = sleep
        self._limiter = RateLimiter.from_policy(config.retry, sleep=sleep)

    def complete(self, request: ChatRequest) -> ChatMessage:
        retrying = Retrying(
            stop=stop_after_attempt(self.config.retry.max_attempts),
            wait=self._wait,
            retry=retry_if_exception_type(TransientGatewayError),
            sleep=self._sleep,
            before_sleep=self._log_retry,
            reraise=True,
        )
        return retrying(self._post_once, request)

    def _wait(self, state: RetryCallState) -> float:
        return retry_schedule(self.config.retry, state.attempt_number) or 0.0

    def _log_retry(self, state: RetryCallState) -> None:
        exc = state.outcome.exception() if state.outcome else None
        logger.warning(
            "Transient gateway failure (attempt %d/%d): %s",
            state.attempt_number,
            self.config.retry.max_attempts,
            exc,
        )

    def _post_once(self, request: ChatRequest) -> ChatMessage:
        self._limiter.acquire()
        params = request.params
        payload = {
            "model": params.model_name,
            "messages": [m.to_wire() for m in request.messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "top_p": params.top_p,
        }
        headers = {
            "Authorization": f"Bearer {self._token}",
            "Content-Type": "application/json",
        }
        logger.debug("POST %s agent=%s session=%s", self.config.url, request.agent, request.session_id)
        try:
            response = self._http.post(self.config.url, json=payload, headers=headers, timeout=self.config.timeout)
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransientGatewayError(f"{type(exc).__name__}: {exc}") from exc
        except requests.RequestException as exc:
            raise PermanentGatewayError(f"{type(exc).__name__}: {exc}") from exc

        status = response.status_code
        if status == 429 or status >= 500:
            raise TransientGatewayError(f"HTTP {status}: {response.text[:200]}")
        if status >= 400:
            raise PermanentGatewayError(f"HTTP {status}: {response.text[:200]}")

        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise PermanentGatewayError(f"malformed completion body: {exc}") from exc
        if not isinstance(content, str):
            raise PermanentGatewayError("completion content is not text")
        return ChatMessage(role="assistant", content=content.strip())
