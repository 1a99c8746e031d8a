from dataclasses import dataclass

import httpx
from tenacity import (
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .errors import (
    AuthenticationError,
    ConfigError,
    EmptyCompletionError,
    TransportError,
)
from .interfaces import ICompletionClient
from .logger import SilentLogger

API_STYLES = ('completions', 'chat')

RETRY_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass
class RetryPolicy:
    """Exponential backoff: ``base * factor ** (attempt - 1)`` seconds."""

    max_attempts: int = 3
    base: float = 1.0
    factor: float = 2.0

    def validate(self):
        if self.max_attempts < 1:
            raise ConfigError('retry max_attempts must be >= 1')
        if self.base < 0 or self.factor < 1:
            raise ConfigError('retry backoff must be base >= 0, factor >= 1')
        return self

    def retrying(self, before_sleep=None):
        return Retrying(
            stop=stop_after_attempt(self.max_attempts),
            wait=wait_exponential(multiplier=self.base, exp_base=self.factor),
            retry=retry_if_exception_type(RetryableError),
            before_sleep=before_sleep,
            reraise=True,
        )


class RetryableError(Exception):
    """A transient transport failure worth another attempt."""


class HttpCompletionClient(ICompletionClient):
    """
    Talks to an OpenAI-compatible JSON-over-HTTP completion endpoint.

    ``api`` selects the request shape: ``"completions"`` posts a ``prompt``
    and reads ``choices[0].text``; ``"chat"`` posts a single user message
    and reads ``choices[0].message.content``. Decoding is always greedy
    (``temperature`` 0).

    Transient failures (timeouts, connection errors, 408/429/5xx) are
    retried according to ``retry``; 401/403 raise
    :class:`qppjudge.errors.AuthenticationError` immediately.

    ``transport`` is passed through to :class:`httpx.Client` and is mostly
    useful for tests (``httpx.MockTransport``).

    """

    def __init__(
        self,
        endpoint_url,
        model_name,
        api='completions',
        max_tokens=8,
        retry=None,
        api_key=None,
        timeout=30.0,
        transport=None,
        logger=None,
    ):
        if api not in API_STYLES:
            raise ConfigError('unknown api style {!r}'.format(api))
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.api = api
        self.max_tokens = max_tokens
        self.retry = (retry or RetryPolicy()).validate()
        self.logger = logger or SilentLogger()
        headers = {'Content-Type': 'application/json'}
        if api_key:
            headers['Authorization'] = 'Bearer ' + api_key
        self.client = httpx.Client(
            timeout=timeout, headers=headers, transport=transport
        )

    def payload(self, prompt):
        body = {
            'model': self.model_name,
            'temperature': 0,
            'max_tokens': self.max_tokens,
        }
        if self.api == 'chat':
            body['messages'] = [{'role': 'user', 'content': prompt}]
        else:
            body['prompt'] = prompt
        return body

    def _post(self, prompt):
        try:
            response = self.client.post(
                self.endpoint_url, json=self.payload(prompt)
            )
        except httpx.TransportError as ex:
            raise RetryableError('{}: {}'.format(type(ex).__name__, ex))

        status = response.status_code
        if status in (401, 403):
            raise AuthenticationError(
                'endpoint rejected credentials (HTTP {})'.format(status)
            )
        if status in RETRY_STATUS:
            raise RetryableError('HTTP {}'.format(status))
        if status >= 400:
            raise TransportError(
                'endpoint returned HTTP {}: {}'.format(
                    status, response.text[:200]
                )
            )
        try:
            return extract_completion(response.json(), self.api)
        except (ValueError, KeyError, IndexError, TypeError):
            raise TransportError(
                'unexpected response body: {}'.format(response.text[:200])
            )

    def _before_sleep(self, state):
        self.logger.warn(
            'completion attempt {} failed ({}); retrying'.format(
                state.attempt_number, state.outcome.exception()
            )
        )

    def complete(self, prompt):
        retrying = self.retry.retrying(before_sleep=self._before_sleep)
        try:
            text = retrying(self._post, prompt)
        except RetryableError as ex:
            raise TransportError(
                'endpoint {} failed after {} attempts: {}'.format(
                    self.endpoint_url, self.retry.max_attempts, ex
                )
            )
        if text is None or not text.strip():
            raise EmptyCompletionError('endpoint returned an empty completion')
        return text

    def close(self):
        self.client.close()


def extract_completion(body, api='completions'):
    choice = body['choices'][0]
    if api == 'chat':
        return choice['message']['content']
    return choice['text']
