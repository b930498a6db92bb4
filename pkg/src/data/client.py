"""
Clients that produce class descriptions for a query.

HttpLlmClient talks to a JSON completion endpoint; FixtureLlmClient reads
canned completions from disk for offline, reproducible curation.
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import TYPE_CHECKING

import requests

from ..structures.enums import CurationMode
from ..structures.errors import (
    ArtifactIOError,
    LlmClientError,
    ValidationError,
)

if TYPE_CHECKING:
    from ..config import Config, CurateConfig
    from .records import ClassRecord, QueryTemplate

logger = logging.getLogger(__name__)

TRANSIENT_STATUS_CODES = frozenset({408, 425, 429, 500, 502, 503, 504})


class LlmClient(ABC):
    """Produces n completions for a query about one class."""

    @abstractmethod
    def complete(
        self,
        record: ClassRecord,
        query: QueryTemplate,
        n: int,
    ) -> list[str]:
        """Gets n raw completions for the rendered query."""
        raise NotImplementedError

    @classmethod
    def from_config(
        cls,
        config: Config,
        settings: CurateConfig,
    ) -> LlmClient:
        """Creates the client matching the curation mode."""
        match settings.mode:
            case CurationMode.LLM:
                if not config.llm_url:
                    raise ValidationError(
                        f"LLM mode needs the {config.LLM_URL_VARIABLES[0]} "
                        "environment variable."
                    )
                return HttpLlmClient(
                    url=config.llm_url,
                    key=config.llm_key,
                    max_tokens=settings.max_tokens,
                    temperature=settings.temperature,
                    timeout=settings.timeout,
                    retries=settings.retries,
                    backoff=settings.backoff,
                )
            case CurationMode.FIXTURE:
                return FixtureLlmClient(config.get_path("fixtures"))
            case _:
                raise ValidationError(
                    f"Curation mode '{settings.mode.label}' needs no client."
                )


class HttpLlmClient(LlmClient):
    """Posts queries to a JSON completion endpoint.

    The request body is {"prompt", "n", "max_tokens", "temperature"} and
    the response must hold a "completions" list. Transient failures are
    retried with exponential backoff.
    """

    def __init__(
        self,
        url: str,
        key: str | None = None,
        max_tokens: int = 77,
        temperature: float = 0.99,
        timeout: float = 30,
        retries: int = 3,
        backoff: float = 1.0,
    ) -> None:
        """Initializes the HttpLlmClient object."""
        self.url = url
        self.key = key
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    @property
    def headers(self) -> dict[str, str]:
        """Gets the request headers, including the key when set."""
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        return headers

    def _post(self, prompt: str, n: int) -> list[str]:
        """Sends one request and returns the completions."""
        response = requests.post(
            url=self.url,
            json={
                "prompt": prompt,
                "n": n,
                "max_tokens": self.max_tokens,
                "temperature": self.temperature,
            },
            headers=self.headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        completions = response.json()["completions"]
        if not isinstance(completions, list):
            raise ValueError("'completions' is not a list")
        return [str(completion) for completion in completions]

    @staticmethod
    def _is_transient(error: Exception) -> bool:
        """Checks whether a failed request is worth retrying."""
        if isinstance(error, requests.exceptions.HTTPError):
            response = error.response
            return (
                response is None
                or response.status_code in TRANSIENT_STATUS_CODES
            )
        return isinstance(error, requests.exceptions.RequestException)

    def complete(
        self,
        record: ClassRecord,
        query: QueryTemplate,
        n: int,
    ) -> list[str]:
        """Gets n completions, retrying transient failures."""
        prompt = query.render(record.name)
        attempt = 0
        while True:
            try:
                return self._post(prompt, n)
            except (
                requests.exceptions.RequestException,
                ValueError,
                KeyError,
            ) as error:
                if not self._is_transient(error) or attempt >= self.retries:
                    raise LlmClientError(
                        f"Query '{prompt}' failed after {attempt + 1} "
                        f"attempt(s): {error}"
                    ) from error
                delay = self.backoff * 2**attempt
                logger.warning(
                    "Query '%s' failed (%s); retrying in %.1f s.",
                    prompt,
                    error,
                    delay,
                )
                time.sleep(delay)
                attempt += 1


class FixtureLlmClient(LlmClient):
    """Reads completions from <directory>/<class_id>/<query_id>.txt."""

    def __init__(self, directory: str | Path) -> None:
        """Initializes the FixtureLlmClient object."""
        self.directory = Path(directory)

    def get_path(self, record: ClassRecord, query: QueryTemplate) -> Path:
        """Gets the fixture file for a class and query."""
        return self.directory / str(record.class_id) / f"{query.query_id}.txt"

    def complete(
        self,
        record: ClassRecord,
        query: QueryTemplate,
        n: int,
    ) -> list[str]:
        """Gets the first n lines of the fixture file."""
        path = self.get_path(record, query)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except FileNotFoundError as error:
            raise ArtifactIOError(
                f"No fixture '{path}' for class '{record.name}'."
            ) from error
        if len(lines) < n:
            logger.warning(
                "Fixture '%s' holds %d of %d completions.", path, len(lines), n
            )
        return lines[:n]
