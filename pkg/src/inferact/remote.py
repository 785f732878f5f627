"""Remote LLM evaluator and the environment built on it.

The evaluator posts a chat-completion request asking for a JSON object with
three scores, parses the first JSON object in the reply, and maps the scores
onto the observation grid. Retrieved text never reaches the agent's model;
only the scores do.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .control import check_action
from .environment import PROMPT_METRICS, SEARCH_METRICS, EnvState, scale_scores

logger = logging.getLogger(__name__)

API_KEY_ENV = "INFERACT_API_KEY"
METRICS = {"prompt": PROMPT_METRICS, "search": SEARCH_METRICS}
RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class RemoteError(RuntimeError):
    """The endpoint could not produce a usable evaluation."""


class CredentialError(RemoteError):
    """No API key was supplied and ``INFERACT_API_KEY`` is unset."""


class MalformedResponse(RemoteError):
    """A reply without a parseable JSON object holding the requested keys."""


def extract_json_object(text: str) -> Optional[dict]:
    """First balanced JSON object in ``text``, or ``None``.

    Scans each ``{`` and lets the stdlib decoder decide where the object ends,
    so prose or code fences around the object are ignored.
    """
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def parse_scores(doc: Optional[dict], keys: Sequence[str]) -> list[float]:
    """Pull ``keys`` out of ``doc`` as floats in [0, 1].

    Missing keys or non-numeric values raise ``MalformedResponse`` (worth a
    retry); values outside [0, 1] raise ``ValueError`` (not retried).
    """
    if doc is None:
        raise MalformedResponse("no JSON object in response")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise MalformedResponse(f"response is missing {', '.join(missing)}")
    scores = []
    for k in keys:
        v = doc[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedResponse(f"{k} is not a number: {v!r}")
        v = float(v)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{k}={v!r} is outside [0, 1]")
        scores.append(v)
    return scores


def instruction(kind: str) -> str:
    keys = METRICS[kind]
    target = "the prompt as a way to answer the question" if kind == "prompt" else "the search query's results for the question"
    return (
        f"You are a strict evaluator. Rate {target}. "
        f"Reply with a JSON object and nothing else, using exactly the keys {', '.join(keys)}. "
        "Each value is a number from 0.0 to 1.0 in steps of 0.1."
    )


@dataclass
class RemoteEvaluator:
    """Blocking chat-completion client that returns grid scores.

    ``client`` may be an ``httpx.Client`` built by the caller (tests pass one
    with a mock transport); otherwise one is created with ``timeout``.
    """

    endpoint: str
    model: str = "gpt-4o-mini"
    timeout: float = 30.0
    max_retries: int = 3
    api_key: Optional[str] = None
    transcript_path: Optional[str] = None
    client: Optional[httpx.Client] = None
    backoff: float = 0.5
    quality_levels: int = 11

    def __post_init__(self):
        if not self.endpoint:
            raise ValueError("endpoint is required")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.api_key = self.api_key or os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise CredentialError(f"{API_KEY_ENV} is not set")
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    def _log(self, entry: dict) -> None:
        if self.transcript_path is None:
            return
        with Path(self.transcript_path).open("a") as fh:
            fh.write(json.dumps(entry) + "\n")

    def request_body(self, kind: str, text: str, question: str = "") -> dict:
        user = f"Question: {question}\n\n" if question else ""
        label = "Prompt" if kind == "prompt" else "Search results"
        return {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": instruction(kind)},
                {"role": "user", "content": f"{user}{label}:\n{text}"},
            ],
        }

    def _post(self, body: dict) -> str:
        resp = self.client.post(
            self.endpoint,
            json=body,
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
        )
        if resp.status_code in RETRYABLE_STATUS:
            raise httpx.HTTPStatusError(f"HTTP {resp.status_code}", request=resp.request, response=resp)
        resp.raise_for_status()
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected completion payload: {exc}") from exc

    def evaluate(self, kind: str, text: str, question: str = "") -> list[float]:
        """Scores for ``text`` on the three ``kind`` metrics, snapped to the 0.1 grid."""
        if kind not in METRICS:
            raise ValueError(f"kind must be 'prompt' or 'search', got {kind!r}")
        body = self.request_body(kind, text, question)
        keys = METRICS[kind]
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                content = self._post(body)
            except (httpx.TransportError, httpx.HTTPStatusError, MalformedResponse) as exc:
                if isinstance(exc, httpx.HTTPStatusError) and exc.response.status_code not in RETRYABLE_STATUS:
                    self._log({"attempt": attempt, "request": body, "error": str(exc)})
                    raise RemoteError(f"endpoint rejected the request: {exc}") from exc
                last_error = exc
                self._log({"attempt": attempt, "request": body, "error": str(exc)})
            else:
                self._log({"attempt": attempt, "request": body, "response": content})
                try:
                    scores = parse_scores(extract_json_object(content), keys)
                except MalformedResponse as exc:
                    last_error = exc
                    logger.warning("attempt %d: %s", attempt + 1, exc)
                else:
                    levels = scale_scores(scores, self.quality_levels)
                    return [lv / (self.quality_levels - 1) for lv in levels]
            if attempt < self.max_retries and self.backoff:
                time.sleep(self.backoff * 2 ** attempt)
        raise RemoteError(f"no usable evaluation after {self.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self.client.close()


@dataclass
class RemoteEnvironment:
    """Environment whose observations come from a remote evaluator.

    State bookkeeping matches the synthetic environment. Each step scores the
    current prompt text and search text; a search action raises the info level
    when its usefulness score reaches ``advance_threshold``.
    """

    evaluator: RemoteEvaluator
    prompt_texts: Sequence[str]
    search_texts: Sequence[str]
    question: str = ""
    info_levels: int = 3
    quality_levels: int = 11
    advance_threshold: float = 0.5
    state: EnvState = field(default_factory=EnvState)

    def _observe(self) -> tuple[list[int], list[float]]:
        p = self.evaluator.evaluate("prompt", self.prompt_texts[self.state.current_prompt], self.question)
        s = self.evaluator.evaluate("search", self.search_texts[self.state.current_search], self.question)
        obs = scale_scores(p, self.quality_levels) + scale_scores(s, self.quality_levels)
        return obs + [self.state.info_level], s

    def reset(self) -> list[int]:
        self.state = EnvState()
        return self._observe()[0]

    def step(self, action: Sequence[int]) -> list[int]:
        check_action(action)
        p, s, _ = (int(x) for x in action)
        if p > len(self.prompt_texts) or s > len(self.search_texts):
            raise ValueError(f"action {tuple(action)} exceeds the configured texts")
        prompt = p - 1 if p > 0 else self.state.current_prompt
        if s > 0:
            search = s - 1
        elif p > 0:
            search = self.state.current_search
        else:
            search = 0
        self.state = EnvState(prompt, search, self.state.info_level)
        obs, search_scores = self._observe()
        if s > 0 and search_scores[1] >= self.advance_threshold:
            level = min(self.state.info_level + 1, self.info_levels - 1)
            self.state = EnvState(prompt, search, level)
            obs[-1] = level
        return obs
