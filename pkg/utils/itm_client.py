import base64
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import requests
from pydantic import ValidationError
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from config import ITM_ENDPOINT, ITM_TIMEOUT, ITM_RETRIES, ITM_BATCH_SIZE, ITM_MAX_WORKERS, SSH_TUNNEL_ENABLED
from models.errors import ScorerError, ScorerTimeoutError, ScorerStatusError, MalformedResponseError
from models.results import ITMRequest, ITMResponse

_TRANSIENT = (requests.Timeout, requests.ConnectionError)


class ITMClient:
    """HTTP client for a remote image-text-matching service with pydantic-validated replies"""

    def __init__(self, endpoint: Optional[str] = None, timeout: float = ITM_TIMEOUT, retries: int = ITM_RETRIES,
                 batch_size: int = ITM_BATCH_SIZE, max_workers: int = ITM_MAX_WORKERS,
                 session: Optional[requests.Session] = None, wait=None, use_tunnel: bool = SSH_TUNNEL_ENABLED):
        self.endpoint = (endpoint or ITM_ENDPOINT).rstrip('/')
        self.timeout, self.retries = timeout, retries
        self.batch_size, self.max_workers = max(1, batch_size), max(1, max_workers)
        self.session = session or requests.Session()
        self.wait = wait if wait is not None else wait_exponential(multiplier=1, min=2, max=10)
        self.tunnel = None
        self.network_calls = 0
        self._calls_lock = threading.Lock()

        # Route through an SSH tunnel to a remote GPU host if enabled
        if use_tunnel:
            from utils.ssh_tunnel import ssh_tunnel
            self.tunnel = ssh_tunnel()
            self.endpoint = self.tunnel.__enter__()

    def close(self):
        """Clean up SSH tunnel"""
        if self.tunnel:
            try:
                self.tunnel.__exit__(None, None, None)
            finally:
                self.tunnel = None

    url = property(lambda self: f'{self.endpoint}/itm')
    batches = lambda self, texts: [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]

    def _post_once(self, payload: dict) -> requests.Response:
        with self._calls_lock:
            self.network_calls += 1
        return self.session.post(self.url, json=payload, timeout=self.timeout)

    def _post_batch(self, image_b64: str, texts: List[str]) -> List[float]:
        """POST one batch; retries only timeouts / connection errors"""
        payload = ITMRequest(image_b64=image_b64, texts=texts).model_dump()
        try:
            for attempt in Retrying(stop=stop_after_attempt(self.retries), wait=self.wait,
                                    retry=retry_if_exception_type(_TRANSIENT), reraise=True):
                with attempt:
                    response = self._post_once(payload)
        except requests.Timeout as e:
            raise ScorerTimeoutError(f"ITM service timed out after {self.retries} attempts: {e}") from e
        except requests.ConnectionError as e:
            raise ScorerError(f"ITM service unreachable at {self.url}: {e}") from e

        if not 200 <= response.status_code < 300:
            raise ScorerStatusError(response.status_code, response.text)
        try:
            parsed = ITMResponse(**response.json())
        except (ValueError, TypeError, ValidationError) as e:
            print(f"[ITM VALIDATION ERROR] Response doesn't match ITMResponse: {e}")
            raise MalformedResponseError(f"Malformed ITM response: {e}") from e
        if len(parsed.scores) != len(texts):
            raise MalformedResponseError(f"ITM service returned {len(parsed.scores)} scores for {len(texts)} texts")
        return parsed.scores

    def score(self, image_bytes: bytes, texts: Sequence[str]) -> List[float]:
        """
        Score every text against one image.

        Texts are split into batches posted concurrently; the result keeps input order.
        """
        texts = list(texts)
        if not texts:
            return []
        image_b64 = base64.b64encode(image_bytes).decode('ascii')
        batches = self.batches(texts)
        if len(batches) == 1:
            return self._post_batch(image_b64, batches[0])
        with ThreadPoolExecutor(max_workers=min(self.max_workers, len(batches))) as pool:
            results = list(pool.map(lambda batch: self._post_batch(image_b64, batch), batches))
        return [s for batch_scores in results for s in batch_scores]
