import asyncio
from typing import Any, Dict, Optional

import httpx
from loguru import logger

from backend.config.settings import BackendConfig
from backend.exceptions import BackendError, BackendUnreachable


class ModelClient:
    """Service for posting JSON requests to a model server"""

    def __init__(self, config: BackendConfig, transport: Optional[httpx.AsyncBaseTransport] = None, stage: str = "model"):
        self.config = config
        self.base_url = config.endpoint_url
        self.stage = stage
        # In-process transport (httpx.ASGITransport) for tests against the stub app
        self.transport = transport
        self._semaphore: Optional[asyncio.Semaphore] = None
        self._loop = None
        self.stats = {
            "requests": 0,
            "retries": 0,
            "failures": 0,
        }
        logger.info(f"{stage} client initialized for {self.base_url} (timeout {config.timeout}s, retries {config.max_retries})")

    def _limit(self) -> asyncio.Semaphore:
        loop = asyncio.get_running_loop()
        if self._semaphore is None or self._loop is not loop:
            self._semaphore = asyncio.Semaphore(self.config.max_concurrency)
            self._loop = loop
        return self._semaphore

    def _client(self) -> httpx.AsyncClient:
        return httpx.AsyncClient(base_url=self.base_url, timeout=self.config.timeout, transport=self.transport)

    async def post_json(self, path: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        """POST `payload` to `path`; transport failures and 5xx answers are retried up to max_retries times"""
        attempts = self.config.max_retries + 1
        last_error = ""
        async with self._limit():
            for attempt in range(1, attempts + 1):
                self.stats["requests"] += 1
                if attempt > 1:
                    self.stats["retries"] += 1
                try:
                    async with self._client() as client:
                        response = await client.post(path, json=payload)

                    if response.status_code >= 500:
                        last_error = f"HTTP {response.status_code}: {response.text[:200]}"
                        logger.warning(f"{self.stage} {path} attempt {attempt}/{attempts} failed: {last_error}")
                        continue
                    if response.status_code >= 400:
                        self.stats["failures"] += 1
                        logger.error(f"{self.stage} {path} rejected: HTTP {response.status_code}: {response.text[:200]}")
                        raise BackendError(f"{self.stage} {path} rejected the request: HTTP {response.status_code}")

                    try:
                        return response.json()
                    except ValueError as e:
                        self.stats["failures"] += 1
                        raise BackendError(f"{self.stage} {path} answered with invalid JSON") from e

                except httpx.TimeoutException:
                    last_error = f"timeout after {self.config.timeout}s"
                    logger.warning(f"{self.stage} {path} attempt {attempt}/{attempts}: {last_error}")

                except httpx.RequestError as e:
                    last_error = f"request error: {str(e)}"
                    logger.warning(f"{self.stage} {path} attempt {attempt}/{attempts}: {last_error}")

        self.stats["failures"] += 1
        logger.error(f"{self.stage} {self.base_url}{path} unreachable after {attempts} attempts: {last_error}")
        raise BackendUnreachable(f"{self.stage} backend at {self.base_url}{path} unreachable: {last_error}")

    async def health(self) -> Dict[str, Any]:
        try:
            async with self._client() as client:
                response = await client.get("/health")
            if response.status_code == 200:
                return {"success": True, "data": response.json()}
            return {"success": False, "error": f"HTTP {response.status_code}"}
        except Exception as e:
            return {"success": False, "error": str(e)}
