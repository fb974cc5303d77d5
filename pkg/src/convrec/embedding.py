"""Text-to-vector providers: a deterministic local hashing encoder and a remote HTTP client.

Vectors are numpy float64 arrays of a provider-constant dimension with all
entries finite. The local provider exists so the whole system runs offline
and reproducibly; the remote provider speaks a minimal ``POST /embed``
contract so any encoder server can be plugged in.
"""

from __future__ import annotations

import hashlib
import re
import time
from typing import Sequence

import numpy as np
import requests

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class EmbeddingError(Exception):
    """Encoding failed (bad input, transport failure, or protocol violation)."""


class EmbeddingProtocolError(EmbeddingError):
    """The remote encoder responded with something outside its contract."""


class EmbeddingProvider:
    """Interface: deterministic text encoder with a fixed output dimension.

    Attributes:
        provider_id: stable string identifying the provider configuration.
        dim: output dimension, constant for the instance.
        normalized: whether produced vectors are L2-normalized.
    """

    provider_id: str
    dim: int
    normalized: bool

    def encode(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        """Encode each text; element i equals encode(texts[i])."""
        out = []
        for i, text in enumerate(texts):
            try:
                out.append(self.encode(text))
            except EmbeddingError as exc:
                raise EmbeddingError(f"text {i}: {exc}") from exc
        return out


class LocalHashEmbedder(EmbeddingProvider):
    """Seeded feature-hashed bag of lowercase word tokens, L2-normalized.

    The hashing scheme is fixed (blake2b over seed-prefixed token bytes), so
    vectors depend only on (text, dim, seed) and are stable across processes
    and platforms. A text with no word tokens maps to the zero vector.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.provider_id = f"local-hash-{dim}-{seed}"
        self.normalized = True

    def encode(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingError("cannot encode empty text")
        counts = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.blake2b(
                f"{self.seed}\x1f{token}".encode("utf-8"), digest_size=9
            ).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            counts[bucket] += sign
        # fixed-order sum of squares keeps the norm bit-identical everywhere
        norm_sq = 0.0
        for value in counts:
            norm_sq += value * value
        if norm_sq == 0.0:
            return counts
        return counts / np.float64(norm_sq) ** 0.5


class RemoteEmbedder(EmbeddingProvider):
    """Client for a remote encoder speaking POST <base_url>/embed.

    Request body {"texts": [...]}; response {"dim": int, "vectors": [[...]]}.
    Transient failures (transport errors, 5xx) are retried with exponential
    backoff; protocol violations (dimension mismatch, non-finite entries) are
    surfaced immediately. Vectors are passed through unmodified.
    """

    def __init__(
        self,
        base_url: str,
        dim: int | None = None,
        timeout: float = 10.0,
        retries: int = 2,
        backoff: float = 0.25,
        batch_size: int = 64,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.dim = dim  # pinned on first response when not configured
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.batch_size = batch_size
        self.provider_id = f"remote:{self.base_url}"
        self.normalized = False
        self._session = session or requests.Session()

    def encode(self, text: str) -> np.ndarray:
        return self.encode_batch([text])[0]

    def encode_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        for i, text in enumerate(texts):
            if not text or not text.strip():
                raise EmbeddingError(f"text {i}: cannot encode empty text")
        vectors: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            vectors.extend(self._post_chunk(list(texts[start : start + self.batch_size])))
        return vectors

    def _post_chunk(self, texts: list[str]) -> list[np.ndarray]:
        payload = self._request_with_retries({"texts": texts})
        dim = payload.get("dim")
        rows = payload.get("vectors")
        if not isinstance(dim, int) or not isinstance(rows, list) or len(rows) != len(texts):
            raise EmbeddingProtocolError("malformed /embed response")
        if self.dim is None:
            self.dim = dim
        elif dim != self.dim:
            raise EmbeddingProtocolError(f"encoder returned dim {dim}, expected {self.dim}")
        out = []
        for row in rows:
            try:
                vec = np.asarray(row, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise EmbeddingProtocolError(f"non-numeric vector entries: {exc}") from exc
            if vec.shape != (self.dim,):
                raise EmbeddingProtocolError(
                    f"vector of length {vec.shape[0] if vec.ndim == 1 else '?'}, expected {self.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbeddingProtocolError("encoder returned non-finite values")
            out.append(vec)
        return out

    def _request_with_retries(self, body: dict) -> dict:
        url = f"{self.base_url}/embed"
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise EmbeddingProtocolError("non-JSON /embed response") from exc
                if resp.status_code < 500:
                    raise EmbeddingError(f"encoder error {resp.status_code}: {resp.text[:200]}")
                last_exc = EmbeddingError(f"encoder error {resp.status_code}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise EmbeddingError(f"encoder unreachable after {self.retries + 1} attempts: {last_exc}") from last_exc
