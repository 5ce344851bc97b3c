"""Embedding providers: a deterministic mock and a line-protocol socket client.

The wire protocol is one JSON object per line, matched by id:

    request:  {"id": str, "model": str, "texts": [str]}
    response: {"id": str, "vectors": [[num, ...]], "token_counts": [int]}
    error:    {"id": str, "error": {"kind": "length"|"model"|"internal",
                                    "message": str}}

A "length" error makes :func:`embed_batch` retry with the next smaller
truncation cap.  Mock model names are ``mock:<dim>:<seed>``; the mock
vector construction is fully specified below so that an independent
service implementation produces matching vectors.
"""

from __future__ import annotations

import hashlib
import json
import socket
import uuid
from collections import Counter
from dataclasses import dataclass

import numpy as np

from lemurkit.vindex import TruncationPolicy

ERROR_KINDS = ("length", "model", "internal")


class TransportError(Exception):
    """Provider unreachable or the connection broke mid-request."""


class ProtocolError(Exception):
    """Provider answered with something that is not a valid response line."""

    def __init__(self, message: str, payload: str | None = None):
        super().__init__(message)
        self.payload = payload


class ProviderError(Exception):
    """In-protocol error response from the provider."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class EmbedRequest:
    request_id: str
    model: str
    texts: list[str]

    def __post_init__(self) -> None:
        if not self.texts:
            raise ValueError("texts must be non-empty")

    @classmethod
    def new(cls, model: str, texts: list[str]) -> "EmbedRequest":
        return cls(request_id=uuid.uuid4().hex, model=model, texts=list(texts))


@dataclass(frozen=True)
class EmbedResponse:
    request_id: str
    vectors: list[list[float]]
    token_counts: list[int] | None = None


def _token_unit(seed: int, token: str, dim: int) -> np.ndarray:
    # Expand sha256(seed|token) in counter mode to dim 8-byte words, map the
    # top 53 bits of each word to [-1, 1), and normalize.  Every step is an
    # exact or correctly-rounded IEEE double operation, so any faithful
    # reimplementation reproduces these vectors.
    key = hashlib.sha256(f"{seed}|{token}".encode("utf-8")).digest()
    stream = b""
    counter = 0
    while len(stream) < dim * 8:
        stream += hashlib.sha256(key + counter.to_bytes(4, "big")).digest()
        counter += 1
    words = np.frombuffer(stream[: dim * 8], dtype=">u8")
    comps = (words >> np.uint64(11)).astype(np.float64) / 2.0**53 * 2.0 - 1.0
    norm = np.linalg.norm(comps)
    if norm == 0.0:
        comps = np.zeros(dim)
        comps[0] = 1.0
        return comps
    return comps / norm


def mock_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic token-bag unit vector for ``text``.

    Each whitespace token contributes its pseudorandom unit vector scaled
    by its occurrence count; contributions are accumulated over distinct
    tokens in sorted order and the sum is L2-normalized.  Texts sharing
    tokens therefore land closer in cosine space than disjoint ones, which
    gives end-to-end tests nontrivial retrieval behavior.  Pure function of
    (text, dim, seed), and word-order invariant by construction.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    tokens = text.split() or [""]
    counts = Counter(tokens)
    acc = np.zeros(dim)
    for token in sorted(counts):
        acc += counts[token] * _token_unit(seed, token, dim)
    norm = np.linalg.norm(acc)
    if norm < 1e-12:
        # Cancellation across tokens; fall back to the first token alone.
        return _token_unit(seed, tokens[0], dim)
    return acc / norm


def parse_mock_model(model: str) -> tuple[int, int]:
    """Split ``mock:<dim>:<seed>`` into (dim, seed)."""
    parts = model.split(":")
    if len(parts) != 3 or parts[0] != "mock":
        raise ValueError(f"not a mock model name: {model!r}")
    return int(parts[1]), int(parts[2])


class MockProvider:
    """In-process provider serving ``mock:<dim>:<seed>`` models.

    ``max_tokens`` emulates a model length limit: any over-long text makes
    the whole request fail with a "length" error, like a real sidecar.
    """

    def __init__(self, max_tokens: int | None = None):
        self.max_tokens = max_tokens

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        try:
            dim, seed = parse_mock_model(req.model)
        except ValueError as exc:
            raise ProviderError("model", str(exc)) from exc
        counts = [len(t.split()) for t in req.texts]
        if self.max_tokens is not None and any(c > self.max_tokens for c in counts):
            raise ProviderError(
                "length", f"text exceeds {self.max_tokens} tokens"
            )
        vectors = [mock_embed(t, dim, seed).tolist() for t in req.texts]
        return EmbedResponse(request_id=req.request_id, vectors=vectors, token_counts=counts)


class SocketProvider:
    """Client for a line-protocol embedding service.

    ``addr`` is ``host:port`` for TCP or ``unix:<path>`` for a Unix socket.
    One request is in flight per connection; the connection is reused
    across requests and reopened on demand.
    """

    def __init__(self, addr: str, timeout: float = 30.0):
        self.addr = addr
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._reader = None

    def _connect(self) -> None:
        try:
            if self.addr.startswith("unix:"):
                sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                sock.settimeout(self.timeout)
                sock.connect(self.addr[len("unix:"):])
            else:
                host, _, port = self.addr.rpartition(":")
                if not host or not port.isdigit():
                    raise ValueError(f"bad socket address {self.addr!r}")
                sock = socket.create_connection((host, int(port)), timeout=self.timeout)
        except (OSError, ValueError) as exc:
            raise TransportError(f"cannot reach provider at {self.addr}: {exc}") from exc
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8")

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self) -> "SocketProvider":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def embed(self, req: EmbedRequest) -> EmbedResponse:
        if self._sock is None:
            self._connect()
        line = json.dumps(
            {"id": req.request_id, "model": req.model, "texts": req.texts}
        )
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
            raw = self._reader.readline()
        except OSError as exc:
            self.close()
            raise TransportError(f"connection to {self.addr} failed: {exc}") from exc
        if not raw:
            self.close()
            raise TransportError(f"provider at {self.addr} closed the connection")
        return _parse_response_line(raw, req.request_id)


def _parse_response_line(raw: str, expected_id: str) -> EmbedResponse:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response is not JSON: {exc}", payload=raw) from exc
    if not isinstance(obj, dict) or obj.get("id") != expected_id:
        raise ProtocolError(
            f"response id {obj.get('id')!r} does not match request", payload=raw
        )
    if "error" in obj:
        err = obj["error"]
        kind = err.get("kind") if isinstance(err, dict) else None
        if kind not in ERROR_KINDS:
            raise ProtocolError(f"unknown error kind {kind!r}", payload=raw)
        raise ProviderError(kind, err.get("message", ""))
    vectors = obj.get("vectors")
    if not isinstance(vectors, list):
        raise ProtocolError("response missing 'vectors'", payload=raw)
    return EmbedResponse(
        request_id=expected_id,
        vectors=vectors,
        token_counts=obj.get("token_counts"),
    )


def make_provider(spec: str, max_tokens: int | None = None):
    """Build a provider from a spec string: ``mock`` or ``socket:<addr>``."""
    if spec == "mock":
        return MockProvider(max_tokens=max_tokens)
    if spec.startswith("socket:"):
        return SocketProvider(spec[len("socket:"):])
    raise ValueError(f"unknown provider spec {spec!r} (use 'mock' or 'socket:<addr>')")


def embed_batch(
    req: EmbedRequest,
    provider,
    caps: TruncationPolicy | None = None,
) -> EmbedResponse:
    """Embed texts, stepping down through truncation caps on length errors.

    The original texts are re-truncated from scratch at each cap (head
    kept, whitespace tokens), so a provider that rejects 2048-token inputs
    is retried at 1024, then 512, and so on.  Vector order always matches
    text order; a malformed response never silently drops a text.
    """
    attempts: list[list[str]] = [req.texts]
    if caps is not None:
        for cap in caps.caps:
            attempts.append(
                [" ".join(t.split()[:cap]) for t in req.texts]
            )
    last_length_error: ProviderError | None = None
    for texts in attempts:
        attempt = EmbedRequest(request_id=req.request_id, model=req.model, texts=texts)
        try:
            resp = provider.embed(attempt)
        except ProviderError as exc:
            if exc.kind == "length" and caps is not None:
                last_length_error = exc
                continue
            raise
        if len(resp.vectors) != len(texts):
            raise ProtocolError(
                f"provider returned {len(resp.vectors)} vectors for {len(texts)} texts"
            )
        for vec in resp.vectors:
            if not np.isfinite(np.asarray(vec, dtype=np.float64)).all():
                raise ProtocolError("provider returned non-finite vector entries")
        return resp
    raise last_length_error
