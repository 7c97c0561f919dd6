"""Embedding providers, cosine similarity and the persistent vector cache.

The trained sentence model always lives behind the provider interface; the
package never loads model weights. Three providers exist:

- HashedTokenProvider: deterministic bag-of-tokens vectors. Geometry is
  pure lexical overlap, so it deliberately fails the suitability gate on
  semantically-similar pairs with no shared words.
- LookupProvider: fixed vectors per sentence from a fixture file; lets
  tests impose any similarity structure.
- RemoteProvider: HTTP client for an out-of-process model server.

Vectors are float64, unit-norm within 1e-6, or all-zeros for empty or
unembeddable text. Cosine of a zero vector is 0.0 by convention.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import CorruptRecord, DimensionMismatch, FormatVersionMismatch, ProviderUnavailable
from .graph import Graph

CACHE_FORMAT = "fountain-embeddings"
CACHE_VERSION = 1

# node labels whose `text` property participates in similarity linking
EMBEDDED_LABELS = ("Cause", "Effect", "Detection", "WarrantyClaim")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class ProviderDescriptor:
    name: str
    dimension: int
    fingerprint: str


class HashedTokenProvider:
    """Deterministic test provider: hashed bag-of-tokens, d=256.

    Tokens are the lowercased non-alphanumeric-separated runs; each token
    lands in bucket fnv1a64(token) % d with sign taken from the top hash
    bit; counts accumulate and the result is L2-normalized.
    """

    dimension = 256

    def __init__(self) -> None:
        self._descriptor = ProviderDescriptor(
            name="hashed-token",
            dimension=self.dimension,
            fingerprint=hashlib.sha256(b"hashed-token/256/fnv1a64/v1").hexdigest(),
        )

    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in re.split(r"[^a-z0-9]+", text.lower()):
            if not token:
                continue
            h = fnv1a64(token.encode("utf-8"))
            sign = -1.0 if (h >> 63) & 1 else 1.0
            vec[h % self.dimension] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return vec
        return vec / norm

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class LookupProvider:
    """Vectors assigned per exact sentence, from a mapping or fixture file.

    Fixture format: {"name": ..., "vectors": {"<sentence>": [floats], ...}}.
    Vectors are normalized on load; empty text maps to the zero vector.
    """

    def __init__(self, vectors: dict[str, Sequence[float]], name: str = "lookup"):
        if not vectors:
            raise ValueError("lookup provider needs at least one vector")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed vector lengths in lookup table: {sorted(dims)}")
        self.dimension = dims.pop()
        self._vectors: dict[str, np.ndarray] = {}
        for text, values in vectors.items():
            vec = np.asarray(values, dtype=np.float64)
            norm = float(np.linalg.norm(vec))
            if norm > 0.0 and abs(norm - 1.0) > 1e-6:
                vec = vec / norm
            self._vectors[text] = vec
        digest = hashlib.sha256()
        digest.update(name.encode("utf-8"))
        digest.update(str(self.dimension).encode())
        for text in sorted(self._vectors):
            digest.update(text.encode("utf-8"))
            digest.update(self._vectors[text].tobytes())
        self._descriptor = ProviderDescriptor(name, self.dimension, digest.hexdigest())

    @classmethod
    def from_file(cls, path: str) -> "LookupProvider":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data["vectors"], name=data.get("name", os.path.basename(path)))

    def descriptor(self) -> ProviderDescriptor:
        return self._descriptor

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            return np.zeros(self.dimension, dtype=np.float64)
        try:
            return self._vectors[text]
        except KeyError:
            raise ProviderUnavailable(f"lookup table has no vector for {text!r}") from None

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class RemoteProvider:
    """Client for the HTTP embedding protocol.

    POST {base}/embed with {"texts": [...]} and expect
    {"model": name, "dimension": d, "vectors": [[...], ...]} plus an
    optional "version" field that feeds the fingerprint.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._descriptor: Optional[ProviderDescriptor] = None

    def _post(self, texts: list[str]) -> dict:
        try:
            response = requests.post(
                f"{self.base_url}/embed", json={"texts": texts}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"embedding endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailable(
                f"embedding endpoint returned HTTP {response.status_code}",
                status=response.status_code,
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise ProviderUnavailable(f"malformed embedding response: {exc}") from exc
        if not isinstance(body, dict) or "vectors" not in body or "dimension" not in body:
            raise ProviderUnavailable("embedding response missing required fields")
        return body

    def descriptor(self) -> ProviderDescriptor:
        if self._descriptor is None:
            body = self._post([])
            name = str(body.get("model", "remote"))
            dimension = int(body["dimension"])
            version = str(body.get("version", ""))
            fingerprint = hashlib.sha256(
                f"{name}\x00{dimension}\x00{version}".encode("utf-8")
            ).hexdigest()
            self._descriptor = ProviderDescriptor(name, dimension, fingerprint)
        return self._descriptor

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        descriptor = self.descriptor()
        texts = list(texts)
        wanted = [(i, t) for i, t in enumerate(texts) if t.strip()]
        out: list[np.ndarray] = [
            np.zeros(descriptor.dimension, dtype=np.float64) for _ in texts
        ]
        if not wanted:
            return out
        body = self._post([t for _, t in wanted])
        vectors = body["vectors"]
        if len(vectors) != len(wanted):
            raise ProviderUnavailable(
                f"expected {len(wanted)} vectors, got {len(vectors)}"
            )
        for (i, _), values in zip(wanted, vectors):
            vec = np.asarray(values, dtype=np.float64)
            if vec.shape != (descriptor.dimension,):
                raise DimensionMismatch(
                    f"provider returned length {vec.shape}, expected {descriptor.dimension}"
                )
            norm = float(np.linalg.norm(vec))
            if norm > 0.0 and abs(norm - 1.0) > 1e-6:
                vec = vec / norm
            out[i] = vec
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


def make_provider(spec: str):
    """Provider from a config string: ``test``, ``lookup:<path>`` or a URL."""
    if spec == "test":
        return HashedTokenProvider()
    if spec.startswith("lookup:"):
        return LookupProvider.from_file(spec.split(":", 1)[1])
    if spec.startswith("http://") or spec.startswith("https://"):
        return RemoteProvider(spec)
    raise ValueError(f"unrecognized provider spec {spec!r}")


# --- similarity --------------------------------------------------------------


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of unit vectors; zero vectors score 0.0 by convention."""
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector dimensions differ: {u.shape} vs {v.shape}")
    if not u.any() or not v.any():
        return 0.0
    return float(np.dot(u, v))


# --- cache --------------------------------------------------------------------


def _text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """File-backed (fingerprint, text-hash) -> vector map.

    Line-delimited JSON with a header line; appends are flushed per batch so
    partial progress survives a provider outage. A torn final line (crash
    during append) is ignored on load; anything else raises CorruptRecord.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self._entries: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()
        self._fh = None
        if path is not None:
            self._load()
            self._fh = open(path, "a", encoding="utf-8")

    def _load(self) -> None:
        if not os.path.exists(self.path):
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"format": CACHE_FORMAT, "version": CACHE_VERSION}) + "\n")
            return
        size = os.path.getsize(self.path)
        with open(self.path, "r", encoding="utf-8") as fh:
            text = fh.read()
        lines = text.split("\n")
        if not lines or not lines[0]:
            raise FormatVersionMismatch(f"{self.path} has no cache header")
        try:
            header = json.loads(lines[0])
        except ValueError:
            raise FormatVersionMismatch(f"{self.path} has an unreadable cache header") from None
        if header.get("format") != CACHE_FORMAT or header.get("version") != CACHE_VERSION:
            raise FormatVersionMismatch(f"{self.path} is not a v{CACHE_VERSION} {CACHE_FORMAT} file")
        # a file not ending in newline has a torn final line (crash mid-append)
        torn_tail = not text.endswith("\n")
        body = lines[1:]
        if body and body[-1] == "":
            body.pop()
        repaired = False
        for idx, line in enumerate(body):
            if not line:
                continue
            try:
                record = json.loads(line)
                key = (record["fp"], record["th"])
                self._entries[key] = np.asarray(record["v"], dtype=np.float64)
            except (ValueError, KeyError, TypeError):
                if torn_tail and idx == len(body) - 1:
                    with open(self.path, "r+b") as fh2:
                        fh2.truncate(size - len(line.encode("utf-8")))
                    repaired = True
                    break
                raise CorruptRecord("unreadable cache record", line=idx + 2) from None
        if torn_tail and not repaired:
            # final line is complete but lacks its newline; add one so the
            # next append starts on a fresh line
            with open(self.path, "ab") as fh2:
                fh2.write(b"\n")

    def get(self, fingerprint: str, text: str) -> Optional[np.ndarray]:
        return self._entries.get((fingerprint, _text_hash(text)))

    def put(self, fingerprint: str, text: str, vector: np.ndarray) -> None:
        key = (fingerprint, _text_hash(text))
        with self._lock:
            self._entries[key] = vector
            if self._fh is not None:
                record = {"fp": key[0], "th": key[1], "v": [float(x) for x in vector]}
                self._fh.write(json.dumps(record) + "\n")
                self._fh.flush()

    def __len__(self) -> int:
        return len(self._entries)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def cached_vector(provider, cache: Optional[EmbeddingCache], text: str) -> np.ndarray:
    """Vector for one text, through the cache when one is given."""
    if cache is None:
        return provider.embed(text)
    fingerprint = provider.descriptor().fingerprint
    hit = cache.get(fingerprint, text)
    if hit is not None:
        return hit
    vector = provider.embed(text)
    cache.put(fingerprint, text, vector)
    return vector


def ensure_graph_embeddings(graph: Graph, provider, cache: EmbeddingCache, batch_size: int = 64) -> dict:
    """Embed every Cause/Effect/Detection/WarrantyClaim text not yet cached
    under the provider's current fingerprint.

    Returns {"embedded": new, "reused": hits} counted over unique texts.
    Progress is persisted batch by batch, so an interrupted run resumes.
    """
    fingerprint = provider.descriptor().fingerprint
    texts: list[str] = []
    seen: set[str] = set()
    for label in EMBEDDED_LABELS:
        for node in graph.nodes_with_label(label):
            text = node.props.get("text")
            if isinstance(text, str) and text.strip() and text not in seen:
                seen.add(text)
                texts.append(text)
    pending = []
    reused = 0
    for text in texts:
        if cache.get(fingerprint, text) is None:
            pending.append(text)
        else:
            reused += 1
    embedded = 0
    for start in range(0, len(pending), batch_size):
        batch = pending[start : start + batch_size]
        vectors = provider.embed_batch(batch)
        for text, vector in zip(batch, vectors):
            cache.put(fingerprint, text, vector)
            embedded += 1
    return {"embedded": embedded, "reused": reused}
