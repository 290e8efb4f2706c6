"""Object store backends: a local directory and a small S3-style HTTP client.

Both backends expose ``put``, ``get`` and ``list`` with identical observable
behavior, so workflow code never needs to know which one it is talking to.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx

from ..errors import InvalidArgument, NotFound, PermissionDenied, TransportError

ENV_ENDPOINT = "SKILLCLOUD_ENDPOINT"
ENV_TOKEN = "SKILLCLOUD_TOKEN"
ENV_LOCAL_DIR = "SKILLCLOUD_LOCAL_DIR"
DEFAULT_BUCKET = "skills"

_BUCKET_RE = re.compile(r"[A-Za-z0-9._-]+")
_KEY_RE = re.compile(r"[A-Za-z0-9._/-]+")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class StoreKey:
    bucket: str
    key: str

    def __post_init__(self) -> None:
        validate_bucket(self.bucket)
        validate_key(self.key)

    def __str__(self) -> str:
        return f"{self.bucket}/{self.key}"


def validate_bucket(bucket: str) -> None:
    if not bucket or not _BUCKET_RE.fullmatch(bucket) or bucket in (".", ".."):
        raise InvalidArgument(f"invalid bucket name {bucket!r}")


def validate_key(key: str) -> None:
    if not key or not _KEY_RE.fullmatch(key):
        raise InvalidArgument(f"invalid key {key!r}: use only [A-Za-z0-9._/-]")
    parts = key.split("/")
    # empty or dot segments would alias other keys on a filesystem
    if any(p in ("", ".", "..") for p in parts):
        raise InvalidArgument(f"invalid key {key!r}: empty or relative path segment")


def validate_prefix(prefix: str) -> None:
    if prefix and not _KEY_RE.fullmatch(prefix):
        raise InvalidArgument(f"invalid prefix {prefix!r}")


class ObjectStore(Protocol):
    def put(self, key: StoreKey, data: bytes) -> str: ...

    def get(self, key: StoreKey) -> bytes: ...

    def list(self, bucket: str, prefix: str = "") -> list[str]: ...


class LocalStore:
    """Objects as files under ``root/bucket/key``; writes are atomic renames."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def _path(self, key: StoreKey) -> Path:
        return self.root / key.bucket / Path(*key.key.split("/"))

    def put(self, key: StoreKey, data: bytes) -> str:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".put-", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return sha256_hex(data)

    def get(self, key: StoreKey) -> bytes:
        path = self._path(key)
        if not path.is_file():
            raise NotFound(f"no object at {key}")
        return path.read_bytes()

    def list(self, bucket: str, prefix: str = "") -> list[str]:
        validate_bucket(bucket)
        validate_prefix(prefix)
        base = self.root / bucket
        if not base.is_dir():
            return []
        keys = []
        for dirpath, _, files in os.walk(base):
            rel = Path(dirpath).relative_to(base)
            for name in files:
                if name.startswith(".put-"):
                    continue
                key = "/".join((*rel.parts, name))
                if key.startswith(prefix):
                    keys.append(key)
        return sorted(keys)


class HttpStore:
    """Client for the ``/v1/{bucket}/{key}`` HTTP subset.

    Transport failures and 5xx answers are retried ``attempts`` times with a
    doubling backoff; GET and PUT are both idempotent so retrying is safe.
    """

    def __init__(self, endpoint: str, token: str | None = None, attempts: int = 3,
                 backoff: float = 0.2, timeout: float = 10.0, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        if attempts < 1:
            raise InvalidArgument("attempts must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.token = token
        self.attempts = attempts
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict[str, str]:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def _request(self, method: str, url: str, **kw) -> httpx.Response:
        delay = self.backoff
        last = "no attempt made"
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self._client.request(method, url, headers=self._headers(), **kw)
            except httpx.TransportError as exc:
                last = f"{method} {url}: {exc.__class__.__name__}: {exc}"
            else:
                if resp.status_code in (401, 403):
                    raise PermissionDenied(f"{method} {url}: HTTP {resp.status_code}")
                if resp.status_code < 500:
                    return resp
                last = f"{method} {url}: HTTP {resp.status_code}"
            if attempt < self.attempts:
                self._sleep(delay)
                delay *= 2
        raise TransportError(last, self.attempts)

    def put(self, key: StoreKey, data: bytes) -> str:
        resp = self._request("PUT", f"{self.endpoint}/v1/{key.bucket}/{key.key}", content=data)
        if resp.status_code not in (200, 201):
            raise TransportError(f"PUT {key}: unexpected HTTP {resp.status_code}", 1)
        digest = sha256_hex(data)
        echoed = resp.headers.get("x-content-sha256")
        if echoed is not None and echoed != digest:
            raise TransportError(f"PUT {key}: server hash {echoed} != {digest}", 1)
        return digest

    def get(self, key: StoreKey) -> bytes:
        resp = self._request("GET", f"{self.endpoint}/v1/{key.bucket}/{key.key}")
        if resp.status_code == 404:
            raise NotFound(f"no object at {key}")
        if resp.status_code != 200:
            raise TransportError(f"GET {key}: unexpected HTTP {resp.status_code}", 1)
        return resp.content

    def list(self, bucket: str, prefix: str = "") -> list[str]:
        validate_bucket(bucket)
        validate_prefix(prefix)
        resp = self._request("GET", f"{self.endpoint}/v1/{bucket}", params={"prefix": prefix})
        if resp.status_code == 404:
            return []
        if resp.status_code != 200:
            raise TransportError(f"LIST {bucket}: unexpected HTTP {resp.status_code}", 1)
        keys = json.loads(resp.content)
        if not isinstance(keys, list) or not all(isinstance(k, str) for k in keys):
            raise TransportError(f"LIST {bucket}: malformed response body", 1)
        return sorted(keys)


def store_from_env(kind: str | None = None, env: dict | None = None) -> LocalStore | HttpStore:
    """Pick a backend: ``SKILLCLOUD_LOCAL_DIR`` wins unless ``kind`` says otherwise."""
    env = os.environ if env is None else env
    if kind not in (None, "local", "http"):
        raise InvalidArgument(f"unknown store kind {kind!r}")
    local = env.get(ENV_LOCAL_DIR)
    endpoint = env.get(ENV_ENDPOINT)
    if kind == "local" or (kind is None and local):
        if not local:
            raise InvalidArgument(f"{ENV_LOCAL_DIR} must be set for the local store")
        return LocalStore(local)
    if not endpoint:
        raise InvalidArgument(f"{ENV_ENDPOINT} must be set for the http store")
    return HttpStore(endpoint, env.get(ENV_TOKEN) or None)
