"""Entity storage behind one interface: in-process memory or a Redis-protocol server.

Documents are stored as canonical UTF-8 JSON strings under plain keys
"<kind>:<pk>", so any RESP server works and fixtures stay inspectable
with redis-cli. Writes are individually atomic (whole-document replace);
there are no cross-key transactions. Listing is a key-prefix scan plus
client-side exact-match filtering.
"""

from __future__ import annotations

import json
import os
import socket
import threading
from fnmatch import fnmatchcase
from typing import Any, Mapping
from urllib.parse import urlparse

from . import domain

KINDS = ("scenario", "character", "relationship", "episode", "status")

# Top-level fields exact-match filters may target, per kind.
FILTERABLE: dict[str, frozenset[str]] = {
    "character": frozenset({"pk", "name", "gender", "age", "occupation", "pronouns", "decision_style"}),
    "scenario": frozenset({"pk", "context", "location", "time"}),
    "relationship": frozenset({"pk", "char_a", "char_b", "kind"}),
    "episode": frozenset({"pk", "scenario", "tag"}),
    "status": frozenset({"pk", "status"}),
}


class StoreError(RuntimeError):
    pass


class StoreUnavailable(StoreError):
    pass


class UnknownFilterField(StoreError):
    def __init__(self, kind: str, fieldname: str):
        allowed = ", ".join(sorted(FILTERABLE.get(kind, frozenset())))
        super().__init__(f"cannot filter {kind} by {fieldname!r}; allowed: {allowed}")
        self.kind = kind
        self.field = fieldname


class ValidationFailure(StoreError):
    def __init__(self, kind: str, violations: list[domain.Violation]):
        super().__init__(f"invalid {kind}: " + "; ".join(str(v) for v in violations))
        self.violations = violations


class DuplicateKey(StoreError):
    pass


def _validate_doc(kind: str, doc: Mapping[str, Any]) -> list[domain.Violation]:
    if kind == "character":
        return domain.validate_character(domain.CharacterProfile.from_dict(doc))
    if kind == "scenario":
        return domain.validate_scenario(domain.Scenario.from_dict(doc))
    if kind == "relationship":
        return domain.validate_relationship(domain.Relationship.from_dict(doc))
    if kind == "episode":
        violations = []
        if not doc.get("pk"):
            violations.append(domain.Violation("pk", "must be nonempty"))
        if not isinstance(doc.get("transcript", []), list):
            violations.append(domain.Violation("transcript", "must be a list"))
        return violations
    if kind == "status":
        if doc.get("status") not in ("queued", "running", "completed", "failed"):
            return [domain.Violation("status", f"unknown status {doc.get('status')!r}")]
        return []
    return [domain.Violation("kind", f"unknown entity kind {kind!r}")]


def _check_kind(kind: str) -> None:
    if kind not in KINDS:
        raise StoreError(f"unknown entity kind {kind!r}")


class Store:
    """Key-value document store; one document per (kind, pk)."""

    def put(self, kind: str, pk: str, doc: Mapping[str, Any]) -> None:
        _check_kind(kind)
        merged = dict(doc)
        merged["pk"] = pk
        violations = _validate_doc(kind, merged)
        if violations:
            raise ValidationFailure(kind, violations)
        self._write(f"{kind}:{pk}", domain.canonical_json(merged))

    def create(self, kind: str, pk: str, doc: Mapping[str, Any]) -> None:
        """Like put, but refuses to overwrite: pks are unique per kind."""
        if self.get(kind, pk) is not None:
            raise DuplicateKey(f"{kind} {pk!r} already exists")
        self.put(kind, pk, doc)

    def get(self, kind: str, pk: str) -> dict[str, Any] | None:
        _check_kind(kind)
        raw = self._read(f"{kind}:{pk}")
        return None if raw is None else json.loads(raw)

    def delete(self, kind: str, pk: str) -> bool:
        _check_kind(kind)
        return self._delete(f"{kind}:{pk}")

    def list(self, kind: str, filters: Mapping[str, Any] | None = None) -> list[dict[str, Any]]:
        _check_kind(kind)
        filters = dict(filters or {})
        allowed = FILTERABLE[kind]
        for name in filters:
            if name not in allowed:
                raise UnknownFilterField(kind, name)
        docs = []
        for raw in self._scan(f"{kind}:*"):
            doc = json.loads(raw)
            if all(str(doc.get(name)) == str(value) for name, value in filters.items()):
                docs.append(doc)
        docs.sort(key=lambda d: str(d.get("pk", "")))
        return docs

    def close(self) -> None:
        pass

    # backend primitives -----------------------------------------------------
    def _write(self, key: str, value: str) -> None:
        raise NotImplementedError

    def _read(self, key: str) -> str | None:
        raise NotImplementedError

    def _delete(self, key: str) -> bool:
        raise NotImplementedError

    def _scan(self, pattern: str) -> list[str]:
        raise NotImplementedError


class MemoryStore(Store):
    """Default backend for tests and single-process runs."""

    def __init__(self) -> None:
        self._data: dict[str, str] = {}
        self._lock = threading.RLock()

    def _write(self, key: str, value: str) -> None:
        with self._lock:
            self._data[key] = value

    def _read(self, key: str) -> str | None:
        with self._lock:
            return self._data.get(key)

    def _delete(self, key: str) -> bool:
        with self._lock:
            return self._data.pop(key, None) is not None

    def _scan(self, pattern: str) -> list[str]:
        with self._lock:
            return [value for key, value in self._data.items() if fnmatchcase(key, pattern)]


class RespError(StoreError):
    pass


class RespClient:
    """Tiny synchronous RESP2 client: just what the store needs."""

    def __init__(self, host: str, port: int, db: int = 0, timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise StoreUnavailable(f"cannot reach store at {host}:{port}: {exc}") from exc
        self._buffer = b""
        self._lock = threading.Lock()
        if db:
            self.command("SELECT", str(db))

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def command(self, *args: str) -> Any:
        payload = bytearray(f"*{len(args)}\r\n".encode())
        for arg in args:
            data = arg.encode("utf-8")
            payload += f"${len(data)}\r\n".encode() + data + b"\r\n"
        with self._lock:
            try:
                self._sock.sendall(payload)
                return self._read_reply()
            except OSError as exc:
                raise StoreUnavailable(f"store connection failed: {exc}") from exc

    def _read_line(self) -> bytes:
        while b"\r\n" not in self._buffer:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise StoreUnavailable("store connection closed")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\r\n", 1)
        return line

    def _read_exact(self, n: int) -> bytes:
        while len(self._buffer) < n + 2:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise StoreUnavailable("store connection closed")
            self._buffer += chunk
        data, self._buffer = self._buffer[:n], self._buffer[n + 2 :]
        return data

    def _read_reply(self) -> Any:
        line = self._read_line()
        marker, rest = line[:1], line[1:]
        if marker == b"+":
            return rest.decode("utf-8")
        if marker == b"-":
            raise RespError(rest.decode("utf-8"))
        if marker == b":":
            return int(rest)
        if marker == b"$":
            length = int(rest)
            if length == -1:
                return None
            return self._read_exact(length).decode("utf-8")
        if marker == b"*":
            count = int(rest)
            if count == -1:
                return None
            return [self._read_reply() for _ in range(count)]
        raise RespError(f"unexpected reply marker {marker!r}")


class RedisStore(Store):
    """Store backed by any RESP server; keys are "<kind>:<pk>" verbatim."""

    def __init__(self, host: str, port: int, db: int = 0, timeout: float = 5.0):
        self._client = RespClient(host, port, db=db, timeout=timeout)
        try:
            self._client.command("PING")
        except RespError as exc:
            raise StoreUnavailable(f"store did not answer PING: {exc}") from exc

    def close(self) -> None:
        self._client.close()

    def _write(self, key: str, value: str) -> None:
        self._client.command("SET", key, value)

    def _read(self, key: str) -> str | None:
        return self._client.command("GET", key)

    def _delete(self, key: str) -> bool:
        return int(self._client.command("DEL", key)) > 0

    def _scan(self, pattern: str) -> list[str]:
        keys: list[str] = []
        cursor = "0"
        while True:
            reply = self._client.command("SCAN", cursor, "MATCH", pattern, "COUNT", "512")
            cursor = str(reply[0])
            keys.extend(reply[1])
            if cursor == "0":
                break
        values = []
        for key in keys:
            value = self._client.command("GET", key)
            if value is not None:
                values.append(value)
        return values


# Named in-process stores, so separate CLI invocations inside one process
# (tests, notebooks) can share state. Memory stores never cross processes.
_MEMORY_REGISTRY: dict[str, MemoryStore] = {}
_REGISTRY_LOCK = threading.Lock()


def open_store(url: str | None = None) -> Store:
    """Open a store from a URL: memory:// (optionally named) or redis://host:port/db.

    Falls back to the STORE_URL environment variable, then to a fresh
    in-memory store.
    """
    url = url or os.environ.get("STORE_URL") or "memory://"
    parsed = urlparse(url)
    if parsed.scheme in ("", "memory"):
        name = parsed.netloc or parsed.path.strip("/")
        if not name:
            return MemoryStore()
        with _REGISTRY_LOCK:
            if name not in _MEMORY_REGISTRY:
                _MEMORY_REGISTRY[name] = MemoryStore()
            return _MEMORY_REGISTRY[name]
    if parsed.scheme == "redis":
        db = int(parsed.path.strip("/") or 0)
        return RedisStore(parsed.hostname or "127.0.0.1", parsed.port or 6379, db=db)
    raise StoreError(f"unsupported store URL {url!r}")
