"""S3-style object store plus the agent/product registry kept inside it.

Two interchangeable backends implement :class:`ObjectStore`: an in-memory
dict for tests and a directory tree for persistence. Every object carries a
per-key integer version token that only ever grows, which also backs the
optimistic check-and-set used for agent status changes.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping

from .errors import (
    AgentBusy,
    AgentNotFound,
    AlreadyExists,
    InvalidObjectKey,
    NoAgentAvailable,
    ObjectTooLarge,
    ProductNotFound,
    StoreError,
    VersionConflict,
)

DEFAULT_SIZE_LIMIT = 64 * 1024 * 1024

REGISTRY_BUCKET = "registry"
CATALOG_BUCKET = "catalog"
SESSIONS_BUCKET = "sessions"

_BUCKET_RE = re.compile(r"[a-z0-9][a-z0-9._-]{0,62}\Z")
_IDENT_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]{0,127}\Z")


def check_identifier(value: str, what: str = "identifier") -> str:
    if not isinstance(value, str) or not _IDENT_RE.match(value):
        raise InvalidObjectKey(f"invalid {what} {value!r}")
    return value


@dataclass(frozen=True, order=True)
class ObjectKey:
    bucket: str
    key: str

    def __post_init__(self) -> None:
        if not isinstance(self.bucket, str) or not _BUCKET_RE.match(self.bucket):
            raise InvalidObjectKey(f"invalid bucket name {self.bucket!r}")
        if not isinstance(self.key, str) or not self.key or len(self.key) > 1024:
            raise InvalidObjectKey(f"invalid object key {self.key!r}")
        for seg in self.key.split("/"):
            if seg in ("", ".", "..") or "\\" in seg or "\x00" in seg:
                raise InvalidObjectKey(f"invalid segment {seg!r} in object key {self.key!r}")

    def __str__(self) -> str:
        return f"{self.bucket}/{self.key}"


class ObjectStore(ABC):
    """put/get/delete/list over ``(bucket, key)`` with per-key version tokens.

    ``get`` returns ``None`` and ``delete`` returns ``False`` for missing
    keys; absence is an ordinary answer, not an exception.
    """

    def __init__(self, size_limit: int = DEFAULT_SIZE_LIMIT):
        self.size_limit = size_limit
        self._lock = threading.RLock()

    def put(self, key: ObjectKey, value: bytes, *, expected_version: int | None = None) -> int:
        """Store ``value`` and return its new version token.

        With ``expected_version`` the write only happens if the current
        version matches (``0`` meaning "must not exist"); otherwise
        VersionConflict is raised.
        """
        value = bytes(value)
        if len(value) > self.size_limit:
            raise ObjectTooLarge(f"{key}: {len(value)} bytes exceeds limit of {self.size_limit}")
        with self._lock:
            if expected_version is not None:
                current = self._current_version(key)
                if current != expected_version:
                    raise VersionConflict(f"{key}: expected version {expected_version}, found {current}")
            version = self._next_version(key)
            self._write(key, value, version)
            return version

    def get(self, key: ObjectKey) -> bytes | None:
        hit = self.get_versioned(key)
        return None if hit is None else hit[0]

    def get_versioned(self, key: ObjectKey) -> tuple[bytes, int] | None:
        with self._lock:
            return self._read(key)

    def delete(self, key: ObjectKey) -> bool:
        with self._lock:
            return self._remove(key)

    def list(self, bucket: str, prefix: str = "") -> list[str]:
        """Keys in ``bucket`` starting with ``prefix``, lexicographically ordered."""
        ObjectKey(bucket, "probe")
        with self._lock:
            return sorted(k for k in self._keys(bucket) if k.startswith(prefix))

    def _current_version(self, key: ObjectKey) -> int:
        hit = self._read(key)
        return 0 if hit is None else hit[1]

    @abstractmethod
    def _next_version(self, key: ObjectKey) -> int: ...

    @abstractmethod
    def _write(self, key: ObjectKey, value: bytes, version: int) -> None: ...

    @abstractmethod
    def _read(self, key: ObjectKey) -> tuple[bytes, int] | None: ...

    @abstractmethod
    def _remove(self, key: ObjectKey) -> bool: ...

    @abstractmethod
    def _keys(self, bucket: str) -> Iterator[str]: ...


class MemoryStore(ObjectStore):
    def __init__(self, size_limit: int = DEFAULT_SIZE_LIMIT):
        super().__init__(size_limit)
        self._objects: dict[ObjectKey, tuple[bytes, int]] = {}
        self._counters: dict[ObjectKey, int] = {}

    def _next_version(self, key):
        self._counters[key] = self._counters.get(key, 0) + 1
        return self._counters[key]

    def _write(self, key, value, version):
        self._objects[key] = (value, version)

    def _read(self, key):
        return self._objects.get(key)

    def _remove(self, key):
        return self._objects.pop(key, None) is not None

    def _keys(self, bucket):
        return (k.key for k in self._objects if k.bucket == bucket)


class FileStore(ObjectStore):
    """One file per object at ``{root}/{bucket}/{key}``.

    Version counters live in sidecar JSON files under ``{root}/.meta`` and
    survive deletes, so tokens stay fresh across a delete/put cycle and
    across process restarts.
    """

    META_DIR = ".meta"
    TMP_DIR = ".tmp"

    def __init__(self, root: str | os.PathLike, size_limit: int = DEFAULT_SIZE_LIMIT):
        super().__init__(size_limit)
        self.root = Path(root)
        (self.root / self.TMP_DIR).mkdir(parents=True, exist_ok=True)

    def _object_path(self, key: ObjectKey) -> Path:
        return self.root / key.bucket / key.key

    def _meta_path(self, key: ObjectKey) -> Path:
        return self.root / self.META_DIR / key.bucket / (key.key + ".json")

    def _atomic_write(self, path: Path, data: bytes) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.root / self.TMP_DIR)
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except (NotADirectoryError, IsADirectoryError, FileExistsError) as exc:
            raise InvalidObjectKey(f"key collides with an existing object path: {path}") from exc

    def _counter(self, key: ObjectKey) -> int:
        try:
            return int(json.loads(self._meta_path(key).read_text())["version"])
        except FileNotFoundError:
            return 0
        except (ValueError, KeyError) as exc:
            raise StoreError(f"corrupt version metadata for {key}") from exc

    def _next_version(self, key):
        version = self._counter(key) + 1
        self._atomic_write(self._meta_path(key), json.dumps({"version": version}).encode())
        return version

    def _write(self, key, value, version):
        self._atomic_write(self._object_path(key), value)

    def _read(self, key):
        path = self._object_path(key)
        if not path.is_file():
            return None
        return path.read_bytes(), self._counter(key)

    def _remove(self, key):
        path = self._object_path(key)
        if not path.is_file():
            return False
        path.unlink()
        return True

    def _keys(self, bucket):
        base = self.root / bucket
        if not base.is_dir():
            return
        for dirpath, _, files in os.walk(base):
            rel = Path(dirpath).relative_to(base)
            for name in files:
                yield (rel / name).as_posix() if rel.parts else name


def open_store(backend: str, root: str | os.PathLike | None = None, **kwargs: Any) -> ObjectStore:
    if backend == "memory":
        return MemoryStore(**kwargs)
    if backend == "filesystem":
        if root is None:
            raise ValueError("filesystem backend needs a root directory")
        return FileStore(root, **kwargs)
    raise ValueError(f"unknown store backend {backend!r}")


# -- registry records ------------------------------------------------------


class AgentStatus(str, Enum):
    AVAILABLE = "available"
    BUSY = "busy"


@dataclass(frozen=True)
class AgentRecord:
    agent_id: str
    name: str
    experience: int
    public_key: bytes
    status: AgentStatus = AgentStatus.AVAILABLE

    def __post_init__(self) -> None:
        check_identifier(self.agent_id, "agent_id")
        if isinstance(self.experience, bool) or not isinstance(self.experience, int) or self.experience < 0:
            raise ValueError(f"experience must be a non-negative integer, got {self.experience!r}")
        object.__setattr__(self, "status", AgentStatus(self.status))

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "name": self.name,
            "experience": self.experience,
            "public_key": self.public_key.decode("ascii"),
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "AgentRecord":
        return cls(
            agent_id=doc["agent_id"],
            name=doc["name"],
            experience=doc["experience"],
            public_key=doc["public_key"].encode("ascii"),
            status=AgentStatus(doc.get("status", "available")),
        )


@dataclass(frozen=True)
class ProductRecord:
    product_id: str
    company: str
    price_floor: float
    price_ceiling: float
    features: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        check_identifier(self.product_id, "product_id")
        if not 0 <= self.price_floor <= self.price_ceiling:
            raise ValueError(
                f"need 0 <= price_floor <= price_ceiling, got {self.price_floor}, {self.price_ceiling}"
            )
        object.__setattr__(self, "features", {str(k): str(v) for k, v in dict(self.features).items()})

    def to_dict(self) -> dict[str, Any]:
        return {
            "product_id": self.product_id,
            "company": self.company,
            "price_floor": self.price_floor,
            "price_ceiling": self.price_ceiling,
            "features": dict(self.features),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ProductRecord":
        return cls(
            product_id=doc["product_id"],
            company=doc["company"],
            price_floor=doc["price_floor"],
            price_ceiling=doc["price_ceiling"],
            features=doc.get("features", {}),
        )


def _dump(doc: Mapping[str, Any]) -> bytes:
    return json.dumps(doc).encode()


class Registry:
    """Agent, principal-key and product records kept in an object store.

    Layout: ``registry/agents/{id}``, ``registry/principals/{key_id}`` and
    ``catalog/products/{id}``.
    """

    def __init__(self, store: ObjectStore):
        self.store = store

    @staticmethod
    def agent_key(agent_id: str) -> ObjectKey:
        return ObjectKey(REGISTRY_BUCKET, f"agents/{check_identifier(agent_id, 'agent_id')}")

    @staticmethod
    def product_key(product_id: str) -> ObjectKey:
        return ObjectKey(CATALOG_BUCKET, f"products/{check_identifier(product_id, 'product_id')}")

    @staticmethod
    def principal_key(key_id: str) -> ObjectKey:
        return ObjectKey(REGISTRY_BUCKET, f"principals/{check_identifier(key_id, 'key_id')}")

    # agents

    def register_agent(self, record: AgentRecord) -> str:
        try:
            self.store.put(self.agent_key(record.agent_id), _dump(record.to_dict()), expected_version=0)
        except VersionConflict:
            raise AlreadyExists(f"agent {record.agent_id!r} is already registered") from None
        return record.agent_id

    def _agent_versioned(self, agent_id: str) -> tuple[AgentRecord, int]:
        hit = self.store.get_versioned(self.agent_key(agent_id))
        if hit is None:
            raise AgentNotFound(f"agent {agent_id!r} is not registered")
        return AgentRecord.from_dict(json.loads(hit[0])), hit[1]

    def get_agent(self, agent_id: str) -> AgentRecord:
        return self._agent_versioned(agent_id)[0]

    def agents(self) -> list[AgentRecord]:
        out = []
        for key in self.store.list(REGISTRY_BUCKET, "agents/"):
            data = self.store.get(ObjectKey(REGISTRY_BUCKET, key))
            if data is not None:
                out.append(AgentRecord.from_dict(json.loads(data)))
        return out

    def select_agent(
        self, min_experience: int = 0, status: AgentStatus = AgentStatus.AVAILABLE
    ) -> AgentRecord:
        """Most experienced matching agent; ties go to the smallest agent_id."""
        status = AgentStatus(status)
        matches = [a for a in self.agents() if a.status is status and a.experience >= min_experience]
        if not matches:
            raise NoAgentAvailable(f"no {status.value} agent with experience >= {min_experience}")
        return min(matches, key=lambda a: (-a.experience, a.agent_id))

    def set_status(self, agent_id: str, expected: AgentStatus, new: AgentStatus) -> AgentRecord:
        """Atomically move an agent from ``expected`` to ``new`` status."""
        record, version = self._agent_versioned(agent_id)
        if record.status is not expected:
            raise AgentBusy(f"agent {agent_id!r} is {record.status.value}, expected {expected.value}")
        updated = replace(record, status=new)
        try:
            self.store.put(self.agent_key(agent_id), _dump(updated.to_dict()), expected_version=version)
        except VersionConflict:
            raise AgentBusy(f"agent {agent_id!r} changed concurrently") from None
        return updated

    # principals (buyers and sellers who sign envelopes)

    def register_principal(self, key_id: str, public_pem: bytes) -> str:
        self.store.put(self.principal_key(key_id), public_pem)
        return key_id

    def principal_public_key(self, key_id: str) -> bytes | None:
        return self.store.get(self.principal_key(key_id))

    # products

    def put_product(self, record: ProductRecord) -> str:
        self.store.put(self.product_key(record.product_id), _dump(record.to_dict()))
        return record.product_id

    def get_product(self, product_id: str) -> ProductRecord:
        data = self.store.get(self.product_key(product_id))
        if data is None:
            raise ProductNotFound(f"product {product_id!r} not found")
        return ProductRecord.from_dict(json.loads(data))
