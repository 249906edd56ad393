"""End-to-end negotiation service.

Agents are registered in the store, buyers and sellers submit sealed
requirements addressed to their chosen agents, the agents negotiate, and
each principal pulls a feedback report derived from the stored outcome.

Session objects live under ``sessions/{session_id}/``:

* ``state``      -- JSON document (lifecycle state, profiles, verification records)
* ``transcript`` -- JSON lines, one per proposal plus the outcome line
* ``outcome``    -- JSON outcome document
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import (
    AgentBusy,
    AgentNotFound,
    DecryptionError,
    InvalidTransition,
    NoAgentAvailable,
    NotConcluded,
    OriginError,
    ProfileParseError,
    SessionNotFound,
    VersionConflict,
)
from .intake import (
    DEFAULT_ALGORITHM,
    DigestAlgorithm,
    KeyPair,
    RequirementEnvelope,
    digest,
    key_fingerprint,
    open_envelope,
    seal_requirements,
)
from .model import Offer, PreferenceProfile, Role, profile_from_dict, profile_from_json, profile_to_dict
from .protocol import Outcome, OutcomeReason, SessionConfig, SessionState, run_session
from .store import (
    SESSIONS_BUCKET,
    AgentRecord,
    AgentStatus,
    ObjectKey,
    ObjectStore,
    ProductRecord,
    Registry,
    open_store,
)

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    store_backend: str = "memory"
    store_root: str | None = None
    listen: str = "127.0.0.1:8080"
    agent_pool_cap: int = 16
    digest_algorithm: DigestAlgorithm = DEFAULT_ALGORITHM
    keyring_dir: str | None = None
    agent_template: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        self.digest_algorithm = DigestAlgorithm(self.digest_algorithm)
        if self.agent_pool_cap < 0:
            raise ValueError("agent_pool_cap must be non-negative")

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ServiceConfig":
        store = doc.get("store", {})
        return cls(
            store_backend=store.get("backend", "memory"),
            store_root=store.get("root"),
            listen=doc.get("listen", "127.0.0.1:8080"),
            agent_pool_cap=int(doc.get("agent_pool_cap", 16)),
            digest_algorithm=doc.get("digest_algorithm", DEFAULT_ALGORITHM.value),
            keyring_dir=doc.get("keyring_dir"),
            agent_template=doc.get("agent_template"),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ServiceConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Keyring:
    """Private keys of the agents this service hosts.

    Keys never enter the object store. With a directory they are also
    written as ``{agent_id}.pem`` (mode 0600) so they survive restarts.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self._keys: dict[str, KeyPair] = {}
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
            for pem in sorted(self._dir.glob("*.pem")):
                self._keys[pem.stem] = KeyPair.from_private_pem(pem.read_bytes())

    def add(self, agent_id: str, pair: KeyPair) -> None:
        self._keys[agent_id] = pair
        if self._dir:
            path = self._dir / f"{agent_id}.pem"
            path.write_bytes(pair.private_part)
            path.chmod(0o600)

    def get(self, agent_id: str) -> KeyPair:
        try:
            return self._keys[agent_id]
        except KeyError:
            raise AgentNotFound(f"agent {agent_id!r} is not hosted by this service") from None

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._keys


@dataclass(frozen=True)
class SessionRequest:
    buyer_envelope: RequirementEnvelope
    seller_envelope: RequirementEnvelope
    buyer_agent_id: str
    seller_agent_id: str
    product_id: str | None = None
    first_mover: Role = Role.BUYER

    def envelope(self, role: Role) -> RequirementEnvelope:
        return self.buyer_envelope if role is Role.BUYER else self.seller_envelope

    def agent_id(self, role: Role) -> str:
        return self.buyer_agent_id if role is Role.BUYER else self.seller_agent_id


@dataclass(frozen=True)
class FeedbackReport:
    session_id: str
    recipient: Role
    success: bool
    rounds_used: int
    agreed_offer: Offer | None = None
    own_utility: float | None = None
    failure_reason: OutcomeReason | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "recipient": self.recipient.value,
            "success": self.success,
            "agreed_offer": self.agreed_offer.to_dict() if self.agreed_offer else None,
            "own_utility": self.own_utility,
            "rounds_used": self.rounds_used,
            "failure_reason": self.failure_reason.value if self.failure_reason else None,
        }


def _session_key(session_id: str, name: str) -> ObjectKey:
    return ObjectKey(SESSIONS_BUCKET, f"{session_id}/{name}")


@dataclass
class NegotiationService:
    store: ObjectStore
    config: ServiceConfig = field(default_factory=ServiceConfig)
    keyring: Keyring | None = None
    id_factory: Callable[[], str] = lambda: uuid.uuid4().hex

    def __post_init__(self) -> None:
        self.registry = Registry(self.store)
        if self.keyring is None:
            self.keyring = Keyring(self.config.keyring_dir)
        self._spawn_lock = threading.Lock()

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "NegotiationService":
        store = open_store(config.store_backend, config.store_root)
        return cls(store, config)

    # -- registration ------------------------------------------------------

    def register_agent(
        self,
        name: str,
        experience: int = 0,
        agent_id: str | None = None,
        keypair: KeyPair | None = None,
    ) -> AgentRecord:
        pair = keypair or KeyPair.generate()
        record = AgentRecord(agent_id or f"agent-{self.id_factory()}", name, experience, pair.public_part)
        self.registry.register_agent(record)
        self.keyring.add(record.agent_id, pair)
        log.info("registered agent %s (experience %d)", record.agent_id, experience)
        return record

    def select_agent(
        self, min_experience: int = 0, status: AgentStatus = AgentStatus.AVAILABLE
    ) -> AgentRecord:
        """Registry selection, spawning a template agent when none matches and the pool has room."""
        try:
            return self.registry.select_agent(min_experience, status)
        except NoAgentAvailable:
            template = self.config.agent_template
            if status is not AgentStatus.AVAILABLE or template is None:
                raise
            with self._spawn_lock:
                if len(self.registry.agents()) >= self.config.agent_pool_cap:
                    raise
                experience = int(template.get("experience", 0))
                if experience < min_experience:
                    raise
                name = f"{template.get('name', 'agent')}-{len(self.registry.agents()) + 1}"
                return self.register_agent(name, experience)

    def register_principal(self, public_pem: bytes) -> str:
        """Publish a buyer/seller public key; returns the key id envelopes must carry."""
        key_id = key_fingerprint(public_pem)
        return self.registry.register_principal(key_id, public_pem)

    def add_product(self, record: ProductRecord) -> str:
        return self.registry.put_product(record)

    def get_product(self, product_id: str) -> ProductRecord:
        return self.registry.get_product(product_id)

    def seal_for_agent(self, profile: PreferenceProfile, agent_id: str, sender: KeyPair) -> RequirementEnvelope:
        """Client-side helper: seal ``profile`` to a registered agent with the configured digest."""
        agent = self.registry.get_agent(agent_id)
        payload = json.dumps(profile_to_dict(profile)).encode()
        return seal_requirements(payload, agent.public_key, sender.private_part, self.config.digest_algorithm)

    # -- sessions ----------------------------------------------------------

    def _verify(self, request: SessionRequest, role: Role) -> tuple[PreferenceProfile, dict[str, Any]]:
        agent_id = request.agent_id(role)
        envelope = request.envelope(role)
        pair = self.keyring.get(agent_id)
        if envelope.agent_key_id != pair.key_id:
            raise DecryptionError(f"{role.value} envelope is not addressed to agent {agent_id!r}")
        sender_public = self.registry.principal_public_key(envelope.sender_key_id)
        if sender_public is None:
            raise OriginError(f"{role.value} envelope sender key {envelope.sender_key_id!r} is not registered")
        payload = open_envelope(envelope, pair.private_part, sender_public)
        profile = profile_from_json(payload)
        if profile.role is not role:
            raise ProfileParseError(f"{role.value} envelope carries a {profile.role.value} profile")
        record = {
            "role": role.value,
            "agent_id": agent_id,
            "agent_key_id": envelope.agent_key_id,
            "sender_key_id": envelope.sender_key_id,
            "digest_algorithm": envelope.digest_algorithm.value,
            "digest_hex": digest(payload, envelope.digest_algorithm).hex(),
        }
        return profile, record

    def submit_requirements(self, request: SessionRequest) -> str:
        """Verify both envelopes, reserve both agents and create the session."""
        for role in Role:
            agent = self.registry.get_agent(request.agent_id(role))
            if agent.status is not AgentStatus.AVAILABLE:
                raise AgentBusy(f"agent {agent.agent_id!r} is busy")
        if request.product_id is not None:
            self.registry.get_product(request.product_id)

        buyer_profile, buyer_check = self._verify(request, Role.BUYER)
        seller_profile, seller_check = self._verify(request, Role.SELLER)

        reserved = []
        try:
            for role in Role:
                agent_id = request.agent_id(role)
                self.registry.set_status(agent_id, AgentStatus.AVAILABLE, AgentStatus.BUSY)
                reserved.append(agent_id)
            session_id = self.id_factory()
            state = {
                "session_id": session_id,
                "state": SessionState.CREATED.value,
                "buyer_agent_id": request.buyer_agent_id,
                "seller_agent_id": request.seller_agent_id,
                "product_id": request.product_id,
                "first_mover": Role(request.first_mover).value,
                "buyer_profile": profile_to_dict(buyer_profile),
                "seller_profile": profile_to_dict(seller_profile),
                "verifications": [buyer_check, seller_check],
            }
            self.store.put(_session_key(session_id, "state"), _dump(state), expected_version=0)
        except Exception:
            for agent_id in reserved:
                self.registry.set_status(agent_id, AgentStatus.BUSY, AgentStatus.AVAILABLE)
            raise
        log.info("session %s created for agents %s / %s", session_id, *reserved)
        return session_id

    def _load_state(self, session_id: str) -> tuple[dict[str, Any], int]:
        try:
            hit = self.store.get_versioned(_session_key(session_id, "state"))
        except ValueError:
            hit = None
        if hit is None:
            raise SessionNotFound(f"session {session_id!r} not found")
        return json.loads(hit[0]), hit[1]

    def _transition(self, session_id: str, doc: dict[str, Any], version: int, new: SessionState) -> int:
        doc = dict(doc, state=new.value)
        try:
            return self.store.put(_session_key(session_id, "state"), _dump(doc), expected_version=version)
        except VersionConflict:
            raise InvalidTransition(f"session {session_id!r} changed state concurrently") from None

    def start_session(self, session_id: str) -> Outcome:
        """Run the negotiation to conclusion (blocking) and persist its artifacts."""
        doc, version = self._load_state(session_id)
        if doc["state"] != SessionState.CREATED.value:
            raise InvalidTransition(f"session {session_id!r} is {doc['state']}, not created")
        version = self._transition(session_id, doc, version, SessionState.NEGOTIATING)
        try:
            if len(doc.get("verifications", [])) != 2:
                raise InvalidTransition(f"session {session_id!r} lacks verification records")
            config = SessionConfig(
                buyer_profile=profile_from_dict(doc["buyer_profile"]),
                seller_profile=profile_from_dict(doc["seller_profile"]),
                first_mover=Role(doc["first_mover"]),
            )
            session = run_session(config)
            outcome = session.outcome
            self.store.put(_session_key(session_id, "transcript"), session.transcript_jsonl().encode())
            self.store.put(_session_key(session_id, "outcome"), _dump(outcome.to_dict()))
            self._transition(session_id, doc, version, SessionState.CONCLUDED)
        finally:
            for key in ("buyer_agent_id", "seller_agent_id"):
                try:
                    self.registry.set_status(doc[key], AgentStatus.BUSY, AgentStatus.AVAILABLE)
                except Exception:  # agent already released or removed
                    log.warning("could not release agent %s", doc[key])
        log.info("session %s concluded: %s", session_id, outcome.kind.value)
        return outcome

    def get_status(self, session_id: str) -> SessionState:
        return SessionState(self._load_state(session_id)[0]["state"])

    def get_outcome(self, session_id: str) -> Outcome:
        doc, _ = self._load_state(session_id)
        data = self.store.get(_session_key(session_id, "outcome"))
        if doc["state"] != SessionState.CONCLUDED.value or data is None:
            raise NotConcluded(f"session {session_id!r} has not concluded")
        return Outcome.from_dict(json.loads(data))

    def get_transcript(self, session_id: str) -> str:
        self._load_state(session_id)
        data = self.store.get(_session_key(session_id, "transcript"))
        if data is None:
            raise NotConcluded(f"session {session_id!r} has no transcript yet")
        return data.decode()

    def get_feedback(self, session_id: str, recipient: Role | str) -> FeedbackReport:
        """Recipient-specific report, always rebuilt from the stored outcome."""
        recipient = Role(recipient)
        outcome = self.get_outcome(session_id)
        if outcome.is_agreement:
            return FeedbackReport(
                session_id=session_id,
                recipient=recipient,
                success=True,
                rounds_used=outcome.rounds_used,
                agreed_offer=outcome.agreed_offer,
                own_utility=outcome.utility_for(recipient),
            )
        return FeedbackReport(
            session_id=session_id,
            recipient=recipient,
            success=False,
            rounds_used=outcome.rounds_used,
            failure_reason=outcome.reason,
        )

    def session_profiles(self, session_id: str) -> dict[Role, PreferenceProfile]:
        doc, _ = self._load_state(session_id)
        return {
            Role.BUYER: profile_from_dict(doc["buyer_profile"]),
            Role.SELLER: profile_from_dict(doc["seller_profile"]),
        }


def _dump(doc: Mapping[str, Any]) -> bytes:
    return json.dumps(doc).encode()
