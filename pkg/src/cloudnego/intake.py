"""Sealed requirement envelopes.

A sender digests its requirements document, encrypts the digest to the
receiving agent's public key and signs ``payload || sealed_digest`` with its
own private key. The agent decrypts the digest with its private key,
recomputes the digest of the payload, and checks the sender signature; the
payload is released only when all three checks pass.

Keys are RSA (2048-bit by default) exchanged as PEM bytes. Sealing uses
OAEP and signatures use PSS, both over SHA-256, independent of the digest
algorithm chosen for the requirements themselves.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from .errors import (
    DecryptionError,
    EnvelopeFormatError,
    IntegrityError,
    InvalidKeyError,
    OriginError,
)

log = logging.getLogger(__name__)

KEY_BITS = 2048


class DigestAlgorithm(str, Enum):
    MD5 = "md5"
    SHA256 = "sha256"

    @property
    def size(self) -> int:
        return 16 if self is DigestAlgorithm.MD5 else 32


DEFAULT_ALGORITHM = DigestAlgorithm.SHA256


class WeakDigestWarning(UserWarning):
    """Emitted whenever MD5 is used for a requirements digest."""


_OAEP = padding.OAEP(mgf=padding.MGF1(hashes.SHA256()), algorithm=hashes.SHA256(), label=None)
_PSS = padding.PSS(mgf=padding.MGF1(hashes.SHA256()), salt_length=padding.PSS.MAX_LENGTH)


def digest(message: bytes, algorithm: DigestAlgorithm | str = DEFAULT_ALGORITHM) -> bytes:
    algorithm = DigestAlgorithm(algorithm)
    if algorithm is DigestAlgorithm.MD5:
        warnings.warn("MD5 requirement digests are not collision resistant", WeakDigestWarning, stacklevel=2)
        log.warning("MD5 digest requested; prefer sha256")
        return hashlib.md5(message).digest()
    return hashlib.sha256(message).digest()


def key_fingerprint(public_pem: bytes) -> str:
    """Short stable identifier for a public key (SHA-256 of its DER form)."""
    key = load_public_key(public_pem)
    der = key.public_bytes(serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo)
    return hashlib.sha256(der).hexdigest()[:32]


@dataclass(frozen=True)
class KeyPair:
    public_part: bytes
    private_part: bytes
    key_id: str

    @classmethod
    def generate(cls, bits: int = KEY_BITS) -> "KeyPair":
        priv = rsa.generate_private_key(public_exponent=65537, key_size=bits)
        private_pem = priv.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        public_pem = priv.public_key().public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
        )
        return cls(public_pem, private_pem, key_fingerprint(public_pem))

    @classmethod
    def from_private_pem(cls, private_pem: bytes) -> "KeyPair":
        priv = load_private_key(private_pem)
        public_pem = priv.public_key().public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
        )
        return cls(public_pem, private_pem, key_fingerprint(public_pem))


def load_public_key(pem: bytes) -> rsa.RSAPublicKey:
    try:
        key = serialization.load_pem_public_key(pem)
    except (ValueError, TypeError) as exc:
        raise InvalidKeyError(f"not a PEM public key: {exc}") from exc
    if not isinstance(key, rsa.RSAPublicKey):
        raise InvalidKeyError("only RSA public keys are supported")
    return key


def load_private_key(pem: bytes) -> rsa.RSAPrivateKey:
    try:
        key = serialization.load_pem_private_key(pem, password=None)
    except (ValueError, TypeError) as exc:
        raise InvalidKeyError(f"not an unencrypted PEM private key: {exc}") from exc
    if not isinstance(key, rsa.RSAPrivateKey):
        raise InvalidKeyError("only RSA private keys are supported")
    return key


@dataclass(frozen=True)
class RequirementEnvelope:
    payload: bytes
    sealed_digest: bytes
    sender_signature: bytes
    digest_algorithm: DigestAlgorithm
    sender_key_id: str
    agent_key_id: str

    def to_dict(self) -> dict[str, Any]:
        # Field order is part of the wire format.
        return {
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "sealed_digest_b64": base64.b64encode(self.sealed_digest).decode("ascii"),
            "sender_signature_b64": base64.b64encode(self.sender_signature).decode("ascii"),
            "digest_algorithm": DigestAlgorithm(self.digest_algorithm).value,
            "sender_key_id": self.sender_key_id,
            "agent_key_id": self.agent_key_id,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RequirementEnvelope":
        try:
            return cls(
                payload=base64.b64decode(doc["payload_b64"], validate=True),
                sealed_digest=base64.b64decode(doc["sealed_digest_b64"], validate=True),
                sender_signature=base64.b64decode(doc["sender_signature_b64"], validate=True),
                digest_algorithm=DigestAlgorithm(doc["digest_algorithm"]),
                sender_key_id=str(doc["sender_key_id"]),
                agent_key_id=str(doc["agent_key_id"]),
            )
        except (KeyError, TypeError, ValueError, binascii.Error) as exc:
            raise EnvelopeFormatError(f"malformed envelope: {exc}") from exc

    @classmethod
    def from_json(cls, text: str | bytes) -> "RequirementEnvelope":
        try:
            doc = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise EnvelopeFormatError(f"envelope is not valid JSON: {exc}") from exc
        if not isinstance(doc, Mapping):
            raise EnvelopeFormatError("envelope must be a JSON object")
        return cls.from_dict(doc)


def seal_requirements(
    payload: bytes,
    agent_public: bytes,
    sender_private: bytes,
    algorithm: DigestAlgorithm | str = DEFAULT_ALGORITHM,
) -> RequirementEnvelope:
    algorithm = DigestAlgorithm(algorithm)
    agent_key = load_public_key(agent_public)
    sender = KeyPair.from_private_pem(sender_private)
    sender_key = load_private_key(sender_private)

    sealed = agent_key.encrypt(digest(payload, algorithm), _OAEP)
    signature = sender_key.sign(payload + sealed, _PSS, hashes.SHA256())
    return RequirementEnvelope(
        payload=bytes(payload),
        sealed_digest=sealed,
        sender_signature=signature,
        digest_algorithm=algorithm,
        sender_key_id=sender.key_id,
        agent_key_id=key_fingerprint(agent_public),
    )


def open_envelope(envelope: RequirementEnvelope, agent_private: bytes, sender_public: bytes) -> bytes:
    """Verify ``envelope`` and return its payload.

    Checks run in order: decrypt the sealed digest (DecryptionError),
    compare it with a fresh digest of the payload (IntegrityError), then
    verify the sender signature (OriginError).
    """
    agent_key = load_private_key(agent_private)
    sender_key = load_public_key(sender_public)
    algorithm = DigestAlgorithm(envelope.digest_algorithm)

    try:
        claimed = agent_key.decrypt(envelope.sealed_digest, _OAEP)
    except ValueError as exc:
        raise DecryptionError("sealed digest cannot be opened with this agent key") from exc

    if len(claimed) != algorithm.size or claimed != digest(envelope.payload, algorithm):
        raise IntegrityError("payload digest does not match the sealed digest")

    if envelope.sender_key_id != key_fingerprint(sender_public):
        raise OriginError("envelope names a different sender key")
    try:
        sender_key.verify(
            envelope.sender_signature, envelope.payload + envelope.sealed_digest, _PSS, hashes.SHA256()
        )
    except InvalidSignature as exc:
        raise OriginError("sender signature does not verify") from exc
    return envelope.payload
