"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class NegotiationError(Exception):
    """Base class; ``code`` is the stable identifier used in API error bodies."""

    code = "negotiation_error"


# -- utility model ---------------------------------------------------------


class InvalidValue(NegotiationError, ValueError):
    code = "invalid_value"


class InvalidUtility(NegotiationError, ValueError):
    code = "invalid_utility"


class InvalidProfile(NegotiationError, ValueError):
    code = "invalid_profile"


class ProfileMismatch(NegotiationError, ValueError):
    code = "profile_mismatch"


class DegenerateWeights(InvalidProfile):
    code = "degenerate_weights"


class ProfileParseError(InvalidProfile):
    code = "profile_parse_error"


# -- protocol --------------------------------------------------------------


class ProtocolError(NegotiationError):
    code = "protocol_error"


class RoundOutOfRange(ProtocolError, ValueError):
    code = "round_out_of_range"


class TurnViolation(ProtocolError):
    code = "turn_violation"


# -- envelopes -------------------------------------------------------------


class EnvelopeError(NegotiationError):
    code = "envelope_error"


class IntegrityError(EnvelopeError):
    code = "integrity_error"


class OriginError(EnvelopeError):
    code = "origin_error"


class DecryptionError(EnvelopeError):
    code = "decryption_error"


class InvalidKeyError(EnvelopeError, ValueError):
    code = "invalid_key"


class EnvelopeFormatError(EnvelopeError, ValueError):
    code = "envelope_format_error"


# -- store and registry ----------------------------------------------------


class StoreError(NegotiationError):
    code = "store_error"


class InvalidObjectKey(StoreError, ValueError):
    code = "invalid_object_key"


class ObjectTooLarge(StoreError):
    code = "object_too_large"


class VersionConflict(StoreError):
    code = "version_conflict"


class AlreadyExists(StoreError):
    code = "already_exists"


class NoAgentAvailable(StoreError):
    code = "no_agent_available"


class AgentNotFound(StoreError):
    code = "agent_not_found"


class ProductNotFound(StoreError):
    code = "product_not_found"


# -- service ---------------------------------------------------------------


class ServiceError(NegotiationError):
    code = "service_error"


class AgentBusy(ServiceError):
    code = "agent_busy"


class SessionNotFound(ServiceError):
    code = "session_not_found"


class InvalidTransition(ServiceError):
    code = "invalid_transition"


class NotConcluded(ServiceError):
    code = "not_concluded"


# -- simulation ------------------------------------------------------------


class GridTooLarge(NegotiationError, ValueError):
    code = "grid_too_large"
