"""Bilateral alternating-offers protocol with time-dependent concession.

Each party keeps its own round counter (one round = one proposal by that
party). At its round ``r`` a party proposes the iso-utility offer whose
every per-issue utility equals its concession target ``T(r)``; the
responder accepts when the incoming offer is at least as good as its own
next planned offer and clears its hard floor ``u_min``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .errors import ProtocolError, RoundOutOfRange, TurnViolation
from .model import (
    Offer,
    PreferenceProfile,
    Role,
    inverse_issue_value,
    offer_utility,
)

SEED_LIMIT = 2**64

# Nudge budget when rounding drops an offer a hair under the proposer's floor.
_MAX_NUDGES = 64


class SessionState(str, Enum):
    CREATED = "created"
    NEGOTIATING = "negotiating"
    CONCLUDED = "concluded"


class Decision(str, Enum):
    ACCEPT = "accept"
    COUNTER = "counter"
    ABORT = "abort"


class OutcomeKind(str, Enum):
    AGREEMENT = "agreement"
    FAILURE = "failure"


class OutcomeReason(str, Enum):
    ACCEPTED = "accepted"
    ROUND_LIMIT = "round_limit"
    INVALID_INPUT = "invalid_input"


@dataclass(frozen=True)
class SessionConfig:
    buyer_profile: PreferenceProfile
    seller_profile: PreferenceProfile
    shared_issues: tuple[str, ...] = ()
    first_mover: Role = Role.BUYER
    rng_seed: int = 0

    def __post_init__(self) -> None:
        shared = tuple(self.shared_issues) or self.buyer_profile.issue_names
        object.__setattr__(self, "shared_issues", shared)
        object.__setattr__(self, "first_mover", Role(self.first_mover))

    def profile(self, role: Role) -> PreferenceProfile:
        return self.buyer_profile if role is Role.BUYER else self.seller_profile

    def problems(self) -> list[str]:
        """Reasons this configuration cannot be negotiated (empty when valid)."""
        out = []
        if self.buyer_profile.role is not Role.BUYER:
            out.append("buyer_profile does not carry the buyer role")
        if self.seller_profile.role is not Role.SELLER:
            out.append("seller_profile does not carry the seller role")
        shared = set(self.shared_issues)
        if len(shared) != len(self.shared_issues):
            out.append("shared_issues contains duplicates")
        for who, prof in (("buyer", self.buyer_profile), ("seller", self.seller_profile)):
            if set(prof.issue_names) != shared:
                out.append(f"{who} issues {sorted(prof.issue_names)} differ from shared {sorted(shared)}")
        if not isinstance(self.rng_seed, int) or not 0 <= self.rng_seed < SEED_LIMIT:
            out.append("rng_seed must be an unsigned 64-bit integer")
        return out


@dataclass(frozen=True)
class TranscriptEntry:
    round: int
    proposer: Role
    offer: Offer
    proposer_utility: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "proposer": self.proposer.value,
            "offer": self.offer.to_dict(),
            "proposer_utility": self.proposer_utility,
        }


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    rounds_used: int
    reason: OutcomeReason
    agreed_offer: Offer | None = None
    buyer_utility: float | None = None
    seller_utility: float | None = None

    @property
    def is_agreement(self) -> bool:
        return self.kind is OutcomeKind.AGREEMENT

    def utility_for(self, role: Role) -> float | None:
        return self.buyer_utility if role is Role.BUYER else self.seller_utility

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"outcome": self.kind.value}
        if self.agreed_offer is not None:
            doc["agreed_offer"] = self.agreed_offer.to_dict()
        if self.buyer_utility is not None:
            doc["buyer_utility"] = self.buyer_utility
        if self.seller_utility is not None:
            doc["seller_utility"] = self.seller_utility
        doc["rounds_used"] = self.rounds_used
        doc["reason"] = self.reason.value
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Outcome":
        offer = doc.get("agreed_offer")
        return cls(
            kind=OutcomeKind(doc["outcome"]),
            rounds_used=int(doc["rounds_used"]),
            reason=OutcomeReason(doc["reason"]),
            agreed_offer=Offer.from_dict(offer) if offer is not None else None,
            buyer_utility=doc.get("buyer_utility"),
            seller_utility=doc.get("seller_utility"),
        )


@dataclass
class NegotiationSession:
    config: SessionConfig
    state: SessionState = SessionState.CREATED
    round: int = 0
    transcript: list[TranscriptEntry] = field(default_factory=list)
    outcome: Outcome | None = None

    def begin(self) -> None:
        if self.state is not SessionState.CREATED:
            raise ProtocolError(f"cannot begin a session in state {self.state.value}")
        self.state = SessionState.NEGOTIATING

    def next_proposer(self) -> Role:
        if not self.transcript:
            return self.config.first_mover
        return self.transcript[-1].proposer.other

    def rounds_made(self, role: Role) -> int:
        return sum(1 for e in self.transcript if e.proposer is role)

    def record(self, proposer: Role, offer: Offer) -> TranscriptEntry:
        if self.state is not SessionState.NEGOTIATING:
            raise ProtocolError(f"cannot record offers in state {self.state.value}")
        if proposer is not self.next_proposer():
            raise TurnViolation(f"it is not {proposer.value}'s turn")
        entry = TranscriptEntry(
            round=self.rounds_made(proposer),
            proposer=proposer,
            offer=offer,
            proposer_utility=offer_utility(offer, self.config.profile(proposer)),
        )
        self.transcript.append(entry)
        self.round += 1
        return entry

    def conclude(self, outcome: Outcome) -> None:
        if self.state is SessionState.CONCLUDED:
            raise ProtocolError("session already concluded")
        self.outcome = outcome
        self.state = SessionState.CONCLUDED

    def transcript_jsonl(self) -> str:
        """One JSON line per proposal, then the outcome line once concluded."""
        lines = [json.dumps(e.to_dict()) for e in self.transcript]
        if self.outcome is not None:
            lines.append(json.dumps(self.outcome.to_dict()))
        return "".join(line + "\n" for line in lines)


def target_utility(round: int, profile: PreferenceProfile) -> float:
    """Concession target: ``u_max - (u_max - u_min) * (round / max_rounds) ** (1 / beta)``."""
    R = profile.max_rounds
    if isinstance(round, bool) or not isinstance(round, int) or not 0 <= round <= R:
        raise RoundOutOfRange(f"round {round!r} outside [0, {R}]")
    if round == 0:
        return profile.u_max
    if round == R:
        return profile.u_min
    t = profile.u_max - (profile.u_max - profile.u_min) * (round / R) ** (1.0 / profile.concession_beta)
    return min(profile.u_max, max(profile.u_min, t))


def _iso_utility_offer(target: float, profile: PreferenceProfile, names: tuple[str, ...]) -> Offer:
    offer = Offer({name: inverse_issue_value(target, profile.issue(name)) for name in names})
    # Rounding may leave a floor-level offer a few ulps under u_min; step toward best values.
    for _ in range(_MAX_NUDGES):
        if offer_utility(offer, profile) >= profile.u_min:
            break
        offer = Offer({n: math.nextafter(v, profile.issue(n).best_value) for n, v in offer.values.items()})
    return offer


def propose(session: NegotiationSession, proposer: Role) -> Offer:
    """The proposer's iso-utility offer for its current round.

    Pure: the session is not modified; use ``session.record`` to log it.
    """
    proposer = Role(proposer)
    if session.state is not SessionState.NEGOTIATING:
        raise ProtocolError(f"cannot propose in state {session.state.value}")
    if proposer is not session.next_proposer():
        raise TurnViolation(f"it is not {proposer.value}'s turn")
    profile = session.config.profile(proposer)
    target = target_utility(session.rounds_made(proposer), profile)
    return _iso_utility_offer(target, profile, session.config.shared_issues)


def accept_decision(incoming: Offer, session: NegotiationSession, responder: Role) -> Decision:
    responder = Role(responder)
    profile = session.config.profile(responder)
    u = offer_utility(incoming, profile)
    nxt = session.rounds_made(responder)
    if nxt > profile.max_rounds:
        return Decision.ACCEPT if u >= profile.u_min else Decision.ABORT
    if u >= max(profile.u_min, target_utility(nxt, profile)):
        return Decision.ACCEPT
    return Decision.COUNTER


def run_session(config: SessionConfig) -> NegotiationSession:
    """Negotiate ``config`` to conclusion and return the concluded session."""
    session = NegotiationSession(config)
    if config.problems():
        session.conclude(Outcome(OutcomeKind.FAILURE, 0, OutcomeReason.INVALID_INPUT))
        return session

    session.begin()
    proposer = config.first_mover
    offer = propose(session, proposer)
    session.record(proposer, offer)
    while True:
        responder = proposer.other
        decision = accept_decision(offer, session, responder)
        if decision is Decision.ACCEPT:
            session.conclude(
                Outcome(
                    OutcomeKind.AGREEMENT,
                    rounds_used=len(session.transcript),
                    reason=OutcomeReason.ACCEPTED,
                    agreed_offer=offer,
                    buyer_utility=offer_utility(offer, config.buyer_profile),
                    seller_utility=offer_utility(offer, config.seller_profile),
                )
            )
            return session
        if decision is Decision.ABORT:
            session.conclude(
                Outcome(OutcomeKind.FAILURE, len(session.transcript), OutcomeReason.ROUND_LIMIT)
            )
            return session
        proposer = responder
        offer = propose(session, proposer)
        session.record(proposer, offer)
