"""Agent-mediated bilateral multi-issue negotiation over an object store."""

from .model import (
    Issue,
    Offer,
    Orientation,
    PreferenceProfile,
    Role,
    WeightedIssue,
    inverse_issue_value,
    issue_utility,
    offer_utility,
)
from .protocol import (
    Decision,
    NegotiationSession,
    Outcome,
    OutcomeKind,
    OutcomeReason,
    SessionConfig,
    SessionState,
    accept_decision,
    propose,
    run_session,
    target_utility,
)

__all__ = [
    "Decision",
    "Issue",
    "NegotiationSession",
    "Offer",
    "Orientation",
    "Outcome",
    "OutcomeKind",
    "OutcomeReason",
    "PreferenceProfile",
    "Role",
    "SessionConfig",
    "SessionState",
    "WeightedIssue",
    "accept_decision",
    "inverse_issue_value",
    "issue_utility",
    "offer_utility",
    "propose",
    "run_session",
    "target_utility",
]
