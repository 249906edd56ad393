"""Additive multi-issue utility model.

An offer is scored by each party as the weighted mean of per-issue
utilities; each per-issue utility is a linear rescaling of the offered
value onto ``[0, 1]`` (rising for benefit issues, falling for cost issues).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    DegenerateWeights,
    InvalidProfile,
    InvalidUtility,
    InvalidValue,
    ProfileMismatch,
    ProfileParseError,
)

MAX_WEIGHT = 9.0


class Orientation(str, Enum):
    BENEFIT = "benefit"
    COST = "cost"


class Role(str, Enum):
    BUYER = "buyer"
    SELLER = "seller"

    @property
    def other(self) -> "Role":
        return Role.SELLER if self is Role.BUYER else Role.BUYER


def _finite(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


@dataclass(frozen=True)
class Issue:
    name: str
    orientation: Orientation
    lower_bound: float
    upper_bound: float

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise InvalidProfile("issue name must be a nonempty string")
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if not (_finite(self.lower_bound) and _finite(self.upper_bound)):
            raise InvalidProfile(f"issue {self.name!r}: bounds must be finite numbers")
        if not self.lower_bound < self.upper_bound:
            raise InvalidProfile(
                f"issue {self.name!r}: lower bound {self.lower_bound} "
                f"must be strictly below upper bound {self.upper_bound}"
            )
        object.__setattr__(self, "lower_bound", float(self.lower_bound))
        object.__setattr__(self, "upper_bound", float(self.upper_bound))

    @property
    def span(self) -> float:
        return self.upper_bound - self.lower_bound

    @property
    def best_value(self) -> float:
        return self.upper_bound if self.orientation is Orientation.BENEFIT else self.lower_bound


@dataclass(frozen=True)
class WeightedIssue:
    issue: Issue
    weight: float

    def __post_init__(self) -> None:
        if not _finite(self.weight) or not 0.0 <= self.weight <= MAX_WEIGHT:
            raise InvalidProfile(
                f"issue {self.issue.name!r}: weight {self.weight!r} outside [0, {MAX_WEIGHT:g}]"
            )
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def name(self) -> str:
        return self.issue.name


@dataclass(frozen=True)
class PreferenceProfile:
    """One party's issues, weights, acceptance band and concession settings.

    ``u_min`` is the hard acceptance floor and ``u_max`` the opening
    aspiration. Issue order is declaration order and is kept stable through
    serialization.
    """

    role: Role
    issues: tuple[WeightedIssue, ...]
    u_min: float
    u_max: float
    concession_beta: float = 1.0
    max_rounds: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "issues", tuple(self.issues))
        if not self.issues:
            raise InvalidProfile("profile needs at least one issue")
        names = [w.name for w in self.issues]
        if len(set(names)) != len(names):
            raise InvalidProfile(f"duplicate issue names in {names}")
        if not (_finite(self.u_min) and _finite(self.u_max)):
            raise InvalidProfile("u_min and u_max must be finite numbers")
        if not 0.0 <= self.u_min <= self.u_max <= 1.0:
            raise InvalidProfile(
                f"need 0 <= u_min <= u_max <= 1, got u_min={self.u_min}, u_max={self.u_max}"
            )
        if not _finite(self.concession_beta) or self.concession_beta <= 0:
            raise InvalidProfile(f"concession_beta must be positive, got {self.concession_beta!r}")
        if (
            isinstance(self.max_rounds, bool)
            or not isinstance(self.max_rounds, int)
            or self.max_rounds < 1
        ):
            raise InvalidProfile(f"max_rounds must be a positive integer, got {self.max_rounds!r}")
        if not sum(w.weight for w in self.issues) > 0:
            raise DegenerateWeights("sum of issue weights must be positive")
        object.__setattr__(self, "u_min", float(self.u_min))
        object.__setattr__(self, "u_max", float(self.u_max))
        object.__setattr__(self, "concession_beta", float(self.concession_beta))

    @property
    def issue_names(self) -> tuple[str, ...]:
        return tuple(w.name for w in self.issues)

    def issue(self, name: str) -> Issue:
        for w in self.issues:
            if w.name == name:
                return w.issue
        raise KeyError(name)

    def with_weights(self, weights: Sequence[float]) -> "PreferenceProfile":
        issues = tuple(WeightedIssue(w.issue, x) for w, x in zip(self.issues, weights, strict=True))
        return PreferenceProfile(
            self.role, issues, self.u_min, self.u_max, self.concession_beta, self.max_rounds
        )


@dataclass(frozen=True)
class Offer:
    values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", {k: float(v) for k, v in dict(self.values).items()})

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_dict(self) -> dict[str, Any]:
        return {"values": dict(self.values)}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Offer":
        try:
            values = doc["values"]
            if not isinstance(values, Mapping):
                raise TypeError("values must be an object")
            return cls({str(k): v for k, v in values.items()})
        except (KeyError, TypeError, ValueError) as exc:
            raise ProfileParseError(f"malformed offer document: {exc}") from exc


def issue_utility(value: float, issue: Issue) -> float:
    """Utility of ``value`` on a single issue, clamped to ``[0, 1]``."""
    if not _finite(value):
        raise InvalidValue(f"issue {issue.name!r}: value {value!r} is not a finite number")
    frac = (value - issue.lower_bound) / (issue.upper_bound - issue.lower_bound)
    frac = min(1.0, max(0.0, frac))
    if issue.orientation is Orientation.BENEFIT:
        return frac
    return 1.0 - frac


def weighted_mean(weights: Iterable[float], utilities: Iterable[float]) -> float:
    num = 0.0
    den = 0.0
    for w, u in zip(weights, utilities, strict=True):
        num += w * u
        den += w
    if not den > 0:
        raise DegenerateWeights("sum of issue weights must be positive")
    return num / den


def offer_utility(offer: Offer, profile: PreferenceProfile) -> float:
    """Weighted mean of per-issue utilities of ``offer`` under ``profile``."""
    values = offer.values
    names = profile.issue_names
    if len(values) != len(names) or any(n not in values for n in names):
        missing = sorted(set(names) - set(values))
        extra = sorted(set(values) - set(names))
        raise ProfileMismatch(f"offer does not match profile issues (missing={missing}, extra={extra})")
    return weighted_mean(
        (w.weight for w in profile.issues),
        (issue_utility(values[w.name], w.issue) for w in profile.issues),
    )


def inverse_issue_value(target_u: float, issue: Issue) -> float:
    """The value in ``[lower, upper]`` whose utility on ``issue`` is ``target_u``."""
    if not _finite(target_u) or not 0.0 <= target_u <= 1.0:
        raise InvalidUtility(f"target utility {target_u!r} outside [0, 1]")
    if issue.orientation is Orientation.BENEFIT:
        v = issue.lower_bound + target_u * issue.span
    else:
        v = issue.upper_bound - target_u * issue.span
    return min(issue.upper_bound, max(issue.lower_bound, v))


# -- profile documents -----------------------------------------------------


def profile_to_dict(profile: PreferenceProfile) -> dict[str, Any]:
    return {
        "role": profile.role.value,
        "issues": [
            {
                "name": w.name,
                "orientation": w.issue.orientation.value,
                "lower": w.issue.lower_bound,
                "upper": w.issue.upper_bound,
                "weight": w.weight,
            }
            for w in profile.issues
        ],
        "u_min": profile.u_min,
        "u_max": profile.u_max,
        "beta": profile.concession_beta,
        "max_rounds": profile.max_rounds,
    }


def profile_from_dict(doc: Mapping[str, Any]) -> PreferenceProfile:
    """Build a profile from its JSON document; any defect raises ProfileParseError."""
    try:
        issues = tuple(
            WeightedIssue(
                Issue(
                    name=item["name"],
                    orientation=Orientation(item["orientation"]),
                    lower_bound=item["lower"],
                    upper_bound=item["upper"],
                ),
                item["weight"],
            )
            for item in doc["issues"]
        )
        return PreferenceProfile(
            role=Role(doc["role"]),
            issues=issues,
            u_min=doc["u_min"],
            u_max=doc["u_max"],
            concession_beta=doc.get("beta", 1.0),
            max_rounds=doc.get("max_rounds", 10),
        )
    except ProfileParseError:
        raise
    except (KeyError, TypeError, ValueError, InvalidProfile) as exc:
        raise ProfileParseError(f"malformed profile document: {exc}") from exc


def profile_to_json(profile: PreferenceProfile) -> str:
    return json.dumps(profile_to_dict(profile))


def profile_from_json(text: str | bytes) -> PreferenceProfile:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProfileParseError(f"profile is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ProfileParseError("profile document must be a JSON object")
    return profile_from_dict(doc)
