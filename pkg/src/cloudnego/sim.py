"""Batch simulation and scoring against a brute-force Pareto frontier."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import GridTooLarge, ProfileMismatch, ProfileParseError
from .model import (
    Issue,
    Orientation,
    PreferenceProfile,
    Role,
    WeightedIssue,
    issue_utility,
    profile_from_dict,
    profile_to_dict,
)
from .protocol import NegotiationSession, SessionConfig, run_session

MAX_GRID_ISSUES = 4
MAX_GRID_POINTS = 21
ISSUE_NAMES = ("price", "volume", "duration", "quality")

FAILURE_DISTANCE_RULE = "failed replications score the distance from (0, 0) to the frontier"


@dataclass(frozen=True)
class Scenario:
    name: str
    buyer_profile: PreferenceProfile
    seller_profile: PreferenceProfile
    replications: int = 1
    seed: int = 0
    # None alternates the first mover across replications, starting with the buyer.
    first_mover: Role | None = None

    def __post_init__(self) -> None:
        if isinstance(self.replications, bool) or not isinstance(self.replications, int) or self.replications < 1:
            raise ValueError(f"replications must be a positive integer, got {self.replications!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.first_mover is not None:
            object.__setattr__(self, "first_mover", Role(self.first_mover))

    def to_dict(self) -> dict[str, Any]:
        doc = {
            "name": self.name,
            "buyer_profile": profile_to_dict(self.buyer_profile),
            "seller_profile": profile_to_dict(self.seller_profile),
            "replications": self.replications,
            "seed": self.seed,
        }
        if self.first_mover is not None:
            doc["first_mover"] = self.first_mover.value
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Scenario":
        try:
            return cls(
                name=str(doc["name"]),
                buyer_profile=profile_from_dict(doc["buyer_profile"]),
                seller_profile=profile_from_dict(doc["seller_profile"]),
                replications=doc.get("replications", 1),
                seed=doc.get("seed", 0),
                first_mover=doc.get("first_mover"),
            )
        except KeyError as exc:
            raise ProfileParseError(f"scenario is missing {exc}") from exc


@dataclass(frozen=True)
class MetricsReport:
    success_rate: float
    mean_rounds: float
    mean_joint_utility: float
    mean_pareto_distance: float
    scenario: str = ""
    replications: int = 0
    successes: int = 0
    grid_points_per_issue: int = 0
    failure_distance_rule: str = FAILURE_DISTANCE_RULE

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "replications": self.replications,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "mean_rounds": self.mean_rounds,
            "mean_joint_utility": self.mean_joint_utility,
            "mean_pareto_distance": self.mean_pareto_distance,
            "grid_points_per_issue": self.grid_points_per_issue,
            "failure_distance_rule": self.failure_distance_rule,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# -- frontier --------------------------------------------------------------


def grid_axes(
    buyer: PreferenceProfile, seller: PreferenceProfile, grid_points_per_issue: int
) -> dict[str, list[float]]:
    """Sample values per issue, in buyer issue order.

    Each axis spans the union of both parties' bounds with evenly spaced
    points, plus every party bound, since utilities are piecewise linear
    with kinks exactly there.
    """
    if set(buyer.issue_names) != set(seller.issue_names):
        raise ProfileMismatch("buyer and seller negotiate different issues")
    n = grid_points_per_issue
    if len(buyer.issues) > MAX_GRID_ISSUES or n > MAX_GRID_POINTS:
        raise GridTooLarge(
            f"{len(buyer.issues)} issues x {n} points exceeds "
            f"{MAX_GRID_ISSUES} issues x {MAX_GRID_POINTS} points"
        )
    if n < 2:
        raise ValueError("grid_points_per_issue must be at least 2")
    axes = {}
    for name in buyer.issue_names:
        a, b = buyer.issue(name), seller.issue(name)
        lo = min(a.lower_bound, b.lower_bound)
        hi = max(a.upper_bound, b.upper_bound)
        pts = {lo + (hi - lo) * k / (n - 1) for k in range(n)}
        pts.update((a.lower_bound, a.upper_bound, b.lower_bound, b.upper_bound))
        axes[name] = sorted(pts)
    return axes


def _grid_utilities(profile: PreferenceProfile, axes: dict[str, list[float]]) -> np.ndarray:
    # Accumulates in profile issue order so results equal offer_utility bit for bit.
    order = list(axes)
    shape = [len(axes[n]) for n in order]
    num = np.zeros(shape)
    den = 0.0
    for w in profile.issues:
        axis = order.index(w.name)
        u = np.array([issue_utility(v, w.issue) for v in axes[w.name]])
        view = [1] * len(order)
        view[axis] = len(u)
        num = num + w.weight * u.reshape(view)
        den += w.weight
    return (num / den).ravel()


def pareto_frontier(
    buyer: PreferenceProfile, seller: PreferenceProfile, grid_points_per_issue: int = 11
) -> list[tuple[float, float]]:
    """Non-dominated (buyer_utility, seller_utility) pairs over the offer grid, by buyer utility."""
    axes = grid_axes(buyer, seller, grid_points_per_issue)
    bu = _grid_utilities(buyer, axes)
    su = _grid_utilities(seller, axes)
    order = np.lexsort((-su, -bu))
    bu, su = bu[order], su[order]
    best_before = np.concatenate(([-np.inf], np.maximum.accumulate(su)[:-1]))
    keep = su > best_before
    return sorted(zip(bu[keep].tolist(), su[keep].tolist()))


def _segment_distance(p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / seg2))
    return math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))


def frontier_distance(point: tuple[float, float], frontier: Sequence[tuple[float, float]]) -> float:
    """Euclidean distance from ``point`` to the piecewise-linear frontier through the grid points."""
    if not frontier:
        raise ValueError("empty frontier")
    if len(frontier) == 1:
        return math.dist(point, frontier[0])
    return min(_segment_distance(point, a, b) for a, b in zip(frontier, frontier[1:]))


# -- batches ---------------------------------------------------------------


def replication_configs(scenario: Scenario) -> list[SessionConfig]:
    rng = random.Random(scenario.seed)
    configs = []
    for i in range(scenario.replications):
        first = scenario.first_mover or (Role.BUYER if i % 2 == 0 else Role.SELLER)
        configs.append(
            SessionConfig(
                scenario.buyer_profile,
                scenario.seller_profile,
                first_mover=first,
                rng_seed=rng.getrandbits(64),
            )
        )
    return configs


def run_sessions(scenario: Scenario) -> list[NegotiationSession]:
    return [run_session(c) for c in replication_configs(scenario)]


def run_batch(scenario: Scenario, grid_points_per_issue: int = 11) -> MetricsReport:
    frontier = pareto_frontier(scenario.buyer_profile, scenario.seller_profile, grid_points_per_issue)
    origin_gap = frontier_distance((0.0, 0.0), frontier)
    rounds, joint, gaps = [], [], []
    for session in run_sessions(scenario):
        outcome = session.outcome
        rounds.append(outcome.rounds_used)
        if outcome.is_agreement:
            point = (outcome.buyer_utility, outcome.seller_utility)
            joint.append(point[0] + point[1])
            gaps.append(frontier_distance(point, frontier))
        else:
            gaps.append(origin_gap)
    n = scenario.replications
    return MetricsReport(
        success_rate=len(joint) / n,
        mean_rounds=sum(rounds) / n,
        mean_joint_utility=sum(joint) / len(joint) if joint else 0.0,
        mean_pareto_distance=sum(gaps) / n,
        scenario=scenario.name,
        replications=n,
        successes=len(joint),
        grid_points_per_issue=grid_points_per_issue,
    )


# -- scenario generation ---------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    count: int
    seed: int = 0
    issues: tuple[int, int] = (1, 4)
    lower: tuple[float, float] = (0.0, 100.0)
    span: tuple[float, float] = (1.0, 100.0)
    bound_jitter: float = 0.25
    weight: tuple[float, float] = (0.0, 9.0)
    u_min: tuple[float, float] = (0.0, 0.6)
    u_max: tuple[float, float] = (0.6, 1.0)
    beta: tuple[float, float] = (0.3, 3.0)
    max_rounds: tuple[int, int] = (1, 50)
    opposed_probability: float = 0.8
    replications: int = 2


def _random_profile(
    rng: random.Random,
    spec: GeneratorSpec,
    role: Role,
    base: list[tuple[str, Orientation, float, float]],
) -> PreferenceProfile:
    issues = []
    for name, orientation, lo, hi in base:
        width = hi - lo
        a = lo + rng.uniform(-spec.bound_jitter, spec.bound_jitter) * width
        b = hi + rng.uniform(-spec.bound_jitter, spec.bound_jitter) * width
        if not a < b:
            a, b = lo, hi
        issues.append(WeightedIssue(Issue(name, orientation, a, b), rng.uniform(*spec.weight)))
    if not sum(w.weight for w in issues) > 0:
        issues[0] = WeightedIssue(issues[0].issue, spec.weight[1] or 1.0)
    u_max = rng.uniform(*spec.u_max)
    u_min = min(u_max, rng.uniform(*spec.u_min))
    return PreferenceProfile(
        role=role,
        issues=tuple(issues),
        u_min=u_min,
        u_max=u_max,
        concession_beta=rng.uniform(*spec.beta),
        max_rounds=rng.randint(*spec.max_rounds),
    )


def generate_scenarios(spec: GeneratorSpec) -> list[Scenario]:
    """``spec.count`` random scenarios, fully determined by ``spec.seed``."""
    rng = random.Random(spec.seed)
    out = []
    for idx in range(spec.count):
        k = rng.randint(*spec.issues)
        buyer_base, seller_base = [], []
        for name in ISSUE_NAMES[:k]:
            lo = rng.uniform(*spec.lower)
            hi = lo + rng.uniform(*spec.span)
            orientation = rng.choice(list(Orientation))
            if rng.random() < spec.opposed_probability:
                other = Orientation.BENEFIT if orientation is Orientation.COST else Orientation.COST
            else:
                other = orientation
            buyer_base.append((name, orientation, lo, hi))
            seller_base.append((name, other, lo, hi))
        out.append(
            Scenario(
                name=f"gen-{spec.seed}-{idx:04d}",
                buyer_profile=_random_profile(rng, spec, Role.BUYER, buyer_base),
                seller_profile=_random_profile(rng, spec, Role.SELLER, seller_base),
                replications=spec.replications,
                seed=rng.getrandbits(64),
            )
        )
    return out


def mirrored_scenario(
    issues: Sequence[tuple[str, float, float, float]],
    u_min: float = 0.3,
    u_max: float = 1.0,
    beta: float = 1.0,
    max_rounds: int = 10,
    replications: int = 1,
    name: str = "mirrored",
) -> Scenario:
    """Buyer and seller share bounds and weights with opposite orientations.

    ``issues`` holds ``(name, lower, upper, weight)``; the buyer treats every
    issue as a cost.
    """
    def side(role: Role, orientation: Orientation) -> PreferenceProfile:
        return PreferenceProfile(
            role,
            tuple(WeightedIssue(Issue(n, orientation, lo, hi), w) for n, lo, hi, w in issues),
            u_min,
            u_max,
            beta,
            max_rounds,
        )

    return Scenario(
        name,
        side(Role.BUYER, Orientation.COST),
        side(Role.SELLER, Orientation.BENEFIT),
        replications=replications,
    )
