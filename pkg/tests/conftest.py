from __future__ import annotations

import pytest

from cloudnego.intake import KeyPair
from cloudnego.model import Issue, Orientation, PreferenceProfile, Role, WeightedIssue


@pytest.fixture(scope="session")
def keys():
    """A handful of RSA key pairs, generated once per test run."""
    return {name: KeyPair.generate() for name in ("agent_a", "agent_b", "buyer", "seller", "mallory")}


def make_profile(role, issues, u_min=0.3, u_max=1.0, beta=1.0, max_rounds=10):
    """``issues`` holds ``(name, orientation, lower, upper, weight)`` tuples."""
    return PreferenceProfile(
        Role(role),
        tuple(WeightedIssue(Issue(n, Orientation(o), lo, hi), w) for n, o, lo, hi, w in issues),
        u_min,
        u_max,
        beta,
        max_rounds,
    )


@pytest.fixture
def price_quality():
    buyer = make_profile(
        "buyer", [("price", "cost", 10, 20, 9), ("quality", "benefit", 0, 5, 1)], u_min=0.3, u_max=0.8
    )
    seller = make_profile(
        "seller", [("price", "benefit", 10, 20, 9), ("quality", "cost", 0, 5, 1)], u_min=0.3, u_max=0.8
    )
    return buyer, seller


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
