"""Expectation agents: distinction detection, filtering, violation episodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from ..errors import ScenarioError
from .scenario import AgentSpec, EnvironmentalExpectation, FunctionalExpectation

WEBER_FLOOR = 1e-12


def detect_distinction(prev: float, nxt: float, weber_k: float) -> bool:
    """Relative-change (Weber fraction) test against the last registered stimulus."""
    if not weber_k > 0:
        raise ScenarioError("BAD_WEBER", f"weber fraction must be positive, got {weber_k}")
    return abs(nxt - prev) / max(abs(prev), WEBER_FLOOR) >= weber_k


def preprocess_filter(series: Sequence[float], window: int) -> list[float]:
    """Moving average over ``[i - window//2, i + (window-1)//2]``, truncated at the edges.

    For odd windows this is centred; for even windows it leans one step back,
    so window 2 averages each point with its predecessor.
    """
    if not series:
        raise ScenarioError("EMPTY_SERIES", "cannot filter an empty series")
    if window < 1:
        raise ScenarioError("BAD_WINDOW", f"window must be >= 1, got {window}")
    values = [float(x) for x in series]
    n, back, ahead = len(values), window // 2, (window - 1) // 2
    out = []
    for i in range(n):
        chunk = values[max(0, i - back): min(n, i + ahead + 1)]
        lo, hi = min(chunk), max(chunk)
        out.append(lo if lo == hi else math.fsum(chunk) / len(chunk))
    return out


class Violation(NamedTuple):
    tick: int
    product: str
    expectation: str
    observed: float


class Distinction(NamedTuple):
    tick: int
    signal: str
    previous: float
    current: float


@dataclass
class ExpectationAgent:
    product: str
    expectations: list
    weber_k: float = 0.05
    window: int = 16
    params: dict = field(default_factory=dict)
    last_stimulus: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)  # event kind -> per-tick counts
    violation_log: list = field(default_factory=list)
    distinction_log: list = field(default_factory=list)
    active: set = field(default_factory=set)  # expectation keys inside an open episode
    ticks: int = 0

    @classmethod
    def from_spec(cls, spec: AgentSpec, params=()) -> "ExpectationAgent":
        return cls(spec.product, list(spec.expectations), spec.weber_k, spec.window, dict(params))

    def observe(self, tick: int, counts: dict, params: dict | None = None) -> list[Distinction]:
        if params is not None:
            self.params = dict(params)
        kinds = set(self.history) | set(counts)
        for kind in kinds:
            self.history.setdefault(kind, [0] * self.ticks).append(int(counts.get(kind, 0)))
        self.ticks += 1
        signals = [(f"rate:{k}", float(counts.get(k, 0))) for k in sorted(kinds)]
        signals += [(f"param:{k}", float(v)) for k, v in sorted(self.params.items())]
        found = []
        for name, value in signals:
            prev = self.last_stimulus.get(name)
            if prev is None:
                self.last_stimulus[name] = value
            elif detect_distinction(prev, value, self.weber_k):
                found.append(Distinction(tick, name, prev, value))
                self.last_stimulus[name] = value
        self.distinction_log.extend(found)
        return found

    def observed_rate(self, kind: str, window: int | None = None) -> float | None:
        """Trailing mean count over the last ``window`` ticks; ``None`` until the window fills."""
        window = window or self.window
        series = self.history.get(kind, [0] * self.ticks)
        if len(series) < window:
            return None
        return math.fsum(series[-window:]) / window

    def replace_expectations(self, expectations) -> None:
        self.expectations = list(expectations)
        self.active.clear()


def _current_value(agent: ExpectationAgent, x, window) -> float | None:
    if isinstance(x, FunctionalExpectation):
        return agent.params.get(x.param)
    return agent.observed_rate(x.kind, window)


def detect_violations(agent: ExpectationAgent, tick: int,
                      tick_window: int | None = None) -> list[Violation]:
    """New violations at ``tick``; each contiguous episode is reported once."""
    fresh = []
    for x in agent.expectations:
        value = _current_value(agent, x, tick_window)
        if value is None:
            continue
        outside = not (x.low <= value <= x.high)
        if outside and x.key not in agent.active:
            agent.active.add(x.key)
            fresh.append(Violation(tick, agent.product, x.key, value))
        elif not outside:
            agent.active.discard(x.key)
    agent.violation_log.extend(fresh)
    return fresh


def is_environmental(v: Violation) -> bool:
    return v.expectation.startswith("env:")


def violation_is_genuine(v: Violation, expectations) -> bool:
    """True when the observed value lies outside the band named by the record."""
    for x in expectations:
        if x.key == v.expectation:
            return not (x.low <= v.observed <= x.high)
    return False


__all__ = [
    "Distinction",
    "EnvironmentalExpectation",
    "ExpectationAgent",
    "FunctionalExpectation",
    "Violation",
    "WEBER_FLOOR",
    "detect_distinction",
    "detect_violations",
    "is_environmental",
    "preprocess_filter",
    "violation_is_genuine",
]
