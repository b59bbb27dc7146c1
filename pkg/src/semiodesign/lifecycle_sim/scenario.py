"""Scenario description: environments, products, expectation agents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from ..errors import Diagnostic
from ..sign_algebra import Configuration, validate_config


def _loc():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EnvironmentProfile:
    id: str
    features: tuple[float, ...]
    base_rates: tuple[tuple[str, float], ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(x) for x in self.features))
        rates = self.base_rates.items() if isinstance(self.base_rates, dict) else self.base_rates
        object.__setattr__(self, "base_rates", tuple((k, float(r)) for k, r in rates))

    @property
    def kinds(self) -> list[str]:
        return sorted(k for k, _ in self.base_rates)

    def rate(self, kind: str) -> float:
        return dict(self.base_rates).get(kind, 0.0)


@dataclass(frozen=True)
class FunctionalExpectation:
    param: str
    low: float
    high: float

    @property
    def key(self) -> str:
        return f"functional:{self.param}"


@dataclass(frozen=True)
class EnvironmentalExpectation:
    kind: str
    rate_low: float
    rate_high: float

    @property
    def key(self) -> str:
        return f"env:{self.kind}"

    @property
    def low(self) -> float:
        return self.rate_low

    @property
    def high(self) -> float:
        return self.rate_high


Expectation = Union[FunctionalExpectation, EnvironmentalExpectation]


@dataclass(frozen=True)
class ProductSpec:
    id: str
    config: Configuration
    environment: str
    manufacturer: str
    params: tuple[tuple[str, float], ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        params = self.params.items() if isinstance(self.params, dict) else self.params
        object.__setattr__(self, "params", tuple((k, float(v)) for k, v in params))


@dataclass(frozen=True)
class AgentSpec:
    product: str
    weber_k: float = 0.05
    window: int = 16
    expectations: tuple[Expectation, ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "expectations", tuple(self.expectations))


@dataclass(frozen=True)
class ExpectationUpdate:
    """Replacement of an agent's expectations at a given tick (agent code update)."""

    tick: int
    product: str
    expectations: tuple[Expectation, ...]
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "expectations", tuple(self.expectations))


@dataclass(frozen=True)
class Scenario:
    name: str
    environments: tuple[EnvironmentProfile, ...] = ()
    products: tuple[ProductSpec, ...] = ()
    agents: tuple[AgentSpec, ...] = ()
    adapt: bool = False
    cluster_tau: float = 1.0
    cluster_every: int = 0
    updates: tuple[ExpectationUpdate, ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        for attr in ("environments", "products", "agents", "updates"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    def environment(self, env_id: str) -> EnvironmentProfile:
        return next(e for e in self.environments if e.id == env_id)


def _band_ok(lo, hi) -> bool:
    return math.isfinite(lo) and math.isfinite(hi) and lo <= hi


def validate_scenario(sc: Scenario) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def report(code, msg, item=None):
        diags.append(Diagnostic(code, msg, subject=sc.name).at(getattr(item, "loc", None)))

    envs = {}
    for e in sc.environments:
        if e.id in envs:
            report("DUPLICATE_ID", f"environment {e.id!r} declared twice", e)
        envs[e.id] = e
        kinds = [k for k, _ in e.base_rates]
        if len(set(kinds)) != len(kinds):
            report("DUPLICATE_ID", f"environment {e.id!r} lists an event kind twice", e)
        for k, r in e.base_rates:
            if not (r >= 0 and math.isfinite(r)):
                report("NEGATIVE_RATE", f"environment {e.id!r}: rate of {k} must be >= 0", e)
    dims = {len(e.features) for e in sc.environments}
    if len(dims) > 1:
        report("FEATURE_DIMENSION", f"environment feature lengths differ: {sorted(dims)}")

    products = {}
    for p in sc.products:
        if p.id in products:
            report("DUPLICATE_ID", f"product {p.id!r} declared twice", p)
        products[p.id] = p
        if p.environment not in envs:
            report("UNKNOWN_ENVIRONMENT", f"product {p.id!r} placed in unknown environment "
                   f"{p.environment!r}", p)
        names = [k for k, _ in p.params]
        if len(set(names)) != len(names):
            report("DUPLICATE_ID", f"product {p.id!r} lists a parameter twice", p)
        for d in validate_config(p.config):
            report("INVALID_CONFIG", f"product {p.id!r}: {d.message}", p)

    def check_expectations(owner, product, exps):
        params = dict(product.params) if product else {}
        for x in exps:
            if not _band_ok(x.low, x.high):
                report("BAD_BAND", f"{owner}: band [{x.low}, {x.high}] is empty", None)
            if isinstance(x, FunctionalExpectation) and product and x.param not in params:
                report("UNKNOWN_PARAM", f"{owner}: product {product.id!r} has no parameter "
                       f"{x.param!r}", None)

    seen_agents = set()
    for a in sc.agents:
        if a.product not in products:
            report("UNKNOWN_PRODUCT", f"agent for unknown product {a.product!r}", a)
        if a.product in seen_agents:
            report("DUPLICATE_ID", f"product {a.product!r} has two agents", a)
        seen_agents.add(a.product)
        if not (0 < a.weber_k <= 1):
            report("BAD_WEBER", f"agent for {a.product!r}: weber fraction must lie in (0, 1]", a)
        if a.window < 1:
            report("BAD_WINDOW", f"agent for {a.product!r}: window must be >= 1", a)
        check_expectations(f"agent for {a.product!r}", products.get(a.product), a.expectations)

    for u in sc.updates:
        if u.product not in seen_agents:
            report("UNKNOWN_PRODUCT", f"update for product {u.product!r} without an agent", u)
        if u.tick < 0:
            report("BAD_TICK", "update tick must be >= 0", u)
        check_expectations(f"update for {u.product!r}", products.get(u.product), u.expectations)

    if not (sc.cluster_tau > 0 and math.isfinite(sc.cluster_tau)):
        report("BAD_TAU", "cluster tau must be positive")
    if sc.cluster_every < 0:
        report("BAD_TICK", "cluster interval must be >= 0")
    return diags
