"""Discrete-tick simulation of monitored products in their environments."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import ScenarioError
from ..morphism import epsilon
from ..semiosis import selection, synchronic_variety, variation
from ..sign_algebra import (
    Configuration,
    ConstructorDecl,
    Fact,
    Lit,
    RelationDecl,
    SignSystem,
    Term,
    constraint_profile,
    data_sort,
    sign_sort,
)
from .agents import ExpectationAgent, detect_violations, is_environmental
from .clustering import cluster_agents
from .scenario import (
    AgentSpec,
    EnvironmentalExpectation,
    EnvironmentProfile,
    ProductSpec,
    Scenario,
    validate_scenario,
)
from .trace import ClusterSnapshot, InteractionEvent, SimTrace, ViolationRecord

ADJUST_DEPTH = 2
MAG_DIGITS = 6


def _satisfies_rank_zero(cfg: Configuration) -> bool:
    return all(e.satisfied for e in constraint_profile(cfg) if e.rank == 0)


def adjust_configuration(product, violations=(), seed: int = 0,
                         original: Configuration | None = None) -> Configuration:
    """Simplify a product's configuration after an environmental violation.

    Candidates are the varied-then-selected configuration, the directly
    selected configuration and the unchanged one.  Admissible candidates meet
    every rank-0 constraint, are repairable and do not raise ε; the winner
    minimises (synchronic variety, ε, serialization).
    """
    cfg = product.config if isinstance(product, ProductSpec) else product
    if violations and not any(is_environmental(v) for v in violations):
        return cfg
    original = original or cfg
    eps = epsilon(cfg)
    varied = variation(cfg, ADJUST_DEPTH, len(cfg.facts), seed)
    candidates = [r.config for r in (selection(varied, True, original),
                                     selection(cfg, True, original)) if r.ok]
    candidates.append(cfg)
    admissible = [c for c in candidates if _satisfies_rank_zero(c) and epsilon(c) <= eps]
    if not admissible:
        return cfg
    best = min(admissible, key=lambda c: (synchronic_variety(c), epsilon(c), c.canonical()))
    if best is cfg:
        return cfg
    return Configuration(cfg.name, best.system, best.terms, best.facts, cfg.loc)


def _adjust_seed(seed: int, tick: int, product: str) -> int:
    return zlib.crc32(f"{seed}:{tick}:{product}".encode())


def rate_multiplier(eps: int, eps0: int) -> float:
    return 1.0 + eps / max(1, eps0)


def run(scenario: Scenario, horizon: int, seed: int = 0) -> SimTrace:
    """Simulate ``horizon`` ticks; the trace is a pure function of (scenario, horizon, seed)."""
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError("INVALID_SCENARIO", "; ".join(d.message for d in problems))
    if horizon < 0:
        raise ScenarioError("INVALID_SCENARIO", f"horizon must be >= 0, got {horizon}")
    rng = np.random.default_rng(seed)
    products = sorted(scenario.products, key=lambda p: p.id)
    envs = {e.id: e for e in scenario.environments}
    configs = {p.id: p.config for p in products}
    eps0 = {p.id: epsilon(p.config) for p in products}
    eps = dict(eps0)
    params = {p.id: dict(p.params) for p in products}
    agents = {a.product: ExpectationAgent.from_spec(a, params[a.product]) for a in scenario.agents}
    updates: dict[int, list] = {}
    for u in scenario.updates:
        updates.setdefault(u.tick, []).append(u)
    slots = [(p.id, kind, envs[p.environment].rate(kind))
             for p in products for kind in envs[p.environment].kinds]
    features = [(p.id, envs[p.environment].features) for p in products]

    trace = SimTrace(seed, horizon, epsilon_series={p.id: [] for p in products},
                     product_ids=tuple(p.id for p in products))
    for t in range(horizon):
        for u in updates.get(t, ()):
            agents[u.product].replace_expectations(u.expectations)
        mult = {pid: rate_multiplier(eps[pid], eps0[pid]) for pid in configs}
        lam = np.array([base * mult[pid] for pid, _, base in slots], dtype=float)
        counts = rng.poisson(lam) if slots else np.zeros(0, dtype=int)
        mags = rng.exponential(1.0, size=int(counts.sum()))
        k = 0
        per_product: dict[str, dict[str, int]] = {p.id: {} for p in products}
        for (pid, kind, _), c in zip(slots, counts.tolist()):
            per_product[pid][kind] = c
            for _ in range(c):
                trace.events.append(InteractionEvent(t, pid, kind, round(float(mags[k]), MAG_DIGITS)))
                k += 1
        for p in products:
            agent = agents.get(p.id)
            if agent is None:
                continue
            agent.observe(t, per_product[p.id], params[p.id])
            fresh = detect_violations(agent, t)
            trace.violations.extend(ViolationRecord(v.tick, v.product, v.expectation, v.observed)
                                    for v in fresh)
            if scenario.adapt and any(is_environmental(v) for v in fresh):
                configs[p.id] = adjust_configuration(configs[p.id], fresh,
                                                     _adjust_seed(seed, t, p.id), p.config)
                eps[p.id] = epsilon(configs[p.id])
        for pid in configs:
            trace.epsilon_series[pid].append(eps[pid])
        every = scenario.cluster_every
        if products and (t == 0 or t == horizon - 1 or (every > 0 and t % every == 0)):
            clustering = cluster_agents(features, scenario.cluster_tau)
            trace.cluster_history.append(ClusterSnapshot(t, dict(clustering.assignments)))
    trace.final_configs = dict(configs)
    return trace


# -- synthetic multi-product scenario ----------------------------------------------


def _unit_system() -> SignSystem:
    return SignSystem(
        "Appliance",
        [data_sort("Real"), sign_sort("Part"), sign_sort("User", "environment")],
        (),
        [ConstructorDecl("part", ["Real"], "Part", 0), ConstructorDecl("user", ["Real"], "User", 1)],
        [RelationDecl("joins", ["Part", "Part"]), RelationDecl("uses", ["User", "Part"])],
    )


def _unit_config(system: SignSystem) -> Configuration:
    return Configuration("unit", system,
                         {"p": Term("part", [Lit(1.0)]), "u": Term("user", [Lit(1.0)])},
                         [Fact("joins", ["p", "p"]), Fact("uses", ["u", "p"])])


@dataclass(frozen=True)
class ClusteredScenario:
    scenario: Scenario
    labels: dict  # product id -> true centre index
    manufacturers: dict  # product id -> manufacturer


CENTRE_DIRECTIONS = ((0.0, 0.0), (1.0, 0.0), (0.5, 0.8660254037844386))


def clustered_scenario(seed: int, n_agents: int = 60, tau: float = 1.0, separation: float = 20.0,
                       spread: float = 0.1, base_rate: float = 2.0) -> ClusteredScenario:
    """Agents whose environments sit around three centres ``separation * tau`` apart.

    Feature noise is Gaussian with standard deviation ``spread * tau``.  Two
    manufacturers share the products so that two of the clusters merge into
    one family.
    """
    rng = np.random.default_rng(seed)
    system = _unit_system()
    cfg = _unit_config(system)
    width = len(str(n_agents - 1))
    envs, products, agents, labels, manus = [], [], [], {}, {}
    for i in range(n_agents):
        centre = i % len(CENTRE_DIRECTIONS)
        cx, cy = (separation * tau * d for d in CENTRE_DIRECTIONS[centre])
        noise = rng.normal(0.0, spread * tau, size=2)
        pid = f"p{i:0{width}d}"
        env_id = f"e{i:0{width}d}"
        envs.append(EnvironmentProfile(env_id, (round(cx + noise[0], 9), round(cy + noise[1], 9)),
                                       {"PART_MOVEMENT": base_rate, "MODE_SWITCH": base_rate / 2}))
        manu = "m0" if centre < 2 else "m1"
        products.append(ProductSpec(pid, cfg, env_id, manu, {"temp": 4.0}))
        agents.append(AgentSpec(pid, 0.05, 16, [EnvironmentalExpectation("PART_MOVEMENT", 0.0, 1e6)]))
        labels[pid] = centre
        manus[pid] = manu
    sc = Scenario("clustered", envs, products, agents, adapt=False, cluster_tau=tau, cluster_every=0)
    return ClusteredScenario(sc, labels, manus)
