"""Basic semiotic components, variation/selection, and the two life-cycle laws.

A component takes a configuration over its source system, runs an internal
step list (variation, selection, endomorphic translations) and then branches
into one of several probability-weighted morphisms towards the next system.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from itertools import product as cartesian
from typing import Sequence, Union

from .errors import SemiosisError
from .morphism import (
    SemioticMorphism,
    apply_morphism,
    epsilon,
    is_isomorphism,
    is_level_preserving,
)
from .sign_algebra import (
    PRODUCT,
    AtMost,
    Configuration,
    Fact,
    Forbid,
    Lit,
    Require,
    SortError,
    Term,
    _leq,
    literal_sorts,
    matches,
    term_symbols,
    well_sorted,
)

PROB_TOLERANCE = 1e-9
# Guard against combinatorial blow-up of deep variation on large configurations.
VARIATION_TERM_CAP = 5000
_ENUMERATION_LIMIT = 200_000


# -- variety ------------------------------------------------------------------


def synchronic_variety(cfg: Configuration) -> int:
    """Count of product-internal relation tuples."""
    return sum(1 for f in cfg.facts
               if f.args and all(cfg.boundary(a) == PRODUCT for a in f.args))


def diachronic_variety(trace: Sequence[Configuration]) -> int:
    return len({c.canonical() for c in trace})


# -- variation ------------------------------------------------------------------


def _fresh(base: str, used: set[str]) -> str:
    k = 1
    while f"{base}_{k}" in used:
        k += 1
    name = f"{base}_{k}"
    used.add(name)
    return name


def _fits(entry_sort, term, want, sys) -> bool:
    if isinstance(term, Lit):
        return want in literal_sorts(term, sys)
    return entry_sort is not None and _leq(entry_sort, want, sys)


def variation(cfg: Configuration, depth_bound: int, relation_budget: int, seed=0,
              max_new_terms: int = VARIATION_TERM_CAP) -> Configuration:
    """Grow ``cfg`` using only the symbols already declared in its system.

    Each of ``depth_bound`` rounds applies every constructor (ordered by level,
    priority, name) to every well-sorted argument tuple drawn from the current
    pool of terms and literals.  Then up to ``relation_budget`` new tuples are
    drawn with a generator seeded by ``seed``.
    """
    if depth_bound < 1 or relation_budget < 0:
        raise SemiosisError("INVALID_STEP", "depth_bound must be >= 1 and relation_budget >= 0")
    sys = cfg.system
    terms = dict(cfg.terms)
    used = set(terms)
    known = set(terms.values())

    lits: set[Lit] = set()
    for t in terms.values():
        lits |= term_symbols(t)[1]
    literal_pool = sorted(lits, key=lambda x: (x.kind, str(x)))

    def sort_of(t):
        try:
            return well_sorted(t, sys)
        except SortError:
            return None

    named = {n: (t, sort_of(t)) for n, t in terms.items()}
    ctors = sorted(sys.constructors, key=lambda c: (c.level, c.priority, c.name))
    added = 0
    for _ in range(depth_bound):
        pool = [named[n] for n in sorted(named)] + [(x, None) for x in literal_pool]
        fresh_round = []
        for c in ctors:
            choices = [[t for t, s in pool if _fits(s, t, want, sys)] for want in c.arg_sorts]
            for combo in cartesian(*choices):
                t = Term(c.name, combo)
                if t in known:
                    continue
                known.add(t)
                fresh_round.append((_fresh(c.name, used), t, c.result_sort))
                added += 1
                if added >= max_new_terms:
                    break
            if added >= max_new_terms:
                break
        for n, t, s in fresh_round:
            terms[n] = t
            named[n] = (t, s)
        if not fresh_round or added >= max_new_terms:
            break

    grown = replace(cfg, terms=terms)
    if relation_budget == 0:
        return grown
    return grown.with_facts(grown.facts + tuple(_draw_facts(grown, relation_budget, seed)))


def _draw_facts(cfg: Configuration, budget: int, seed) -> list[Fact]:
    sys = cfg.system
    existing = set(cfg.facts)
    names = sorted(n for n, s in cfg.sorts.items() if s is not None)
    slots = []
    for rel in sorted(sys.relations, key=lambda r: r.name):
        per_pos = [[n for n in names if _leq(cfg.sorts[n], want, sys)] for want in rel.arg_sorts]
        if all(per_pos):
            slots.append((rel.name, per_pos))
    rng = random.Random(seed)
    total = sum(math.prod(len(p) for p in per_pos) for _, per_pos in slots)
    if total == 0:
        return []
    if total <= _ENUMERATION_LIMIT:
        candidates = [Fact(r, args) for r, per_pos in slots for args in cartesian(*per_pos)]
        candidates = [f for f in candidates if f not in existing]
        return rng.sample(candidates, min(budget, len(candidates)))
    chosen: list[Fact] = []
    taken = set(existing)
    for _ in range(budget * 20):
        if len(chosen) == budget:
            break
        r, per_pos = slots[rng.randrange(len(slots))]
        f = Fact(r, tuple(rng.choice(p) for p in per_pos))
        if f not in taken:
            taken.add(f)
            chosen.append(f)
    return chosen


# -- selection ------------------------------------------------------------------


@dataclass(frozen=True)
class SelectionResult:
    config: Configuration
    unrepairable: tuple[str, ...] = ()
    skipped: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.unrepairable


def _holds(require, facts, cfg) -> bool:
    return any(f.relation == require.body.relation and matches(require.body.pattern, f, cfg)
               for f in facts)


def selection(cfg: Configuration, minimality: bool = False,
              original: Configuration | None = None) -> SelectionResult:
    """Rank-lexicographic repair by deletion.

    Constraints are visited by (rank, name).  A violated FORBID loses every
    matching tuple; a violated AT_MOST loses its lexicographically greatest
    tuples.  A deletion that would break a currently satisfied REQUIRE of equal
    or higher importance is withheld.  REQUIRE violations are never repaired.
    """
    ordered = sorted(cfg.system.constraints, key=lambda c: (c.rank, c.name))
    requires = [c for c in ordered if isinstance(c.body, Require)]
    facts = set(cfg.facts)
    skipped = []
    for c in ordered:
        body = c.body
        if isinstance(body, Forbid):
            doomed = {f for f in facts
                      if f.relation == body.relation and matches(body.pattern, f, cfg)}
        elif isinstance(body, AtMost):
            mine = sorted((f for f in facts if f.relation == body.relation), key=str)
            doomed = set(mine[body.count:]) if len(mine) > body.count else set()
        else:
            continue
        if not doomed:
            continue
        remaining = facts - doomed
        if any(r.rank <= c.rank and _holds(r, facts, cfg) and not _holds(r, remaining, cfg)
               for r in requires):
            skipped.append(c.name)
            continue
        facts = remaining

    out = cfg.with_facts(facts)
    if minimality:
        base = (original or cfg).term_map
        referenced = {a for f in facts for a in f.args}
        keep = {n: t for n, t in out.terms if n in referenced or base.get(n) == t}
        out = out.with_terms(keep)
    unrepairable = tuple(r.name for r in requires if not _holds(r, facts, cfg))
    return SelectionResult(out, unrepairable, tuple(skipped))


# -- components -----------------------------------------------------------------


@dataclass(frozen=True)
class Variation:
    depth_bound: int
    relation_budget: int


@dataclass(frozen=True)
class Selection:
    minimality: bool = False


@dataclass(frozen=True)
class MorphismStep:
    morphism: SemioticMorphism


SemioticStep = Union[Variation, Selection, MorphismStep]


@dataclass(frozen=True)
class Branch:
    morphism: SemioticMorphism
    probability: float
    target: object  # SignSystem


@dataclass(frozen=True)
class BasicComponent:
    source_config: Configuration
    steps: tuple[SemioticStep, ...]
    branches: tuple[Branch, ...]
    t1: int
    t2: int
    loc: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    @property
    def source_system(self):
        return self.source_config.system

    @property
    def probabilities(self) -> list[float]:
        return [b.probability for b in self.branches]


@dataclass(frozen=True)
class SemiosisSequence:
    name: str
    components: tuple[BasicComponent, ...]
    loc: tuple[int, int] | None = field(default=None, compare=False, repr=False)


def _same(a, b) -> bool:
    return a is b or a == b


def make_component(source_config: Configuration, steps, branches, t1: int, t2: int,
                   loc=None) -> BasicComponent:
    steps, branches = tuple(steps), tuple(branches)
    if not branches:
        raise SemiosisError("NO_BRANCHES", "a component needs at least one branch")
    probs = [b.probability for b in branches]
    if any(not (p > 0) for p in probs):
        raise SemiosisError("NONPOSITIVE_PROB", f"branch probabilities must be positive: {probs}")
    if abs(math.fsum(probs) - 1.0) > PROB_TOLERANCE:
        raise SemiosisError("PROB_SUM", f"branch probabilities sum to {math.fsum(probs)!r}")
    if t2 <= t1:
        raise SemiosisError("TIME_ORDER", f"t2={t2} must exceed t1={t1}")
    system = source_config.system
    for step in steps:
        if isinstance(step, Variation):
            if step.depth_bound < 1 or step.relation_budget < 0:
                raise SemiosisError("INVALID_STEP", f"bad variation bounds {step}")
        elif isinstance(step, MorphismStep):
            m = step.morphism
            if not (_same(m.source, system) and _same(m.target, system)):
                raise SemiosisError("CLOSURE_VIOLATION",
                                    f"step morphism {m.name} leaves system {system.name}")
        elif not isinstance(step, Selection):
            raise SemiosisError("INVALID_STEP", f"unknown step {step!r}")
    for b in branches:
        if not _same(b.morphism.source, system) or not _same(b.morphism.target, b.target):
            raise SemiosisError("BRANCH_MISMATCH",
                                f"branch {b.morphism.name} does not map {system.name} to "
                                f"{getattr(b.target, 'name', b.target)}")
    return BasicComponent(source_config, steps, branches, t1, t2, loc)


def make_sequence(name: str, components, loc=None) -> SemiosisSequence:
    components = tuple(components)
    for i in range(len(components) - 1):
        cur, nxt = components[i], components[i + 1]
        for b in cur.branches:
            if not _same(b.target, nxt.source_system):
                raise SemiosisError("CHAIN_BROKEN",
                                    f"component {i} branch {b.morphism.name} targets "
                                    f"{b.target.name}, component {i + 1} starts from "
                                    f"{nxt.source_system.name}")
        if nxt.t1 < cur.t2:
            raise SemiosisError("TIME_ORDER", f"component {i + 1} starts before component {i} ends")
    return SemiosisSequence(name, components, loc)


def _step_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def apply_step(step: SemioticStep, cfg: Configuration, original: Configuration,
               seed: int = 0) -> Configuration:
    if isinstance(step, Variation):
        return variation(cfg, step.depth_bound, step.relation_budget, seed)
    if isinstance(step, Selection):
        return selection(cfg, step.minimality, original).config
    return apply_morphism(step.morphism, cfg)


def run_steps(c: BasicComponent, cfg: Configuration | None = None, seed: int = 0) -> Configuration:
    """Transport ``cfg`` (default: the component's source) through the step list."""
    start = c.source_config if cfg is None else cfg
    out = start
    for i, step in enumerate(c.steps):
        out = apply_step(step, out, start, _step_seed(seed, i))
    return out


def is_well_defined(c: BasicComponent, seed: int = 0) -> bool:
    """True when some transformation of the component is not an isomorphism.

    Variation and selection steps count as non-isomorphic when they change the
    configuration they receive on the component's own source configuration.
    """
    if any(not is_isomorphism(b.morphism) for b in c.branches):
        return True
    cfg = c.source_config
    for i, step in enumerate(c.steps):
        if isinstance(step, MorphismStep) and not is_isomorphism(step.morphism):
            return True
        nxt = apply_step(step, cfg, c.source_config, _step_seed(seed, i))
        if not isinstance(step, MorphismStep) and nxt != cfg:
            return True
        cfg = nxt
    return False


# -- laws -----------------------------------------------------------------------


@dataclass(frozen=True)
class BranchVerdict:
    component: int
    branch: int
    epsilon_before: int
    epsilon_after: int
    natural: bool


@dataclass(frozen=True)
class LawReport:
    law1_holds: bool
    well_defined_witness: int | None
    level_break_witness: tuple[int, int] | None
    law2_verdicts: tuple[BranchVerdict, ...] = ()

    @property
    def law2_holds(self) -> bool:
        return bool(self.law2_verdicts) and all(v.natural for v in self.law2_verdicts)

    def to_dict(self) -> dict:
        return {
            "law1_holds": self.law1_holds,
            "well_defined_witness": self.well_defined_witness,
            "level_break_witness": (list(self.level_break_witness)
                                    if self.level_break_witness is not None else None),
            "law2_verdicts": [
                {"component": v.component, "branch": v.branch,
                 "epsilon_before": v.epsilon_before, "epsilon_after": v.epsilon_after,
                 "natural": v.natural}
                for v in self.law2_verdicts
            ],
        }


def check_law_one(seq: SemiosisSequence, seed: int = 0) -> LawReport:
    well = next((i for i, c in enumerate(seq.components) if is_well_defined(c, seed)), None)
    level_break = next(((i, k) for i, c in enumerate(seq.components)
                        for k, b in enumerate(c.branches)
                        if not is_level_preserving(b.morphism)), None)
    return LawReport(well is not None and level_break is not None, well, level_break)


def check_law_two(seq: SemiosisSequence, configs: Sequence[Configuration | None] | None = None,
                  seed: int = 0) -> tuple[BranchVerdict, ...]:
    """Naturalness of every branch on each stage's designated configuration.

    The designated configuration of stage i is ``configs[i]`` when given, else
    the component's source configuration; it is transported through the step
    list before each branch morphism is applied.
    """
    verdicts = []
    for i, c in enumerate(seq.components):
        start = configs[i] if configs is not None and i < len(configs) else None
        before = run_steps(c, start, seed)
        eb = epsilon(before)
        for k, b in enumerate(c.branches):
            ea = epsilon(apply_morphism(b.morphism, before))
            verdicts.append(BranchVerdict(i, k, eb, ea, eb > ea))
    return tuple(verdicts)


def check_laws(seq: SemiosisSequence, configs=None, seed: int = 0) -> LawReport:
    one = check_law_one(seq, seed)
    return replace(one, law2_verdicts=check_law_two(seq, configs, seed))


# -- trajectories -----------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    indices: tuple[int, ...]
    configs: tuple[Configuration, ...]


def choose_branch(probabilities: Sequence[float], u: float) -> int:
    acc = 0.0
    for k, p in enumerate(probabilities):
        acc += p
        if u < acc:
            return k
    return len(probabilities) - 1


def sample_trajectory(seq: SemiosisSequence, seed: int, realize: bool = True) -> Trajectory:
    rng = random.Random(seed)
    indices, configs = [], []
    for c in seq.components:
        k = choose_branch(c.probabilities, rng.random())
        indices.append(k)
        if realize:
            configs.append(apply_morphism(c.branches[k].morphism, run_steps(c, seed=seed)))
    return Trajectory(tuple(indices), tuple(configs))


def collapse_past(seq: SemiosisSequence, observed: Sequence[int]) -> SemiosisSequence:
    """Keep only the observed branch of each component, with probability 1."""
    if len(observed) != len(seq.components):
        raise SemiosisError("LENGTH_MISMATCH",
                            f"{len(observed)} observations for {len(seq.components)} components")
    comps = []
    for i, (c, k) in enumerate(zip(seq.components, observed)):
        if not 0 <= k < len(c.branches):
            raise SemiosisError("INDEX_OUT_OF_RANGE",
                                f"component {i} has {len(c.branches)} branches, observed {k}")
        b = replace(c.branches[k], probability=1.0)
        comps.append(make_component(c.source_config, c.steps, [b], c.t1, c.t2, c.loc))
    return make_sequence(seq.name, comps, seq.loc)
