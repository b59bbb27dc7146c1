"""Sign systems, ground sign terms, finite configurations and ranked constraints.

A sign system bundles sign sorts, data sorts, constructors, relations and
ranked axioms.  Sign sorts are partially ordered by ``subsort_edges``;
constructors carry a level and a priority.  Constraint rank 0 is the most
important; numerically larger ranks may be sacrificed during repair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Union

from .errors import Diagnostic, SortError

SIGN = "sign"
DATA = "data"
PRODUCT = "product"
ENVIRONMENT = "environment"

# Data sort names a literal of each kind may inhabit, in preference order.
# Integers widen to real sorts when no integer sort is declared.
LITERAL_SORTS = {
    "int": ("Int", "Nat", "Integer", "Real", "Float", "Double"),
    "real": ("Real", "Float", "Double"),
    "string": ("String", "Str", "Text"),
}


def _loc():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SortDecl:
    name: str
    kind: str = SIGN
    boundary: str | None = None
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        if self.kind == SIGN and self.boundary is None:
            object.__setattr__(self, "boundary", PRODUCT)


def sign_sort(name: str, boundary: str = PRODUCT, loc=None) -> SortDecl:
    return SortDecl(name, SIGN, boundary, loc)


def data_sort(name: str, loc=None) -> SortDecl:
    return SortDecl(name, DATA, None, loc)


@dataclass(frozen=True)
class ConstructorDecl:
    name: str
    arg_sorts: tuple[str, ...]
    result_sort: str
    level: int = 0
    priority: int = 0
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "arg_sorts", tuple(self.arg_sorts))


@dataclass(frozen=True)
class RelationDecl:
    name: str
    arg_sorts: tuple[str, ...]
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "arg_sorts", tuple(self.arg_sorts))


# -- terms ------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """Constructor application; nullary constructors have ``args == ()``."""

    ctor: str
    args: tuple["SignTerm", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self) -> str:
        return f"{self.ctor}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True, eq=False)
class Lit:
    """Data literal: integer, 64-bit real or string."""

    value: int | float | str

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise TypeError(f"unsupported literal {v!r}")
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError("real literals must be finite")

    @property
    def kind(self) -> str:
        if isinstance(self.value, str):
            return "string"
        return "int" if isinstance(self.value, int) else "real"

    def __eq__(self, other):
        return (isinstance(other, Lit) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash((type(self.value).__name__, self.value))

    def __str__(self) -> str:
        if isinstance(self.value, str):
            return json.dumps(self.value, ensure_ascii=False)
        return repr(self.value)


SignTerm = Union[Term, Lit]


def term_depth(term: SignTerm) -> int:
    if isinstance(term, Lit) or not term.args:
        return 1
    return 1 + max(term_depth(a) for a in term.args)


def term_symbols(term: SignTerm) -> tuple[set[str], set[Lit]]:
    """Constructor names and literals occurring in ``term``."""
    ctors, lits = set(), set()
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Lit):
            lits.add(t)
        else:
            ctors.add(t.ctor)
            stack.extend(t.args)
    return ctors, lits


# -- constraints ------------------------------------------------------------


class Wildcard:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "WILDCARD"

    def __str__(self):
        return "*"

    def __reduce__(self):
        return (Wildcard, ())


WILDCARD = Wildcard()


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


Atom = Union[Wildcard, Var, Term, Lit]


@dataclass(frozen=True)
class Forbid:
    relation: str
    pattern: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))


@dataclass(frozen=True)
class Require:
    relation: str
    pattern: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))


@dataclass(frozen=True)
class AtMost:
    relation: str
    count: int


@dataclass(frozen=True)
class Constraint:
    name: str
    rank: int
    body: Forbid | Require | AtMost
    loc: tuple[int, int] | None = _loc()


# -- systems ----------------------------------------------------------------


@dataclass(frozen=True)
class SignSystem:
    name: str
    sorts: tuple[SortDecl, ...] = ()
    subsort_edges: frozenset[tuple[str, str]] = frozenset()
    constructors: tuple[ConstructorDecl, ...] = ()
    relations: tuple[RelationDecl, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        object.__setattr__(self, "sorts", tuple(self.sorts))
        object.__setattr__(self, "subsort_edges",
                           frozenset(tuple(e) for e in self.subsort_edges))
        object.__setattr__(self, "constructors", tuple(self.constructors))
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @cached_property
    def sort_map(self) -> dict[str, SortDecl]:
        out = {}
        for s in self.sorts:
            out.setdefault(s.name, s)
        return out

    @cached_property
    def ctor_map(self) -> dict[str, ConstructorDecl]:
        out = {}
        for c in self.constructors:
            out.setdefault(c.name, c)
        return out

    @cached_property
    def rel_map(self) -> dict[str, RelationDecl]:
        out = {}
        for r in self.relations:
            out.setdefault(r.name, r)
        return out

    @cached_property
    def upsets(self) -> dict[str, frozenset[str]]:
        """Reflexive-transitive closure of the subsort edges, per sort."""
        succ: dict[str, set[str]] = {s: set() for s in self.sort_map}
        for a, b in self.subsort_edges:
            succ.setdefault(a, set()).add(b)
            succ.setdefault(b, set())
        closure = {}
        for start in succ:
            seen = {start}
            stack = [start]
            while stack:
                for nxt in succ[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            closure[start] = frozenset(seen)
        return closure

    def is_sign_sort(self, name: str) -> bool:
        decl = self.sort_map.get(name)
        return decl is not None and decl.kind == SIGN

    def is_data_sort(self, name: str) -> bool:
        decl = self.sort_map.get(name)
        return decl is not None and decl.kind == DATA


def subsort_leq(s1: str, s2: str, sys: SignSystem) -> bool:
    for s in (s1, s2):
        if s not in sys.sort_map:
            raise SortError("UNKNOWN_SORT", f"sort {s!r} is not declared in {sys.name}")
    return s2 in sys.upsets[s1]


def _leq(s1: str, s2: str, sys: SignSystem) -> bool:
    # tolerant variant used on possibly-invalid systems
    return s1 == s2 or s2 in sys.upsets.get(s1, ())


def _cyclic_groups(sys: SignSystem) -> list[list[str]]:
    up = sys.upsets
    seen: set[str] = set()
    groups = []
    for s in sorted(up):
        if s in seen:
            continue
        group = sorted(t for t in up[s] if s in up.get(t, ()))
        if len(group) > 1:
            groups.append(group)
            seen.update(group)
    return groups


def validate_system(sys: SignSystem) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def report(code, msg, decl=None, subject=None):
        d = Diagnostic(code, msg, subject=subject)
        diags.append(d.at(getattr(decl, "loc", None)))

    for kind, decls in (("SORT", sys.sorts), ("CONSTRUCTOR", sys.constructors),
                        ("RELATION", sys.relations), ("CONSTRAINT", sys.constraints)):
        names: set[str] = set()
        for d in decls:
            if d.name in names:
                report(f"DUPLICATE_{kind}", f"{kind.lower()} {d.name!r} declared twice", d, d.name)
            names.add(d.name)

    for s in sys.sorts:
        if s.kind not in (SIGN, DATA):
            report("BAD_SORT_KIND", f"sort {s.name!r} has unknown kind {s.kind!r}", s, s.name)
        elif s.kind == DATA and s.boundary is not None:
            report("DATA_SORT_BOUNDARY", f"data sort {s.name!r} carries a boundary tag", s, s.name)
        elif s.kind == SIGN and s.boundary not in (PRODUCT, ENVIRONMENT):
            report("BAD_BOUNDARY", f"sort {s.name!r} has unknown boundary {s.boundary!r}", s, s.name)

    declared = sys.sort_map
    for a, b in sorted(sys.subsort_edges):
        missing = [x for x in (a, b) if x not in declared]
        for x in missing:
            report("UNKNOWN_SORT", f"subsort edge {a} < {b} mentions undeclared sort {x!r}",
                   declared.get(a), x)
        if not missing and not (sys.is_sign_sort(a) and sys.is_sign_sort(b)):
            report("SUBSORT_NOT_SIGN", f"subsort edge {a} < {b} involves a data sort",
                   declared.get(a), a)
    for group in _cyclic_groups(sys):
        report("CYCLIC_SUBSORT", "subsort cycle among " + ", ".join(group),
               declared.get(group[0]), group[0])

    for c in sys.constructors:
        for s in c.arg_sorts + (c.result_sort,):
            if s not in declared:
                report("UNKNOWN_SORT", f"constructor {c.name!r} uses undeclared sort {s!r}", c, s)
        if c.result_sort in declared and not sys.is_sign_sort(c.result_sort):
            report("RESULT_NOT_SIGN_SORT",
                   f"constructor {c.name!r} builds data sort {c.result_sort!r}", c, c.name)

    for r in sys.relations:
        for s in r.arg_sorts:
            if s not in declared:
                report("UNKNOWN_SORT", f"relation {r.name!r} uses undeclared sort {s!r}", r, s)

    for a in sys.constraints:
        if a.rank < 0:
            report("NEGATIVE_RANK", f"axiom {a.name!r} has negative rank", a, a.name)
        body = a.body
        rel = sys.rel_map.get(body.relation)
        if rel is None:
            report("UNKNOWN_RELATION", f"axiom {a.name!r} refers to undeclared relation "
                   f"{body.relation!r}", a, body.relation)
            continue
        if isinstance(body, AtMost):
            if body.count < 0:
                report("NEGATIVE_COUNT", f"axiom {a.name!r} has a negative bound", a, a.name)
            continue
        if len(body.pattern) != len(rel.arg_sorts):
            report("PATTERN_ARITY", f"axiom {a.name!r}: pattern has {len(body.pattern)} atoms, "
                   f"relation {rel.name!r} takes {len(rel.arg_sorts)}", a, a.name)
            continue
        for atom, want in zip(body.pattern, rel.arg_sorts):
            if isinstance(atom, (Term, Lit)) and not _fits(atom, want, sys):
                report("PATTERN_SORT", f"axiom {a.name!r}: literal {atom} does not fit sort "
                       f"{want!r}", a, a.name)
    return diags


# -- sorting ----------------------------------------------------------------


def literal_sorts(lit: Lit, sys: SignSystem) -> list[str]:
    return [s for s in LITERAL_SORTS[lit.kind] if sys.is_data_sort(s)]


def _fits(term: SignTerm, want: str, sys: SignSystem) -> bool:
    if isinstance(term, Lit):
        return want in literal_sorts(term, sys)
    try:
        got = well_sorted(term, sys)
    except SortError:
        return False
    return _leq(got, want, sys)


def well_sorted(term: SignTerm, sys: SignSystem) -> str:
    """Return the sort of ``term``; raise ``SortError`` if it is ill-formed."""
    if isinstance(term, Lit):
        sorts = literal_sorts(term, sys)
        if not sorts:
            raise SortError("NO_DATA_SORT", f"no data sort declared for {term.kind} literal {term}")
        return sorts[0]
    ctor = sys.ctor_map.get(term.ctor)
    if ctor is None:
        raise SortError("UNKNOWN_CONSTRUCTOR", f"constructor {term.ctor!r} is not declared")
    if len(term.args) != len(ctor.arg_sorts):
        raise SortError("ARITY_MISMATCH", f"{term.ctor} takes {len(ctor.arg_sorts)} "
                        f"arguments, got {len(term.args)}")
    for i, (arg, want) in enumerate(zip(term.args, ctor.arg_sorts)):
        if isinstance(arg, Lit):
            if want not in literal_sorts(arg, sys):
                raise SortError("SORT_MISMATCH", f"argument {i + 1} of {term.ctor}: "
                                f"literal {arg} is not of sort {want}")
            continue
        got = well_sorted(arg, sys)
        if not _leq(got, want, sys):
            raise SortError("SORT_MISMATCH", f"argument {i + 1} of {term.ctor}: "
                            f"{got} is not a subsort of {want}")
    return ctor.result_sort


# -- configurations ---------------------------------------------------------


@dataclass(frozen=True)
class Fact:
    """One relation tuple: a relation name applied to term names."""

    relation: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        return f"{self.relation}({','.join(self.args)})"


@dataclass(frozen=True)
class Configuration:
    """Finite model over a system: named ground terms plus relation tuples.

    Terms are kept sorted by name and facts deduplicated and sorted by their
    serialization, so equality is structural.
    """

    name: str
    system: SignSystem
    terms: tuple[tuple[str, SignTerm], ...] = ()
    facts: tuple[Fact, ...] = ()
    loc: tuple[int, int] | None = _loc()

    def __post_init__(self):
        pairs = list(self.terms.items()) if isinstance(self.terms, Mapping) else list(self.terms)
        names = [n for n, _ in pairs]
        if len(set(names)) != len(names):
            dup = sorted(n for n in set(names) if names.count(n) > 1)
            raise SortError("DUPLICATE_TERM", "duplicate term names: " + ", ".join(dup))
        object.__setattr__(self, "terms", tuple(sorted(pairs, key=lambda p: p[0])))
        facts = {f if isinstance(f, Fact) else Fact(*f) for f in self.facts}
        object.__setattr__(self, "facts", tuple(sorted(facts, key=str)))

    @cached_property
    def term_map(self) -> dict[str, SignTerm]:
        return dict(self.terms)

    @cached_property
    def sorts(self) -> dict[str, str | None]:
        out = {}
        for name, term in self.terms:
            try:
                out[name] = well_sorted(term, self.system)
            except SortError:
                out[name] = None
        return out

    def boundary(self, term_name: str) -> str | None:
        sort = self.sorts.get(term_name)
        decl = self.system.sort_map.get(sort) if sort else None
        return decl.boundary if decl is not None and decl.kind == SIGN else None

    def facts_of(self, relation: str) -> list[Fact]:
        return [f for f in self.facts if f.relation == relation]

    def with_facts(self, facts: Iterable[Fact]) -> "Configuration":
        return replace(self, facts=tuple(facts))

    def with_terms(self, terms) -> "Configuration":
        return replace(self, terms=terms)

    def canonical(self) -> str:
        terms = ";".join(f"{n}={t}" for n, t in self.terms)
        facts = ";".join(str(f) for f in self.facts)
        return f"{self.system.name}|{terms}|{facts}"


def validate_config(cfg: Configuration) -> list[Diagnostic]:
    sys = cfg.system
    diags = []
    for name, term in cfg.terms:
        try:
            well_sorted(term, sys)
        except SortError as e:
            diags.append(Diagnostic(e.code, f"term {name!r}: {e.message}", subject=name))
    for fact in cfg.facts:
        rel = sys.rel_map.get(fact.relation)
        if rel is None:
            diags.append(Diagnostic("UNKNOWN_RELATION", f"tuple {fact}: relation "
                                    f"{fact.relation!r} is not declared", subject=str(fact)))
            continue
        if len(fact.args) != len(rel.arg_sorts):
            diags.append(Diagnostic("ARITY_MISMATCH", f"tuple {fact}: relation {rel.name!r} "
                                    f"takes {len(rel.arg_sorts)} arguments", subject=str(fact)))
            continue
        for arg, want in zip(fact.args, rel.arg_sorts):
            if arg not in cfg.term_map:
                diags.append(Diagnostic("UNKNOWN_TERM", f"tuple {fact}: no term named {arg!r}",
                                        subject=str(fact)))
                continue
            got = cfg.sorts[arg]
            if got is not None and not _leq(got, want, sys):
                diags.append(Diagnostic("SORT_MISMATCH", f"tuple {fact}: {arg} has sort {got}, "
                                        f"expected {want}", subject=str(fact)))
    return diags


def fact_fits(fact: Fact, cfg: Configuration) -> bool:
    """True when ``fact`` is a well-sorted tuple over ``cfg``'s terms."""
    rel = cfg.system.rel_map.get(fact.relation)
    if rel is None or len(rel.arg_sorts) != len(fact.args):
        return False
    for arg, want in zip(fact.args, rel.arg_sorts):
        got = cfg.sorts.get(arg)
        if got is None or not _leq(got, want, cfg.system):
            return False
    return True


# -- constraint evaluation --------------------------------------------------


def matches(pattern: tuple[Atom, ...], fact: Fact, cfg: Configuration) -> bool:
    if len(pattern) != len(fact.args):
        return False
    bound: dict[str, str] = {}
    for atom, arg in zip(pattern, fact.args):
        if atom is WILDCARD:
            continue
        if isinstance(atom, Var):
            if bound.setdefault(atom.name, arg) != arg:
                return False
        elif cfg.term_map.get(arg) != atom:
            return False
    return True


def evaluate_constraint(c: Constraint, cfg: Configuration) -> bool:
    body = c.body
    if isinstance(body, AtMost):
        return len(cfg.facts_of(body.relation)) <= body.count
    hit = any(matches(body.pattern, f, cfg) for f in cfg.facts_of(body.relation))
    return hit if isinstance(body, Require) else not hit


class ProfileEntry(NamedTuple):
    name: str
    rank: int
    satisfied: bool


def constraint_profile(cfg: Configuration) -> list[ProfileEntry]:
    ordered = sorted(cfg.system.constraints, key=lambda c: (c.rank, c.name))
    return [ProfileEntry(c.name, c.rank, evaluate_constraint(c, cfg)) for c in ordered]


def violation_vector(profile: list[ProfileEntry]) -> tuple[tuple[int, int], ...]:
    """Per-rank violation counts, ascending rank; compares lexicographically."""
    counts: dict[int, int] = {}
    for e in profile:
        counts[e.rank] = counts.get(e.rank, 0) + (not e.satisfied)
    return tuple(sorted(counts.items()))
