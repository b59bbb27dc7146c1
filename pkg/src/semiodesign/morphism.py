"""Semiotic morphisms: partial structure-preserving translations between systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .errors import Diagnostic, MorphismError
from .sign_algebra import (
    ENVIRONMENT,
    PRODUCT,
    Configuration,
    Fact,
    Lit,
    SignSystem,
    SignTerm,
    SortError,
    Term,
    fact_fits,
    literal_sorts,
    well_sorted,
)


@dataclass(frozen=True, eq=True)
class SemioticMorphism:
    name: str
    source: SignSystem
    target: SignSystem
    sort_map: dict[str, str] = field(default_factory=dict)
    ctor_map: dict[str, str] = field(default_factory=dict)
    rel_map: dict[str, str] = field(default_factory=dict)
    loc: tuple[int, int] | None = field(default=None, compare=False, repr=False)

    __hash__ = None  # maps are dicts

    def __post_init__(self):
        for attr in ("sort_map", "ctor_map", "rel_map"):
            object.__setattr__(self, attr, dict(getattr(self, attr)))

    @property
    def is_endomorphism(self) -> bool:
        return self.source is self.target or self.source == self.target


@dataclass(frozen=True)
class MorphismReport:
    valid: bool
    diagnostics: tuple[Diagnostic, ...]
    is_isomorphism: bool
    is_level_preserving: bool


def identity(sys: SignSystem, name: str | None = None) -> SemioticMorphism:
    return SemioticMorphism(
        name or f"id_{sys.name}", sys, sys,
        {s.name: s.name for s in sys.sorts},
        {c.name: c.name for c in sys.constructors},
        {r.name: r.name for r in sys.relations},
    )


def preservation_diagnostics(m: SemioticMorphism) -> list[Diagnostic]:
    src, tgt = m.source, m.target
    diags: list[Diagnostic] = []
    for label, mapping, sdecl, tdecl in (
        ("sort", m.sort_map, src.sort_map, tgt.sort_map),
        ("ctor", m.ctor_map, src.ctor_map, tgt.ctor_map),
        ("rel", m.rel_map, src.rel_map, tgt.rel_map),
    ):
        for k, v in sorted(mapping.items()):
            if k not in sdecl:
                diags.append(Diagnostic("UNKNOWN_SOURCE_SYMBOL",
                                        f"{label} {k!r} is not declared in {src.name}", subject=k))
            if v not in tdecl:
                diags.append(Diagnostic("UNKNOWN_TARGET_SYMBOL",
                                        f"{label} {v!r} is not declared in {tgt.name}", subject=v))
    if diags:
        return diags

    smap = m.sort_map
    # data sorts are fixed by name and kind
    for s, t in sorted(smap.items()):
        if src.is_data_sort(s) and not (t == s and tgt.is_data_sort(t)):
            diags.append(Diagnostic("DATA_SORT_CHANGED", f"data sort {s} mapped to {t}", subject=s))

    for s1 in sorted(smap):
        for s2 in sorted(src.upsets[s1]):
            if s2 != s1 and s2 in smap and smap[s2] not in tgt.upsets[smap[s1]]:
                diags.append(Diagnostic(
                    "ORDER_BROKEN", f"{s1} <= {s2} but {smap[s1]} is not <= {smap[s2]}",
                    subject=s1))

    for code, mapping, sdecls, tdecls in (
        ("CTOR_SORT_MISMATCH", m.ctor_map, src.ctor_map, tgt.ctor_map),
        ("REL_SORT_MISMATCH", m.rel_map, src.rel_map, tgt.rel_map),
    ):
        for k, v in sorted(mapping.items()):
            a, b = sdecls[k], tdecls[v]
            if len(a.arg_sorts) != len(b.arg_sorts):
                diags.append(Diagnostic("ARITY_MISMATCH", f"{k} has arity {len(a.arg_sorts)}, "
                                        f"{v} has arity {len(b.arg_sorts)}", subject=k))
                continue
            pairs = list(enumerate(zip(a.arg_sorts, b.arg_sorts)))
            if hasattr(a, "result_sort"):
                pairs.append(("result", (a.result_sort, b.result_sort)))
            for pos, (sa, sb) in pairs:
                if sa in smap and smap[sa] != sb:
                    diags.append(Diagnostic(code, f"{k} -> {v}: position {pos} has {sa} "
                                            f"mapped to {smap[sa]}, expected {sb}", subject=k))
    return diags


def _level_monotone(ctor_map, src: SignSystem, tgt: SignSystem) -> bool:
    items = [(src.ctor_map[c].level, tgt.ctor_map[d].level) for c, d in ctor_map.items()]
    for (l1, m1), (l2, m2) in combinations(items, 2):
        if l1 <= l2 and m1 > m2:
            return False
        if l2 <= l1 and m2 > m1:
            return False
    return True


def _require_valid(m: SemioticMorphism):
    diags = preservation_diagnostics(m)
    if diags:
        raise MorphismError("INVALID_MORPHISM", f"{m.name}: {diags[0].message}")


def is_level_preserving(m: SemioticMorphism) -> bool:
    _require_valid(m)
    return _level_monotone(m.ctor_map, m.source, m.target)


def _bijective(mapping: dict, source_names, target_names) -> bool:
    return (set(mapping) == set(source_names) and set(mapping.values()) == set(target_names)
            and len(set(mapping.values())) == len(mapping))


def inverse(m: SemioticMorphism) -> SemioticMorphism:
    maps = []
    for mapping in (m.sort_map, m.ctor_map, m.rel_map):
        inv = {v: k for k, v in mapping.items()}
        if len(inv) != len(mapping):
            raise MorphismError("NOT_INJECTIVE", f"{m.name} is not injective")
        maps.append(inv)
    return SemioticMorphism(f"{m.name}_inv", m.target, m.source, *maps)


def _isomorphic(m: SemioticMorphism) -> bool:
    src, tgt = m.source, m.target
    if not (_bijective(m.sort_map, src.sort_map, tgt.sort_map)
            and _bijective(m.ctor_map, src.ctor_map, tgt.ctor_map)
            and _bijective(m.rel_map, src.rel_map, tgt.rel_map)):
        return False
    inv = inverse(m)
    if preservation_diagnostics(inv):
        return False
    # an order-isomorphism on constructor levels as well
    return (_level_monotone(m.ctor_map, src, tgt)
            and _level_monotone(inv.ctor_map, tgt, src))


def is_isomorphism(m: SemioticMorphism) -> bool:
    _require_valid(m)
    return _isomorphic(m)


def validate_morphism(m: SemioticMorphism) -> MorphismReport:
    diags = preservation_diagnostics(m)
    if diags:
        return MorphismReport(False, tuple(diags), False, False)
    return MorphismReport(True, (), _isomorphic(m),
                          _level_monotone(m.ctor_map, m.source, m.target))


def _compose_maps(second: dict, first: dict) -> dict:
    return {k: second[v] for k, v in first.items() if v in second}


def compose(m2: SemioticMorphism, m1: SemioticMorphism, name: str | None = None) -> SemioticMorphism:
    """``m2 . m1``: apply ``m1`` first."""
    if not (m1.target is m2.source or m1.target == m2.source):
        raise MorphismError("SYSTEM_MISMATCH",
                            f"target of {m1.name} ({m1.target.name}) is not the source of "
                            f"{m2.name} ({m2.source.name})")
    return SemioticMorphism(
        name or f"{m2.name}_o_{m1.name}", m1.source, m2.target,
        _compose_maps(m2.sort_map, m1.sort_map),
        _compose_maps(m2.ctor_map, m1.ctor_map),
        _compose_maps(m2.rel_map, m1.rel_map),
    )


def translate_term(m: SemioticMorphism, term: SignTerm) -> SignTerm | None:
    """Head-wise translation; ``None`` when some symbol is unmapped."""
    if isinstance(term, Lit):
        sorts = literal_sorts(term, m.source)
        return term if sorts and sorts[0] in m.sort_map else None
    head = m.ctor_map.get(term.ctor)
    if head is None:
        return None
    args = []
    for a in term.args:
        t = translate_term(m, a)
        if t is None:
            return None
        args.append(t)
    return Term(head, tuple(args))


def apply_morphism(m: SemioticMorphism, cfg: Configuration, name: str | None = None) -> Configuration:
    """Translate ``cfg`` along ``m``.

    Terms using an unmapped symbol, or whose translation is not well-sorted in
    the target, are dropped together with every tuple that mentions them.
    """
    _require_valid(m)
    if not (cfg.system is m.source or cfg.system == m.source):
        raise MorphismError("SYSTEM_MISMATCH", f"configuration {cfg.name} is not over {m.source.name}")
    terms = {}
    for tname, term in cfg.terms:
        t = translate_term(m, term)
        if t is None:
            continue
        try:
            well_sorted(t, m.target)
        except SortError:
            continue
        terms[tname] = t
    out = Configuration(name or cfg.name, m.target, terms)
    facts = []
    for f in cfg.facts:
        rel = m.rel_map.get(f.relation)
        if rel is None or not all(a in terms for a in f.args):
            continue
        nf = Fact(rel, f.args)
        if fact_fits(nf, out):
            facts.append(nf)
    return out.with_facts(facts)


def _crosses(fact: Fact, cfg: Configuration) -> bool:
    tags = {cfg.boundary(a) for a in fact.args}
    return PRODUCT in tags and ENVIRONMENT in tags


def epsilon(cfg: Configuration) -> int:
    """Number of relation tuples linking a product sign to an environment sign."""
    return sum(1 for f in cfg.facts if _crosses(f, cfg))


def epsilon_types(cfg: Configuration) -> int:
    """Number of distinct relations with at least one cross-boundary tuple."""
    return len({f.relation for f in cfg.facts if _crosses(f, cfg)})


def is_natural(m: SemioticMorphism | None, before: Configuration, after: Configuration) -> bool:
    return epsilon(before) > epsilon(after)
