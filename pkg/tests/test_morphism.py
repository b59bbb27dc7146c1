import random

import pytest
from hypothesis import given, settings, strategies as st

from gen import enumerate_maps, random_config, random_system, renamed_copy
from oracles import epsilon as oracle_epsilon
from semiodesign.errors import MorphismError
from semiodesign.morphism import (
    SemioticMorphism,
    apply_morphism,
    compose,
    epsilon,
    epsilon_types,
    identity,
    inverse,
    is_isomorphism,
    is_level_preserving,
    is_natural,
    preservation_diagnostics,
    validate_morphism,
)
from semiodesign.sign_algebra import (
    ENVIRONMENT,
    Configuration,
    ConstructorDecl,
    Fact,
    Lit,
    RelationDecl,
    SignSystem,
    Term,
    data_sort,
    sign_sort,
    validate_config,
)


def codes(diags):
    return [d.code for d in diags]


def shelf_system(name="Shelf", levels=(0, 1)):
    return SignSystem(name, [data_sort("Real"), sign_sort("Part"), sign_sort("Tray"),
                             sign_sort("User", ENVIRONMENT)],
                      {("Tray", "Part")},
                      [ConstructorDecl("shelf", ["Real"], "Part", levels[0]),
                       ConstructorDecl("tray", ["Real"], "Tray", levels[1]),
                       ConstructorDecl("user", ["Real"], "User", 1)],
                      [RelationDecl("touches", ["Part", "Part"]), RelationDecl("uses", ["User", "Part"])])


def shelf_config(system):
    return Configuration("cfg", system,
                         {"a": Term("shelf", [Lit(1.0)]), "b": Term("tray", [Lit(2.0)]),
                          "u": Term("user", [Lit(0.0)])},
                         [Fact("touches", ["a", "b"]), Fact("uses", ["u", "a"]), Fact("uses", ["u", "b"])])


def renaming(src, tgt, name="m"):
    _, smap, cmap, rmap = renamed_copy(src, "_x")
    return SemioticMorphism(name, src, tgt, smap, cmap, rmap)


# -- validation -------------------------------------------------------------------

def test_identity_is_valid_iso_and_level_preserving():
    s = shelf_system()
    rep = validate_morphism(identity(s))
    assert rep.valid and rep.is_isomorphism and rep.is_level_preserving
    assert rep.diagnostics == ()


def test_data_sort_must_be_fixed():
    s = shelf_system()
    t = SignSystem("T", [data_sort("Real"), sign_sort("Nat")])
    m = SemioticMorphism("bad", s, t, {"Real": "Nat"})
    assert "DATA_SORT_CHANGED" in codes(preservation_diagnostics(m))
    assert not validate_morphism(m).valid


def test_subsort_order_must_be_kept():
    s = shelf_system()
    t = SignSystem("T", [sign_sort("P"), sign_sort("Q")])
    m = SemioticMorphism("flat", s, t, {"Part": "P", "Tray": "Q"})
    assert "ORDER_BROKEN" in codes(preservation_diagnostics(m))


def test_constructor_arity_and_sorts_checked():
    s = shelf_system()
    t = SignSystem("T", [data_sort("Real"), sign_sort("P")],
                   (), [ConstructorDecl("k", [], "P")])
    m = SemioticMorphism("m", s, t, {"Real": "Real", "Part": "P"}, {"shelf": "k"})
    assert not validate_morphism(m).valid


def test_undeclared_symbol_is_rejected():
    s = shelf_system()
    m = SemioticMorphism("m", s, s, {"Ghost": "Part"})
    assert not validate_morphism(m).valid
    with pytest.raises(MorphismError) as e:
        is_level_preserving(m)
    assert e.value.code == "INVALID_MORPHISM"


def test_full_renaming_is_isomorphism():
    s = shelf_system()
    t, *_ = renamed_copy(s, "_x")
    m = renaming(s, t)
    assert is_isomorphism(m)
    assert is_level_preserving(m) and is_level_preserving(inverse(m))


def test_unmapped_constructor_is_not_isomorphism():
    s = shelf_system()
    t, smap, cmap, rmap = renamed_copy(s, "_x")
    cmap.pop("tray")
    m = SemioticMorphism("m", s, t, smap, cmap, rmap)
    assert validate_morphism(m).valid
    assert not is_isomorphism(m)


def test_level_inversion_is_not_level_preserving():
    s = shelf_system(levels=(0, 1))
    t = shelf_system("Inv", levels=(1, 0))
    m = SemioticMorphism("m", s, t, {x.name: x.name for x in s.sorts},
                         {"shelf": "shelf", "tray": "tray"})
    assert validate_morphism(m).valid
    assert not is_level_preserving(m)


def test_level_collapse_is_level_preserving():
    s = shelf_system(levels=(0, 1))
    t = shelf_system("Flat", levels=(0, 0))
    m = SemioticMorphism("m", s, t, {x.name: x.name for x in s.sorts},
                         {"shelf": "shelf", "tray": "tray"})
    assert is_level_preserving(m)
    # bijective symbols but the level order is not reflected back
    full = SemioticMorphism("f", s, t, {x.name: x.name for x in s.sorts},
                            {c.name: c.name for c in s.constructors}, {r.name: r.name for r in s.relations})
    assert not is_isomorphism(full)


# -- composition ------------------------------------------------------------------

def test_compose_with_identity_keeps_maps():
    s = shelf_system()
    t, *_ = renamed_copy(s, "_x")
    m = renaming(s, t)
    for c in (compose(identity(t), m), compose(m, identity(s))):
        assert (c.sort_map, c.ctor_map, c.rel_map) == (m.sort_map, m.ctor_map, m.rel_map)


def test_compose_is_undefined_where_first_is():
    s = shelf_system()
    t, smap, cmap, rmap = renamed_copy(s, "_x")
    smap.pop("User")
    cmap.pop("user")
    rmap.pop("uses")
    m1 = SemioticMorphism("m1", s, t, smap, cmap, rmap)
    c = compose(identity(t), m1)
    assert "User" not in c.sort_map and "user" not in c.ctor_map


def test_compose_mismatch():
    s = shelf_system()
    t, *_ = renamed_copy(s, "_x")
    with pytest.raises(MorphismError) as e:
        compose(identity(s), identity(t))
    assert e.value.code == "SYSTEM_MISMATCH"


# -- translation ------------------------------------------------------------------

def test_apply_identity_is_identity():
    s = shelf_system()
    cfg = shelf_config(s)
    assert apply_morphism(identity(s), cfg) == cfg


def test_apply_drops_unmapped_constructor_and_its_tuples():
    s = shelf_system()
    m = SemioticMorphism("m", s, s, {x.name: x.name for x in s.sorts},
                         {"tray": "tray", "user": "user"}, {r.name: r.name for r in s.relations})
    out = apply_morphism(m, shelf_config(s))
    assert set(out.term_map) == {"b", "u"}
    assert list(out.facts) == [Fact("uses", ["u", "b"])]


def test_apply_full_renaming_hand_translated():
    s = SignSystem("S", [data_sort("Real"), sign_sort("Part"), sign_sort("User", ENVIRONMENT)], (),
                   [ConstructorDecl("shelf", ["Real"], "Part"), ConstructorDecl("user", ["Real"], "User")],
                   [RelationDecl("uses", ["User", "Part"])])
    t = SignSystem("T", [data_sort("Real"), sign_sort("Board"), sign_sort("Person", ENVIRONMENT)], (),
                   [ConstructorDecl("board", ["Real"], "Board"), ConstructorDecl("person", ["Real"], "Person")],
                   [RelationDecl("handles", ["Person", "Board"])])
    m = SemioticMorphism("m", s, t, {"Real": "Real", "Part": "Board", "User": "Person"},
                         {"shelf": "board", "user": "person"}, {"uses": "handles"})
    cfg = Configuration("c", s, {"p": Term("shelf", [Lit(0.5)]), "q": Term("user", [Lit(2.0)])},
                        [Fact("uses", ["q", "p"])])
    out = apply_morphism(m, cfg)
    assert out.system == t
    assert out.name == "c"
    assert out.term_map == {"p": Term("board", [Lit(0.5)]), "q": Term("person", [Lit(2.0)])}
    assert list(out.facts) == [Fact("handles", ["q", "p"])]
    assert validate_config(out) == []


def test_apply_rejects_foreign_configuration():
    s = shelf_system()
    t, *_ = renamed_copy(s, "_x")
    with pytest.raises(MorphismError) as e:
        apply_morphism(identity(t), shelf_config(s))
    assert e.value.code == "SYSTEM_MISMATCH"


# -- epsilon ----------------------------------------------------------------------

def test_epsilon_counts():
    s = shelf_system()
    cfg = shelf_config(s)
    assert epsilon(cfg.with_facts([])) == 0
    assert epsilon(cfg) == 2
    assert epsilon_types(cfg) == 1
    internal = cfg.with_facts([Fact("touches", ["a", "b"]), Fact("touches", ["b", "a"])])
    assert epsilon(internal) == 0


def test_epsilon_three_cross_two_internal():
    s = shelf_system()
    cfg = shelf_config(s)
    cfg = cfg.with_terms(dict(cfg.terms) | {"v": Term("user", [Lit(5.0)])})
    facts = [Fact("uses", ["u", "a"]), Fact("uses", ["u", "b"]), Fact("uses", ["v", "a"]),
             Fact("touches", ["a", "b"]), Fact("touches", ["b", "a"])]
    assert epsilon(cfg.with_facts(facts)) == 3


def _with_epsilon(n):
    s = shelf_system()
    users = {f"u{i}": Term("user", [Lit(float(i))]) for i in range(n)}
    cfg = Configuration("c", s, {"a": Term("shelf", [Lit(1.0)]), **users},
                        [Fact("uses", [u, "a"]) for u in users])
    assert epsilon(cfg) == n
    return cfg


@pytest.mark.parametrize("before,after,expected", [(5, 3, True), (4, 4, False), (3, 5, False)])
def test_is_natural(before, after, expected):
    assert is_natural(None, _with_epsilon(before), _with_epsilon(after)) is expected


# -- properties -------------------------------------------------------------------

def _valid_random_morphism(rng, src, tgt, tries=50):
    for _ in range(tries):
        m = SemioticMorphism(
            "m", src, tgt,
            {s.name: rng.choice([x.name for x in tgt.sorts]) for s in src.sorts if rng.random() < 0.8},
            {c.name: rng.choice([x.name for x in tgt.constructors]) for c in src.constructors
             if tgt.constructors and rng.random() < 0.7},
            {r.name: rng.choice([x.name for x in tgt.relations]) for r in src.relations
             if tgt.relations and rng.random() < 0.7},
        )
        if validate_morphism(m).valid:
            return m
    return SemioticMorphism("empty", src, tgt)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_composition_associative_and_unital(seed):
    rng = random.Random(seed)
    a, b, c, d = (random_system(rng, n) for n in "ABCD")
    f, g, h = _valid_random_morphism(rng, a, b), _valid_random_morphism(rng, b, c), _valid_random_morphism(rng, c, d)
    left, right = compose(h, compose(g, f)), compose(compose(h, g), f)
    assert (left.sort_map, left.ctor_map, left.rel_map) == (right.sort_map, right.ctor_map, right.rel_map)
    for u in (compose(f, identity(a)), compose(identity(b), f)):
        assert (u.sort_map, u.ctor_map, u.rel_map) == (f.sort_map, f.ctor_map, f.rel_map)
        assert validate_morphism(u).valid
    assert validate_morphism(compose(g, f)).valid


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_isomorphism_implies_monotone_both_ways(seed, invert):
    rng = random.Random(seed)
    src = random_system(rng, "S")
    tgt, smap, cmap, rmap = renamed_copy(src, "_c", invert_levels=invert)
    m = SemioticMorphism("m", src, tgt, smap, cmap, rmap)
    if is_isomorphism(m):
        assert is_level_preserving(m) and is_level_preserving(inverse(m))
    if not invert:
        assert is_isomorphism(m)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_yields_valid_config_and_no_new_tuples(seed):
    rng = random.Random(seed)
    src = random_system(rng, "S")
    cfg = random_config(rng, src)
    tgt, smap, cmap, rmap = renamed_copy(src, "_c", invert_levels=rng.random() < 0.5)
    for mapping in (smap, cmap, rmap):
        for k in sorted(mapping):
            if rng.random() < 0.25:
                mapping.pop(k)
    m = SemioticMorphism("m", src, tgt, smap, cmap, rmap)
    if not validate_morphism(m).valid:
        return
    out = apply_morphism(m, cfg)
    assert validate_config(out) == []
    assert len(out.facts) <= len(cfg.facts)
    assert epsilon(out) <= len(cfg.facts)
    assert epsilon(out) == oracle_epsilon(out)


def test_enumerated_maps_cover_every_partial_map():
    assert sum(1 for _ in enumerate_maps(["a", "b"], ["x", "y"])) == 9
