import random
from itertools import product as cartesian

import pytest
from hypothesis import given, settings, strategies as st

from gen import random_config, random_sequence, random_system, renamed_copy
from semiodesign.errors import SemiosisError
from semiodesign.morphism import SemioticMorphism, epsilon, identity
from semiodesign.semiosis import (
    Branch,
    MorphismStep,
    Selection,
    check_law_one,
    check_law_two,
    check_laws,
    collapse_past,
    diachronic_variety,
    is_well_defined,
    make_component,
    make_sequence,
    sample_trajectory,
    selection,
    synchronic_variety,
    variation,
)
from semiodesign.sign_algebra import (
    ENVIRONMENT,
    WILDCARD,
    AtMost,
    Configuration,
    Constraint,
    ConstructorDecl,
    Fact,
    Forbid,
    Lit,
    RelationDecl,
    Require,
    SignSystem,
    Term,
    constraint_profile,
    data_sort,
    sign_sort,
    term_symbols,
    validate_config,
    violation_vector,
)


def asm_system():
    return SignSystem("Asm", [sign_sort("Part"), sign_sort("Asm")], (),
                      [ConstructorDecl("p", [], "Part"), ConstructorDecl("q", [], "Part"),
                       ConstructorDecl("assemble", ["Part", "Part"], "Asm", 1)],
                      [RelationDecl("holds", ["Asm", "Part"])])


def asm_config():
    s = asm_system()
    return Configuration("c", s, {"p1": Term("p", []), "p2": Term("q", [])})


def touch_system(*axioms):
    return SignSystem("T", [data_sort("Real"), sign_sort("Part"), sign_sort("User", ENVIRONMENT)], (),
                      [ConstructorDecl("shelf", ["Real"], "Part"), ConstructorDecl("user", ["Real"], "User", 1)],
                      [RelationDecl("touches", ["Part", "Part"]), RelationDecl("uses", ["User", "Part"])],
                      list(axioms))


def touch_config(sys, facts):
    terms = {n: Term("shelf", [Lit(float(i))]) for i, n in enumerate("abc")}
    terms["u"] = Term("user", [Lit(0.0)])
    return Configuration("c", sys, terms, facts)


# -- variety ----------------------------------------------------------------------

def test_synchronic_and_diachronic_variety():
    s = touch_system()
    internal = [Fact("touches", ["a", "b"]), Fact("touches", ["b", "c"])]
    cross = [Fact("uses", ["u", x]) for x in "abc"]
    assert synchronic_variety(touch_config(s, [])) == 0
    assert synchronic_variety(touch_config(s, internal + cross)) == 2
    assert synchronic_variety(touch_config(s, cross)) == 0
    c1, c2 = touch_config(s, internal), touch_config(s, cross)
    assert diachronic_variety([]) == 0
    assert diachronic_variety([c1, c1, c1]) == 1
    assert diachronic_variety([c1, c2, c1]) == 2


# -- variation --------------------------------------------------------------------

def test_variation_without_applicable_constructors_is_identity():
    s = SignSystem("N", [sign_sort("Part"), sign_sort("Asm")], (),
                   [ConstructorDecl("join", ["Asm"], "Part")])
    cfg = Configuration("c", s)
    assert variation(cfg, 3, 0) == cfg


def test_variation_depth_two_adds_all_ordered_pairs():
    cfg = asm_config()
    out = variation(cfg, 2, 0)
    new = {t for n, t in out.terms} - {t for n, t in cfg.terms}
    # oracle: every ground Asm term over the two parts
    parts = [Term("p", []), Term("q", [])]
    expected = {Term("assemble", pair) for pair in cartesian(parts, repeat=2)}
    assert new == expected
    assert len(new) == 4
    assert out.facts == cfg.facts


def test_variation_budget_adds_tuples_deterministically():
    cfg = asm_config()
    a = variation(cfg, 1, 3, seed=7)
    b = variation(cfg, 1, 3, seed=7)
    assert a == b
    assert len(a.facts) == 3
    assert validate_config(a) == []


def test_variation_rejects_bad_bounds():
    with pytest.raises(SemiosisError):
        variation(asm_config(), 0, 0)


# -- selection --------------------------------------------------------------------

def test_selection_fixed_point_when_satisfied():
    s = touch_system(Constraint("f", 0, Forbid("uses", [WILDCARD, WILDCARD])))
    cfg = touch_config(s, [Fact("touches", ["a", "b"])])
    res = selection(cfg)
    assert res.ok and res.config == cfg


def test_selection_removes_forbidden_tuple_only():
    s = touch_system(Constraint("f", 0, Forbid("uses", [WILDCARD, WILDCARD])))
    cfg = touch_config(s, [Fact("touches", ["a", "b"]), Fact("uses", ["u", "a"])])
    assert list(selection(cfg).config.facts) == [Fact("touches", ["a", "b"])]


def test_at_most_keeps_least_serialized_tuple():
    s = touch_system(Constraint("k", 0, AtMost("touches", 1)))
    facts = [Fact("touches", ["c", "a"]), Fact("touches", ["a", "c"]), Fact("touches", ["b", "a"])]
    out = selection(touch_config(s, facts)).config
    # oracle: drop the greatest serialization one at a time until one is left
    remaining = sorted(facts, key=str)
    while len(remaining) > 1:
        remaining.remove(max(remaining, key=str))
    assert list(out.facts) == remaining == [Fact("touches", ["a", "c"])]


def test_unmet_require_is_flagged_not_repaired():
    s = touch_system(Constraint("r", 1, Require("uses", [WILDCARD, WILDCARD])))
    res = selection(touch_config(s, []))
    assert not res.ok and res.unrepairable == ("r",)
    assert res.config.facts == ()


def test_minimality_removes_unreferenced_new_terms():
    cfg = asm_config()
    grown = variation(cfg, 1, 0)
    out = selection(grown, True, cfg).config
    assert out.term_map == cfg.term_map


# -- components -------------------------------------------------------------------

def test_component_probability_checks():
    cfg = asm_config()
    s = cfg.system
    ok = make_component(cfg, [], [Branch(identity(s), 0.5, s), Branch(identity(s), 0.5, s)], 0, 1)
    assert ok.probabilities == [0.5, 0.5]
    make_component(cfg, [], [Branch(identity(s), 1.0, s)], 0, 1)
    with pytest.raises(SemiosisError) as e:
        make_component(cfg, [], [Branch(identity(s), 0.6, s), Branch(identity(s), 0.5, s)], 0, 1)
    assert e.value.code == "PROB_SUM"
    with pytest.raises(SemiosisError) as e:
        make_component(cfg, [], [Branch(identity(s), 1.0, s), Branch(identity(s), 0.0, s)], 0, 1)
    assert e.value.code == "NONPOSITIVE_PROB"
    with pytest.raises(SemiosisError) as e:
        make_component(cfg, [], [Branch(identity(s), 1.0, s)], 3, 3)
    assert e.value.code == "TIME_ORDER"


def test_closure_violation_for_foreign_step():
    cfg = asm_config()
    s = cfg.system
    other, *_ = renamed_copy(s, "_o")
    _, smap, cmap, rmap = renamed_copy(s, "_o")
    step = MorphismStep(SemioticMorphism("out", s, other, smap, cmap, rmap))
    with pytest.raises(SemiosisError) as e:
        make_component(cfg, [step], [Branch(identity(s), 1.0, s)], 0, 1)
    assert e.value.code == "CLOSURE_VIOLATION"


def test_well_definedness():
    s = touch_system(Constraint("f", 0, Forbid("uses", [WILDCARD, WILDCARD])))
    cfg = touch_config(s, [Fact("uses", ["u", "a"])])
    ident = Branch(identity(s), 1.0, s)
    assert not is_well_defined(make_component(cfg, [], [ident], 0, 1))
    drop = SemioticMorphism("drop", s, s, {x.name: x.name for x in s.sorts}, {"shelf": "shelf"},
                            {"touches": "touches"})
    assert is_well_defined(make_component(cfg, [], [Branch(drop, 1.0, s)], 0, 1))
    # selection deletes the forbidden tuple on the source configuration
    assert selection(cfg).config != cfg
    assert is_well_defined(make_component(cfg, [Selection()], [ident], 0, 1))
    assert not is_well_defined(make_component(cfg.with_facts([]), [Selection()], [ident], 0, 1))


def _levels_system(name, shelf_level, user_level):
    return SignSystem(name, [data_sort("Real"), sign_sort("Part"), sign_sort("User", ENVIRONMENT)], (),
                      [ConstructorDecl("shelf", ["Real"], "Part", shelf_level),
                       ConstructorDecl("user", ["Real"], "User", user_level)],
                      [RelationDecl("touches", ["Part", "Part"]), RelationDecl("uses", ["User", "Part"])])


def _full(src, tgt, name, rels=("touches", "uses")):
    return SemioticMorphism(name, src, tgt, {x.name: x.name for x in src.sorts},
                            {c.name: c.name for c in src.constructors}, {r: r for r in rels})


def test_law_one_examples():
    s = _levels_system("S", 0, 1)
    inv = _levels_system("Inv", 1, 0)
    cfg = touch_config(s, [Fact("uses", ["u", "a"]), Fact("uses", ["u", "b"])])
    ident = make_sequence("id", [make_component(cfg, [], [Branch(identity(s), 1.0, s)], 0, 1)])
    rep = check_law_one(ident)
    assert not rep.law1_holds and rep.well_defined_witness is None and rep.level_break_witness is None

    lossy = make_sequence("lossy", [make_component(
        cfg, [], [Branch(_full(s, s, "drop", ("touches",)), 1.0, s)], 0, 1)])
    rep = check_law_one(lossy)
    assert not rep.law1_holds and rep.well_defined_witness == 0 and rep.level_break_witness is None

    both = make_sequence("both", [make_component(
        cfg, [], [Branch(_full(s, inv, "flip", ("touches",)), 1.0, inv)], 0, 1)])
    rep = check_law_one(both)
    assert rep.law1_holds and rep.well_defined_witness == 0 and rep.level_break_witness == (0, 0)


def test_law_two_examples():
    s = _levels_system("S", 0, 1)
    cfg = touch_config(s, [Fact("uses", ["u", "a"]), Fact("uses", ["u", "b"]), Fact("touches", ["a", "b"])])
    assert epsilon(cfg) == 2
    seq = make_sequence("two", [make_component(
        cfg, [], [Branch(_full(s, s, "cut", ("touches",)), 0.5, s), Branch(identity(s), 0.5, s)], 0, 1)])
    verdicts = check_law_two(seq)
    assert [(v.epsilon_before, v.epsilon_after, v.natural) for v in verdicts] == [(2, 0, True), (2, 2, False)]
    zero = make_sequence("zero", [make_component(
        cfg.with_facts([]), [], [Branch(_full(s, s, "cut", ("touches",)), 1.0, s)], 0, 1)])
    assert [v.natural for v in check_law_two(zero)] == [False]
    assert not check_laws(seq).law2_holds


def test_bundled_refrigerator_satisfies_both_laws():
    from semiodesign.sgn_dsl import load_file
    from importlib.resources import files
    sf = load_file(str(files("semiodesign") / "data" / "refrigerator.sgn"))
    assert sf.ok
    rep = check_laws(sf.get("sequence", "redesign"))
    assert rep.law1_holds and rep.law2_holds
    assert [(v.epsilon_before, v.epsilon_after) for v in rep.law2_verdicts] == [(2, 1), (2, 1)]


# -- trajectories -----------------------------------------------------------------

def _two_branch_seq():
    s = _levels_system("S", 0, 1)
    cfg = touch_config(s, [Fact("uses", ["u", "a"])])
    return make_sequence("b", [make_component(
        cfg, [], [Branch(identity(s), 0.25, s), Branch(_full(s, s, "cut", ("touches",)), 0.75, s)], 0, 1)])


def test_sampling_is_deterministic_and_forced_for_single_branch():
    seq = _two_branch_seq()
    assert sample_trajectory(seq, 11) == sample_trajectory(seq, 11)
    single = collapse_past(seq, [1])
    assert {sample_trajectory(single, k).indices for k in range(50)} == {(0,)}
    assert single.components[0].branches[0].morphism.name == "cut"


def test_collapse_past():
    seq = _two_branch_seq()
    out = collapse_past(seq, [0])
    assert len(out.components[0].branches) == 1
    assert out.components[0].probabilities == [1.0]
    assert collapse_past(out, [0]) == out
    with pytest.raises(SemiosisError) as e:
        collapse_past(seq, [5])
    assert e.value.code == "INDEX_OUT_OF_RANGE"


# -- properties -------------------------------------------------------------------

def _symbols(cfg):
    ctors, lits = set(), set()
    for _, t in cfg.terms:
        c, l = term_symbols(t)
        ctors |= c
        lits |= l
    return ctors, lits, {f.relation for f in cfg.facts}


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(0, 4))
def test_variation_respects_information_closure(seed, depth, budget):
    rng = random.Random(seed)
    sys = random_system(rng, constraints=True)
    cfg = random_config(rng, sys)
    out = variation(cfg, depth, budget, seed, max_new_terms=300)
    ctors, lits, rels = _symbols(out)
    assert ctors <= {c.name for c in sys.constructors}
    assert rels <= {r.name for r in sys.relations}
    assert lits <= _symbols(cfg)[1]
    assert set(cfg.facts) <= set(out.facts)
    assert synchronic_variety(out) >= synchronic_variety(cfg)
    assert validate_config(out) == []


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_selection_properties(seed, minimal):
    rng = random.Random(seed)
    sys = random_system(rng, constraints=True)
    cfg = random_config(rng, sys)
    once = selection(cfg, minimal).config
    assert epsilon(once) <= epsilon(cfg)
    assert selection(once, minimal, cfg).config == once
    assert violation_vector(constraint_profile(once)) <= violation_vector(constraint_profile(cfg))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_variation_then_selection_with_forbids_only(seed):
    rng = random.Random(seed)
    sys = random_system(rng, constraints=True)
    sys = SignSystem(sys.name, sys.sorts, sys.subsort_edges, sys.constructors, sys.relations,
                     [c for c in sys.constraints if isinstance(c.body, Forbid)])
    cfg = random_config(rng, sys)

    def rank0(c):
        return sum(1 for e in constraint_profile(c) if e.rank == 0 and not e.satisfied)

    out = selection(variation(cfg, 1, 3, seed, max_new_terms=200)).config
    assert rank0(out) <= rank0(cfg)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_collapse_of_sampled_trajectory_reproduces_it(seed):
    rng = random.Random(seed)
    seq = random_sequence(rng)
    t = sample_trajectory(seq, seed)
    chosen = [c.branches[k].morphism for c, k in zip(seq.components, t.indices)]
    collapsed = collapse_past(seq, t.indices)
    for k in range(5):
        again = sample_trajectory(collapsed, k)
        assert [c.branches[i].morphism for c, i in zip(collapsed.components, again.indices)] == chosen
    assert sample_trajectory(collapsed, seed).configs == t.configs


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_law_one_fails_on_pure_renamings(seed):
    seq = random_sequence(random.Random(seed), iso_only=True)
    assert not check_law_one(seq).law1_holds
