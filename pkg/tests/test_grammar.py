import pytest

from lexpcfg.grammar import (GrammarError, HeadedGrammar, Rule,
                             add_state_rules, dump_grammar,
                             generate_state_rules, parse_grammar,
                             projection_closure, state_pair_name, validate)
from lexpcfg.parser import count_trees, enumerate_trees, parse

from conftest import sent


def test_minimal_grammar():
    g = parse_grammar("start S; S -> A'; w : A;")
    assert len(g.rules) == 1
    assert g.rules[0] == Rule('S', (), 'A', ())
    assert g.rules[0].head == 'A'


def test_missing_head_marker_reports_line():
    with pytest.raises(GrammarError, match='line 2.*head'):
        parse_grammar("start S;\nS -> A B;\nw : A;")


def test_two_head_markers():
    with pytest.raises(GrammarError, match='head'):
        parse_grammar("start S; S -> A' B'; w : A B;")


def test_missing_start():
    with pytest.raises(GrammarError, match='start'):
        parse_grammar("S -> A'; w : A;")


def test_undeclared_category():
    with pytest.raises(GrammarError, match='undeclared'):
        parse_grammar("start S; S -> A' X; w : A;")


def test_complement_rule_fields():
    g = parse_grammar("start VFP; VFP -> VFC' VTOP; VFC -> V'; "
                      "VTOP -> T'; decided : V; to : T;")
    r = g.rules[0]
    assert (r.lhs, r.left, r.head, r.right) == ('VFP', (), 'VFC', ('VTOP',))
    assert r.nonheads == ('VTOP',)
    assert r.head_index == 0
    assert str(r) == "VFP -> VFC' VTOP"


def test_alternatives_and_comments():
    g = parse_grammar("# c\nstart S; S -> A' | B'; # trailing\nw : A B;")
    assert len(g.rules) == 2


def test_projection_chain():
    g = parse_grammar("start M; N -> T'; M -> N'; w : T;")
    assert projection_closure(g) == {('w', 'N'), ('w', 'M')}


def test_projection_ignores_flanks():
    g = parse_grammar("start N; N -> X T' Y; X -> T'; Y -> T'; w : T;")
    assert ('w', 'N') in projection_closure(g)


def test_projection_through_complement_rule(sample_grammar):
    closure = projection_closure(sample_grammar)
    assert ('asked', 'VFC') in closure
    assert ('asked', 'VFP') in closure
    assert ('question', 'NP') in closure
    assert ('of', 'NP') not in closure


def test_sample_grammar_valid(sample_grammar):
    assert validate(sample_grammar) == []
    assert sample_grammar.chunks == {'NC', 'PC', 'VFC', 'VTOC'}


def test_dump_round_trip(sample_grammar):
    text = dump_grammar(sample_grammar)
    again = parse_grammar(text)
    assert again == sample_grammar
    assert dump_grammar(again) == text


def test_nonterminal_without_rule():
    g = parse_grammar("start S; nonterminals X; S -> A'; w : A;",
                      check=False)
    diags = validate(g)
    assert [(d.condition, d.symbol) for d in diags] == [('iv', 'X')]


def test_terminal_never_on_rhs():
    g = parse_grammar("start S; S -> A'; w : A B;", check=False)
    diags = validate(g)
    assert [(d.condition, d.symbol) for d in diags] == [('iv', 'B')]


def test_nonterminal_nonhead_daughter_required():
    g = parse_grammar("start S; S -> A' B; w : A B;", check=False)
    assert any(d.condition == 'iv' for d in validate(g))


def test_category_both_kinds():
    g = HeadedGrammar('S', [Rule('S', (), 'A', ()), Rule('A', (), 'B', ())],
                      {'w': {'A', 'B'}})
    assert any(d.condition == 'i' for d in validate(g))


def test_start_must_be_nonterminal():
    g = parse_grammar("start Q; S -> A'; w : A;", check=False)
    assert any(d.condition == 'v' for d in validate(g))


def test_unary_cycle_detected():
    g = parse_grammar("start S; S -> B' | A'; B -> S'; w : A;")
    assert g.unary_cycle() is not None
    with pytest.raises(GrammarError):
        parse(sent('w/A'), g)


def test_state_rules_single_category():
    base = parse_grammar("start TOP; nonterminals TOP; A -> a'; x : a;",
                         check=False)
    g = base.with_rules(generate_state_rules(['A'], 'TOP'))
    assert validate(g) == []
    for k in (1, 2, 3):
        f = parse(sent(*['x/a'] * k), g)
        assert f is not None and count_trees(f) == 1


def test_state_rules_pair_count():
    rules = generate_state_rules(['A', 'B'], 'TOP')
    states = {r.lhs for r in rules} - {'TOP'}
    pairs = {s for s in states if s.count('_') == 2}
    assert pairs == {state_pair_name(x, y) for x in 'AB' for y in 'AB'}


def test_state_rules_empty():
    with pytest.raises(GrammarError):
        generate_state_rules([], 'TOP')


def test_state_rules_name_clash():
    with pytest.raises(GrammarError, match='collision'):
        generate_state_rules(['A'], 'TOP', existing={'ST_A'})


def test_state_rules_on_sample(sample_grammar):
    g = add_state_rules(sample_grammar, ['NP', 'PP', 'VFP'])
    assert validate(g) == []
    s = sent('the/D', 'committee/N', 'of/P', 'parliament/N')
    f = parse(s, g)
    assert f is not None
    trees = list(enumerate_trees(f))
    assert trees and all(t.cat == 'ROOT' for t in trees)


def test_with_rules_keeps_lexicon(sample_grammar):
    g = add_state_rules(sample_grammar, ['NP'])
    assert g.lexicon == sample_grammar.lexicon
    assert len(g.rules) > len(sample_grammar.rules)


def test_unknown_phrasal_category(sample_grammar):
    with pytest.raises(GrammarError):
        add_state_rules(sample_grammar, ['NOPE'])
