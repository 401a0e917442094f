import random
from importlib import resources

import pytest

from lexpcfg.grammar import parse_grammar
from lexpcfg.parser import Sentence, Token


def sent(*pairs):
    """sent('w/A', 'v/B|C') -> Sentence."""
    toks = []
    for p in pairs:
        w, _, tags = p.rpartition('/')
        toks.append(Token(w, frozenset(tags.split('|'))))
    return Sentence(toks)


@pytest.fixture
def sample_text():
    return resources.files('lexpcfg').joinpath(
        'data/sample.grammar').read_text(encoding='utf-8')


@pytest.fixture
def sample_grammar(sample_text):
    return parse_grammar(sample_text)


# N1 is the sentence category; A1 modifiers stack on the left
BIG_BIG_PROBLEM = """
start N1;
N1 -> A1 N1' | N';
A1 -> A';
big : A;
problem : N;
"""


@pytest.fixture
def np_grammar():
    return parse_grammar(BIG_BIG_PROBLEM)


# PP attachment ambiguity: "v n p n" attaches to the verb or the noun
ATTACH = """
start S;
S -> VP';
VP -> V' NP | V' NP PP;
NP -> N' | N' PP;
PP -> P' NP;
saw : V;
man : N;
hill : N;
on : P;
"""


@pytest.fixture
def attach_grammar():
    return parse_grammar(ATTACH)


@pytest.fixture
def rng():
    return random.Random(12345)
