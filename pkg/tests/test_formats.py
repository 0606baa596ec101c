import random

import pytest
from hypothesis import given, settings, strategies as st

from abocs import oracles as orc
from abocs.efrr import EfrrRelation
from abocs.systems import ValidationError
from abocs.formats import (
    FormatError,
    controller_dot,
    dump_controller,
    dump_relation,
    dump_system,
    load_controller,
    load_relation,
    load_system,
)
from abocs.synthesis import synthesize
from conftest import spec

S2_TEXT = """\
[states]
x0
x1
[initial]
x0
[inputs]
a
b
[outputs]
y0
y1
[trans]
x0 a -> x0 x1
x0 b -> x0
x1 a -> x1
[out]
x0 -> y0
x1 -> y0 y1
[aps]
input
output p
[preds.state]
x0 -> {}
x1 -> {p}
[preds.input]
a -> {}
b -> {}
"""


def test_golden_s2(s2, s2_pm):
    assert dump_system(s2, s2_pm) == S2_TEXT


def test_load_s2(s2, s2_pm):
    sys, pm = load_system(S2_TEXT)
    assert sys == s2 and pm == s2_pm


def test_comments_and_blank_lines(s2):
    text = "# plant\n\n" + S2_TEXT.replace("[trans]", "[trans]  # edges")
    assert load_system(text)[0] == s2


def test_controller_round_trip(s2, s2_pm):
    m = synthesize(s2, s2_pm, spec("G !p"))
    text = dump_controller(m)
    assert "0 y0 -> b 0" in text
    assert load_controller(text) == m
    assert dump_controller(load_controller(text)) == text


def test_controller_dot(s2, s2_pm):
    dot = controller_dot(synthesize(s2, s2_pm, spec("G !p")))
    assert dot.startswith("digraph") and "y0 / b" in dot


def test_relation_round_trip(s2):
    q = EfrrRelation.identity(s2)
    assert load_relation(dump_relation(q, s2, s2), s2, s2) == q


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace("x0 b -> x0", "x0 c -> x0"),
        lambda t: t.replace("[states]", "[states]\n[states]"),
        lambda t: "x0\n" + t,
        lambda t: t.replace("x1 -> {p}", "x1 -> p"),
        lambda t: t.replace("[out]\nx0 -> y0\n", "[out]\n"),
    ],
)
def test_malformed(mutate):
    # FormatError for syntax, ValidationError for well-formed but invalid systems
    with pytest.raises(ValidationError):
        load_system(mutate(S2_TEXT))


def test_format_error_has_line():
    with pytest.raises(FormatError) as e:
        load_system("x0\n" + S2_TEXT)
    assert e.value.line == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_random_round_trip(seed):
    inst = orc.random_instance(seed)
    text = dump_system(inst.sys, inst.pm)
    sys, pm = load_system(text)
    assert sys == inst.sys and pm == inst.pm
    assert dump_system(sys, pm) == text
