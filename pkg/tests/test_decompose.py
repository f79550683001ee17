import random
import string

import pytest

from subhop.decompose import (
    AnswerContext,
    DecompositionPlan,
    decompose,
    placeholder_refs,
    rewrite,
    single_question_plan,
    substitute_placeholders,
)
from subhop.errors import MissingDependency
from subhop.stub import rule

from helpers import stub_gateway


def ctx(*pairs):
    context = AnswerContext()
    for index, answer in pairs:
        context.add(index, answer)
    return context


def test_decompose_two_hop_plan():
    gw = stub_gateway([
        rule("decompose", ["Who directed Inception?", "Who is the spouse of #1?"]),
    ])
    plan = decompose("Who is the spouse of the director of Inception?", gw)
    assert plan.sub_questions == ["Who directed Inception?", "Who is the spouse of #1?"]
    assert not plan.degraded
    assert len(plan) == 2


def test_forward_reference_degrades_to_single_plan():
    gw = stub_gateway([rule("decompose", ["What about #2?", "Second?"])])
    plan = decompose("original question", gw)
    assert plan.sub_questions == ["original question"]
    assert plan.degraded
    assert "decompose:degraded" in plan.warnings


def test_self_reference_in_first_step_degrades():
    gw = stub_gateway([rule("decompose", ["What is #1?"])])
    plan = decompose("original question", gw)
    assert plan.degraded


def test_plan_truncated_to_cap():
    gw = stub_gateway([rule("decompose", [f"step {i}?" for i in range(1, 9)])])
    plan = decompose("big question", gw, cap=6)
    assert len(plan) == 6
    assert "decompose:truncated" in plan.warnings
    assert not plan.degraded


def test_parse_failure_degrades_with_warning():
    gw = stub_gateway([
        rule("decompose", "no json here"),
        rule("decompose", "still prose"),
    ])
    plan = decompose("the question", gw)
    assert plan.sub_questions == ["the question"]
    assert plan.degraded


def test_single_element_plan_is_valid():
    gw = stub_gateway([rule("decompose", ["Simple question?"])])
    plan = decompose("Simple question?", gw)
    assert plan.sub_questions == ["Simple question?"]
    assert not plan.degraded


def test_decompose_rejects_empty_question():
    with pytest.raises(ValueError):
        decompose("  ", stub_gateway([]))


def test_rewrite_substitutes_and_smooths():
    gw = stub_gateway([rule("rewrite", "Who is the spouse of Christopher Nolan?")])
    out = rewrite("Who is the spouse of #1?", ctx((1, "Christopher Nolan")), gw)
    assert out == "Who is the spouse of Christopher Nolan?"
    # the prompt carried the literal substitution
    assert "spouse of Christopher Nolan" in gw.wire_log[0]["prompt"]


def test_rewrite_identity_without_placeholders_or_context():
    gw = stub_gateway([])  # any LLM call would raise StubExhausted
    assert rewrite("Who directed Inception?", ctx(), gw) == "Who directed Inception?"
    assert gw.wire_log == []


def test_rewrite_missing_dependency():
    gw = stub_gateway([])
    with pytest.raises(MissingDependency) as exc:
        rewrite("Who is the spouse of #2?", ctx((1, "X")), gw)
    assert exc.value.index == 2


def test_rewrite_with_context_but_no_placeholder_still_calls_llm():
    gw = stub_gateway([rule("rewrite", "Standalone question about Nolan?")])
    out = rewrite("And their spouse?", ctx((1, "Christopher Nolan")), gw)
    assert out == "Standalone question about Nolan?"
    assert len(gw.wire_log) == 1


def test_rewrite_llm_failure_returns_substitution():
    gw = stub_gateway([])  # exhausted stub = LLM failure
    events = []
    out = rewrite("Spouse of #1?", ctx((1, "Nolan")), gw, events=events)
    assert out == "Spouse of Nolan?"
    assert events == ["rewrite:llm_failure"]


def test_rewrite_disabled_is_literal_substitution_only():
    gw = stub_gateway([])
    out = rewrite("Spouse of #1?", ctx((1, "Nolan")), gw, enabled=False)
    assert out == "Spouse of Nolan?"
    assert gw.wire_log == []


def test_rewrite_output_with_leftover_placeholder_falls_back():
    gw = stub_gateway([rule("rewrite", "Still talking about #1?")])
    out = rewrite("Spouse of #1?", ctx((1, "Nolan")), gw)
    assert out == "Spouse of Nolan?"


def test_rewrite_empty_context_is_identity_property():
    rng = random.Random(13)
    gw = stub_gateway([])
    for _ in range(50):
        text = "".join(rng.choice(string.ascii_letters + " ?") for _ in range(20))
        if placeholder_refs(text):
            continue
        assert rewrite(text, ctx(), gw) == text


def test_rewritten_output_never_contains_placeholders_property():
    rng = random.Random(14)
    for _ in range(30):
        refs = sorted(rng.sample(range(1, 6), k=rng.randint(1, 3)))
        context = ctx(*[(i, f"answer{i}") for i in range(1, max(refs) + 1)])
        question = "what about " + " and ".join(f"#{j}" for j in refs) + "?"
        out = rewrite(question, context, stub_gateway([]), enabled=True)
        assert not placeholder_refs(out)


def test_substitute_multi_digit_placeholder():
    context = ctx(*[(i, f"a{i}") for i in range(1, 13)])
    assert substitute_placeholders("x #12 y #1", context) == "x a12 y a1"


def test_answer_context_ordering_enforced():
    context = ctx((1, "a"), (2, "b"))
    with pytest.raises(ValueError):
        context.add(2, "again")
    assert context.get(2) == "b"
    assert context.get(5) is None


def test_plan_dataclass_shape():
    plan = single_question_plan("q", cap=6)
    assert isinstance(plan, DecompositionPlan)
    assert plan.original_question == "q"
    assert len(plan) == 1
