"""Per-question solving loop.

For each sub-question: rewrite, retrieve top-k triples, try to answer
from them alone. If the graph is insufficient, fall back to passage
retrieval, answer from documents, extract the new facts, write them back
into the graph, and retry answering from the refreshed graph exactly
once. Every triple actually used is collected into an ordered, id-unique
graph memory that grounds the final answer.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import Config
from .decompose import (
    AnswerContext,
    DecompositionPlan,
    decompose,
    rewrite,
    single_question_plan,
)
from .embedders import Embedder
from .errors import (
    BackendError,
    BudgetExceeded,
    EmptyField,
    MissingDependency,
    StructuredParseError,
    StubExhausted,
)
from .gateway import ChatRequest, Gateway
from .indexer import TripleRow, validate_triple_rows
from .kg import KnowledgeGraph, Triple
from .stores import Stores
from .vector import VectorIndex, verbalize_triple

logger = logging.getLogger(__name__)

UNKNOWN_ANSWER = "UNKNOWN"
EMPTY_MEMORY_MARKER = "(no evidence retrieved)"
TRACE_SCHEMA = "question_trace/v1"

_LLM_FAILURES = (StructuredParseError, BackendError, StubExhausted)


@dataclass
class FallbackEvent:
    retrieved_doc_ids: list[str] = field(default_factory=list)
    new_triples: list[TripleRow] = field(default_factory=list)
    written_back_ids: list[int] = field(default_factory=list)
    document_answer: str = ""


@dataclass
class SubAnswer:
    index: int
    sub_question: str
    rewritten_question: str
    retrieved: list[tuple[int, float]]
    answerable_from_graph: bool
    answer: str
    used_triple_ids: list[int]
    fallback: FallbackEvent | None = None
    retrieved_after_update: list[tuple[int, float]] | None = None
    events: list[str] = field(default_factory=list)


@dataclass
class GraphMemory:
    """Ordered union of the triples used across steps, earliest step wins."""

    entries: list[tuple[int, Triple]] = field(default_factory=list)

    def ids(self) -> list[int]:
        return [t.id for _, t in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class QuestionTrace:
    question_id: str
    question: str
    plan: DecompositionPlan | None = None
    sub_answers: list[SubAnswer] = field(default_factory=list)
    memory: GraphMemory = field(default_factory=GraphMemory)
    final_answer: str = ""
    status: str = "ok"
    error: str | None = None
    events: list[str] = field(default_factory=list)
    llm_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    elapsed_seconds: float = 0.0  # wall time; excluded from serialization


def retrieve_for_subquestion(
    question: str, triple_index: VectorIndex, k: int, embedder: Embedder
) -> list[tuple[int, float]]:
    """Exact top-k triples for a rewritten sub-question (empty index
    yields an empty candidate list)."""
    return triple_index.top_k(question, k, embedder)


def render_candidates(candidates: list[tuple[Triple, float]]) -> str:
    return "\n".join(f"{t.id}. {t.head} | {t.relation} | {t.tail}" for t, _ in candidates)


def answer_from_triples(
    question: str,
    candidates: list[tuple[Triple, float]],
    gateway: Gateway,
    events: list[str] | None = None,
) -> tuple[bool, str, list[int]]:
    """Ask the generator to answer from the candidate triples only.

    Evidence discipline: reported triple ids outside the candidate set are
    filtered, and a claimed answer without any surviving evidence id is
    coerced to unanswerable. Used ids come back ordered by retrieval rank.
    """
    if not candidates:
        return False, "", []
    request = ChatRequest(
        "answer_from_triples",
        {"question": question, "triples": render_candidates(candidates)},
    )
    try:
        payload = gateway.complete_structured(
            request,
            expect="object",
            required={"answerable": bool, "answer": str, "used_triple_ids": list},
        )
    except _LLM_FAILURES:
        logger.warning("triple answering failed, treating as unanswerable")
        if events is not None:
            events.append("answer:llm_failure")
        return False, "", []
    rank = {t.id: pos for pos, (t, _) in enumerate(candidates)}
    used: list[int] = []
    for triple_id in payload["used_triple_ids"]:
        if isinstance(triple_id, int) and triple_id in rank and triple_id not in used:
            used.append(triple_id)
        else:
            logger.warning("dropping reported evidence id %r not in candidates", triple_id)
            if events is not None:
                events.append("answer:evidence_filtered")
    used.sort(key=rank.__getitem__)
    answerable = bool(payload["answerable"])
    answer = payload["answer"].strip()
    if answerable and not used:
        logger.warning("answer claimed without evidence, coercing to unanswerable")
        if events is not None:
            events.append("answer:coerced_unanswerable")
        answerable = False
    if not answerable:
        return False, answer, []
    return True, answer, used


def fallback_answer_from_docs(
    question: str,
    stores: Stores,
    gateway: Gateway,
    embedder: Embedder,
    k_docs: int,
    events: list[str] | None = None,
) -> tuple[str, FallbackEvent]:
    """Corpus-level fallback: retrieve passages, answer from them, and
    extract candidate triples for the write-back. LLM failures degrade to
    the UNKNOWN answer; the event is recorded either way."""
    event = FallbackEvent()
    if len(stores.corpus) == 0:
        logger.warning("fallback requested with empty corpus")
        if events is not None:
            events.append("fallback:empty_corpus")
        event.document_answer = UNKNOWN_ANSWER
        return UNKNOWN_ANSWER, event
    with stores.lock.read():
        hits = stores.passage_index.top_k(question, k_docs, embedder)
    docs = [stores.corpus.documents[key] for key, _ in hits]
    event.retrieved_doc_ids = [doc.id for doc in docs]
    doc_block = "\n\n".join(
        f"[{doc.id}] {doc.title}\n{doc.text}" if doc.title else f"[{doc.id}] {doc.text}"
        for doc in docs
    )
    answer = UNKNOWN_ANSWER
    try:
        payload = gateway.complete_structured(
            ChatRequest("answer_from_docs", {"question": question, "documents": doc_block}),
            expect="object",
            required={"answer": str},
        )
        answer = payload["answer"].strip() or UNKNOWN_ANSWER
    except _LLM_FAILURES:
        logger.warning("document answering failed during fallback")
        if events is not None:
            events.append("fallback:answer_failure")
    try:
        raw = gateway.complete_structured(
            ChatRequest("extract_triples", {"document": doc_block}), expect="array"
        )
        event.new_triples = validate_triple_rows(raw)
    except _LLM_FAILURES:
        logger.warning("triple extraction failed during fallback")
        if events is not None:
            events.append("fallback:extract_failure")
    event.document_answer = answer
    return answer, event


def update_graph_with_new_triples(
    graph: KnowledgeGraph,
    triple_index: VectorIndex,
    event: FallbackEvent,
    question_id: str,
    step: int,
    embedder: Embedder,
) -> FallbackEvent:
    """Write validated fallback triples into the graph and the triple
    index. Duplicates are silently skipped; only genuinely new ids land in
    ``written_back_ids``. Caller holds the writer lock."""
    written: list[int] = []
    for head, relation, tail in event.new_triples:
        try:
            triple_id, inserted = graph.insert(
                head, relation, tail, provenance=f"dynamic:{question_id}", step=step
            )
        except EmptyField:
            logger.warning("skipping empty-field write-back triple")
            continue
        if inserted:
            triple_index.upsert(
                triple_id, verbalize_triple(graph.lookup(triple_id)), embedder
            )
            written.append(triple_id)
    event.written_back_ids = written
    return event


def assemble_graph_memory(
    sub_answers: list[SubAnswer], graph: KnowledgeGraph
) -> GraphMemory:
    """Ordered union of used triples: by sub-question index, then by that
    step's retrieval rank, deduplicated by id keeping the earliest step."""
    entries: list[tuple[int, Triple]] = []
    seen: set[int] = set()
    for sub in sub_answers:
        for triple_id in sub.used_triple_ids:
            if triple_id in seen:
                continue
            seen.add(triple_id)
            entries.append((sub.index, graph.lookup(triple_id)))
    return GraphMemory(entries)


def render_memory(memory: GraphMemory) -> str:
    if not memory.entries:
        return EMPTY_MEMORY_MARKER
    return "\n".join(
        f"step {step}: {t.head} | {t.relation} | {t.tail}" for step, t in memory.entries
    )


def generate_final_answer(
    question: str, memory: GraphMemory, gateway: Gateway
) -> str:
    """Final generation over the graph memory. An empty memory still makes
    the call, with an explicit no-evidence marker, so the behavior stays
    observable."""
    request = ChatRequest(
        "final_answer", {"question": question, "memory": render_memory(memory)}
    )
    try:
        response = gateway.complete(request)
    except _LLM_FAILURES:
        logger.warning("final answer generation failed")
        return UNKNOWN_ANSWER
    return response.text.strip() or UNKNOWN_ANSWER


def solve(
    question_id: str,
    question: str,
    config: Config,
    stores: Stores,
    gateway: Gateway,
    embedder: Embedder,
) -> QuestionTrace:
    """Run the full loop for one question and return its trace.

    Budget exhaustion and dependency-ordering bugs do not raise: they
    produce a partial trace with status ``budget_exceeded`` / ``aborted``
    and the UNKNOWN final answer.
    """
    gw = gateway.with_budget(config.llm_budget)
    trace = QuestionTrace(question_id=question_id, question=question)
    started = time.perf_counter()
    try:
        if config.decomposition:
            plan = decompose(question, gw, cap=config.max_subquestions)
        else:
            plan = single_question_plan(question, config.max_subquestions)
            plan.warnings.append("decompose:disabled")
        trace.plan = plan
        if plan.degraded:
            trace.events.append("decompose:degraded")

        context = AnswerContext()
        for index, sub_question in enumerate(plan.sub_questions, start=1):
            sub = _solve_step(
                index, sub_question, context, question_id, config, stores, gw, embedder
            )
            trace.sub_answers.append(sub)
            context.add(index, sub.answer)

        with stores.lock.read():
            trace.memory = assemble_graph_memory(trace.sub_answers, stores.graph)
        trace.final_answer = generate_final_answer(question, trace.memory, gw)
        trace.status = "ok"
    except BudgetExceeded as exc:
        trace.status = "budget_exceeded"
        trace.error = str(exc)
        trace.final_answer = UNKNOWN_ANSWER
        trace.events.append("budget:exceeded")
        with stores.lock.read():
            trace.memory = assemble_graph_memory(trace.sub_answers, stores.graph)
    except MissingDependency as exc:
        trace.status = "aborted"
        trace.error = str(exc)
        trace.final_answer = UNKNOWN_ANSWER
        trace.events.append("dependency:missing")
        with stores.lock.read():
            trace.memory = assemble_graph_memory(trace.sub_answers, stores.graph)
    trace.elapsed_seconds = time.perf_counter() - started
    if gw.budget is not None:
        trace.llm_calls = gw.budget.calls
        trace.prompt_tokens = gw.budget.prompt_tokens
        trace.completion_tokens = gw.budget.completion_tokens
    return trace


def _solve_step(
    index: int,
    sub_question: str,
    context: AnswerContext,
    question_id: str,
    config: Config,
    stores: Stores,
    gw: Gateway,
    embedder: Embedder,
) -> SubAnswer:
    events: list[str] = []
    rewritten = rewrite(sub_question, context, gw, enabled=config.rewriting, events=events)

    with stores.lock.read():
        hits = retrieve_for_subquestion(rewritten, stores.triple_index, config.k_triples, embedder)
        candidates = [(stores.graph.lookup(tid), score) for tid, score in hits]
    answerable, answer, used = answer_from_triples(rewritten, candidates, gw, events=events)

    fallback: FallbackEvent | None = None
    retrieved_after: list[tuple[int, float]] | None = None
    if not answerable:
        doc_answer, fallback = fallback_answer_from_docs(
            rewritten, stores, gw, embedder, config.k_docs, events=events
        )
        if config.graph_update:
            with stores.lock.write():
                update_graph_with_new_triples(
                    stores.graph, stores.triple_index, fallback, question_id, index, embedder
                )
        else:
            events.append("update:disabled")
        if fallback.written_back_ids:
            # one bounded re-attempt over the refreshed graph
            with stores.lock.read():
                retrieved_after = retrieve_for_subquestion(
                    rewritten, stores.triple_index, config.k_triples, embedder
                )
                candidates = [
                    (stores.graph.lookup(tid), score) for tid, score in retrieved_after
                ]
            answerable, answer2, used2 = answer_from_triples(
                rewritten, candidates, gw, events=events
            )
            if answerable:
                answer, used = answer2, used2
        if not answerable:
            # the document-grounded answer stands; written-back triples are
            # the only citable evidence for this step
            answer = doc_answer
            used = list(fallback.written_back_ids)

    return SubAnswer(
        index=index,
        sub_question=sub_question,
        rewritten_question=rewritten,
        retrieved=hits,
        answerable_from_graph=answerable,
        answer=answer,
        used_triple_ids=used,
        fallback=fallback,
        retrieved_after_update=retrieved_after,
        events=events,
    )


# -- trace serialization ---------------------------------------------------


def trace_to_dict(trace: QuestionTrace) -> dict:
    """Canonical trace form: fixed key order, no wall-clock values, so a
    deterministic run serializes byte-identically."""
    plan = trace.plan
    return {
        "schema": TRACE_SCHEMA,
        "question_id": trace.question_id,
        "question": trace.question,
        "status": trace.status,
        "error": trace.error,
        "plan": None
        if plan is None
        else {
            "original_question": plan.original_question,
            "sub_questions": list(plan.sub_questions),
            "cap": plan.cap,
            "degraded": plan.degraded,
            "warnings": list(plan.warnings),
        },
        "sub_answers": [
            {
                "index": sub.index,
                "sub_question": sub.sub_question,
                "rewritten_question": sub.rewritten_question,
                "retrieved": [[tid, score] for tid, score in sub.retrieved],
                "retrieved_after_update": None
                if sub.retrieved_after_update is None
                else [[tid, score] for tid, score in sub.retrieved_after_update],
                "answerable_from_graph": sub.answerable_from_graph,
                "answer": sub.answer,
                "used_triple_ids": list(sub.used_triple_ids),
                "fallback": None
                if sub.fallback is None
                else {
                    "retrieved_doc_ids": list(sub.fallback.retrieved_doc_ids),
                    "new_triples": [list(row) for row in sub.fallback.new_triples],
                    "written_back_ids": list(sub.fallback.written_back_ids),
                    "document_answer": sub.fallback.document_answer,
                },
                "events": list(sub.events),
            }
            for sub in trace.sub_answers
        ],
        "memory": [
            {
                "step": step,
                "id": triple.id,
                "head": triple.head,
                "relation": triple.relation,
                "tail": triple.tail,
            }
            for step, triple in trace.memory.entries
        ],
        "final_answer": trace.final_answer,
        "events": list(trace.events),
        "usage": {
            "llm_calls": trace.llm_calls,
            "prompt_tokens": trace.prompt_tokens,
            "completion_tokens": trace.completion_tokens,
        },
    }


def trace_to_json(trace: QuestionTrace) -> str:
    return json.dumps(trace_to_dict(trace), ensure_ascii=False, indent=2) + "\n"


def write_trace(trace: QuestionTrace, directory: str | Path) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"{trace.question_id}.json"
    path.write_text(trace_to_json(trace), encoding="utf-8")
    return path


def validate_trace_dict(data: dict) -> None:
    """Raise ValueError when a serialized trace violates the schema."""
    def _need(cond: bool, message: str) -> None:
        if not cond:
            raise ValueError(f"invalid trace: {message}")

    _need(isinstance(data, dict), "not an object")
    _need(data.get("schema") == TRACE_SCHEMA, "bad schema tag")
    for key in ("question_id", "question", "status", "final_answer"):
        _need(isinstance(data.get(key), str), f"{key} must be a string")
    _need(data["status"] in ("ok", "budget_exceeded", "aborted"), "unknown status")
    plan = data.get("plan")
    _need(plan is None or isinstance(plan, dict), "plan must be object or null")
    if isinstance(plan, dict):
        _need(
            isinstance(plan.get("sub_questions"), list) and plan["sub_questions"],
            "plan needs sub_questions",
        )
    subs = data.get("sub_answers")
    _need(isinstance(subs, list), "sub_answers must be a list")
    if data["status"] == "ok" and isinstance(plan, dict):
        _need(len(subs) == len(plan["sub_questions"]), "incomplete sub_answers without abort")
    for sub in subs:
        _need(isinstance(sub, dict), "sub answer must be object")
        _need(isinstance(sub.get("index"), int), "sub answer needs index")
        _need(isinstance(sub.get("answerable_from_graph"), bool), "needs answerable flag")
        _need(isinstance(sub.get("used_triple_ids"), list), "needs used_triple_ids")
        if not sub["answerable_from_graph"]:
            _need(isinstance(sub.get("fallback"), dict), "unanswerable step needs fallback event")
        if sub.get("fallback") is not None:
            _need(
                isinstance(sub["fallback"].get("retrieved_doc_ids"), list),
                "fallback needs retrieved_doc_ids",
            )
    memory = data.get("memory")
    _need(isinstance(memory, list), "memory must be a list")
    memory_ids = [entry.get("id") for entry in memory]
    _need(len(memory_ids) == len(set(memory_ids)), "memory ids must be unique")
    used_union: set[int] = set()
    for sub in subs:
        used_union.update(sub["used_triple_ids"])
    _need(set(memory_ids) == used_union, "memory ids must equal union of used ids")
    usage = data.get("usage")
    _need(isinstance(usage, dict) and isinstance(usage.get("llm_calls"), int), "usage block missing")
