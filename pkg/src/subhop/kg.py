"""Deduplicated, provenance-tracking triple store.

The graph is append-only: triples are never mutated or deleted, ids are
dense integers in insertion order, and a case/whitespace-insensitive
dedup key guarantees that the same fact is stored once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import DuplicateKeyError, EmptyField, ParseError, UnknownId

DYNAMIC_PREFIX = "dynamic:"

DedupKey = tuple[str, str, str]


def normalize_field(value: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return " ".join(value.split())


def dedup_key(head: str, relation: str, tail: str) -> DedupKey:
    """Case- and whitespace-insensitive identity of a triple."""
    return (
        normalize_field(head).casefold(),
        normalize_field(relation).casefold(),
        normalize_field(tail).casefold(),
    )


@dataclass(frozen=True)
class Triple:
    """One (head, relation, tail) fact with provenance.

    ``provenance`` is either ``doc:<document-id>`` for triples extracted
    during offline indexing or ``dynamic:<question-id>`` for triples
    written back while answering. ``created_at_step`` is 0 for offline
    triples and the 1-based sub-question index for write-backs.
    """

    id: int
    head: str
    relation: str
    tail: str
    provenance: str
    created_at_step: int

    @property
    def is_dynamic(self) -> bool:
        return self.provenance.startswith(DYNAMIC_PREFIX)

    def key(self) -> DedupKey:
        return dedup_key(self.head, self.relation, self.tail)


@dataclass(frozen=True)
class GraphStats:
    triple_count: int
    entity_count: int
    dynamic_count: int


class KnowledgeGraph:
    """Append-only collection of deduplicated triples.

    Thread-safety is by contract, not enforced here: callers serialize
    writes through a single writer path and may read concurrently.
    """

    def __init__(self) -> None:
        self._triples: list[Triple] = []
        self._by_id: dict[int, Triple] = {}
        self._key_index: dict[DedupKey, int] = {}
        self._entity_index: dict[str, set[int]] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._triples == other._triples

    def insert(
        self, head: str, relation: str, tail: str, provenance: str, step: int
    ) -> tuple[int, bool]:
        """Insert a triple, deduplicating on the normalized key.

        Returns ``(id, True)`` for a new triple or ``(existing_id, False)``
        when an equivalent triple is already stored. Raises EmptyField if
        any field trims to nothing; callers skip the triple and log it.
        """
        h = normalize_field(head)
        r = normalize_field(relation)
        t = normalize_field(tail)
        if not h or not r or not t:
            raise EmptyField(f"empty field in triple ({head!r}, {relation!r}, {tail!r})")
        key = (h.casefold(), r.casefold(), t.casefold())
        existing = self._key_index.get(key)
        if existing is not None:
            return existing, False
        triple = Triple(self._next_id, h, r, t, provenance, step)
        self._next_id += 1
        self._store(triple, key)
        return triple.id, True

    def _store(self, triple: Triple, key: DedupKey) -> None:
        self._triples.append(triple)
        self._by_id[triple.id] = triple
        self._key_index[key] = triple.id
        for entity in (key[0], key[2]):
            self._entity_index.setdefault(entity, set()).add(triple.id)

    def lookup(self, triple_id: int) -> Triple:
        try:
            return self._by_id[triple_id]
        except KeyError:
            raise UnknownId(triple_id) from None

    def contains_key(self, head: str, relation: str, tail: str) -> bool:
        return dedup_key(head, relation, tail) in self._key_index

    def stats(self) -> GraphStats:
        dynamic = sum(1 for t in self._triples if t.is_dynamic)
        return GraphStats(len(self._triples), len(self._entity_index), dynamic)

    # -- persistence -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write one JSON record per triple, fixed field order.

        The field order is part of the format so that save -> load -> save
        round-trips byte-identically.
        """
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._triples:
                fh.write(_encode_record(t))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeGraph":
        graph = cls()
        max_id = -1
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                triple = _decode_record(line, lineno)
                if triple.id in graph._by_id:
                    raise ParseError(f"duplicate triple id {triple.id}", line=lineno)
                key = triple.key()
                if key in graph._key_index:
                    raise DuplicateKeyError(
                        f"line {lineno}: dedup key {key} already present"
                    )
                graph._store(triple, key)
                max_id = max(max_id, triple.id)
        graph._next_id = max_id + 1
        return graph


def _encode_record(t: Triple) -> str:
    record = {
        "id": t.id,
        "head": t.head,
        "relation": t.relation,
        "tail": t.tail,
        "provenance": t.provenance,
        "step": t.created_at_step,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _decode_record(line: str, lineno: int) -> Triple:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from None
    if not isinstance(record, dict):
        raise ParseError("record is not an object", line=lineno)
    try:
        triple_id = record["id"]
        head = record["head"]
        relation = record["relation"]
        tail = record["tail"]
        provenance = record["provenance"]
        step = record["step"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", line=lineno) from None
    if not isinstance(triple_id, int) or not isinstance(step, int):
        raise ParseError("id and step must be integers", line=lineno)
    for name, value in (("head", head), ("relation", relation), ("tail", tail),
                        ("provenance", provenance)):
        if not isinstance(value, str):
            raise ParseError(f"{name} must be a string", line=lineno)
    if not (normalize_field(head) and normalize_field(relation) and normalize_field(tail)):
        raise ParseError("empty triple field", line=lineno)
    return Triple(triple_id, normalize_field(head), normalize_field(relation),
                  normalize_field(tail), provenance, step)
