"""Pipeline store bundle: graph, both vector indexes, corpus, one lock.

Write-backs touch the graph and the triple index together, so a single
reader-writer lock covers both: many concurrent readers or exactly one
writer.
"""

from __future__ import annotations

import hashlib
import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .embedders import Embedder
from .errors import EmbedderMismatch, ParseError
from .indexer import Corpus, ingest_corpus
from .kg import KnowledgeGraph
from .vector import VectorIndex

GRAPH_FILE = "graph.jsonl"
TRIPLE_INDEX_FILE = "triples.vec.jsonl"
PASSAGE_INDEX_FILE = "passages.vec.jsonl"
MANIFEST_FILE = "manifest.json"


class ReadWriteLock:
    """Many readers or one writer; writers wait for readers to drain."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writing or self._readers > 0:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


@dataclass
class Stores:
    graph: KnowledgeGraph
    triple_index: VectorIndex
    passage_index: VectorIndex
    corpus: Corpus
    lock: ReadWriteLock = field(default_factory=ReadWriteLock)


def _file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def snapshot_exists(snapshot_dir: str | Path) -> bool:
    root = Path(snapshot_dir)
    return (root / GRAPH_FILE).exists() and (root / MANIFEST_FILE).exists()


def save_stores(
    stores: Stores,
    snapshot_dir: str | Path,
    embedder: Embedder,
    corpus_path: str | Path,
) -> None:
    root = Path(snapshot_dir)
    root.mkdir(parents=True, exist_ok=True)
    stores.graph.save(root / GRAPH_FILE)
    stores.triple_index.save(root / TRIPLE_INDEX_FILE, embedder)
    stores.passage_index.save(root / PASSAGE_INDEX_FILE, embedder)
    manifest = {
        "corpus_path": str(corpus_path),
        "corpus_sha256": _file_sha256(corpus_path),
        "embedder": embedder.name,
        "dimension": embedder.dimension,
        "triples": len(stores.graph),
        "passages": len(stores.passage_index),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    (root / MANIFEST_FILE).write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_manifest(snapshot_dir: str | Path) -> dict:
    path = Path(snapshot_dir) / MANIFEST_FILE
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid manifest: {exc.msg}") from None
    if not isinstance(manifest, dict):
        raise ParseError("manifest must be a JSON object")
    return manifest


def load_stores(
    snapshot_dir: str | Path,
    embedder: Embedder,
    corpus_path: str | Path | None = None,
) -> Stores:
    """Rebuild stores from a snapshot directory.

    The embedder identity is validated against the manifest; the corpus is
    re-read from its recorded path unless an override is given.
    """
    root = Path(snapshot_dir)
    manifest = load_manifest(root)
    if manifest.get("embedder") != embedder.name or manifest.get("dimension") != embedder.dimension:
        raise EmbedderMismatch(
            f"snapshot built with {manifest.get('embedder')}/{manifest.get('dimension')}, "
            f"configured {embedder.name}/{embedder.dimension}"
        )
    graph = KnowledgeGraph.load(root / GRAPH_FILE)
    triple_index = VectorIndex.load(root / TRIPLE_INDEX_FILE, embedder)
    passage_index = VectorIndex.load(root / PASSAGE_INDEX_FILE, embedder)
    source = Path(corpus_path) if corpus_path else Path(manifest.get("corpus_path", ""))
    corpus = ingest_corpus(source)
    return Stores(
        graph=graph,
        triple_index=triple_index,
        passage_index=passage_index,
        corpus=corpus,
    )
