"""Course-material chunking and lexical retrieval.

The tutor grounds its replies in course material. Documents are split into
overlapping fixed-size character chunks and ranked at query time with a
tf-idf score. Scoring is deliberately simple and fully specified so that a
brute-force reimplementation ranks identically:

    tokens(text)   = lowercase alphanumeric runs
    idf(t)         = ln((1 + N) / (1 + df(t))) + 1          (N = chunk count)
    score(q, c)    = sum over unique query tokens t, in sorted order,
                     of count(t, q) * count(t, c) * idf(t)

Chunks with score 0 are never returned; ties break by (doc_id, seq).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .errors import EmptyCorpus

DEFAULT_CHUNK_CHARS = 800
DEFAULT_OVERLAP_CHARS = 200
DEFAULT_TOP_K = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class CourseChunk:
    doc_id: str
    seq: int
    text: str


Scorer = Callable[[str, CourseChunk], float]


class ChunkIndex:
    """Immutable chunk collection with term statistics for tf-idf ranking."""

    def __init__(self, chunks: list[CourseChunk]):
        self.chunks = tuple(chunks)
        self._chunk_tokens: list[dict[str, int]] = []
        self._df: dict[str, int] = {}
        for chunk in self.chunks:
            counts: dict[str, int] = {}
            for token in tokenize(chunk.text):
                counts[token] = counts.get(token, 0) + 1
            self._chunk_tokens.append(counts)
            for token in counts:
                self._df[token] = self._df.get(token, 0) + 1

    def __len__(self) -> int:
        return len(self.chunks)

    def idf(self, token: str) -> float:
        return math.log((1 + len(self.chunks)) / (1 + self._df.get(token, 0))) + 1.0

    def score(self, query: str, position: int) -> float:
        query_counts: dict[str, int] = {}
        for token in tokenize(query):
            query_counts[token] = query_counts.get(token, 0) + 1
        chunk_counts = self._chunk_tokens[position]
        total = 0.0
        for token in sorted(query_counts):
            tf = chunk_counts.get(token, 0)
            if tf:
                total += query_counts[token] * tf * self.idf(token)
        return total


def chunk_document(doc_id: str, text: str, chunk_chars: int, overlap_chars: int) -> list[CourseChunk]:
    """Split one document into chunks starting every chunk_chars - overlap_chars.

    Every character lands in at least one chunk; the final chunk is truncated
    at the end of the document.
    """
    step = chunk_chars - overlap_chars
    chunks = []
    for seq, start in enumerate(range(0, len(text), step)):
        piece = text[start : start + chunk_chars]
        if piece:
            chunks.append(CourseChunk(doc_id=doc_id, seq=seq, text=piece))
    return chunks


def ingest_course_material(
    docs: Iterable[tuple[str, str]],
    chunk_chars: int = DEFAULT_CHUNK_CHARS,
    overlap_chars: int = DEFAULT_OVERLAP_CHARS,
) -> ChunkIndex:
    """Chunk every document and build the retrieval index.

    Raises EmptyCorpus when no documents (or no non-empty documents) are given.
    """
    if not chunk_chars > overlap_chars >= 0:
        raise ValueError("require chunk_chars > overlap_chars >= 0")
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("no documents to ingest")
    chunks: list[CourseChunk] = []
    for doc_id, text in docs:
        chunks.extend(chunk_document(doc_id, text, chunk_chars, overlap_chars))
    if not chunks:
        raise EmptyCorpus("all documents were empty")
    return ChunkIndex(chunks)


def ingest_corpus_dir(
    corpus_dir: str | Path,
    chunk_chars: int = DEFAULT_CHUNK_CHARS,
    overlap_chars: int = DEFAULT_OVERLAP_CHARS,
) -> ChunkIndex:
    """Ingest a directory of UTF-8 plain-text files; doc_id is the file name."""
    root = Path(corpus_dir)
    docs = [
        (path.name, path.read_text(encoding="utf-8"))
        for path in sorted(root.glob("*"))
        if path.is_file()
    ]
    return ingest_course_material(docs, chunk_chars, overlap_chars)


def retrieve(
    index: ChunkIndex,
    query: str,
    k: int = DEFAULT_TOP_K,
    scorer: Scorer | None = None,
) -> list[CourseChunk]:
    """Top-k chunks by descending score; zero-score chunks are dropped.

    ``scorer`` swaps in an alternative relevance function (an embedding
    backend, say) while keeping the ordering contract.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored: list[tuple[float, str, int, CourseChunk]] = []
    for position, chunk in enumerate(index.chunks):
        if scorer is not None:
            value = scorer(query, chunk)
        else:
            value = index.score(query, position)
        if value > 0.0:
            scored.append((-value, chunk.doc_id, chunk.seq, chunk))
    scored.sort(key=lambda item: (item[0], item[1], item[2]))
    return [item[3] for item in scored[:k]]
