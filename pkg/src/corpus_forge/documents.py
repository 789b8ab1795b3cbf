"""Canonical document records, streaming JSONL corpus I/O, and corpus accounting."""

from __future__ import annotations

import gzip
import io
import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping


class Extraction(str, Enum):
    WEB = "web"
    PDF = "pdf"
    STRUCTURED = "structured"


class ParseError(ValueError):
    """Malformed JSONL input."""


class SchemaError(ValueError):
    """Structurally valid JSON that does not describe a document."""


def count_words(text: str) -> int:
    """Whitespace-delimited word count (Unicode whitespace split)."""
    return len(text.split())


# Fixed serialization order so corpus files diff cleanly.
CANONICAL_KEYS = (
    "id",
    "text",
    "language",
    "num_words",
    "dataset",
    "source_url",
    "scores",
    "extraction",
    "metadata",
)


@dataclass(frozen=True)
class Document:
    """One text record. Immutable after construction; text is NFC-normalized
    and num_words is recomputed whenever it is not supplied."""

    id: str
    text: str
    language: str = ""
    num_words: int | None = None
    dataset: str = ""
    source_url: str | None = None
    scores: dict[str, float] | None = None
    extraction: Extraction = Extraction.WEB
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        norm = unicodedata.normalize("NFC", self.text)
        if norm != self.text:
            object.__setattr__(self, "text", norm)
        if self.num_words is None:
            object.__setattr__(self, "num_words", count_words(self.text))
        if not isinstance(self.extraction, Extraction):
            object.__setattr__(self, "extraction", Extraction(self.extraction))

    def with_text(self, text: str) -> "Document":
        """Copy with replaced text and recomputed word count."""
        return Document(
            id=self.id,
            text=text,
            language=self.language,
            num_words=None,
            dataset=self.dataset,
            source_url=self.source_url,
            scores=self.scores,
            extraction=self.extraction,
            metadata=self.metadata,
        )

    def with_score(self, name: str, value: float) -> "Document":
        scores = dict(self.scores or {})
        scores[name] = float(value)
        return Document(
            id=self.id,
            text=self.text,
            language=self.language,
            num_words=self.num_words,
            dataset=self.dataset,
            source_url=self.source_url,
            scores=scores,
            extraction=self.extraction,
            metadata=self.metadata,
        )


def parse_document(line: str, line_no: int | None = None) -> Document:
    """Parse one JSONL line into a Document.

    Recognized fields are populated, unknown fields are preserved in the
    metadata map, and num_words is recomputed when absent.
    """
    where = f"line {line_no}" if line_no is not None else "line"
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: malformed JSON ({exc.msg} at column {exc.colno})") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    if "text" not in obj:
        raise SchemaError(f"{where}: missing required field 'text'")
    if "id" not in obj:
        raise SchemaError(f"{where}: missing required field 'id'")
    if not isinstance(obj["text"], str):
        raise SchemaError(f"{where}: field 'text' must be a string")

    known: dict[str, Any] = {}
    metadata: dict[str, Any] = {}
    explicit_meta = obj.get("metadata")
    if explicit_meta is not None and not isinstance(explicit_meta, dict):
        raise SchemaError(f"{where}: field 'metadata' must be an object")
    for key, value in obj.items():
        if key == "metadata":
            continue
        if key in CANONICAL_KEYS:
            known[key] = value
        else:
            metadata[key] = value
    if explicit_meta:
        metadata = {**explicit_meta, **metadata}

    scores = known.get("scores")
    if scores is not None:
        if not isinstance(scores, dict):
            raise SchemaError(f"{where}: field 'scores' must be an object")
        scores = {str(k): float(v) for k, v in scores.items()}

    try:
        extraction = Extraction(known.get("extraction", "web"))
    except ValueError as exc:
        raise SchemaError(f"{where}: unknown extraction kind {known.get('extraction')!r}") from exc

    return Document(
        id=str(known["id"]),
        text=known["text"],
        language=str(known.get("language", "")),
        num_words=known.get("num_words"),
        dataset=str(known.get("dataset", "")),
        source_url=known.get("source_url"),
        scores=scores,
        extraction=extraction,
        metadata=metadata,
    )


def serialize_document(doc: Document) -> str:
    """Single-line JSON with canonical key order; empty optionals are omitted."""
    out: dict[str, Any] = {"id": doc.id, "text": doc.text}
    if doc.language:
        out["language"] = doc.language
    out["num_words"] = doc.num_words
    if doc.dataset:
        out["dataset"] = doc.dataset
    if doc.source_url is not None:
        out["source_url"] = doc.source_url
    if doc.scores is not None:
        out["scores"] = doc.scores
    out["extraction"] = doc.extraction.value
    if doc.metadata:
        out["metadata"] = doc.metadata
    return json.dumps(out, ensure_ascii=False, separators=(",", ":"))


def open_text(path: str | Path, mode: str = "rt") -> io.TextIOBase:
    """Open a text file, transparently gzip'd by extension.

    Gzip writes pin mtime=0 so identical content produces identical bytes.
    """
    path = Path(path)
    if path.suffix == ".gz":
        if "r" in mode:
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        raw = open(path, "wb")
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0)
        return io.TextIOWrapper(gz, encoding="utf-8", newline="\n")
    if "r" in mode:
        return open(path, "r", encoding="utf-8")
    return open(path, "w", encoding="utf-8", newline="\n")


def read_documents(path: str | Path) -> Iterator[Document]:
    """Stream documents from a JSONL (optionally .gz) file."""
    with open_text(path, "rt") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            yield parse_document(line, line_no=line_no)


def write_documents(path: str | Path, docs: Iterable[Document]) -> int:
    """Write documents as JSONL (LF endings). Returns number written."""
    n = 0
    with open_text(path, "wt") as handle:
        for doc in docs:
            handle.write(serialize_document(doc))
            handle.write("\n")
            n += 1
    return n


@dataclass(frozen=True)
class CorpusStats:
    """Per-subcorpus token accounting with full-precision percentages."""

    per_subcorpus: dict[str, int]
    total_tokens: int
    percentages: dict[str, float]

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "CorpusStats":
        counts = {str(k): int(v) for k, v in counts.items()}
        total = sum(counts.values())
        if total > 0:
            pct = {k: v / total for k, v in counts.items()}
        else:
            pct = {k: 0.0 for k in counts}
        return cls(per_subcorpus=counts, total_tokens=total, percentages=pct)

    def merged_with(self, other: "CorpusStats") -> "CorpusStats":
        counts = dict(self.per_subcorpus)
        for k, v in other.per_subcorpus.items():
            counts[k] = counts.get(k, 0) + v
        return CorpusStats.from_counts(counts)

    def rounded_percentages(self, digits: int = 1) -> dict[str, float]:
        """Percentages in points, rounded for reporting (0.1pp by default)."""
        return {k: round(100.0 * v, digits) for k, v in self.percentages.items()}

    def formatted(self) -> str:
        width = max((len(k) for k in self.per_subcorpus), default=5)
        lines = [
            f"{name:<{width}}  {count:>18,}  {pct:>5.1f}%"
            for name, count, pct in sorted(
                (
                    (k, self.per_subcorpus[k], 100.0 * self.percentages[k])
                    for k in self.per_subcorpus
                ),
                key=lambda row: -row[1],
            )
        ]
        lines.append(f"{'total':<{width}}  {self.total_tokens:>18,}  100.0%")
        return "\n".join(lines)


def corpus_stats(docs: Iterable[Document], tokenizer) -> CorpusStats:
    """Token counts per dataset under the given tokenizer (duck-typed .encode)."""
    counts: dict[str, int] = {}
    for doc in docs:
        name = doc.dataset or "default"
        counts[name] = counts.get(name, 0) + len(tokenizer.encode(doc.text))
    return CorpusStats.from_counts(counts)
