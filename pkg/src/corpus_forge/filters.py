"""Rule-based document quality filters and PDF-artifact cleanup.

Every rule is evaluated (no short-circuit) so a drop report lists the full
set of triggered rules for each document.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import urlsplit

from .documents import Document, Extraction

log = logging.getLogger(__name__)

DEFAULT_MIN_CHARS = 300
DEFAULT_MIN_WORDS = 6
DEFAULT_MAX_WORD_LEN = 60
DEFAULT_BAD_WORD_THRESHOLD = 2
DEFAULT_FLUENCY_THRESHOLD = 0.7

RULE_MIN_CHARS = "min_chars"
RULE_MIN_WORDS = "min_words"
RULE_MAX_WORD_LEN = "max_word_len"
RULE_BAD_WORDS = "bad_words"
RULE_FORBIDDEN_SUBSTRING = "forbidden_substring"
RULE_URL_BLACKLIST = "url_blacklist"
RULE_FLUENCY = "fluency"


def read_wordlist(path: str | Path) -> list[str]:
    """One entry per line, UTF-8; blank lines and #-comments ignored."""
    entries = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return entries


def _norm(text: str) -> str:
    return unicodedata.normalize("NFC", text).casefold()


@dataclass(frozen=True)
class FilterConfig:
    min_chars: int = DEFAULT_MIN_CHARS
    min_words: int = DEFAULT_MIN_WORDS
    max_word_len: Optional[int] = DEFAULT_MAX_WORD_LEN
    bad_word_threshold: int = DEFAULT_BAD_WORD_THRESHOLD
    bad_words: tuple[str, ...] = ()
    url_blacklist: frozenset[str] = frozenset()
    forbidden_substrings: tuple[str, ...] = ("lorem ipsum",)
    fluency_threshold: float = DEFAULT_FLUENCY_THRESHOLD
    fluency_applies_to: frozenset[Extraction] = frozenset({Extraction.PDF})

    def __post_init__(self) -> None:
        if self.min_chars < 0 or self.min_words < 0 or self.bad_word_threshold < 0:
            raise ValueError("thresholds must be nonnegative")
        if self.max_word_len is not None and self.max_word_len < 0:
            raise ValueError("max_word_len must be nonnegative")
        if not 0.0 <= self.fluency_threshold <= 1.0:
            raise ValueError("fluency_threshold must lie in [0, 1]")
        object.__setattr__(self, "bad_words", tuple(_norm(w) for w in self.bad_words))
        object.__setattr__(
            self, "forbidden_substrings", tuple(_norm(s) for s in self.forbidden_substrings)
        )
        object.__setattr__(
            self, "url_blacklist", frozenset(d.lower().strip(".") for d in self.url_blacklist)
        )
        object.__setattr__(
            self,
            "fluency_applies_to",
            frozenset(Extraction(e) for e in self.fluency_applies_to),
        )


@dataclass(frozen=True)
class Verdict:
    keep: bool
    reasons: tuple[str, ...] = ()
    cleaned_text: Optional[str] = None

    def __post_init__(self) -> None:
        if self.keep and self.reasons:
            raise ValueError("keep verdicts must carry no reasons")


@lru_cache(maxsize=64)
def _bad_word_pattern(entries: tuple[str, ...]) -> Optional[re.Pattern]:
    if not entries:
        return None
    # Longest-first so a phrase wins over an entry that prefixes it.
    ordered = sorted((_norm(e) for e in entries), key=len, reverse=True)
    alternation = "|".join(re.escape(e) for e in ordered)
    return re.compile(rf"(?<!\w)(?:{alternation})(?!\w)")


def count_bad_words(text: str, entries: tuple[str, ...]) -> int:
    """Total occurrences of list entries (case-insensitive, whole-word, NFC)."""
    pattern = _bad_word_pattern(entries)
    if pattern is None:
        return 0
    return len(pattern.findall(_norm(text)))


def url_blacklisted(url: Optional[str], blacklist: Iterable[str]) -> bool:
    """True iff the url host equals a blacklisted domain or is a subdomain of one."""
    if not url:
        return False
    domains = {d.lower().strip(".") for d in blacklist}
    if not domains:
        return False
    try:
        host = urlsplit(url).hostname
    except ValueError:
        log.warning("unparseable url treated as non-blacklisted: %r", url)
        return False
    if not host:
        # Bare host given without a scheme, e.g. "bad.example.gr/path".
        try:
            host = urlsplit("//" + url).hostname
        except ValueError:
            host = None
        if not host:
            log.warning("unparseable url treated as non-blacklisted: %r", url)
            return False
    host = host.lower().strip(".")
    return any(host == d or host.endswith("." + d) for d in domains)


# Runs of >=5 single alphabetic characters separated by single spaces.
_SINGLE_RUN = re.compile(r"(?:^|(?<=\s))[^\W\d_](?: [^\W\d_]){4,}(?=\s|$)")


def clean_pdf_artifacts(text: str, max_word_len: int = DEFAULT_MAX_WORD_LEN) -> str:
    """Drop lines containing glued words or single-character runs; keep the rest verbatim."""
    kept = []
    for line in text.splitlines():
        if any(len(word) > max_word_len for word in line.split()):
            continue
        if _SINGLE_RUN.search(line):
            continue
        kept.append(line)
    return "\n".join(kept)


def filter_document(doc: Document, cfg: FilterConfig, lm=None) -> Verdict:
    """Evaluate all enabled rules against one document.

    PDF-extracted documents are artifact-cleaned first and judged on the
    cleaned text. The fluency rule consumes a precomputed
    doc.scores["fluency"] when present, otherwise scores via the given
    language model; with neither available the rule is skipped (the
    pipeline validator reports that misconfiguration upfront).
    """
    cleaned_text: Optional[str] = None
    text = doc.text
    if doc.extraction is Extraction.PDF:
        limit = cfg.max_word_len if cfg.max_word_len is not None else DEFAULT_MAX_WORD_LEN
        cleaned = clean_pdf_artifacts(text, max_word_len=limit)
        if cleaned != text:
            cleaned_text = cleaned
            text = cleaned

    words = text.split()
    reasons = []

    if cfg.min_chars and len(text) < cfg.min_chars:
        reasons.append(RULE_MIN_CHARS)
    if cfg.min_words and len(words) < cfg.min_words:
        reasons.append(RULE_MIN_WORDS)
    if cfg.max_word_len is not None and any(len(w) > cfg.max_word_len for w in words):
        reasons.append(RULE_MAX_WORD_LEN)
    if cfg.bad_words and count_bad_words(text, cfg.bad_words) >= cfg.bad_word_threshold:
        reasons.append(RULE_BAD_WORDS)
    if cfg.forbidden_substrings:
        lowered = _norm(text)
        if any(sub in lowered for sub in cfg.forbidden_substrings):
            reasons.append(RULE_FORBIDDEN_SUBSTRING)
    if cfg.url_blacklist and url_blacklisted(doc.source_url, cfg.url_blacklist):
        reasons.append(RULE_URL_BLACKLIST)
    if doc.extraction in cfg.fluency_applies_to:
        score = None
        if doc.scores and "fluency" in doc.scores:
            score = doc.scores["fluency"]
        elif lm is not None and text.strip():
            score = lm.document_score(text)
        if score is not None and score < cfg.fluency_threshold:
            reasons.append(RULE_FLUENCY)

    return Verdict(keep=not reasons, reasons=tuple(reasons), cleaned_text=cleaned_text)


def write_drop_report(path: str | Path, dropped: Iterable[tuple[str, tuple[str, ...]]]) -> int:
    """JSONL report of {id, reasons} for dropped documents."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for doc_id, reasons in dropped:
            handle.write(json.dumps({"id": doc_id, "reasons": list(reasons)}, ensure_ascii=False))
            handle.write("\n")
            n += 1
    return n
