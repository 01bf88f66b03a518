"""Shared tokenization for indexing, scoring and TF-IDF features.

One analyzer is used everywhere a bag of terms is needed so that query
terms, index postings and redundancy vectors live in the same term space:
lowercase, Unicode word tokens (underscore excluded), bundled English
stopword list, no stemming.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

# Letters and digits only; underscore is a separator, unlike \w.
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The bundled English stopword list (function words only)."""
    text = resources.files("factstream.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class Analyzer:
    """Tokenizer configuration: lowercase word tokens minus stopwords."""

    stop_words: frozenset[str] = field(default_factory=default_stopwords)

    def tokens(self, text: str) -> list[str]:
        return [
            t for t in (m.group(0).lower() for m in _WORD_RE.finditer(text))
            if t not in self.stop_words
        ]
