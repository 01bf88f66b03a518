from __future__ import annotations

import pytest

from factstream import Document, SourceType


def make_doc(
    doc_id: str,
    text: str,
    event_id: str = "e1",
    timestamp: int = 1_000,
    source: SourceType = SourceType.NEWS,
) -> Document:
    """Document with text already in normalized form (news normalization is
    a no-op for plain prose, so text == normalize(raw_text))."""
    return Document(
        doc_id=doc_id,
        event_id=event_id,
        source_type=source,
        timestamp=timestamp,
        raw_text=text,
        text=text,
    )


@pytest.fixture
def five_doc_corpus() -> list[Document]:
    texts = [
        "fire spreading fast in the hills",
        "evacuations ordered for the fire zone",
        "flood waters rising downtown",
        "fire fire everywhere fire crews deployed",
        "calm sunny day in the park",
    ]
    return [make_doc(f"d{i}", t, timestamp=1_000 + i) for i, t in enumerate(texts, start=1)]
