from __future__ import annotations

import pytest

from causalir.corpus import Document, Topic, tokenize_document
from causalir.lexical import build_lexical_index


SMALL_CORPUS = [
    Document(
        doc_id="d1",
        title="Minister resigns over cricket league stake",
        text="The minister resigned after reports about a stake in the new "
        "cricket franchise caused a controversy in parliament.",
    ),
    Document(
        doc_id="d2",
        title="Cricket league opens season",
        text="The league opened its third season with record attendance and new franchises.",
    ),
    Document(
        doc_id="d3",
        title="Parliament debates budget",
        text="The budget debate in parliament focused on infrastructure spending.",
    ),
    Document(
        doc_id="d4",
        title="Franchise auction raises questions",
        text="Questions were raised about the franchise auction and the sweat "
        "equity offered to investors, fueling the controversy.",
    ),
    Document(
        doc_id="d5",
        title="Monsoon season forecast",
        text="Forecasters expect a normal monsoon season across the region.",
    ),
]

SMALL_TOPIC = Topic(
    topic_id="t1",
    title="minister resignation cricket controversy",
    narrative="Relevant documents describe the franchise stake controversy that "
    "caused the minister to resign. Documents about regular season matches are "
    "not relevant.",
)


@pytest.fixture
def small_corpus():
    return list(SMALL_CORPUS)


@pytest.fixture
def small_lexical_index(small_corpus):
    return build_lexical_index(tokenize_document(d) for d in small_corpus)


@pytest.fixture
def small_topic():
    return SMALL_TOPIC
