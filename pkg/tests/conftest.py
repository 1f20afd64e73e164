import random

import pytest

from expando.decoding import train_count_model
from expando.index import Document, build_index

# MS MARCO-style passages used in the copied/new token examples
WASHINGTON = (
    "July is the hottest month in Washington DC with an average temperature of 27°C (80°F) "
    "and the coldest is January at 4°C (38°F) with the most daily sunshine hours at 9 in July. "
    "The wettest month is May with an average of 100mm of rain."
)
DELAWARE = (
    "The Delaware River flows through Philadelphia into the Delaware Bay. It flows through and "
    "aqueduct in the Roundout Reservoir and then flows through Philadelphia and New Jersey before "
    "emptying into the Delaware Bay."
)
CHROMOSOME = (
    "sex chromosome - (genetics) a chromosome that determines the sex of an individual; mammals "
    "normally have two sex chromosomes chromosome - a threadlike strand of DNA in the cell nucleus "
    "that carries the genes in a linear order; humans have 22 chromosome pairs plus two sex chromosomes."
)


@pytest.fixture
def three_docs():
    return [Document("d1", "a b"), Document("d2", "a a b"), Document("d3", "c")]


@pytest.fixture
def three_index(three_docs):
    return build_index(three_docs)


@pytest.fixture
def passage_docs():
    return [Document("p1", WASHINGTON), Document("p2", DELAWARE), Document("p3", CHROMOSOME)]


def random_corpus(rng: random.Random, max_docs=50, vocab_size=20):
    vocab = [f"t{i}" for i in range(rng.randint(1, vocab_size))]
    n = rng.randint(1, max_docs)
    docs = [
        Document(f"doc{rng.randrange(10**6):06d}_{i}", " ".join(rng.choices(vocab, k=rng.randint(0, 12))))
        for i in range(n)
    ]
    return docs, vocab


def random_count_model(rng: random.Random, max_vocab=5):
    """Count model over at most ``max_vocab`` tokens, trained on random pairs."""
    vocab = [chr(ord("a") + i) for i in range(rng.randint(1, max_vocab))]
    pairs = [
        (" ".join(rng.choices(vocab, k=rng.randint(1, 6))), " ".join(rng.choices(vocab, k=rng.randint(1, 4))))
        for _ in range(rng.randint(1, 6))
    ]
    model = train_count_model(pairs, mix=rng.random(), alpha=rng.choice([0.01, 0.1, 0.5, 1.0]))
    source = rng.choices(list(model.vocab), k=rng.randint(0, 6))
    return model, source


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
