from __future__ import annotations

import pytest

from extracteval.corpus import generate_synthetic_corpus
from extracteval.textproc import WhitespaceCounter, annotate_corpus


@pytest.fixture
def counter():
    return WhitespaceCounter()


@pytest.fixture
def small_corpus(counter):
    instances = generate_synthetic_corpus(seed=7, n_docs=4, corruption_levels=3)
    return annotate_corpus(instances, counter)
