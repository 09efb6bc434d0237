import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from memlit import corpus


@pytest.fixture(scope="session")
def iriw_fence():
    return corpus.load("iriw-fence")


@pytest.fixture(scope="session")
def iriw_nofence():
    return corpus.load("iriw-nofence")


@pytest.fixture(scope="session")
def iriw_atomic():
    return corpus.load("iriw-atomic")


@pytest.fixture(scope="session")
def iriw_fence_all():
    return corpus.load("iriw-fence-all")


@pytest.fixture(scope="session")
def all_corpus():
    return {name: corpus.load(name) for name in corpus.CORPUS_NAMES}
