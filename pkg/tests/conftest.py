import numpy as np
import pytest

from xlalign.synthetic import planted_rotation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted():
    """1500-word noiseless planted rotation in 32 dimensions."""
    return planted_rotation(1500, 32, seed=3)


def unit(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def write_vectors(path, words, vectors, header=None):
    vectors = np.asarray(vectors)
    with open(path, "w", encoding="utf-8") as f:
        f.write(header if header is not None else f"{len(words)} {vectors.shape[1]}\n")
        for w, v in zip(words, vectors):
            f.write(w + " " + " ".join(repr(float(x)) for x in v) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
