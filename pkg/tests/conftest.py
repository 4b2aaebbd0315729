import numpy as np
import pytest

from seqcomm.graph import AdjacencyMatrix


def barbell():
    """Two triangles {0,1,2} and {3,4,5} joined by the edge 2-3."""
    return AdjacencyMatrix.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


def complete(n):
    return AdjacencyMatrix(np.ones((n, n), dtype=int) - np.eye(n, dtype=int))


def random_graph(rng, n, p=0.5):
    while True:
        a = np.triu((rng.random((n, n)) < p).astype(int), 1)
        if a.any():
            return AdjacencyMatrix(a + a.T)


@pytest.fixture
def barbell_graph():
    return barbell()


def block_correlation(block_sizes, loading, n_obs, seed):
    """Sample correlation of variables driven by one Gaussian factor per block.

    Variable ``i`` in block ``b`` is ``l_i * f_b + sqrt(1 - l_i^2) * e_i``, so
    the population correlation is ``l_i * l_j`` within blocks and 0 between.
    ``loading`` is either a fixed ``l`` or a ``(lo, hi)`` range from which
    each ``l_i`` is drawn uniformly.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    if np.ndim(loading) == 0:
        load = np.full(labels.size, float(loading))
    else:
        load = rng.uniform(loading[0], loading[1], labels.size)
    f = rng.normal(size=(len(block_sizes), n_obs))
    e = rng.normal(size=(labels.size, n_obs))
    X = load[:, None] * f[labels] + np.sqrt(1 - load**2)[:, None] * e
    C = np.clip(np.corrcoef(X), -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C, labels


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
