import numpy as np
import pytest

from infogeo import synth_gaussian_collection


def random_orthonormal(m, d, rng):
    q, _ = np.linalg.qr(rng.standard_normal((d, m)))
    return q.T


def central_difference(fun, A, step=1e-5):
    """Entrywise central differences of a scalar function of a matrix."""
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A)
        E[idx] = step
        out[idx] = (fun(A + E) - fun(A - E)) / (2 * step)
    return out


def floyd_warshall_loops(w):
    """Textbook triple loop, kept deliberately naive."""
    n = len(w)
    d = [[float(w[i][j]) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return np.array(d)


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def noise_dim_collection():
    """Four 3-D Gaussians that differ in coordinates 1-2 only."""
    means = [[0, 0, 0], [1.5, 0, 0], [0, 1.5, 0], [1.5, 1.5, 0]]
    return synth_gaussian_collection(means, [np.eye(3)] * 4, n_per_set=200, seed=7)


@pytest.fixture(scope="session")
def mean_grid_collection():
    means = [[0.5 * i] for i in range(10)]
    return synth_gaussian_collection(means, [[[1.0]]] * 10, n_per_set=1000, seed=2024)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
