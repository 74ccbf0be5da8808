import numpy as np
import pytest

from dalmc.data import SynthSpec, generate_synthetic
from dalmc.solver import MultiViewDataset, SolverState


def random_orthonormal(rng, rows, cols, size=None):
    """Tall matrices with orthonormal columns, from QR of Gaussians."""
    if size is None:
        q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
        return q
    q, _ = np.linalg.qr(rng.standard_normal((size, rows, cols)))
    return q


def random_state(rng, dims, embed, l, n, alpha=None):
    h = [random_orthonormal(rng, n, dp).T for dp in embed]
    z = [rng.standard_normal((d, dp)) for d, dp in zip(dims, embed)]
    a = [random_orthonormal(rng, dp, l) for dp in embed]
    s = random_orthonormal(rng, n, l).T
    if alpha is None:
        w = rng.random(len(dims)) + 0.1
        alpha = w / w.sum()
    return SolverState(h=h, z=z, a=a, s=s, alpha=np.asarray(alpha, dtype=float))


def random_dataset(rng, dims, n):
    return MultiViewDataset([rng.standard_normal((d, n)) for d in dims])


@pytest.fixture(scope="session")
def fixture_spec():
    return SynthSpec(n=300, k=3, v=3, dims=[20, 30, 40], separation=10.0, noise=0.5, seed=42)


@pytest.fixture(scope="session")
def fixture_data(fixture_spec):
    return generate_synthetic(fixture_spec)


# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
