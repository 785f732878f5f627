import numpy as np
import pytest

from inferact.model import GenerativeModel


def toy_model(A, B=None, C=None, D=None, A_deps=None):
    """Small model helper: single factor unless ``B`` and ``A_deps`` say otherwise."""
    A = [np.asarray(a, dtype=float) for a in A]
    if B is None:
        n = A[0].shape[1]
        B = [np.eye(n)[:, :, None]]
    B = [np.asarray(b, dtype=float) for b in B]
    if A_deps is None:
        A_deps = [[0] for _ in A]
    if C is None:
        C = [np.zeros(a.shape[0]) for a in A]
    if D is None:
        D = [np.full(b.shape[0], 1.0 / b.shape[0]) for b in B]
    return GenerativeModel(A=A, B=B, C=[np.asarray(c, dtype=float) for c in C],
                           D=[np.asarray(d, dtype=float) for d in D],
                           A_deps=A_deps, B_deps=[[f] for f in range(len(B))])


def random_column_stochastic(rng, shape, concentration=1.0):
    a = rng.gamma(concentration, 1.0, size=shape) + 1e-3
    return a / a.sum(axis=0, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
