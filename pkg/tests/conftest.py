import numpy as np
import pytest

from proctomo import probe_factory, tomography


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def announce(capsys):
    """Print a line on the real terminal, bypassing capture."""
    def _announce(line):
        with capsys.disabled():
            print(line, flush=True)
    return _announce


@pytest.fixture(scope="session")
def qubit16():
    return probe_factory.qubit16_family()


@pytest.fixture(scope="session")
def qubit16_bundle(qubit16):
    return tomography.build_frame(qubit16)


@pytest.fixture(scope="session")
def weyl_n2():
    return probe_factory.weyl_ancilla_family(2, 2)


def random_state(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(rng, d):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = m @ m.conj().T
    return m / np.trace(m)


def random_hermitian(rng, d):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return m + m.conj().T
