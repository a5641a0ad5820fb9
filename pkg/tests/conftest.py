import numpy as np
import pytest

from facecf.data import ToySpec, generate_toy
from facecf.density import fit_kde
from facecf.predictor import train_mlp

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def toy():
    return generate_toy(ToySpec(seed=0))


@pytest.fixture(scope="session")
def toy_model(toy):
    return train_mlp(toy, seed=0)


@pytest.fixture(scope="session")
def toy_kde(toy):
    return fit_kde(toy)


def blue_source(data, anchor=(0.0, 2.0)):
    """Class-0 row nearest ``anchor``: the instance explained in the toy runs."""
    blue = np.flatnonzero(data.labels == 0)
    return int(blue[np.argmin(np.linalg.norm(data.features[blue] - np.asarray(anchor), axis=1))])


@pytest.fixture(scope="session")
def toy_source(toy):
    return blue_source(toy)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
