import numpy as np
import pytest

from chemtime.core import Dataset, MTSample
from chemtime.simgen import generate_dataset, preset_config

ACCEPTANCE_LINES: list[str] = []


def make_sample(channels, onset=0, conc=(0.0, 17.0, 0.0, 0.0), sid="s0", rate=20.0):
    return MTSample(id=sid, channels=np.asarray(channels, dtype=float), onset_index=onset,
                    concentrations=np.asarray(conc, dtype=float), sample_rate=rate)


def toy_dataset(n=16, k=3, T=12, seed=0, name="toy", positive="A", analytes=("A", "B")):
    """Small two-analyte set where the positive analyte lifts every channel after onset."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        a = i % len(analytes)
        conc = np.zeros(len(analytes))
        conc[a] = 10.0 + i
        x = rng.normal(0.0, 0.1, size=(k, T))
        x[:, T // 3 :] += 2.0 if a == 0 else -2.0
        samples.append(MTSample(id=f"{name}-{i:03d}", channels=x, onset_index=T // 3, concentrations=conc))
    return Dataset(name=name, analyte_names=analytes, samples=tuple(samples), positive_analyte=positive)


@pytest.fixture(scope="session")
def preset0():
    return generate_dataset(preset_config(0))


@pytest.fixture(scope="session")
def trained_chemtime(preset0):
    from chemtime.encoder import ChemTimeClassifier

    train, _ = preset0
    return ChemTimeClassifier(epochs=20).fit(train)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
