import numpy as np
import pytest

from cpslearn import Dataset, OdeEnvironment, WaterTankSystem


@pytest.fixture
def toy_series() -> Dataset:
    """The canonical 5-row two-signal series used by windowing tests."""
    return Dataset({"V": [1.0, 2.0, 3.0, 4.0, 5.0], "x": [10.0, 20.0, 30.0, 40.0, 50.0]})


@pytest.fixture(scope="session")
def tank_trajectory() -> Dataset:
    """250 samples of the benchmark tank at 0.1 s, shared across tests."""
    return OdeEnvironment(WaterTankSystem(), sample_period=0.1).sample_trajectory(250)


def random_dataset(rng: np.random.Generator, rows: int, columns: int, prefix: str = "c") -> Dataset:
    return Dataset(
        [(f"{prefix}{i}", rng.uniform(-5.0, 5.0, size=rows)) for i in range(columns)]
    )
