from pathlib import Path

import msgspec
import numpy as np

from qutrit_lg.operators import DensityOperator, UnitaryOperator

DATA_DIR = Path(__file__).with_name("data")


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> DensityOperator:
    """Ginibre-distributed mixed state."""
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real)


def random_unitary(rng: np.random.Generator, dim: int) -> UnitaryOperator:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return UnitaryOperator(q * (np.diagonal(r) / np.abs(np.diagonal(r))))


def load_measured_settings() -> dict[str, list[list[float]]]:
    data = DATA_DIR.joinpath("measured_settings.json").read_bytes()
    return msgspec.json.decode(data, type=dict[str, list[list[float]]])
