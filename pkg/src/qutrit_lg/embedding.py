"""
The qutrit as the triplet of two spin-1/2 nuclei

Spin/singlet notation: |0>_s = |00>, |1>_s = (|01> + |10>)/sqrt 2,
|2>_s = |11> and |S> = (|01> - |10>)/sqrt 2. Qutrit operators act as the
identity on the singlet. With an ancilla it is the fast index, so the
composite order is qubit 1, qubit 2, ancilla.
"""

import logging
from dataclasses import KW_ONLY, dataclass
from functools import cache
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .ancilla import ANCILLA_DIM, ANCILLA_READY, cg_unitary
from .operators import (
    DensityOperator,
    KrausChannel,
    Matrix,
    UnitaryOperator,
    _require,
    apply_channel,
    dagger,
    diagonal_populations,
)
from .protocol import (
    DichotomicObservable,
    K3Report,
    RotationDynamics,
    Schedule,
    SettingPair,
    SettingResult,
    correlation,
    evolution_unitary,
)

logger = logging.getLogger(__name__)

TRIPLET_DIM = 3
TWO_QUBIT_DIM = 4
SINGLET_INDEX = 3
PPS_DIM = TWO_QUBIT_DIM * ANCILLA_DIM

# (system, ancilla) rows of the diagonal readout, in table order
READOUT_ROWS = ("00", "01", "10", "11", "S0", "S1", "20", "21")
_SYSTEM_INDEX = {"0": 0, "1": 1, "2": 2, "S": SINGLET_INDEX}


@dataclass(frozen=True, slots=True)
class BasisMap:
    """U_B: its columns are |0>_s, |1>_s, |2>_s, |S> in the computational basis."""

    matrix: Matrix

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", UnitaryOperator(self.matrix).matrix)
        _require(self.matrix.shape == (TWO_QUBIT_DIM, TWO_QUBIT_DIM), "basis map acts on two qubits")

    @classmethod
    def standard(cls) -> Self:
        h = 1 / np.sqrt(2)
        columns = [
            [1, 0, 0, 0],
            [0, h, h, 0],
            [0, 0, 0, 1],
            [0, h, -h, 0],
        ]
        return cls(np.array(columns, dtype=np.complex128).T)

    def with_ancilla(self, ancilla_dim: int = ANCILLA_DIM) -> Matrix:
        return np.kron(self.matrix, np.eye(ancilla_dim))


@cache
def basis_map() -> BasisMap:
    return BasisMap.standard()


def embed_qutrit_operator(operator: ArrayLike, *, ancilla_dim: int = 1) -> Matrix:
    """Lift a (qutrit (x) ancilla) operator to the two-qubit picture, identity on the singlet."""
    op = np.asarray(operator, dtype=np.complex128)
    sector = TRIPLET_DIM * ancilla_dim
    _require(op.shape == (sector, sector), f"expected a {sector}x{sector} operator, got {op.shape}")
    full = np.eye(TWO_QUBIT_DIM * ancilla_dim, dtype=np.complex128)
    full[:sector, :sector] = op
    change = basis_map().with_ancilla(ancilla_dim)
    return change @ full @ dagger(change)


def to_spin1_sector(rho_2q: DensityOperator) -> tuple[DensityOperator, float]:
    """Triplet block (sub-normalized) and singlet population of a two-qubit state."""
    _require(rho_2q.dim == TWO_QUBIT_DIM, f"expected a two-qubit state, got dimension {rho_2q.dim}")
    change = basis_map().matrix
    matrix = dagger(change) @ rho_2q.matrix @ change
    block = DensityOperator.from_matrix(matrix[:TRIPLET_DIM, :TRIPLET_DIM])
    return block, float(matrix[SINGLET_INDEX, SINGLET_INDEX].real)


def from_spin1_sector(rho3: DensityOperator, singlet: float = 0.0) -> DensityOperator:
    _require(rho3.dim == TRIPLET_DIM, f"expected a qutrit state, got dimension {rho3.dim}")
    _require(singlet >= 0, "singlet population must not be negative")
    matrix = np.zeros((TWO_QUBIT_DIM, TWO_QUBIT_DIM), dtype=np.complex128)
    matrix[:TRIPLET_DIM, :TRIPLET_DIM] = rho3.matrix
    matrix[SINGLET_INDEX, SINGLET_INDEX] = singlet
    change = basis_map().matrix
    return DensityOperator.from_matrix(change @ matrix @ dagger(change))


def nmr_readout(rho8: DensityOperator) -> dict[str, float]:
    """Diagonal readout of a qubit-qubit-ancilla state in spin/singlet notation."""
    _require(rho8.dim == PPS_DIM, f"expected a two-qubit plus ancilla state, got dimension {rho8.dim}")
    change = basis_map().with_ancilla()
    populations = diagonal_populations(DensityOperator.from_matrix(dagger(change) @ rho8.matrix @ change))
    return {
        row: float(populations[_SYSTEM_INDEX[row[0]] * ANCILLA_DIM + int(row[1])]) for row in READOUT_ROWS
    }


def embedded_evolution(dynamics: RotationDynamics, t_ms: float) -> UnitaryOperator:
    _require(dynamics.dimension == TRIPLET_DIM, "the two-qubit picture hosts a qutrit only")
    step = evolution_unitary(dynamics, t_ms).matrix
    return UnitaryOperator(embed_qutrit_operator(np.kron(step, np.eye(ANCILLA_DIM)), ancilla_dim=ANCILLA_DIM))


@cache
def embedded_cg(target: int) -> UnitaryOperator:
    return UnitaryOperator(embed_qutrit_operator(cg_unitary(target).matrix, ancilla_dim=ANCILLA_DIM))


def start_state(index: int = 0) -> DensityOperator:
    """|index>_s (x) |0>_a in the two-qubit plus ancilla picture."""
    system = np.zeros(TRIPLET_DIM, dtype=np.complex128)
    system[index] = 1
    ket = basis_map().matrix @ np.append(system, 0)
    return DensityOperator.pure(np.kron(ket, ANCILLA_READY))


@dataclass(frozen=True, slots=True)
class PseudoPureState:
    epsilon: float
    _: KW_ONLY
    dim: int = PPS_DIM

    def __post_init__(self) -> None:
        _require(0 < self.epsilon <= 1, f"polarization must lie in (0, 1], got {self.epsilon}")

    @property
    def background(self) -> float:
        return (1 - self.epsilon) / self.dim

    def state(self) -> DensityOperator:
        pure = np.zeros((self.dim, self.dim), dtype=np.complex128)
        pure[0, 0] = 1
        return DensityOperator(self.background * np.eye(self.dim) + self.epsilon * pure)

    def deviation(self, rho: DensityOperator) -> DensityOperator:
        """(rho - (1 - eps)/dim I) / eps; only meaningful after unital evolution."""
        _require(rho.dim == self.dim, f"dimension mismatch {rho.dim} != {self.dim}")
        return DensityOperator.from_matrix((rho.matrix - self.background * np.eye(self.dim)) / self.epsilon)


def pps_state(epsilon: float) -> DensityOperator:
    return PseudoPureState(epsilon).state()


def deviation_readout(raw: ArrayLike, epsilon: float, dim: int = PPS_DIM) -> NDArray[np.float64]:
    pps = PseudoPureState(epsilon, dim=dim)
    return (np.asarray(raw, dtype=np.float64) - pps.background) / pps.epsilon


def identity_background_run(channels: KrausChannel | list[KrausChannel]) -> float:
    """Largest elementwise deviation from I/dim after running the channels on I/dim."""
    channels = [channels] if isinstance(channels, KrausChannel) else channels
    _require(bool(channels), "nothing to run")
    dim = channels[0].dim_in
    rho = DensityOperator.maximally_mixed(dim)
    for channel in channels:
        rho = apply_channel(rho, channel)
    _require(rho.dim == dim, "the protocol must map the space onto itself")
    deviation = float(np.max(np.abs(rho.matrix - np.eye(dim) / dim)))
    logger.debug("identity background deviation %.3g", deviation)
    return deviation


def pps_setting(
    epsilon: float,
    pair: SettingPair,
    dynamics: RotationDynamics | None = None,
    schedule: Schedule | None = None,
) -> SettingResult:
    """Noiseless circuit run from the pseudo-pure state, read out as deviation populations."""
    dynamics = dynamics or RotationDynamics()
    schedule = schedule or Schedule()
    t_first, t_second = schedule.pair_times(pair)
    rho = embedded_evolution(dynamics, t_first).conjugate(pps_state(epsilon))
    step = embedded_evolution(dynamics, t_second - t_first)

    rows = []
    for target in range(TRIPLET_DIM):
        final = step.conjugate(embedded_cg(target).conjugate(rho))
        readout = dict(zip(READOUT_ROWS, deviation_readout(list(nmr_readout(final).values()), epsilon)))
        rows.append([readout[f"{state}0"] for state in range(TRIPLET_DIM)])
    return SettingResult(rows, (t_first, t_second), supports=tuple((t,) for t in range(TRIPLET_DIM)))


def pps_k3(
    epsilon: float, dynamics: RotationDynamics | None = None, schedule: Schedule | None = None
) -> K3Report:
    observable = DichotomicObservable(TRIPLET_DIM)
    c12, c23, c13 = (
        correlation(pps_setting(epsilon, pair, dynamics, schedule), observable)
        for pair in (SettingPair.T12, SettingPair.T23, SettingPair.T13)
    )
    return K3Report(c12, c23, c13)
