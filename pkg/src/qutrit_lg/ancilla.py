"""
Circuit-level ideal negative result measurement

The composite is |system> (x) |ancilla> with the ancilla as fast index.
CG_t leaves the ancilla alone when the system is in |t> and flips it
otherwise; runs are post-selected on the ancilla still reading |0>.
"""

import logging
from dataclasses import dataclass
from functools import cache

import numpy as np
from numpy.typing import NDArray

from . import config
from .operators import (
    DensityOperator,
    KrausChannel,
    Matrix,
    UnitaryOperator,
    _require,
    apply_channel,
    diagonal_populations,
    partial_trace,
    tensor_product,
)
from .protocol import (
    DichotomicObservable,
    K3Report,
    PostSelectionRecord,
    RotationDynamics,
    Schedule,
    SettingPair,
    SettingResult,
    correlation,
    evolution_unitary,
)

logger = logging.getLogger(__name__)

ANCILLA_DIM = 2
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
ANCILLA_READY = np.array([1, 0], dtype=np.complex128)


@dataclass(frozen=True, slots=True)
class ControlledGate:
    target: int
    unitary: UnitaryOperator

    @property
    def matrix(self) -> Matrix:
        return self.unitary.matrix


@cache
def cg_unitary(target: int, system_dim: int = 3) -> ControlledGate:
    _require(0 <= target < system_dim, f"gate target {target} outside 0..{system_dim - 1}")
    matrix = np.zeros((system_dim * ANCILLA_DIM,) * 2, dtype=np.complex128)
    for state in range(system_dim):
        projector = np.zeros((system_dim, system_dim))
        projector[state, state] = 1
        matrix += np.kron(projector, np.eye(ANCILLA_DIM) if state == target else PAULI_X)
    return ControlledGate(target, UnitaryOperator(matrix))


def _ancilla_projector(system_dim: int, reading: int = 0) -> Matrix:
    projector = np.zeros((ANCILLA_DIM, ANCILLA_DIM), dtype=np.complex128)
    projector[reading, reading] = 1
    return np.kron(np.eye(system_dim), projector)


def attach_ancilla(rho_s: DensityOperator) -> DensityOperator:
    return tensor_product(rho_s, DensityOperator.pure(ANCILLA_READY))


def subchannel(target: int, system_dim: int = 3) -> KrausChannel:
    """The post-selected system map of one CG run: <0|_a CG_t (. (x) |0>_a)."""
    gate = cg_unitary(target, system_dim)
    attach = np.kron(np.eye(system_dim), ANCILLA_READY.reshape(-1, 1))
    kraus = attach.conj().T @ gate.matrix @ attach
    return KrausChannel((kraus,), complete=False)


def assemble_full_channel(system_dim: int = 3) -> KrausChannel:
    """The three post-selected subchannels sum to the complete dephasing channel."""
    subchannels = (subchannel(t, system_dim) for t in range(system_dim))
    return KrausChannel.from_subchannels(subchannels, complete=True)


def inrm_run(rho_s: DensityOperator, target: int) -> tuple[DensityOperator, PostSelectionRecord]:
    _require(abs(rho_s.norm - 1) <= config.STRUCTURAL_TOL, "system state must be normalized")
    dim = rho_s.dim
    composite = cg_unitary(target, dim).unitary.conjugate(attach_ancilla(rho_s))
    kept = apply_channel(composite, KrausChannel((_ancilla_projector(dim),), complete=False))

    system = partial_trace(kept, keep=0, dims=(dim, ANCILLA_DIM))
    record = PostSelectionRecord(retained=kept.norm, lost=rho_s.norm - kept.norm, branch_target=target)
    logger.debug("CG_%d retained %.6f lost %.6f", target, record.retained, record.lost)
    return system, record


def final_readout(rho_sa: DensityOperator, applied_target: int) -> NDArray[np.float64]:
    """P(applied_target, j) for every system state j: the (j, ancilla 0) diagonal entries."""
    _require(rho_sa.dim % ANCILLA_DIM == 0, f"composite dimension {rho_sa.dim} has no qubit ancilla")
    system_dim = rho_sa.dim // ANCILLA_DIM
    _require(0 <= applied_target < system_dim, f"gate target {applied_target} outside 0..{system_dim - 1}")
    populations = diagonal_populations(rho_sa)
    return populations.reshape(system_dim, ANCILLA_DIM)[:, 0].copy()


def inrm_setting(
    dynamics: RotationDynamics,
    schedule: Schedule,
    pair: SettingPair,
    initial: DensityOperator | None = None,
) -> SettingResult:
    """One setting through the ancilla circuit: one CG run per system state, post-selected at readout."""
    dim = dynamics.dimension
    initial = initial or DensityOperator.basis(dim, 0)
    t_first, t_second = schedule.pair_times(pair)
    rho = evolution_unitary(dynamics, t_first).conjugate(initial)
    step = tensor_product(
        evolution_unitary(dynamics, t_second - t_first), UnitaryOperator.identity(ANCILLA_DIM)
    )

    rows, records = [], []
    for target in range(dim):
        composite = cg_unitary(target, dim).unitary.conjugate(attach_ancilla(rho))
        ancilla = partial_trace(composite, keep=1, dims=(dim, ANCILLA_DIM))
        retained = float(ancilla.matrix[0, 0].real)
        records.append(PostSelectionRecord(retained=retained, lost=1 - retained, branch_target=target))
        rows.append(final_readout(step.conjugate(composite), target))

    return SettingResult(
        rows,
        (t_first, t_second),
        supports=tuple((t,) for t in range(dim)),
        records=tuple(records),
    )


def inrm_k3(
    dynamics: RotationDynamics, schedule: Schedule, initial: DensityOperator | None = None
) -> K3Report:
    observable = DichotomicObservable(dynamics.dimension)
    c12, c23, c13 = (
        correlation(inrm_setting(dynamics, schedule, pair, initial), observable)
        for pair in (SettingPair.T12, SettingPair.T23, SettingPair.T13)
    )
    return K3Report(c12, c23, c13)
