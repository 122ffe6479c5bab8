"""
Imperfections of the NMR implementation

The circuit runs in the qubit 1, qubit 2, ancilla picture. Every step is
the ideal unitary followed by relaxation over its duration and, for
pulses and gates, a depolarizing pulse error. Readout relaxes for one
pulse length and then suffers ancilla dark counts.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from functools import cache, lru_cache
from pathlib import Path
from typing import Self

import msgspec
import numpy as np

from . import config, models
from .ancilla import ANCILLA_DIM
from .embedding import (
    PPS_DIM,
    TRIPLET_DIM,
    basis_map,
    embedded_cg,
    embedded_evolution,
    nmr_readout,
    start_state,
)
from .ledger import START_STATES, InvasivenessTable
from .operators import (
    ContractViolation,
    DensityOperator,
    KrausChannel,
    _require,
    apply_channel,
    dagger,
    tensor_all,
)
from .protocol import (
    DichotomicObservable,
    K3Report,
    RotationDynamics,
    Schedule,
    SettingPair,
    SettingResult,
    correlation,
    evaluate_grid,
)

logger = logging.getLogger(__name__)

INF = math.inf
# qubit 1, qubit 2, ancilla
SPINS = 3
PAULI_Z = np.diag([1, -1]).astype(np.complex128)


@dataclass(frozen=True, slots=True)
class RelaxationParams:
    """T1 and T2 per spin in seconds; infinity switches the process off."""

    t1_s: tuple[float, float, float] = (INF, INF, INF)
    t2_s: tuple[float, float, float] = (INF, INF, INF)

    def __post_init__(self) -> None:
        _require(len(self.t1_s) == len(self.t2_s) == SPINS, f"need T1 and T2 for {SPINS} spins")
        for spin, (t1, t2) in enumerate(zip(self.t1_s, self.t2_s)):
            _require(t1 > 0 and t2 > 0, f"spin {spin}: relaxation times must be positive")
            _require(t2 <= 2 * t1, f"spin {spin}: T2={t2} s exceeds 2 T1={2 * t1} s")

    def scaled(self, relax_rate: float = 1.0, dephase_rate: float = 1.0) -> Self:
        """Multiply the rates 1/T1 and 1/T2."""
        return type(self)(
            tuple(t / relax_rate for t in self.t1_s),
            tuple(t / dephase_rate for t in self.t2_s),
        )


@dataclass(frozen=True, slots=True)
class GateDurations:
    """Gate and pulse lengths in ms."""

    cg0: float = 40.0
    cg1: float = 116.0
    cg2: float = 76.0
    pulse: float = 1.0

    def __post_init__(self) -> None:
        _require(min(self.cg0, self.cg1, self.cg2, self.pulse) >= 0, "durations must not be negative")

    def gate(self, target: int) -> float:
        return (self.cg0, self.cg1, self.cg2)[target]

    def scaled(self, factor: float) -> Self:
        return type(self)(self.cg0 * factor, self.cg1 * factor, self.cg2 * factor, self.pulse * factor)


@dataclass(frozen=True, slots=True)
class ErrorKnobs:
    pulse_fidelity: float = 0.997
    dark_count_prob: float = 0.0
    singlet_leak_prob: float = 0.0
    preparation_error: float = 0.0

    def __post_init__(self) -> None:
        _require(0 < self.pulse_fidelity <= 1, f"pulse fidelity {self.pulse_fidelity} outside (0, 1]")
        for name in ("dark_count_prob", "singlet_leak_prob", "preparation_error"):
            value = getattr(self, name)
            _require(0 <= value < 1, f"{name} {value} outside [0, 1)")


@dataclass(frozen=True, slots=True)
class NoiseModel:
    relaxation: RelaxationParams = RelaxationParams()
    durations: GateDurations = GateDurations()
    knobs: ErrorKnobs = ErrorKnobs(pulse_fidelity=1.0)
    # relax during the (sub-ms) free evolutions as well as the gates
    relax_free_evolution: bool = True

    @classmethod
    def neutral(cls) -> Self:
        return cls()

    @classmethod
    def load_profile(cls, path: Path | None = None) -> Self:
        path = path or config.NOISE_PROFILE
        try:
            profile = msgspec.json.decode(Path(path).read_bytes(), type=models.NoiseProfile)
        except msgspec.ValidationError as e:
            raise ContractViolation(f"invalid noise profile {path}: {e}") from e
        except msgspec.DecodeError as e:
            raise ContractViolation(f"noise profile {path} is not JSON: {e}") from e
        except OSError as e:
            raise ContractViolation(f"cannot read noise profile {path}: {e.strerror}") from e

        def seconds(values: Sequence[float | None]) -> tuple[float, float, float]:
            return tuple(INF if value is None else value for value in values)

        durations = profile.durations_ms
        model = cls(
            RelaxationParams(seconds(profile.t1_s), seconds(profile.t2_s)),
            GateDurations(durations.cg0, durations.cg1, durations.cg2, durations.pulse),
            ErrorKnobs(
                pulse_fidelity=profile.pulse_fidelity,
                dark_count_prob=profile.dark_count,
                singlet_leak_prob=profile.singlet_leak,
                preparation_error=profile.preparation_error,
            ),
        )
        logger.info("Loaded noise profile %s", path)
        return model

    def scaled(
        self,
        *,
        duration: float = 1.0,
        relax_rate: float = 1.0,
        dephase_rate: float = 1.0,
        infidelity: float = 1.0,
    ) -> Self:
        fidelity = 1 - (1 - self.knobs.pulse_fidelity) * infidelity
        return replace(
            self,
            relaxation=self.relaxation.scaled(relax_rate, dephase_rate),
            durations=self.durations.scaled(duration),
            knobs=replace(self.knobs, pulse_fidelity=fidelity),
        )


def _spin_relaxation(duration_ms: float, t1_s: float, t2_s: float) -> KrausChannel:
    t = duration_ms / 1000
    gamma = -math.expm1(-t / t1_s)
    # pure dephasing on top of the T1 contribution to coherence decay
    dephasing_rate = max(0.0, 1 / t2_s - 1 / (2 * t1_s))
    f = math.exp(-t * dephasing_rate)

    damping = KrausChannel.identity(2)
    if gamma > 0:
        damping = KrausChannel(
            (np.array([[1, 0], [0, math.sqrt(1 - gamma)]]), np.array([[0, math.sqrt(gamma)], [0, 0]]))
        )
    if f < 1:
        dephasing = KrausChannel((math.sqrt((1 + f) / 2) * np.eye(2), math.sqrt((1 - f) / 2) * PAULI_Z))
        return damping.compose(dephasing)
    return damping


@lru_cache(maxsize=256)
def relax_channel(duration_ms: float, params: RelaxationParams) -> KrausChannel:
    """Independent T1/T2 relaxation of the three spins over ``duration_ms``."""
    _require(duration_ms >= 0, f"duration must not be negative, got {duration_ms}")
    return tensor_all([_spin_relaxation(duration_ms, t1, t2) for t1, t2 in zip(params.t1_s, params.t2_s)])


def depolarizing_strength(fidelity: float, dim: int = PPS_DIM) -> float:
    """p of rho -> (1 - p) rho + p I/dim whose average gate fidelity is ``fidelity``."""
    _require(0 < fidelity <= 1, f"fidelity {fidelity} outside (0, 1]")
    p = (1 - fidelity) * dim / (dim - 1)
    _require(p <= dim**2 / (dim**2 - 1), f"fidelity {fidelity} is below the fully depolarizing limit")
    return p


@cache
def pulse_error_channel(fidelity: float, dim: int = PPS_DIM) -> KrausChannel:
    p = depolarizing_strength(fidelity, dim)
    if p == 0:
        return KrausChannel.identity(dim)
    shift = np.roll(np.eye(dim, dtype=np.complex128), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    operators = [math.sqrt(1 - p + p / dim**2) * np.eye(dim, dtype=np.complex128)]
    for a in range(dim):
        for b in range(dim):
            if a or b:
                weyl = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
                operators.append(math.sqrt(p) / dim * weyl)
    return KrausChannel(tuple(operators))


@cache
def singlet_leak_channel(probability: float) -> KrausChannel:
    """With ``probability`` the gate swaps |1>_s and the singlet."""
    _require(0 <= probability < 1, f"leak probability {probability} outside [0, 1)")
    swap = np.eye(4, dtype=np.complex128)[[0, 3, 2, 1]]
    change = basis_map().matrix
    leak = np.kron(change @ swap @ dagger(change), np.eye(ANCILLA_DIM))
    return KrausChannel((math.sqrt(1 - probability) * np.eye(PPS_DIM), math.sqrt(probability) * leak))


@cache
def dark_count_channel(probability: float) -> KrausChannel:
    """An ancilla in |1> reads as |0> with ``probability``."""
    _require(0 <= probability < 1, f"dark count probability {probability} outside [0, 1)")
    keep = np.diag([1, math.sqrt(1 - probability)])
    flip = np.array([[0, math.sqrt(probability)], [0, 0]])
    system = np.eye(PPS_DIM // ANCILLA_DIM)
    return KrausChannel((np.kron(system, keep), np.kron(system, flip)))


def prepared_state(start: int, error: float = 0.0) -> DensityOperator:
    """(1 - error) |start><start| plus error spread evenly over the other triplet states."""
    _require(start in range(TRIPLET_DIM), f"starting state {start} outside 0..2")
    _require(0 <= error < 1, f"preparation error {error} outside [0, 1)")
    rho = start_state(start).scaled(1 - error)
    if error:
        for other in set(range(TRIPLET_DIM)) - {start}:
            rho = rho + start_state(other).scaled(error / 2)
    return rho


def _relax(rho: DensityOperator, duration_ms: float, model: NoiseModel) -> DensityOperator:
    if duration_ms <= 0:
        return rho
    return apply_channel(rho, relax_channel(duration_ms, model.relaxation))


def _pulse_error(rho: DensityOperator, model: NoiseModel) -> DensityOperator:
    if model.knobs.pulse_fidelity == 1:
        return rho
    return apply_channel(rho, pulse_error_channel(model.knobs.pulse_fidelity))


def _evolve(
    rho: DensityOperator, dynamics: RotationDynamics, t_ms: float, model: NoiseModel
) -> DensityOperator:
    rho = embedded_evolution(dynamics, t_ms).conjugate(rho)
    if model.relax_free_evolution:
        rho = _relax(rho, t_ms, model)
    return _pulse_error(rho, model)


def _gate(rho: DensityOperator, target: int, model: NoiseModel) -> DensityOperator:
    rho = embedded_cg(target).conjugate(rho)
    rho = _relax(rho, model.durations.gate(target), model)
    if model.knobs.singlet_leak_prob:
        rho = apply_channel(rho, singlet_leak_channel(model.knobs.singlet_leak_prob))
    return _pulse_error(rho, model)


def _read(rho: DensityOperator, model: NoiseModel) -> dict[str, float]:
    rho = _relax(rho, model.durations.pulse, model)
    if model.knobs.dark_count_prob:
        rho = apply_channel(rho, dark_count_channel(model.knobs.dark_count_prob))
    return nmr_readout(rho)


def noisy_setting(
    dynamics: RotationDynamics, schedule: Schedule, pair: SettingPair, model: NoiseModel
) -> SettingResult:
    _require(dynamics.dimension == TRIPLET_DIM, "the noise model hosts a qutrit only")
    t_first, t_second = schedule.pair_times(pair)
    rho = _evolve(prepared_state(0, model.knobs.preparation_error), dynamics, t_first, model)

    rows = []
    for target in range(TRIPLET_DIM):
        final = _evolve(_gate(rho, target, model), dynamics, t_second - t_first, model)
        readout = _read(final, model)
        rows.append([readout[f"{j}0"] for j in range(TRIPLET_DIM)])
    return SettingResult(rows, (t_first, t_second), supports=tuple((t,) for t in range(TRIPLET_DIM)))


def noisy_k3(dynamics: RotationDynamics, schedule: Schedule, model: NoiseModel) -> K3Report:
    observable = DichotomicObservable(TRIPLET_DIM)
    c12, c23, c13 = (
        correlation(noisy_setting(dynamics, schedule, pair, model), observable)
        for pair in (SettingPair.T12, SettingPair.T23, SettingPair.T13)
    )
    return K3Report(c12, c23, c13)


def noisy_scan(
    dynamics: RotationDynamics,
    t1: float,
    model: NoiseModel,
    grid: Sequence[float],
    *,
    workers: int | None = None,
) -> list[tuple[float, float]]:
    def evaluate(tau: float) -> float:
        return noisy_k3(dynamics, Schedule(t1, tau), model).k3

    grid = [float(tau) for tau in grid]
    return list(zip(grid, evaluate_grid(evaluate, grid, workers)))


def simulate_invasiveness(start: int, gate: int | None, model: NoiseModel) -> dict[str, float]:
    """One column of the invasiveness test; without a gate the state waits for as long as CG_start takes."""
    rho = prepared_state(start, model.knobs.preparation_error)
    if gate is None:
        rho = _relax(rho, model.durations.gate(start), model)
    else:
        _require(gate in range(TRIPLET_DIM), f"gate target {gate} outside 0..2")
        rho = _gate(rho, gate, model)
    return _read(rho, model)


def simulate_invasiveness_table(model: NoiseModel) -> InvasivenessTable:
    return InvasivenessTable(
        tuple(simulate_invasiveness(p, None, model) for p in START_STATES),
        tuple(simulate_invasiveness(p, p, model) for p in START_STATES),
    )
