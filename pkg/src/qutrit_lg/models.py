"""
Wire models for command line output and JSON input files

Probabilities and times are plain floats; times are milliseconds except
for relaxation times, which are seconds (null stands for infinity).
"""

from typing import Annotated

from msgspec import Meta as M
from msgspec import Struct

# system state (0, 1, 2 or S for the singlet) followed by the ancilla reading
RowKey = Annotated[str, M(pattern=r"^[012S][01]$")]
StartKey = Annotated[str, M(pattern=r"^[012]$")]
# relaxation time in seconds, null for no relaxation
Seconds = Annotated[float, M(gt=0)] | None

# values are range-checked row by row when a ledger input is loaded
InvasivenessColumn = dict[RowKey, float]


class SettingTable(Struct, frozen=True, kw_only=True, omit_defaults=True):
    """joint probabilities of one setting - ``setting``"""

    pair: str
    times_ms: tuple[float, float]
    rows: list[str]
    joint: list[list[float]]
    correlation: float
    retained: float
    note: str | None = None


class K3Summary(Struct, frozen=True, kw_only=True):
    tau_ms: float
    rule: str
    c12: float
    c23: float
    c13: float
    k3: float


class OptimizeResult(Struct, frozen=True, kw_only=True):
    """``optimize`` output"""

    dimension: int
    rule: str
    tau_star: float
    k3_star: float


class StateColumns(Struct, frozen=True, kw_only=True, omit_defaults=True):
    ng: InvasivenessColumn
    cg: InvasivenessColumn
    # carried along, never propagated
    ng_uncertainty: dict[RowKey, float] | None = None
    cg_uncertainty: dict[RowKey, float] | None = None


class LedgerInput(Struct, frozen=True, kw_only=True, omit_defaults=True):
    """``ledger`` input, also written by ``invasiveness``"""

    states: dict[StartKey, StateColumns]
    pe: tuple[float, float, float] = (0.0, 0.0, 0.0)
    k3_exp: float | None = None
    # the published dark-count range, compared against the computed one
    printed_dark_count: tuple[float, float] | None = None


class LedgerReportModel(Struct, frozen=True, kw_only=True, omit_defaults=True):
    c_ng: tuple[float, float, float]
    c_cg: tuple[float, float, float]
    delta_c: tuple[float, float, float]
    pe: tuple[float, float, float]
    km1_strict: float
    km1_liberal: float
    non_malicious: float
    malicious: float
    bound_strict: float
    bound_liberal: float
    dark_count_range: tuple[float, float] | None = None


class Durations(Struct, frozen=True, kw_only=True):
    cg0: Annotated[float, M(ge=0)] = 40.0
    cg1: Annotated[float, M(ge=0)] = 116.0
    cg2: Annotated[float, M(ge=0)] = 76.0
    pulse: Annotated[float, M(ge=0)] = 1.0


class NoiseProfile(Struct, frozen=True, kw_only=True, omit_defaults=True):
    """noise profile file, see ``profiles/``"""

    t1_s: tuple[Seconds, Seconds, Seconds] = (None, None, None)
    t2_s: tuple[Seconds, Seconds, Seconds] = (None, None, None)
    pulse_fidelity: Annotated[float, M(gt=0, le=1)] = 1.0
    dark_count: Annotated[float, M(ge=0, lt=1)] = 0.0
    singlet_leak: Annotated[float, M(ge=0, lt=1)] = 0.0
    preparation_error: Annotated[float, M(ge=0, lt=1)] = 0.0
    durations_ms: Durations = Durations()
    description: str = ""
