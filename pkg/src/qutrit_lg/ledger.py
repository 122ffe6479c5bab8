"""
Error budget of the invasiveness test

Turns the NG / CG_p columns of the invasiveness experiment into C values,
their gate-induced shifts, the measurement boost KM1, the loss budget and
the modified classical bound on K3.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import KW_ONLY, dataclass, field
from enum import StrEnum
from pathlib import Path

import msgspec

from . import models
from .embedding import READOUT_ROWS
from .operators import ContractViolation, _require
from .templates import render

logger = logging.getLogger(__name__)

START_STATES = (0, 1, 2)
POST_SELECTED_ROWS = ("00", "10", "20")
LOSS_ROWS = tuple(row for row in READOUT_ROWS if row not in POST_SELECTED_ROWS)
# experimental columns over-sum by a few percent
COLUMN_SLACK = 0.06
# a gate-dependent loss can be chosen adversarially in each of the five loss rows
MALICIOUS_FACTOR = 5
DARK_COUNT_DELTA = 1e-4

Column = Mapping[str, float]


class LedgerSchemaError(ContractViolation):
    def __init__(self, message: str, path: str) -> None:
        super().__init__(f"{message} at `{path}`")
        self.path = path


class KM1Mode(StrEnum):
    STRICT = "strict"
    LIBERAL = "liberal"


def _check_column(column: Column, what: str) -> None:
    for row, value in column.items():
        _require(row in READOUT_ROWS, f"{what}: unknown row {row!r}")
        _require(0 <= value <= 1, f"{what}: probability {value} of row {row} outside [0, 1]")
    total = sum(column.values())
    _require(total <= 1 + COLUMN_SLACK, f"{what}: column sums to {total:.4f}")
    if total > 1 + 1e-9:
        logger.warning("%s sums to %.4f, accepted as over-summed", what, total)


@dataclass(frozen=True, slots=True)
class InvasivenessTable:
    """NG and CG_p columns, indexed by the starting state p."""

    ng: tuple[Column, Column, Column]
    cg: tuple[Column, Column, Column]
    _: KW_ONLY
    ng_uncertainty: tuple[Column | None, ...] = (None, None, None)
    cg_uncertainty: tuple[Column | None, ...] = (None, None, None)

    def __post_init__(self) -> None:
        _require(
            len(self.ng) == len(self.cg) == len(START_STATES), "one NG and one CG column per starting state"
        )
        for p in START_STATES:
            _check_column(self.ng[p], f"start {p} NG")
            _check_column(self.cg[p], f"start {p} CG{p}")


@dataclass(frozen=True, slots=True)
class PreparationErrors:
    pe: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        _require(len(self.pe) == len(START_STATES), "one preparation error per starting state")
        _require(all(0 <= value < 1 for value in self.pe), f"preparation errors {self.pe} outside [0, 1)")


@dataclass(frozen=True, slots=True)
class LedgerReport:
    c_ng: tuple[float, ...]
    c_cg: tuple[float, ...]
    delta_c: tuple[float, ...]
    pe: PreparationErrors
    km1_strict: float
    km1_liberal: float
    non_malicious: float
    malicious: float
    _: KW_ONLY
    dark_count_range: tuple[float, float] | None = None
    bound_strict: float = field(init=False)
    bound_liberal: float = field(init=False)

    def __post_init__(self) -> None:
        _require(self.km1_strict >= 0 and self.km1_liberal >= 0, "KM1 must not be negative")
        object.__setattr__(self, "bound_strict", modified_bound(self.km1_strict, self.malicious))
        object.__setattr__(self, "bound_liberal", modified_bound(self.km1_liberal, self.malicious))


def c_value(column: Column, start: int) -> float:
    """+-P(0,a0) -+ P(1,a0) -+ P(2,a0), signed so that perfect retention of |start> gives +1."""
    _require(start in START_STATES, f"starting state {start} outside 0..2")
    missing = [row for row in POST_SELECTED_ROWS if row not in column]
    _require(not missing, f"column lacks post-selected rows {missing}")
    value = column["00"] - column["10"] - column["20"]
    return value if start == 0 else -value


def delta_c(table: InvasivenessTable) -> tuple[float, float, float]:
    return tuple(c_value(table.cg[p], p) - c_value(table.ng[p], p) for p in START_STATES)


def km1(delta: Sequence[float], pe: Sequence[float], mode: KM1Mode = KM1Mode.STRICT) -> float:
    """-min(candidates, 0) + 2 max(candidates, 0) over all starting states."""
    _require(len(delta) == len(pe), "one preparation error per C shift")
    match mode:
        case KM1Mode.STRICT:
            candidates = [d + sign * e for d, e in zip(delta, pe) for sign in (-1, 1)]
        case KM1Mode.LIBERAL:
            candidates = list(delta)
    return -min(*candidates, 0.0) + 2 * max(*candidates, 0.0)


def losses(column: Column) -> float:
    missing = [row for row in LOSS_ROWS if row not in column]
    _require(not missing, f"column lacks loss rows {missing}")
    return sum(column[row] for row in LOSS_ROWS)


def malicious_budget(table: InvasivenessTable) -> tuple[float, float]:
    """(non_malicious, malicious): the smallest NG loss and five times the NG loss spread."""
    ng_losses = [losses(column) for column in table.ng]
    return min(ng_losses), MALICIOUS_FACTOR * (max(ng_losses) - min(ng_losses))


def modified_bound(km1_value: float, malicious: float) -> float:
    _require(km1_value >= 0 and malicious >= 0, "bound corrections must not be negative")
    return 1 + km1_value + malicious


def dark_count_tolerance(k3_exp: float, bound_strict: float, bound_liberal: float) -> tuple[float, float]:
    return k3_exp - bound_strict, k3_exp - bound_liberal


def audit(
    table: InvasivenessTable,
    pe: PreparationErrors | None = None,
    k3_exp: float | None = None,
    printed_dark_count: tuple[float, float] | None = None,
) -> LedgerReport:
    pe = pe or PreparationErrors()
    shifts = delta_c(table)
    strict, liberal = km1(shifts, pe.pe, KM1Mode.STRICT), km1(shifts, pe.pe, KM1Mode.LIBERAL)
    non_malicious, malicious = malicious_budget(table)

    dark = None
    if k3_exp is not None:
        dark = dark_count_tolerance(
            k3_exp, modified_bound(strict, malicious), modified_bound(liberal, malicious)
        )
        gap = max((abs(a - b) for a, b in zip(dark, printed_dark_count or ())), default=0.0)
        if gap > DARK_COUNT_DELTA:
            logger.warning(
                "Dark-count range (%.4f, %.4f) differs from the printed (%.4f, %.4f)",
                *dark,
                *printed_dark_count,
            )

    report = LedgerReport(
        tuple(c_value(table.ng[p], p) for p in START_STATES),
        tuple(c_value(table.cg[p], p) for p in START_STATES),
        shifts,
        pe,
        strict,
        liberal,
        non_malicious,
        malicious,
        dark_count_range=dark,
    )
    logger.info(
        "Audited ledger: KM1 %.4f, Mal %.4f, bound %.4f", report.km1_strict, malicious, report.bound_strict
    )
    return report


def load_ledger_input(path: Path) -> models.LedgerInput:
    try:
        data = msgspec.json.decode(path.read_bytes(), type=models.LedgerInput)
    except msgspec.ValidationError as e:
        message, _, where = str(e).rpartition(" - at ")
        raise LedgerSchemaError(message or str(e), where.strip("`") or "$") from e
    except msgspec.DecodeError as e:
        raise LedgerSchemaError(str(e), "$") from e

    for p in START_STATES:
        state = data.states.get(str(p))
        if state is None:
            raise LedgerSchemaError(f"missing starting state {p!r}", f"$.states['{p}']")
        for name in ("ng", "cg"):
            column = getattr(state, name)
            for row, value in column.items():
                if not 0 <= value <= 1:
                    raise LedgerSchemaError(
                        f"probability {value} outside [0, 1]", f"$.states['{p}'].{name}['{row}']"
                    )
            for row in READOUT_ROWS:
                if row not in column:
                    raise LedgerSchemaError(f"missing row {row!r}", f"$.states['{p}'].{name}['{row}']")
    return data


def table_from_input(data: models.LedgerInput) -> InvasivenessTable:
    states = [data.states[str(p)] for p in START_STATES]
    return InvasivenessTable(
        tuple(state.ng for state in states),
        tuple(state.cg for state in states),
        ng_uncertainty=tuple(state.ng_uncertainty for state in states),
        cg_uncertainty=tuple(state.cg_uncertainty for state in states),
    )


def audit_input(data: models.LedgerInput) -> LedgerReport:
    return audit(table_from_input(data), PreparationErrors(data.pe), data.k3_exp, data.printed_dark_count)


def _plain(column: Column | None) -> dict[str, float] | None:
    return None if column is None else dict(column)


def to_ledger_input(table: InvasivenessTable, pe: PreparationErrors | None = None) -> models.LedgerInput:
    pe = pe or PreparationErrors()
    states = {
        str(p): models.StateColumns(
            ng=dict(table.ng[p]),
            cg=dict(table.cg[p]),
            ng_uncertainty=_plain(table.ng_uncertainty[p]),
            cg_uncertainty=_plain(table.cg_uncertainty[p]),
        )
        for p in START_STATES
    }
    return models.LedgerInput(states=states, pe=pe.pe)


def to_model(report: LedgerReport, digits: int = 4) -> models.LedgerReportModel:
    def r(values: Sequence[float]) -> tuple[float, ...]:
        return tuple(round(v, digits) for v in values)

    return models.LedgerReportModel(
        c_ng=r(report.c_ng),
        c_cg=r(report.c_cg),
        delta_c=r(report.delta_c),
        pe=r(report.pe.pe),
        km1_strict=round(report.km1_strict, digits),
        km1_liberal=round(report.km1_liberal, digits),
        non_malicious=round(report.non_malicious, digits),
        malicious=round(report.malicious, digits),
        bound_strict=round(report.bound_strict, digits),
        bound_liberal=round(report.bound_liberal, digits),
        dark_count_range=r(report.dark_count_range) if report.dark_count_range else None,
    )


def render_text(report: LedgerReport) -> str:
    rows = [
        (delta, pe, delta - pe, delta + pe) for delta, pe in zip(report.delta_c, report.pe.pe)
    ]
    spread = report.malicious / MALICIOUS_FACTOR
    return render("ledger.txt", report=report, shifts=rows, malicious_spread=spread)
