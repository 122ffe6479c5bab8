import argparse
import csv
import io
import logging
import re
import sys
from collections.abc import Sequence
from pathlib import Path

import msgspec

from . import config, ledger, models
from .noise import NoiseModel, noisy_scan, simulate_invasiveness_table
from .operators import ContractViolation, _require
from .protocol import (
    PUBLISHED_T23_00,
    REFERENCE_OMEGA_KHZ,
    REFERENCE_T1_MS,
    REFERENCE_TAU_MS,
    T23_00_NOTE,
    RotationDynamics,
    RuleVariant,
    Schedule,
    SettingPair,
    UpdateRule,
    correlation,
    k3,
    optimize_k3,
    random_classical_k3,
    reference_tables,
    run_setting,
    scan_tau,
    tau_grid,
)
from .templates import render

logger = logging.getLogger(__name__)

_GRID_RE = re.compile(r"^(?P<start>[^:]+):(?P<stop>[^:]+):(?P<step>[^:]+)$")
DEFAULT_GRID = "0.02:0.50:0.002"
RULES = {RuleVariant.INRM: UpdateRule.inrm, RuleVariant.LUDERS: UpdateRule.luders}


def parse_tau_grid(value: str) -> list[float]:
    if match := _GRID_RE.fullmatch(value):
        try:
            start, stop, step = (float(match.group(name)) for name in ("start", "stop", "step"))
        except ValueError:
            pass
        else:
            if step > 0:
                return tau_grid(start, stop, step)

    raise argparse.ArgumentTypeError(f"Invalid tau grid: {value!r}, expected start:stop:step")


def build_parser() -> argparse.ArgumentParser:
    main_parser = argparse.ArgumentParser(prog="qutrit-lg")
    main_parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = main_parser.add_subparsers(dest="command", required=True)

    dynamics = argparse.ArgumentParser(add_help=False)
    dynamics.add_argument("--omega-khz", type=float, default=REFERENCE_OMEGA_KHZ, help="rotation frequency")
    dynamics.add_argument("--t1-ms", type=float, default=REFERENCE_T1_MS, help="first measurement time")
    dynamics.add_argument("--dim", type=int, default=3, help="number of levels N")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", "-o", type=Path, default=None, help="output file; defaults to stdout")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--noise", type=Path, default=None, help="noise profile JSON")

    parser = subparsers.add_parser("scan", parents=[dynamics, output, noise], help="K3 over a grid of tau")
    parser.add_argument("--tau-grid", type=parse_tau_grid, default=DEFAULT_GRID, help="start:stop:step in ms")
    parser.add_argument(
        "--rule", type=RuleVariant, choices=list(RULES), default=None, help="only this rule; defaults to both"
    )
    parser.add_argument("--workers", type=int, default=None, help="worker threads")
    parser.set_defaults(func=cmd_scan)

    parser = subparsers.add_parser("setting", parents=[dynamics, output], help="joint table of one setting")
    parser.add_argument("pair", choices=[pair.value for pair in SettingPair])
    parser.add_argument("--tau-ms", type=float, default=REFERENCE_TAU_MS)
    parser.add_argument("--rule", type=RuleVariant, choices=list(RULES), default=RuleVariant.INRM)
    parser.add_argument("--text", action="store_true", help="aligned text instead of JSON")
    parser.set_defaults(func=cmd_setting)

    parser = subparsers.add_parser("k3", parents=[dynamics, output], help="correlations and K3 at one tau")
    parser.add_argument("--tau-ms", type=float, default=REFERENCE_TAU_MS)
    parser.add_argument("--rule", type=RuleVariant, choices=list(RULES), default=RuleVariant.INRM)
    parser.set_defaults(func=cmd_k3)

    parser = subparsers.add_parser("ledger", parents=[output], help="error budget of an invasiveness table")
    parser.add_argument("input", type=Path, help="ledger input JSON")
    parser.set_defaults(func=cmd_ledger)

    parser = subparsers.add_parser("optimize", parents=[dynamics, output], help="tau maximizing K3")
    parser.add_argument("--rule", type=RuleVariant, choices=list(RULES), default=RuleVariant.INRM)
    parser.add_argument("--step", type=float, default=0.001, help="scan step in ms before refinement")
    parser.set_defaults(func=cmd_optimize)

    parser = subparsers.add_parser(
        "invasiveness", parents=[output, noise], help="simulated invasiveness table as ledger input"
    )
    parser.set_defaults(func=cmd_invasiveness)

    parser = subparsers.add_parser("noisy-scan", parents=[dynamics, output, noise], help="noisy K3 over tau")
    parser.add_argument("--tau-grid", type=parse_tau_grid, default=DEFAULT_GRID, help="start:stop:step in ms")
    parser.add_argument("--workers", type=int, default=None, help="worker threads")
    parser.set_defaults(func=cmd_noisy_scan)

    parser = subparsers.add_parser("oracle", help="K3 of random macrorealist models")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--count", type=int, default=10_000)
    parser.set_defaults(func=cmd_oracle)

    return main_parser


def _emit(data: str | bytes, out: Path | None) -> None:
    if isinstance(data, bytes):
        data = data.decode()
    if out is None:
        sys.stdout.write(data)
    else:
        out.write_text(data)
        logger.info("Wrote %s", out)


def _json(obj: msgspec.Struct) -> bytes:
    return msgspec.json.format(msgspec.json.encode(obj), indent=2) + b"\n"


def _csv(header: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for tau, *values in rows:
        writer.writerow([f"{tau:g}", *(f"{value:.10f}" for value in values)])
    return buffer.getvalue()


def _noise_model(path: Path | None) -> NoiseModel:
    return NoiseModel.load_profile(path or config.NOISE_PROFILE)


def cmd_scan(args: argparse.Namespace) -> int:
    grid: list[float] = args.tau_grid
    _require(bool(grid), "tau grid is empty")
    dynamics = RotationDynamics(args.omega_khz, args.dim)
    model = _noise_model(args.noise) if args.noise else None

    variants = [args.rule] if args.rule else list(RULES)
    columns = [
        [k for _, k in scan_tau(dynamics, args.t1_ms, RULES[variant](), None, grid, workers=args.workers)]
        for variant in variants
    ]
    header = ["tau_ms", *(f"k3_{variant}" for variant in variants)]
    if model:
        columns.append([k for _, k in noisy_scan(dynamics, args.t1_ms, model, grid, workers=args.workers)])
        header.append("k3_noisy")
    _emit(_csv(header, list(zip(grid, *columns))), args.out)
    return 0


def cmd_setting(args: argparse.Namespace) -> int:
    dynamics = RotationDynamics(args.omega_khz, args.dim)
    schedule = Schedule(args.t1_ms, args.tau_ms)
    pair = SettingPair(args.pair)
    rule = RULES[args.rule]()

    note = None
    if rule.variant is RuleVariant.INRM and (dynamics, schedule) == (RotationDynamics(), Schedule()):
        result = reference_tables(dynamics, schedule)[pair]
        if pair is SettingPair.T23 and abs(result.joint[0, 0] - PUBLISHED_T23_00) > 1e-3:
            note = T23_00_NOTE.format(value=result.joint[0, 0])
    else:
        result = run_setting(dynamics, schedule, rule, pair)

    table = models.SettingTable(
        pair=pair.value,
        times_ms=result.times,
        rows=result.row_labels(),
        joint=result.joint.tolist(),
        correlation=correlation(result, rule.observable_for(dynamics.dimension)),
        retained=result.retained_mass,
        note=note,
    )
    if args.text:
        _emit(render("setting.txt", table=table, rows=list(zip(table.rows, table.joint))), args.out)
    else:
        _emit(_json(table), args.out)
    return 0


def cmd_k3(args: argparse.Namespace) -> int:
    rule = RULES[args.rule]()
    dynamics = RotationDynamics(args.omega_khz, args.dim)
    report = k3(dynamics, Schedule(args.t1_ms, args.tau_ms), rule)
    summary = models.K3Summary(
        tau_ms=args.tau_ms,
        rule=rule.variant.value,
        c12=report.c12,
        c23=report.c23,
        c13=report.c13,
        k3=report.k3,
    )
    _emit(_json(summary), args.out)
    return 0


def cmd_ledger(args: argparse.Namespace) -> int:
    report = ledger.audit_input(ledger.load_ledger_input(args.input))
    print(ledger.render_text(report), end="")
    if args.out:
        _emit(_json(ledger.to_model(report)), args.out)
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    rule = RULES[args.rule]()
    optimum = optimize_k3(args.dim, rule, omega_khz=args.omega_khz, t1=args.t1_ms, step=args.step)
    result = models.OptimizeResult(
        dimension=args.dim, rule=rule.variant.value, tau_star=optimum.tau, k3_star=optimum.k3
    )
    _emit(_json(result), args.out)
    return 0


def cmd_invasiveness(args: argparse.Namespace) -> int:
    table = simulate_invasiveness_table(_noise_model(args.noise))
    _emit(_json(ledger.to_ledger_input(table)), args.out)
    return 0


def cmd_noisy_scan(args: argparse.Namespace) -> int:
    grid: list[float] = args.tau_grid
    _require(bool(grid), "tau grid is empty")
    dynamics = RotationDynamics(args.omega_khz, args.dim)
    model = _noise_model(args.noise)

    ideal = scan_tau(dynamics, args.t1_ms, UpdateRule.inrm(), None, grid, workers=args.workers)
    noisy = noisy_scan(dynamics, args.t1_ms, model, grid, workers=args.workers)
    rows = [(tau, k, noisy_k) for (tau, k), (_, noisy_k) in zip(ideal, noisy)]
    _emit(_csv(["tau_ms", "k3_inrm", "k3_noisy"], rows), args.out)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    values = random_classical_k3(args.seed, args.count)
    highest = float(values.max())
    print(f"max K3 over {args.count} classical models (seed {args.seed}): {highest:.12f}")
    return 0 if highest <= 1 + config.ALGEBRAIC_TOL else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not logging.root.hasHandlers():  # pragma: no cover
        logging.basicConfig(level=logging.WARNING)
    logging.getLogger(__package__).setLevel(logging.DEBUG if args.verbose else logging.INFO)

    try:
        return args.func(args)
    except ContractViolation as e:
        parser.exit(2, f"{parser.prog}: error: {e}\n")
    except OSError as e:
        raise SystemExit(f"{parser.prog}: {e}")
    except Exception:
        logger.exception("Internal error")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
