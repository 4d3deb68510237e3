"""Command-line reports: scenario solving, benchmark tables, CSV output.

Scenario files are TOML with the fields
``mode`` ("finite" | "periodic"), ``M``, ``xi0``, ``pin`` or ``eig_index``,
``period`` (the full cell length, periodic scenarios only), optional
``repeat`` (unrolls a periodic pattern into that many cells), and an array
of ``[[buildings]]`` tables each carrying ``a, b, gamma, f, c, r, bshear``.

Every subcommand emits RFC-4180 CSV (header row, CRLF, 10-significant-digit
floats) to stdout or ``--out FILE``; ``--plot`` additionally renders a
figure next to the ``--out`` path.  Exit codes: 0 success, 1 bad flags or
scenario validation, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .citymodel import (
    STANDARD_PARAMETERS,
    BuildingResonanceError,
    BuildingSpec,
    CityConfig,
    p_of,
    q_of,
    replicate,
    top_displacement,
)
from .greens import (
    EwaldConfig,
    PeriodicCell,
    SingularPointError,
    TruncationError,
    WoodAnomalyError,
    btilde,
    gper_ewald,
)
from .bie import NearResonanceError
from .resonance import (
    ConvergenceError,
    ResonanceResult,
    convergence_study,
    find_hetero_finite,
    find_hetero_periodic,
    find_identical_finite,
    find_identical_periodic,
    t_matrix,
)

__all__ = ["Scenario", "ScenarioError", "load_scenario", "main"]

TABLE1_SPACINGS = (0.5, 1.0, 1.3, 1.4, 1.5, 2.0, 3.0)

_NUMERICAL_ERRORS = (
    ConvergenceError,
    WoodAnomalyError,
    TruncationError,
    SingularPointError,
    NearResonanceError,
    BuildingResonanceError,
    np.linalg.LinAlgError,
)


class ScenarioError(ValueError):
    """A scenario file failed validation; the message names the field."""


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: the city to solve plus solver inputs."""

    city: CityConfig
    pattern: CityConfig | None
    m: int
    xi0: float
    pin: int | None
    eig_index: int | None
    repeat: int | None


def _field(table, key, kinds, where, required=True, default=None):
    if key not in table:
        if required:
            raise ScenarioError(f"{where}: missing required field '{key}'")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ScenarioError(
            f"{where}.{key}: expected {names}, got {type(value).__name__}"
        )
    return value


def _reject_unknown(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _parse_building(table, where):
    _reject_unknown(table, ("a", "b", "gamma", "f", "c", "r", "bshear"), where)
    kwargs = {
        key: float(_field(table, key, (int, float), where))
        for key in ("a", "b", "gamma", "f", "c", "r", "bshear")
    }
    try:
        return BuildingSpec(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def load_scenario(path) -> Scenario:
    """Parse and validate a TOML scenario file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    where = path.name
    _reject_unknown(
        data,
        ("mode", "M", "xi0", "pin", "eig_index", "period", "repeat", "buildings"),
        where,
    )
    mode = _field(data, "mode", (str,), where)
    if mode not in ("finite", "periodic"):
        raise ScenarioError(f"{where}.mode: expected 'finite' or 'periodic', got {mode!r}")
    m = _field(data, "M", (int,), where)
    if m < 1:
        raise ScenarioError(f"{where}.M: must be >= 1, got {m}")
    xi0 = float(_field(data, "xi0", (int, float), where))
    if not xi0 > 0.0:
        raise ScenarioError(f"{where}.xi0: must be > 0, got {xi0}")
    pin = _field(data, "pin", (int,), where, required=False)
    eig_index = _field(data, "eig_index", (int,), where, required=False)
    if pin is not None and eig_index is not None:
        raise ScenarioError(f"{where}: give either 'pin' or 'eig_index', not both")
    if pin is None and eig_index is None:
        raise ScenarioError(f"{where}: one of 'pin' or 'eig_index' is required")
    period = _field(data, "period", (int, float), where, required=False)
    repeat = _field(data, "repeat", (int,), where, required=False)
    if mode == "finite" and period is not None:
        raise ScenarioError(f"{where}.period: only periodic scenarios take a period")
    if mode == "finite" and repeat is not None:
        raise ScenarioError(f"{where}.repeat: only periodic patterns can be repeated")
    if repeat is not None and repeat < 1:
        raise ScenarioError(f"{where}.repeat: must be >= 1, got {repeat}")

    raw_buildings = data.get("buildings")
    if not isinstance(raw_buildings, list) or not raw_buildings:
        raise ScenarioError(f"{where}.buildings: at least one [[buildings]] table required")
    buildings = []
    for index, table in enumerate(raw_buildings, start=1):
        spot = f"{where}.buildings[{index}]"
        if not isinstance(table, dict):
            raise ScenarioError(f"{spot}: expected a table")
        buildings.append(_parse_building(table, spot))

    try:
        if mode == "periodic":
            pattern = CityConfig(
                buildings=tuple(buildings),
                mode="periodic",
                period=float(period) if period is not None else None,
            )
            city = replicate(pattern, repeat) if repeat else pattern
        else:
            pattern = None
            city = CityConfig(buildings=tuple(buildings))
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    return Scenario(
        city=city, pattern=pattern, m=m, xi0=xi0,
        pin=pin, eig_index=eig_index, repeat=repeat,
    )


# ----------------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def _write_csv(out, header, rows):
    if out is None:
        _emit_csv(sys.stdout, header, rows)
    else:
        with open(out, "w", encoding="utf-8", newline="") as handle:
            _emit_csv(handle, header, rows)


def _emit_csv(handle, header, rows):
    writer = csv.writer(handle, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(cell) for cell in row])


def _plot_path(args):
    if not args.plot:
        return None
    if args.out is None:
        raise ScenarioError("--plot needs --out so the figure has a home")
    return Path(args.out).with_suffix(".png")


def _render(path, draw):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _threads() -> int:
    raw = os.environ.get("CITYRES_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ScenarioError(f"CITYRES_THREADS: expected an integer, got {raw!r}")
    if count < 1:
        raise ScenarioError(f"CITYRES_THREADS: must be >= 1, got {count}")
    return count


def _result_row(result: ResonanceResult):
    return (
        [result.xi]
        + [float(a) for a in result.alpha]
        + [result.residual, result.iterations]
    )


def _result_header(n: int):
    return ["xi"] + [f"alpha_{j}" for j in range(1, n + 1)] + ["residual", "iterations"]


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def _cmd_fig10(args) -> int:
    plot = _plot_path(args)
    if args.Mmax < 5:
        raise ScenarioError(f"--Mmax must be >= 5, got {args.Mmax}")
    city = CityConfig(
        buildings=(BuildingSpec(a=-0.2, b=0.2, **STANDARD_PARAMETERS),)
    )
    rows = []
    for m in range(5, args.Mmax + 1, 5):
        result = find_identical_finite(city, 1, args.xi0, m)
        tau = t_matrix(city, result.xi, m).entries[0, 0]
        rows.append((m, tau, result.xi))
    _write_csv(args.out, ["M", "tau_root", "xi_root"], rows)
    if plot is not None:
        def draw(ax):
            ms = [row[0] for row in rows]
            ax.plot(ms, [row[2] for row in rows], marker="o")
            ax.set_xlabel("grid parameter M")
            ax.set_ylabel("coupling frequency")
            ax.set_title("single-building root vs grid refinement")
        _render(plot, draw)
    return 0


def _table1_row(spacing: float, n: int, m: int, xi0: float):
    pitch = 2.0 + spacing
    row = CityConfig(
        buildings=tuple(
            BuildingSpec(a=k * pitch, b=k * pitch + 2.0, **STANDARD_PARAMETERS)
            for k in range(n)
        )
    )
    cell = CityConfig(
        buildings=(BuildingSpec(a=0.0, b=2.0, **STANDARD_PARAMETERS),),
        mode="periodic",
        period=pitch,
    )
    xi_first = find_identical_finite(row, 1, xi0, m).xi
    xi_last = find_identical_finite(row, n, xi0, m).xi
    xi_per = find_identical_periodic(cell, xi0, m).xi
    return (spacing, xi_first, xi_per, xi_last)


def _cmd_table1(args) -> int:
    plot = _plot_path(args)
    if args.N < 2:
        raise ScenarioError(f"--N must be >= 2, got {args.N}")
    if args.M < 1:
        raise ScenarioError(f"--M must be >= 1, got {args.M}")
    workers = min(_threads(), len(TABLE1_SPACINGS))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda s: _table1_row(s, args.N, args.M, args.xi0),
                    TABLE1_SPACINGS,
                )
            )
    else:
        rows = [_table1_row(s, args.N, args.M, args.xi0) for s in TABLE1_SPACINGS]
    for spacing, xi_first, xi_per, xi_last in rows:
        if not (xi_first <= xi_per <= xi_last):
            print(
                f"note: ordering xi_first <= xi_per <= xi_last violated at "
                f"spacing {spacing:g} ({xi_first:.6g}, {xi_per:.6g}, {xi_last:.6g})",
                file=sys.stderr,
            )
    _write_csv(args.out, ["spacing", "xi_first", "xi_per", "xi_last"], rows)
    if plot is not None:
        def draw(ax):
            spacings = [row[0] for row in rows]
            for index, label in ((1, "first root"), (2, "lattice root"), (3, "last root")):
                ax.plot(spacings, [row[index] for row in rows], marker="o", label=label)
            ax.set_xlabel("gap between foundations")
            ax.set_ylabel("coupling frequency")
            ax.legend()
        _render(plot, draw)
    return 0


def _pick_solver(scenario: Scenario, pin, eig_index, xi0):
    city = scenario.city
    if pin is not None and eig_index is not None:
        raise ScenarioError("give either --pin or --eig, not both")
    if pin is None and eig_index is None:
        pin, eig_index = scenario.pin, scenario.eig_index
    if pin is None and eig_index is None:
        raise ScenarioError(
            "no pinned index or eigen index: set 'pin' or 'eig_index' in the "
            "scenario or pass --pin/--eig"
        )
    xi0 = scenario.xi0 if xi0 is None else xi0
    if xi0 <= 0.0:
        raise ScenarioError(f"--xi0 must be > 0, got {xi0}")
    if eig_index is not None:
        if city.is_periodic:
            if eig_index != 1:
                raise ScenarioError(
                    "periodic one-building cells have a single scalar branch; "
                    "use eig_index = 1"
                )
            return find_identical_periodic(city, xi0, scenario.m)
        return find_identical_finite(city, eig_index, xi0, scenario.m)
    if city.is_periodic:
        return find_hetero_periodic(city, pin, xi0, scenario.m)
    return find_hetero_finite(city, pin, xi0, scenario.m)


def _cmd_solve(args) -> int:
    plot = _plot_path(args)
    scenario = load_scenario(args.config)
    try:
        result = _pick_solver(scenario, args.pin, args.eig, args.xi0)
    except ValueError as exc:
        if isinstance(exc, _NUMERICAL_ERRORS):
            raise
        raise ScenarioError(str(exc)) from exc
    n = len(result.alpha)
    _write_csv(args.out, _result_header(n), [_result_row(result)])
    if plot is not None:
        def draw(ax):
            ax.bar(range(1, n + 1), np.asarray(result.alpha, dtype=float))
            ax.set_xlabel("building")
            ax.set_ylabel("foundation displacement")
            ax.set_title(f"xi = {result.xi:.6g}")
        _render(plot, draw)
    return 0


def _parse_repeats(raw: str):
    try:
        counts = [int(piece) for piece in raw.split(",") if piece.strip() != ""]
    except ValueError:
        raise ScenarioError(f"--repeats: expected comma-separated integers, got {raw!r}")
    if not counts:
        raise ScenarioError("--repeats: at least one cell count required")
    if any(count < 1 for count in counts):
        raise ScenarioError(f"--repeats: counts must be >= 1, got {raw!r}")
    return counts


def _cmd_converge(args) -> int:
    plot = _plot_path(args)
    scenario = load_scenario(args.config)
    if scenario.pattern is None:
        raise ScenarioError("converge needs a periodic pattern scenario")
    counts = _parse_repeats(args.repeats)
    pin = args.pin if args.pin is not None else scenario.pin
    if pin is None:
        raise ScenarioError("converge needs a pinned index (scenario 'pin' or --pin)")
    xi0 = scenario.xi0 if args.xi0 is None else args.xi0
    try:
        study = convergence_study(
            scenario.pattern, counts, pin, xi0, scenario.m, workers=_threads()
        )
    except ValueError as exc:
        if isinstance(exc, _NUMERICAL_ERRORS):
            raise
        raise ScenarioError(str(exc)) from exc
    rows = [
        (count, result.xi, result.residual, result.iterations)
        for count, result in study.rows
    ]
    rows.append(
        ("periodic", study.periodic.xi, study.periodic.residual, study.periodic.iterations)
    )
    _write_csv(args.out, ["cells", "xi", "residual", "iterations"], rows)
    if plot is not None:
        def draw(ax):
            ax.plot(counts, [row[1] for row in rows[:-1]], marker="o", label="finite city")
            ax.axhline(study.periodic.xi, linestyle="--", label="periodic limit")
            ax.set_xlabel("pattern repetitions")
            ax.set_ylabel("coupling frequency")
            ax.legend()
        _render(plot, draw)
    return 0


def _cmd_greens_probe(args) -> int:
    plot = _plot_path(args)
    if args.grid < 1:
        raise ScenarioError(f"--grid must be >= 1, got {args.grid}")
    if args.period <= 0.0:
        raise ScenarioError(f"--period must be > 0, got {args.period}")
    try:
        cell = PeriodicCell(P=args.period / 2.0, xi=args.xi)
        cfg = EwaldConfig(a=args.a)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    rows = []
    for k in range(1, args.grid + 1):
        dx = 0.5 * args.period * k / args.grid
        g = complex(gper_ewald(cell, dx, 0.0, cfg))
        b = complex(btilde(cell, dx, 0.0, cfg))
        rows.append((dx, g.real, g.imag, b.real, b.imag))
    _write_csv(
        args.out, ["dx", "gper_re", "gper_im", "btilde_re", "btilde_im"], rows
    )
    if plot is not None:
        def draw(ax):
            xs = [row[0] for row in rows]
            ax.plot(xs, [row[1] for row in rows], label="Re lattice kernel")
            ax.plot(xs, [row[2] for row in rows], label="Im lattice kernel")
            ax.plot(xs, [row[3] for row in rows], label="Re smooth remainder")
            ax.set_xlabel("offset along the surface")
            ax.legend()
        _render(plot, draw)
    return 0


def _cmd_top_displacement(args) -> int:
    plot = _plot_path(args)
    scenario = load_scenario(args.config)
    if args.xi <= 0.0:
        raise ScenarioError(f"--xi must be > 0, got {args.xi}")
    city = scenario.city
    pin = args.pin if args.pin is not None else (scenario.pin or 1)
    n = city.n_buildings
    if not (1 <= pin <= n):
        raise ScenarioError(f"pin must be in 1..{n}, got {pin}")
    tmat = t_matrix(city, args.xi, scenario.m)
    xi_sq = args.xi * args.xi
    p = np.array([p_of(b, xi_sq) for b in city.buildings])
    q = np.array([q_of(b, xi_sq) for b in city.buildings])
    system = np.diag(q) + p[:, None] * tmat.entries
    pin0 = pin - 1
    free = [i for i in range(n) if i != pin0]
    alpha = np.zeros(n)
    alpha[pin0] = 1.0
    if free:
        alpha[free] = np.linalg.solve(
            system[np.ix_(free, free)], -system[free, pin0]
        )
    rows = []
    for index, building in enumerate(city.buildings):
        eta = top_displacement(building, args.xi, float(alpha[index]))
        rows.append((index + 1, building.a, building.b, float(alpha[index]), eta))
    _write_csv(args.out, ["building", "a", "b", "alpha", "eta"], rows)
    if plot is not None:
        def draw(ax):
            ax.bar([row[0] for row in rows], [row[4] for row in rows])
            ax.set_xlabel("building")
            ax.set_ylabel("rooftop displacement")
            ax.set_title(f"xi = {args.xi:.6g}")
        _render(plot, draw)
    return 0


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub):
    sub.add_argument("--out", metavar="FILE", default=None, help="CSV output path")
    sub.add_argument(
        "--plot", action="store_true",
        help="render a PNG figure next to the --out file",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cityres", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fig10 = subs.add_parser("fig10", help="single-building grid-refinement sweep")
    fig10.add_argument("--Mmax", type=int, default=100)
    fig10.add_argument("--xi0", type=float, default=1.0)
    _add_common(fig10)
    fig10.set_defaults(func=_cmd_fig10)

    table1 = subs.add_parser("table1", help="first/lattice/last roots per gap")
    table1.add_argument("--N", type=int, default=51, help="buildings per finite row")
    table1.add_argument("--M", type=int, default=5)
    table1.add_argument("--xi0", type=float, default=1.0)
    _add_common(table1)
    table1.set_defaults(func=_cmd_table1)

    solve = subs.add_parser("solve", help="one scenario root as a CSV row")
    solve.add_argument("--config", required=True)
    group = solve.add_mutually_exclusive_group()
    group.add_argument("--pin", type=int, default=None)
    group.add_argument("--eig", type=int, default=None)
    solve.add_argument("--xi0", type=float, default=None)
    _add_common(solve)
    solve.set_defaults(func=_cmd_solve)

    converge = subs.add_parser("converge", help="finite-city ladder to the periodic limit")
    converge.add_argument("--config", required=True)
    converge.add_argument("--repeats", required=True, help="comma-separated cell counts")
    converge.add_argument("--pin", type=int, default=None)
    converge.add_argument("--xi0", type=float, default=None)
    _add_common(converge)
    converge.set_defaults(func=_cmd_converge)

    probe = subs.add_parser("greens-probe", help="lattice kernel samples for diagnostics")
    probe.add_argument("--xi", type=float, required=True)
    probe.add_argument("--period", type=float, required=True, help="full cell length")
    probe.add_argument("--a", type=float, default=2.0, help="Ewald splitting parameter")
    probe.add_argument("--grid", type=int, default=20, help="sample count")
    _add_common(probe)
    probe.set_defaults(func=_cmd_greens_probe)

    topd = subs.add_parser("top-displacement", help="rooftop response at a frequency")
    topd.add_argument("--config", required=True)
    topd.add_argument("--xi", type=float, required=True)
    topd.add_argument("--pin", type=int, default=None)
    _add_common(topd)
    topd.set_defaults(func=_cmd_top_displacement)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
