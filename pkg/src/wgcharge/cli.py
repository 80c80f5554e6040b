"""Command-line front end: coefficient reports, dynamics traces, phase-plane
scans, stability queries, and oracle validation.

Configuration merges three layers, later ones winning: per-setup defaults
(the cancellation-point phases and gamma = kappa = 0.01), an optional JSON
config file, and command-line flags. All file output is deterministic:
identical configurations produce byte-identical CSV and JSON.

Exit codes: 0 success, 2 configuration error, 3 physics refusal (instability
or a guarded strong drive), 4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import enum
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .configs import (
    CouplingRates,
    PhaseSet,
    SetupKind,
    closed_form_coefficients,
    closed_form_trig,
    directional_couplings,
    is_nonreciprocal,
    network_coefficients,
    nonreciprocal_point,
)
from .dynamics import (
    NONRECIPROCAL_RTOL,
    DriveKind,
    DriveSide,
    DriveSpec,
    closed_form_linear,
    closed_form_quadratic_nr,
    evolve,
    instability_threshold,
    quadratic_closed_form_is_degenerate,
    second_moment_system,
    stability,
    states_from_trajectory,
    steady_energies,
    vacuum_state,
)
from .errors import (
    ConfigError,
    CutoffConvergenceError,
    DriveGuardError,
    ModelError,
    UnphysicalStateError,
    UnstableSystemError,
)
from .metrics import battery_trajectory_metrics
from .oracle import converged_moments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_VALIDATION = 4

#: strongest drive amplitude (units of omega0) validated without an override
WEAK_DRIVE_LIMIT = 2e-3

_PHASE_NAMES = ("phi1", "phiw", "phi2", "phim", "theta1", "theta2")
_RATE_NAMES = ("gamma", "kappa1", "kappa2")
_SWEEPABLE = _PHASE_NAMES + _RATE_NAMES + ("amplitude",)


@dataclass(frozen=True)
class TimeGrid:
    """Output grid: t_max in 1/gamma units, n_points sample times."""

    t_max: float = 10.0
    n_points: int = 2001

    def __post_init__(self) -> None:
        if not self.t_max > 0:
            raise ConfigError("time.t_max must be positive")
        if self.n_points < 2:
            raise ConfigError("time.n_points must be at least 2")

    def absolute(self, gamma: float) -> np.ndarray:
        if not gamma > 0:
            raise ConfigError(
                "time.t_max is in 1/gamma units; rates.gamma must be positive"
            )
        return np.linspace(0.0, self.t_max / gamma, self.n_points)


@dataclass(frozen=True)
class SweepAxis:
    """One scan axis: parameter name, range, and sample count."""

    name: str
    start: float
    stop: float
    steps: int
    endpoint: bool = False

    def __post_init__(self) -> None:
        if self.name not in _SWEEPABLE:
            raise ConfigError(
                f"sweep axis {self.name!r} unknown; choose from "
                + ", ".join(_SWEEPABLE)
            )
        if self.steps < 2:
            raise ConfigError(f"sweep axis {self.name!r} needs steps >= 2")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ConfigError(f"sweep axis {self.name!r} range must be finite")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps, endpoint=self.endpoint)


@dataclass(frozen=True)
class SweepSpec:
    axis1: SweepAxis
    axis2: SweepAxis


@dataclass(frozen=True)
class OutputSpec:
    directory: str | None = None
    formats: tuple[str, ...] = ("csv", "json")

    def __post_init__(self) -> None:
        for fmt in self.formats:
            if fmt not in ("csv", "json"):
                raise ConfigError(f"output format {fmt!r} unknown (csv, json)")


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs, resolved from defaults, file, and flags."""

    setup: SetupKind
    phases: PhaseSet
    rates: CouplingRates
    drive: DriveSpec
    time: TimeGrid
    sweep: SweepSpec | None
    output: OutputSpec


def _default_sweep() -> SweepSpec:
    full_turn = 2.0 * math.pi
    return SweepSpec(
        axis1=SweepAxis("theta2", 0.0, full_turn, 201, endpoint=False),
        axis2=SweepAxis("phiw", 0.0, full_turn, 201, endpoint=False),
    )


def _get(mapping: dict, key: str, kind, path: str):
    value = mapping[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected true or false")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}.{key}: expected a string")
        return value
    raise AssertionError(kind)


def _check_keys(mapping: dict, allowed: tuple[str, ...], path: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")


def load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON (line {exc.lineno}, "
            f"column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    _check_keys(
        data,
        ("setup", "phases", "rates", "drive", "time", "sweep", "output"),
        "config",
    )
    return data


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge per-setup defaults, the config file, and CLI flags."""
    file_cfg = load_config_file(args.config) if args.config else {}

    setup_label = args.setup or file_cfg.get("setup")
    if setup_label is None:
        raise ConfigError("setup is required (flag --setup or config field)")
    if not isinstance(setup_label, str):
        raise ConfigError("config.setup: expected a string")
    try:
        setup = SetupKind.from_label(setup_label)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    phase_values = dataclasses.asdict(nonreciprocal_point(setup))
    file_phases = file_cfg.get("phases", {})
    _check_keys(file_phases, _PHASE_NAMES, "config.phases")
    for name in file_phases:
        phase_values[name] = _get(file_phases, name, float, "config.phases")
    for name in _PHASE_NAMES:
        flag = getattr(args, name, None)
        if flag is not None:
            phase_values[name] = flag
    try:
        phases = PhaseSet(**phase_values)
    except ValueError as exc:
        raise ConfigError(f"config.phases: {exc}") from exc

    rate_values = {"gamma": 0.01, "kappa1": 0.01, "kappa2": 0.01}
    per_point: dict[str, float] = {}
    file_rates = file_cfg.get("rates", {})
    _check_keys(
        file_rates,
        _RATE_NAMES + ("gamma11", "gamma12", "gamma21", "gamma22", "gamma1"),
        "config.rates",
    )
    for name in file_rates:
        value = _get(file_rates, name, float, "config.rates")
        if name in _RATE_NAMES:
            rate_values[name] = value
        else:
            per_point[name] = value
    for name in _RATE_NAMES:
        flag = getattr(args, name, None)
        if flag is not None:
            rate_values[name] = flag
    try:
        if per_point:
            defaults = {
                name: per_point.get(name, rate_values["gamma"])
                for name in ("gamma11", "gamma12", "gamma21", "gamma22", "gamma1")
            }
            rates = CouplingRates(
                **defaults,
                gamma=rate_values["gamma"],
                kappa1=rate_values["kappa1"],
                kappa2=rate_values["kappa2"],
                equal=False,
            )
        else:
            rates = CouplingRates.equal_rates(
                rate_values["gamma"], rate_values["kappa1"], rate_values["kappa2"]
            )
    except ValueError as exc:
        raise ConfigError(f"config.rates: {exc}") from exc

    drive_values = {
        "kind": "linear",
        "side": "left",
        "amplitude": None,
        "omega1": 1.0,
        "omega2": 1.0,
        "omega0": 1.0,
    }
    file_drive = file_cfg.get("drive", {})
    _check_keys(file_drive, tuple(drive_values), "config.drive")
    for name in ("kind", "side"):
        if name in file_drive:
            drive_values[name] = _get(file_drive, name, str, "config.drive")
    for name in ("amplitude", "omega1", "omega2", "omega0"):
        if name in file_drive:
            drive_values[name] = _get(file_drive, name, float, "config.drive")
    if args.drive_kind is not None:
        drive_values["kind"] = args.drive_kind
    if getattr(args, "drive_side", None) is not None and args.drive_side != "both":
        drive_values["side"] = args.drive_side
    if getattr(args, "amplitude", None) is not None:
        drive_values["amplitude"] = args.amplitude
    for name in ("omega1", "omega2", "omega0"):
        flag = getattr(args, name, None)
        if flag is not None:
            drive_values[name] = flag
    try:
        kind = DriveKind(drive_values["kind"])
    except ValueError as exc:
        raise ConfigError(
            f"config.drive.kind: {drive_values['kind']!r} (linear, quadratic)"
        ) from exc
    try:
        side = DriveSide(drive_values["side"])
    except ValueError as exc:
        raise ConfigError(
            f"config.drive.side: {drive_values['side']!r} (left, right)"
        ) from exc
    if drive_values["amplitude"] is None:
        default_amp = getattr(args, "default_amplitude", None)
        if default_amp is None:
            default_amp = 0.15 if kind is DriveKind.LINEAR else 0.005
        drive_values["amplitude"] = default_amp
    try:
        drive = DriveSpec(
            kind=kind,
            side=side,
            amplitude=drive_values["amplitude"],
            omega1=drive_values["omega1"],
            omega2=drive_values["omega2"],
            omega0=drive_values["omega0"],
        )
    except ValueError as exc:
        raise ConfigError(f"config.drive: {exc}") from exc

    time_values = {"t_max": 10.0, "n_points": getattr(args, "default_n_points", 2001)}
    file_time = file_cfg.get("time", {})
    _check_keys(file_time, ("t_max", "n_points"), "config.time")
    if "t_max" in file_time:
        time_values["t_max"] = _get(file_time, "t_max", float, "config.time")
    if "n_points" in file_time:
        time_values["n_points"] = _get(file_time, "n_points", int, "config.time")
    if getattr(args, "t_max", None) is not None:
        time_values["t_max"] = args.t_max
    if getattr(args, "n_points", None) is not None:
        time_values["n_points"] = args.n_points
    time = TimeGrid(**time_values)

    sweep = None
    file_sweep = file_cfg.get("sweep")
    if file_sweep is not None:
        _check_keys(file_sweep, ("axis1", "axis2"), "config.sweep")
        axes = []
        for key in ("axis1", "axis2"):
            if key not in file_sweep:
                raise ConfigError(f"config.sweep.{key}: missing")
            spec = file_sweep[key]
            _check_keys(
                spec, ("name", "start", "stop", "steps", "endpoint"), f"config.sweep.{key}"
            )
            axes.append(
                SweepAxis(
                    name=_get(spec, "name", str, f"config.sweep.{key}"),
                    start=_get(spec, "start", float, f"config.sweep.{key}"),
                    stop=_get(spec, "stop", float, f"config.sweep.{key}"),
                    steps=_get(spec, "steps", int, f"config.sweep.{key}"),
                    endpoint=(
                        _get(spec, "endpoint", bool, f"config.sweep.{key}")
                        if "endpoint" in spec
                        else False
                    ),
                )
            )
        sweep = SweepSpec(axis1=axes[0], axis2=axes[1])
    for key in ("axis1", "axis2"):
        flag = getattr(args, key, None)
        if flag is not None:
            parsed = _parse_axis_flag(flag)
            if sweep is None:
                sweep = _default_sweep()
            sweep = dataclasses.replace(sweep, **{key: parsed})

    out_dir = None
    formats: tuple[str, ...] = ("csv", "json")
    file_output = file_cfg.get("output", {})
    _check_keys(file_output, ("directory", "formats"), "config.output")
    if "directory" in file_output:
        out_dir = _get(file_output, "directory", str, "config.output")
    if "formats" in file_output:
        raw = file_output["formats"]
        if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
            raise ConfigError("config.output.formats: expected a list of strings")
        formats = tuple(raw)
    if getattr(args, "output_dir", None) is not None:
        out_dir = args.output_dir
    if getattr(args, "formats", None) is not None:
        formats = tuple(args.formats.split(","))
    output = OutputSpec(directory=out_dir, formats=formats)

    return RunConfig(
        setup=setup,
        phases=phases,
        rates=rates,
        drive=drive,
        time=time,
        sweep=sweep,
        output=output,
    )


def _parse_axis_flag(text: str) -> SweepAxis:
    parts = text.split(":")
    closed = False
    if parts and parts[-1] == "closed":
        closed = True
        parts = parts[:-1]
    if len(parts) != 4:
        raise ConfigError(
            f"axis spec {text!r} must be name:start:stop:steps[:closed]"
        )
    name, start, stop, steps = parts
    try:
        return SweepAxis(name, float(start), float(stop), int(steps), closed)
    except ValueError as exc:
        raise ConfigError(f"axis spec {text!r}: {exc}") from exc


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return [z.real, z.imag]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return "%.14e" % value


def _metadata_lines(config: RunConfig, extra: dict[str, str] | None = None) -> list[str]:
    p, r, d = config.phases, config.rates, config.drive
    lines = [
        f"# tool: wgcharge {__version__}",
        f"# setup: {config.setup.value}",
        "# phases: " + " ".join(
            f"{name}={getattr(p, name):.17g}" for name in _PHASE_NAMES
        ),
    ]
    if r.equal:
        lines.append(
            f"# rates: gamma={r.gamma:.17g} kappa1={r.kappa1:.17g} "
            f"kappa2={r.kappa2:.17g}"
        )
    else:
        lines.append(
            f"# rates: gamma11={r.gamma11:.17g} gamma12={r.gamma12:.17g} "
            f"gamma21={r.gamma21:.17g} gamma22={r.gamma22:.17g} "
            f"gamma1={r.gamma1:.17g} gamma={r.gamma:.17g} "
            f"kappa1={r.kappa1:.17g} kappa2={r.kappa2:.17g}"
        )
    lines.append(
        f"# drive: kind={d.kind.value} side={d.side.value} "
        f"amplitude={d.amplitude:.17g} omega1={d.omega1:.17g} "
        f"omega2={d.omega2:.17g} omega0={d.omega0:.17g}"
    )
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def _write_csv(
    path: str,
    config: RunConfig,
    extra_meta: dict[str, str],
    header: list[str],
    rows: np.ndarray,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in _metadata_lines(config, extra_meta):
            handle.write(line + "\n")
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _ensure_outdir(config: RunConfig) -> str:
    directory = config.output.directory or "."
    os.makedirs(directory, exist_ok=True)
    return directory


def _coefficients(config: RunConfig):
    return network_coefficients(config.setup, config.phases, config.rates)


# ---------------------------------------------------------------- commands


def cmd_coeffs(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    net_coeffs = network_coefficients(
        config.setup, config.phases, config.rates, resonant=False
    )
    payload: dict = {
        "setup": config.setup.value,
        "phases": {n: getattr(config.phases, n) for n in _PHASE_NAMES},
        "rates": {
            "gamma": config.rates.gamma,
            "kappa1": config.rates.kappa1,
            "kappa2": config.rates.kappa2,
            "equal": config.rates.equal,
        },
        "slh": {
            f.name: getattr(net_coeffs, f.name)
            for f in dataclasses.fields(net_coeffs)
        },
    }
    if config.rates.equal:
        closed = closed_form_coefficients(
            config.setup, config.phases, rates=config.rates, gamma=config.rates.gamma
        )
        payload["closed_form"] = {
            f.name: getattr(closed, f.name) for f in dataclasses.fields(closed)
        }
        diffs = [
            abs(getattr(net_coeffs, name) - getattr(closed, name))
            for name in (
                "lamb_shift_1", "lamb_shift_2", "exchange",
                "decay_1", "decay_2", "collective",
            )
        ]
        payload["max_abs_diff"] = max(diffs)
    else:
        payload["closed_form"] = None
        payload["max_abs_diff"] = None
    resonant = network_coefficients(config.setup, config.phases, config.rates)
    dc = directional_couplings(resonant)
    payload["directional"] = {
        "g_fwd": dc.g_fwd,
        "g_bwd": dc.g_bwd,
        "lambda_sum": dc.lambda_sum,
        "lambda_diff": dc.lambda_diff,
        "s_param": dc.s_param,
    }
    payload["is_nonreciprocal"] = is_nonreciprocal(resonant)
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    print(text)
    if config.output.directory is not None and "json" in config.output.formats:
        directory = _ensure_outdir(config)
        _write_json(os.path.join(directory, "coeffs.json"), payload)
    return EXIT_OK


def _dynamics_columns(config: RunConfig, drive: DriveSpec):
    """Trajectory table plus applicable closed-form columns for one side."""
    coeffs = _coefficients(config)
    gamma = config.rates.gamma
    t_abs = config.time.absolute(gamma)
    system = second_moment_system(coeffs, drive)
    states = states_from_trajectory(
        system, evolve(system, vacuum_state(system), t_abs)
    )
    per_time = battery_trajectory_metrics(states, drive)
    header = ["t_scaled", "E_b_over_wb", "E_c_over_wc", "ergotropy_over_wb", "zeta"]
    columns = [
        gamma * t_abs,
        per_time["E_b"] / drive.omega_battery,
        per_time["E_c"] / drive.omega_charger,
        per_time["ergotropy"] / drive.omega_battery,
        per_time["zeta"],
    ]
    closed = None
    if drive.kind is DriveKind.LINEAR:
        closed = closed_form_linear(coeffs, drive, t_abs)
    elif (
        drive.side is DriveSide.LEFT
        and is_nonreciprocal(coeffs)
        and not quadratic_closed_form_is_degenerate(coeffs, drive.amplitude)
    ):
        closed = closed_form_quadratic_nr(coeffs, drive, t_abs)
    if closed is not None:
        cf_b = closed["E_b"] / drive.omega_battery
        cf_c = closed["E_c"] / drive.omega_charger
        residual = np.maximum(
            np.abs(columns[1] - cf_b), np.abs(columns[2] - cf_c)
        )
        header += ["cf_E_b_over_wb", "cf_E_c_over_wc", "closed_form_residual"]
        columns += [cf_b, cf_c, residual]
    return coeffs, header, np.column_stack(columns)


def cmd_dynamics(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    sides = (
        [DriveSide.LEFT, DriveSide.RIGHT]
        if args.drive_side in (None, "both")
        else [DriveSide(args.drive_side)]
    )
    coeffs = _coefficients(config)
    summaries = {}
    directory = _ensure_outdir(config)
    for side in sides:
        drive = dataclasses.replace(config.drive, side=side)
        if drive.kind is DriveKind.QUADRATIC:
            report = stability(coeffs, drive)
            if not report.stable:
                refusal = {
                    "error": "unstable quadratic drive",
                    "side": side.value,
                    "eigenvalues": list(report.eigenvalues),
                    "max_real": report.max_real,
                }
                print(
                    json.dumps(_jsonable(refusal), indent=2, sort_keys=True),
                    file=sys.stderr,
                )
                return EXIT_PHYSICS
    for side in sides:
        drive = dataclasses.replace(config.drive, side=side)
        _, header, rows = _dynamics_columns(config, drive)
        name = f"dynamics_{side.value}"
        if "csv" in config.output.formats:
            _write_csv(
                os.path.join(directory, name + ".csv"),
                dataclasses.replace(config, drive=drive),
                {
                    "time": (
                        f"t_max={config.time.t_max:.17g} "
                        f"n_points={config.time.n_points}"
                    )
                },
                header,
                rows,
            )
        final = {key: rows[-1, k] for k, key in enumerate(header)}
        try:
            steady = steady_energies(coeffs, drive)
            steady = {
                "E_b_over_wb": steady["E_b"] / drive.omega_battery,
                "E_c_over_wc": steady["E_c"] / drive.omega_charger,
            }
        except UnstableSystemError:
            steady = None
        summaries[side.value] = {"final": final, "steady": steady}
        if args.plot:
            _plot_dynamics(
                os.path.join(directory, name + ".svg"), header, rows, side.value
            )
    if "json" in config.output.formats:
        _write_json(
            os.path.join(directory, "dynamics_summary.json"),
            {"setup": config.setup.value, "sides": summaries},
        )
    return EXIT_OK


def _grid_parameters(config: RunConfig, sweep: SweepSpec):
    """Per-cell parameter arrays (flattened grid, axis1-major)."""
    v1 = sweep.axis1.values()
    v2 = sweep.axis2.values()
    mesh1, mesh2 = np.meshgrid(v1, v2, indexing="ij")
    params: dict[str, np.ndarray | float] = {
        name: getattr(config.phases, name) for name in _PHASE_NAMES
    }
    params["gamma"] = config.rates.gamma
    params["kappa1"] = config.rates.kappa1
    params["kappa2"] = config.rates.kappa2
    params["amplitude"] = config.drive.amplitude
    params[sweep.axis1.name] = mesh1.ravel()
    params[sweep.axis2.name] = mesh2.ravel()
    return v1, v2, params


def _zero_mean_zeta(n: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Vectorized extractable fraction for zero-mean Gaussian cells."""
    base = (1.0 + 2.0 * n) ** 2 - 4.0 * np.abs(s) ** 2
    base = np.maximum(base, 1.0)
    passive = (np.sqrt(base) - 1.0) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(n > 0.0, 1.0 - passive / np.where(n > 0, n, 1.0), 0.0)
    return np.clip(zeta, 0.0, 1.0)


def _scan_grids(config: RunConfig) -> dict[str, np.ndarray]:
    """Steady-state metric grids over the sweep, NaN where undefined."""
    sweep = config.sweep or _default_sweep()
    if not config.rates.equal:
        raise ConfigError("scan requires equal per-point couplings")
    v1, v2, params = _grid_parameters(config, sweep)
    shape = (sweep.axis1.steps, sweep.axis2.steps)
    size = shape[0] * shape[1]

    forms = closed_form_trig(
        config.setup,
        params["phi1"], params["phiw"], params["phi2"], params["phim"],
        params["theta1"], params["theta2"], params["gamma"],
    )
    l1 = np.broadcast_to(
        np.asarray(forms["decay_1"] + params["kappa1"], dtype=float), (size,)
    )
    l2 = np.broadcast_to(
        np.asarray(forms["decay_2"] + params["kappa2"], dtype=float), (size,)
    )
    exchange = np.broadcast_to(np.asarray(forms["exchange"], dtype=complex), (size,))
    collective = np.broadcast_to(
        np.asarray(forms["collective"], dtype=complex), (size,)
    )
    g_fwd = -1j * exchange - collective / 2.0
    g_bwd = -1j * np.conj(exchange) - np.conj(collective) / 2.0
    om = np.broadcast_to(np.asarray(params["amplitude"], dtype=float), (size,))
    w1, w2 = config.drive.omega1, config.drive.omega2

    # the contrast is a pure-noise ratio where both one-way couplings sit
    # below the cancellation tolerance, so those cells are undefined
    coupling_sum = np.abs(g_fwd) ** 2 + np.abs(g_bwd) ** 2
    contrast_floor = (NONRECIPROCAL_RTOL * (l1 + l2)) ** 2

    if config.drive.kind is DriveKind.LINEAR:
        den = np.abs(4.0 * g_bwd * g_fwd - l1 * l2) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            e_left = 16.0 * w2 * np.abs(g_fwd) ** 2 * om**2 / den
            e_right = 16.0 * w1 * np.abs(g_bwd) ** 2 * om**2 / den
            e_charger = 4.0 * w1 * om**2 * l2**2 / den
        alive = (l1 > 0.0) & (l2 > 0.0) & (den > 0.0)
        e_left = np.where(alive, e_left, np.nan)
        e_right = np.where(alive, e_right, np.nan)
        e_charger = np.where(alive, e_charger, np.nan)
        total = e_left + e_right
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(
                (total > 0.0) & (coupling_sum > contrast_floor),
                (e_left - e_right) / total,
                np.nan,
            )
            eta = np.where(e_charger > 0.0, e_left / e_charger, np.nan)
        zeta = np.where(np.isnan(e_left), np.nan, np.where(e_left > 0.0, 1.0, 0.0))
        return {
            "v1": v1, "v2": v2,
            "r": r.reshape(shape),
            "eta": eta.reshape(shape),
            "zeta": zeta.reshape(shape),
        }

    # quadratic drive: batched steady solves of the second-moment system
    coeffs0 = closed_form_coefficients(
        config.setup, config.phases, config.rates.gamma,
        config.rates.kappa1, config.rates.kappa2,
    )
    template = second_moment_system(
        coeffs0, dataclasses.replace(config.drive, side=DriveSide.LEFT)
    )
    ix = {name: k for k, name in enumerate(template.labels)}

    def batched_solution(side: DriveSide):
        m = np.zeros((size, 10, 10), dtype=complex)
        src = np.zeros((size, 10), dtype=complex)
        gf, gb = g_fwd, g_bwd
        ls = l1 + l2

        def put(row: str, col: str, value) -> None:
            m[:, ix[row], ix[col]] += value

        put("n1", "n1", -l1)
        put("n1", "x12", gb)
        put("n1", "x12_conj", np.conj(gb))
        put("n2", "n2", -l2)
        put("n2", "x12", np.conj(gf))
        put("n2", "x12_conj", gf)
        put("x12", "x12", -ls / 2.0)
        put("x12", "n2", np.conj(gb))
        put("x12", "n1", gf)
        put("x12_conj", "x12_conj", -ls / 2.0)
        put("x12_conj", "n2", gb)
        put("x12_conj", "n1", np.conj(gf))
        put("s12", "s12", -ls / 2.0)
        put("s12", "s2", gb)
        put("s12", "s1", gf)
        put("s12_conj", "s12_conj", -ls / 2.0)
        put("s12_conj", "s2_conj", np.conj(gb))
        put("s12_conj", "s1_conj", np.conj(gf))
        put("s1", "s1", -l1)
        put("s1", "s12", 2.0 * gb)
        put("s1_conj", "s1_conj", -l1)
        put("s1_conj", "s12_conj", 2.0 * np.conj(gb))
        put("s2", "s2", -l2)
        put("s2", "s12", 2.0 * gf)
        put("s2_conj", "s2_conj", -l2)
        put("s2_conj", "s12_conj", 2.0 * np.conj(gf))
        if side is DriveSide.LEFT:
            put("n1", "s1", 1j * om)
            put("n1", "s1_conj", -1j * om)
            put("x12", "s12", 1j * om)
            put("x12_conj", "s12_conj", -1j * om)
            put("s12", "x12", -1j * om)
            put("s12_conj", "x12_conj", 1j * om)
            put("s1", "n1", -2j * om)
            put("s1_conj", "n1", 2j * om)
            src[:, ix["s1"]] = -1j * om
            src[:, ix["s1_conj"]] = 1j * om
        else:
            put("n2", "s2", 1j * om)
            put("n2", "s2_conj", -1j * om)
            put("x12", "s12_conj", -1j * om)
            put("x12_conj", "s12", 1j * om)
            put("s12", "x12_conj", -1j * om)
            put("s12_conj", "x12", 1j * om)
            put("s2", "n2", -2j * om)
            put("s2_conj", "n2", 2j * om)
            src[:, ix["s2"]] = -1j * om
            src[:, ix["s2_conj"]] = 1j * om

        # stability from the 4x4 amplitude drift of the same cells
        m4 = np.zeros((size, 4, 4), dtype=complex)
        a1 = -l1 / 2.0
        a2 = -l2 / 2.0
        m4[:, 0, 0] = a1
        m4[:, 0, 1] = gb
        m4[:, 1, 0] = gf
        m4[:, 1, 1] = a2
        m4[:, 2, 2] = a1
        m4[:, 2, 3] = np.conj(gb)
        m4[:, 3, 2] = np.conj(gf)
        m4[:, 3, 3] = a2
        if side is DriveSide.LEFT:
            m4[:, 0, 2] = -1j * om
            m4[:, 2, 0] = 1j * om
        else:
            m4[:, 1, 3] = -1j * om
            m4[:, 3, 1] = 1j * om
        max_real = np.linalg.eigvals(m4).real.max(axis=1)
        stable = max_real < -1e-12
        safe = np.where(stable[:, None, None], m, np.eye(10, dtype=complex))
        solution = np.linalg.solve(safe, -src[:, :, np.newaxis])[:, :, 0]
        solution[~stable] = np.nan
        return solution

    left = batched_solution(DriveSide.LEFT)
    right = batched_solution(DriveSide.RIGHT)
    n2_left = left[:, ix["n2"]].real
    n1_left = left[:, ix["n1"]].real
    s2_left = left[:, ix["s2"]]
    n1_right = right[:, ix["n1"]].real

    e_left = w2 * n2_left
    e_right = w1 * n1_right
    total = e_left + e_right
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(
            (total > 0.0) & (coupling_sum > contrast_floor),
            (e_left - e_right) / total,
            np.nan,
        )
        eta = np.where(n1_left > 0.0, e_left / (w1 * n1_left), np.nan)
    zeta = np.where(
        np.isnan(n2_left), np.nan, _zero_mean_zeta(np.maximum(n2_left, 0.0), s2_left)
    )
    return {
        "v1": v1, "v2": v2,
        "r": r.reshape((sweep.axis1.steps, sweep.axis2.steps)),
        "eta": eta.reshape((sweep.axis1.steps, sweep.axis2.steps)),
        "zeta": zeta.reshape((sweep.axis1.steps, sweep.axis2.steps)),
    }


def cmd_scan(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    sweep = config.sweep or _default_sweep()
    config = dataclasses.replace(config, sweep=sweep)
    metrics = args.metric or ["r", "eta", "zeta"]
    for metric in metrics:
        if metric not in ("r", "eta", "zeta"):
            raise ConfigError(f"unknown scan metric {metric!r} (r, eta, zeta)")
    grids = _scan_grids(config)
    v1, v2 = grids["v1"], grids["v2"]
    directory = _ensure_outdir(config)
    axis_meta = {
        "sweep": (
            f"axis1={sweep.axis1.name}[{sweep.axis1.start:.17g}:"
            f"{sweep.axis1.stop:.17g}:{sweep.axis1.steps}] "
            f"axis2={sweep.axis2.name}[{sweep.axis2.start:.17g}:"
            f"{sweep.axis2.stop:.17g}:{sweep.axis2.steps}]"
        )
    }
    for metric in metrics:
        grid = grids[metric]
        rows = np.column_stack(
            [
                np.repeat(v1, v2.size),
                np.tile(v2, v1.size),
                grid.ravel(),
            ]
        )
        if "csv" in config.output.formats:
            _write_csv(
                os.path.join(directory, f"scan_{metric}.csv"),
                config,
                axis_meta,
                [sweep.axis1.name, sweep.axis2.name, metric],
                rows,
            )
        if "json" in config.output.formats:
            _write_json(
                os.path.join(directory, f"scan_{metric}.json"),
                _scan_summary(metric, sweep, v1, v2, grid),
            )
        if args.plot:
            _plot_scan(
                os.path.join(directory, f"scan_{metric}.svg"),
                sweep, v1, v2, grid, metric,
            )
    return EXIT_OK


def _scan_summary(
    metric: str, sweep: SweepSpec, v1: np.ndarray, v2: np.ndarray, grid: np.ndarray
) -> dict:
    defined = np.isfinite(grid)
    summary: dict = {
        "metric": metric,
        "axis1": sweep.axis1.name,
        "axis2": sweep.axis2.name,
        "defined_cells": int(defined.sum()),
        "total_cells": int(grid.size),
    }
    if defined.any():
        flat_idx = np.flatnonzero(defined.ravel())
        values = grid.ravel()[flat_idx]
        lo = flat_idx[int(np.argmin(values))]
        hi = flat_idx[int(np.argmax(values))]
        summary["min"] = {
            "value": float(grid.ravel()[lo]),
            "axis1": float(v1[lo // v2.size]),
            "axis2": float(v2[lo % v2.size]),
        }
        summary["max"] = {
            "value": float(grid.ravel()[hi]),
            "axis1": float(v1[hi // v2.size]),
            "axis2": float(v2[hi % v2.size]),
        }
    else:
        summary["min"] = None
        summary["max"] = None
    if metric == "r":
        locs = np.argwhere(defined & (np.abs(grid) >= 1.0 - 1e-6))
        summary["unity_loci"] = [
            [float(v1[i]), float(v2[j])] for i, j in locs
        ]
    return summary


def cmd_stability(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    coeffs = _coefficients(config)
    report = stability(coeffs, config.drive)
    payload: dict = {
        "setup": config.setup.value,
        "drive": {
            "kind": config.drive.kind.value,
            "side": config.drive.side.value,
            "amplitude": config.drive.amplitude,
        },
        "eigenvalues": list(report.eigenvalues),
        "max_real": report.max_real,
        "stable": report.stable,
    }
    if args.find_threshold:
        payload["threshold"] = instability_threshold(
            coeffs, config.drive.side
        )
    print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    if config.output.directory is not None and "json" in config.output.formats:
        directory = _ensure_outdir(config)
        _write_json(os.path.join(directory, "stability.json"), payload)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    limit = WEAK_DRIVE_LIMIT * config.drive.omega0
    if config.drive.amplitude > limit and not args.allow_strong_drive:
        raise DriveGuardError(
            f"drive amplitude {config.drive.amplitude:.3g} exceeds the "
            f"validated weak-drive regime (limit {limit:.3g}); "
            "pass --allow-strong-drive to override"
        )
    coeffs = _coefficients(config)
    t_abs = config.time.absolute(config.rates.gamma)
    system = second_moment_system(coeffs, config.drive)
    states = states_from_trajectory(
        system, evolve(system, vacuum_state(system), t_abs)
    )
    fields = ("m1", "m2", "n1", "n2", "x12", "s1", "s2", "s12")
    payload: dict = {
        "setup": config.setup.value,
        "drive": {
            "kind": config.drive.kind.value,
            "side": config.drive.side.value,
            "amplitude": config.drive.amplitude,
        },
        "grid": {"t_max": config.time.t_max, "n_points": config.time.n_points},
        "tolerance": args.tol,
    }
    try:
        result = converged_moments(
            coeffs, config.drive, t_abs, max_cutoff=args.max_cutoff
        )
    except CutoffConvergenceError as exc:
        payload["pass"] = False
        payload["error"] = str(exc)
        print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
        return EXIT_VALIDATION
    deviations = {}
    for name in fields:
        deviations[name] = max(
            abs(complex(getattr(a, name)) - complex(getattr(b, name)))
            for a, b in zip(result.states, states)
        )
    worst = max(deviations.values())
    payload.update(
        {
            "converged_cutoff": result.cutoff,
            "cutoff_certificate": result.certificate,
            "deviations": deviations,
            "max_deviation": worst,
            "pass": bool(worst <= args.tol),
        }
    )
    print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    if config.output.directory is not None and "json" in config.output.formats:
        directory = _ensure_outdir(config)
        _write_json(os.path.join(directory, "validate.json"), payload)
    return EXIT_OK if payload["pass"] else EXIT_VALIDATION


# ------------------------------------------------------------------ plots


def _load_pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError(
            "--plot needs matplotlib (install the 'plots' extra)"
        ) from exc
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _plot_dynamics(path: str, header: list[str], rows: np.ndarray, side: str) -> None:
    plt = _load_pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    t = rows[:, 0]
    for k, label in enumerate(header[1:5], start=1):
        ax.plot(t, rows[:, k], label=label)
    ax.set_xlabel("scaled time")
    ax.set_ylabel("energy / fraction")
    ax.set_title(f"dynamics ({side} drive)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _plot_scan(
    path: str,
    sweep: SweepSpec,
    v1: np.ndarray,
    v2: np.ndarray,
    grid: np.ndarray,
    metric: str,
) -> None:
    plt = _load_pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    mesh = ax.pcolormesh(v2, v1, grid, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=metric)
    ax.set_xlabel(sweep.axis2.name)
    ax.set_ylabel(sweep.axis1.name)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ------------------------------------------------------------------ parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument(
        "--setup", choices=[k.value for k in SetupKind], help="geometry label"
    )
    for name in _PHASE_NAMES:
        parser.add_argument(f"--{name}", type=float, help=f"{name} (radians)")
    parser.add_argument("--gamma", type=float, help="waveguide rate per point")
    parser.add_argument("--kappa1", type=float, help="charger intrinsic loss")
    parser.add_argument("--kappa2", type=float, help="battery intrinsic loss")
    parser.add_argument("--output-dir", help="directory for output files")
    parser.add_argument(
        "--formats", help="comma-separated output formats (csv,json)"
    )


def _add_drive(parser: argparse.ArgumentParser, sides: bool = False) -> None:
    parser.add_argument(
        "--drive-kind", choices=["linear", "quadratic"], help="drive type"
    )
    choices = ["left", "right"] + (["both"] if sides else [])
    parser.add_argument("--drive-side", choices=choices, help="driven mode")
    parser.add_argument("--amplitude", type=float, help="drive amplitude")
    parser.add_argument("--omega1", type=float, help="charger frequency")
    parser.add_argument("--omega2", type=float, help="battery frequency")
    parser.add_argument("--omega0", type=float, help="reference frequency")


def _add_time(parser: argparse.ArgumentParser, default_points: int) -> None:
    parser.add_argument(
        "--t-max", type=float, help="time span in 1/gamma units (default 10)"
    )
    parser.add_argument(
        "--n-points", type=int,
        help=f"output samples (default {default_points})",
    )
    parser.set_defaults(default_n_points=default_points)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgcharge",
        description=(
            "Remote charging of a bosonic battery through a waveguide: "
            "coefficients, dynamics, scans, stability, validation."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"wgcharge {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="coefficient report (both routes)")
    _add_common(p)
    p.set_defaults(func=cmd_coeffs, drive_kind=None)

    p = sub.add_parser("dynamics", help="time-domain charging traces")
    _add_common(p)
    _add_drive(p, sides=True)
    _add_time(p, 2001)
    p.add_argument("--plot", action="store_true", help="also emit SVG plots")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("scan", help="steady-state metric maps over two axes")
    _add_common(p)
    _add_drive(p)
    p.add_argument(
        "--axis1", help="sweep axis spec name:start:stop:steps[:closed]"
    )
    p.add_argument("--axis2", help="second sweep axis spec")
    p.add_argument(
        "--metric", action="append", choices=["r", "eta", "zeta"],
        help="metric to map (repeatable; default all)",
    )
    p.add_argument("--plot", action="store_true", help="also emit SVG maps")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("stability", help="drift eigenvalue report")
    _add_common(p)
    _add_drive(p)
    p.add_argument(
        "--find-threshold", action="store_true",
        help="bisect for the instability threshold amplitude",
    )
    p.set_defaults(func=cmd_stability, default_amplitude=0.005)

    p = sub.add_parser("validate", help="oracle vs moment-dynamics check")
    _add_common(p)
    _add_drive(p)
    _add_time(p, 101)
    p.add_argument(
        "--allow-strong-drive", action="store_true",
        help="lift the weak-drive guard on the oracle",
    )
    p.add_argument(
        "--tol", type=float, default=1e-5,
        help="pass/fail deviation threshold (default 1e-5)",
    )
    p.add_argument(
        "--max-cutoff", type=int, default=16,
        help="abort the cutoff ladder above this (default 16)",
    )
    p.set_defaults(func=cmd_validate, default_amplitude=1e-3)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnstableSystemError, DriveGuardError, UnphysicalStateError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except CutoffConvergenceError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
