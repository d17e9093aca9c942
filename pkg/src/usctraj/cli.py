"""Command-line experiment runner.

Experiments are archived artifacts: every run is described by a config
file (flat INI sections [system], [run], [output]), physics never enters
through positional flags, and every output file embeds the fully
resolved configuration plus the code version so a result can always be
traced back to its inputs.  Output contains no timestamps, so rerunning
a config byte-reproduces its files.

Subcommands
-----------
spectrum     eigenvalue scan over qubit detuning (full and effective)
trajectory   individual trajectories: expectation series + jump log
ensemble     averaged series and jump histograms over many trajectories
compare-lme  trajectory average vs master equation, with deviation report

Named presets (fig1a .. fig7) ship with the package and can be passed
directly to --config.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, TruncationError
from .hilbert import build_layout
from .homodyne import DRIFT_MODES, run_trajectory_homodyne
from .lme import density_from_state, evolve_lme
from .mcwf import DEFAULT_DT, ensemble_average
from .model import (
    SystemParams,
    calibrate_resonance,
    effective_hamiltonian,
    full_hamiltonian,
)
from .ensemble import ENSEMBLE_METHODS, run_ensemble
from .stats import (
    NORMALIZATION_MODES,
    conditional_second_jump_histogram,
    first_jump_histogram,
    write_histogram_csv,
)
from .dressed import CHANNEL_LABELS
from .system import (
    HAMILTONIAN_CHOICES,
    INITIAL_STATE_LABELS,
    OBSERVABLE_LABELS,
    build_system,
)

SOLVERS = ("mcwf", "homodyne", "mixed", "lme")
CALIBRATION_CHOICES = ("none", "full", "effective")
HISTOGRAM_CHOICES = ("none", "first", "conditional", "both")
THREADS_ENV = "USCTRAJ_THREADS"

# Highest-Fock-level occupation allowed by --check-truncation.
TRUNCATION_CEILING = 1e-6

# compare-lme ignores differences below this scale: sample standard errors
# of machine-noise observables (e.g. 1e-32 occupations whose mean rounds)
# are themselves noise, so ratios there are meaningless.
DEVIATION_FLOOR = 1e-12

_FLOAT_FMT = "%.12g"

_SYSTEM_KEYS = {
    "omega0", "delta", "omega_c", "g", "theta",
    "kappa", "gamma1", "gamma2", "gamma_c", "n_fock", "calibrate",
    "qubit_exchange",
}
_RUN_KEYS = {
    "solver", "hamiltonian", "t_final", "dt", "n_trajectories",
    "master_seed", "initial_state", "observables", "record_every",
    "method", "drift_mode", "homodyne_channels",
    "delta_min", "delta_max", "delta_points", "levels",
}
_OUTPUT_KEYS = {
    "directory", "prefix", "formats", "histogram", "first_bin_width",
    "conditional_bin_width", "trigger_channel", "normalization",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One archived experiment: system block, run block, output block."""

    # [system]
    omega0: float = 1.0
    delta: float = 0.0
    omega_c: float = 2.0
    g: float = 0.1
    theta: float = math.pi / 6.0
    kappa: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma_c: float = 0.0
    n_fock: int = 10
    calibrate: str = "none"
    # "auto" keeps the qubit-exchange coupling only for near-identical
    # qubits; "on"/"off" force it, e.g. to keep the effective spectrum
    # smooth through the branch point.
    qubit_exchange: str = "auto"
    # [run]
    solver: str = "mcwf"
    hamiltonian: str = "full"
    t_final: float = 1000.0
    dt: float = DEFAULT_DT
    n_trajectories: int = 1
    master_seed: int = 0
    initial_state: str = "1gg"
    observables: tuple[str, ...] = OBSERVABLE_LABELS
    record_every: int = 1
    method: str = "auto"
    drift_mode: str = "qsd"
    homodyne_channels: tuple[str, ...] = ("cavity",)
    delta_min: float = -0.3
    delta_max: float = 0.3
    delta_points: int = 61
    levels: int = 6
    # [output]
    directory: str = "."
    prefix: str = "run"
    formats: str = "csv"
    histogram: str = "none"
    first_bin_width: float = 2000.0
    conditional_bin_width: float = 50.0
    trigger_channel: str = "qubit1"
    normalization: str = "per-bin"

    def __post_init__(self):
        checks = (
            ("calibrate", CALIBRATION_CHOICES),
            ("qubit_exchange", ("auto", "on", "off")),
            ("solver", SOLVERS),
            ("hamiltonian", HAMILTONIAN_CHOICES),
            ("initial_state", INITIAL_STATE_LABELS),
            ("method", ENSEMBLE_METHODS),
            ("drift_mode", DRIFT_MODES),
            ("histogram", HISTOGRAM_CHOICES),
            ("trigger_channel", CHANNEL_LABELS),
            ("normalization", NORMALIZATION_MODES),
        )
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ConfigError(
                    f"{name} must be one of {allowed}, got {getattr(self, name)!r}"
                )
        for label in self.observables:
            if label not in OBSERVABLE_LABELS:
                raise ConfigError(f"unknown observable {label!r}")
        for label in self.homodyne_channels:
            if label not in CHANNEL_LABELS:
                raise ConfigError(f"unknown homodyne channel {label!r}")
        if not self.observables:
            raise ConfigError("observables must not be empty")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if self.n_fock < 1:
            raise ConfigError("n_fock must be >= 1")
        if self.t_final <= 0 or self.dt <= 0:
            raise ConfigError("t_final and dt must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.delta_points < 2:
            raise ConfigError("delta_points must be >= 2")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.formats != "csv":
            raise ConfigError("formats: only 'csv' is supported")
        if self.first_bin_width <= 0 or self.conditional_bin_width <= 0:
            raise ConfigError("histogram bin widths must be positive")

    def exchange_flag(self) -> bool | None:
        return {"auto": None, "on": True, "off": False}[self.qubit_exchange]

    def system_params(self) -> SystemParams:
        return SystemParams(
            omega0=self.omega0, delta=self.delta, omega_c=self.omega_c,
            g=self.g, theta=self.theta, kappa=self.kappa,
            gamma1=self.gamma1, gamma2=self.gamma2, gamma_c=self.gamma_c,
        )


def _tuple_field(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def load_config(spec: str) -> ExperimentConfig:
    """Load a config file or a shipped preset name."""
    import configparser

    path = Path(spec)
    if path.is_file():
        text = path.read_text()
        prefix = path.stem
    else:
        preset = resources.files("usctraj").joinpath(f"presets/{spec}.ini")
        if not preset.is_file():
            raise ConfigError(
                f"config {spec!r} is neither a file nor a shipped preset"
            )
        text = preset.read_text()
        prefix = spec

    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text, source=spec)
    known = {"system": _SYSTEM_KEYS, "run": _RUN_KEYS, "output": _OUTPUT_KEYS}
    fields: dict = {"prefix": prefix}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            fields[key] = raw
    ints = {"n_fock", "n_trajectories", "master_seed", "record_every",
            "delta_points", "levels"}
    floats = {"omega0", "delta", "omega_c", "g", "theta", "kappa", "gamma1",
              "gamma2", "gamma_c", "t_final", "dt", "delta_min", "delta_max",
              "first_bin_width", "conditional_bin_width"}
    tuples = {"observables", "homodyne_channels"}
    for key, raw in list(fields.items()):
        try:
            if key in ints:
                fields[key] = int(raw)
            elif key in floats:
                fields[key] = float(raw)
            elif key in tuples and isinstance(raw, str):
                fields[key] = _tuple_field(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return ExperimentConfig(**fields)


def _resolve_params(cfg: ExperimentConfig) -> SystemParams:
    """System parameters with the calibration step applied."""
    p = cfg.system_params()
    if cfg.calibrate == "none":
        return p
    return calibrate_resonance(p, build_layout(cfg.n_fock), which=cfg.calibrate)


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


def _header_lines(cfg: ExperimentConfig, p: SystemParams) -> list[str]:
    """Resolved-config header; omega_c shows the calibrated value."""
    lines = [f"# usctraj {__version__}"]
    resolved = {
        "system": [
            ("omega0", p.omega0), ("delta", p.delta), ("omega_c", p.omega_c),
            ("g", p.g), ("theta", p.theta), ("kappa", p.kappa),
            ("gamma1", p.gamma1), ("gamma2", p.gamma2), ("gamma_c", p.gamma_c),
            ("n_fock", cfg.n_fock), ("calibrate", cfg.calibrate),
            ("qubit_exchange", cfg.qubit_exchange),
        ],
        "run": [
            ("solver", cfg.solver), ("hamiltonian", cfg.hamiltonian),
            ("t_final", cfg.t_final), ("dt", cfg.dt),
            ("n_trajectories", cfg.n_trajectories),
            ("master_seed", cfg.master_seed),
            ("initial_state", cfg.initial_state),
            ("observables", cfg.observables),
            ("record_every", cfg.record_every), ("method", cfg.method),
            ("drift_mode", cfg.drift_mode),
            ("homodyne_channels", cfg.homodyne_channels),
            ("delta_min", cfg.delta_min), ("delta_max", cfg.delta_max),
            ("delta_points", cfg.delta_points), ("levels", cfg.levels),
        ],
        "output": [
            ("prefix", cfg.prefix), ("formats", cfg.formats),
            ("histogram", cfg.histogram),
            ("first_bin_width", cfg.first_bin_width),
            ("conditional_bin_width", cfg.conditional_bin_width),
            ("trigger_channel", cfg.trigger_channel),
            ("normalization", cfg.normalization),
        ],
    }
    for section, pairs in resolved.items():
        for key, value in pairs:
            lines.append(f"# [{section}] {key} = {_fmt_value(value)}")
    return lines


def _write_table(path: Path, header: list[str], columns: list[tuple[str, np.ndarray]]):
    names = ",".join(name for name, _ in columns)
    data = np.column_stack([np.asarray(col, dtype=float) for _, col in columns])
    with open(path, "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(f"# columns: {names}\n")
        for row in data:
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")


def _check_truncation_states(states: list[np.ndarray], n_fock: int):
    """Reject runs whose wave functions reach the top Fock level."""
    worst = 0.0
    for psi in states:
        top = float(np.sum(np.abs(psi[-4:]) ** 2))
        worst = max(worst, top)
    if worst > TRUNCATION_CEILING:
        raise TruncationError(
            f"top Fock level (n = {n_fock - 1}) population {worst:.3g} exceeds "
            f"{TRUNCATION_CEILING}; increase n_fock"
        )


def _check_truncation_matrix(rho: np.ndarray, n_fock: int):
    top = float(np.sum(np.diag(rho).real[-4:]))
    if top > TRUNCATION_CEILING:
        raise TruncationError(
            f"top Fock level (n = {n_fock - 1}) population {top:.3g} exceeds "
            f"{TRUNCATION_CEILING}; increase n_fock"
        )


def _thread_count(flag_value: int | None) -> int:
    if flag_value is not None:
        return max(1, flag_value)
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return 1


def _out_dir(cfg: ExperimentConfig, out_flag: str | None) -> Path:
    out = Path(out_flag) if out_flag is not None else Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_spectrum(cfg: ExperimentConfig, out_flag, threads, check_truncation) -> list[Path]:
    layout = build_layout(cfg.n_fock)
    deltas = np.linspace(cfg.delta_min, cfg.delta_max, cfg.delta_points)
    full_levels = np.empty((cfg.delta_points, cfg.levels))
    eff_levels = np.empty((cfg.delta_points, cfg.levels))
    for i, d in enumerate(deltas):
        p = SystemParams(
            omega0=cfg.omega0, delta=float(d), omega_c=cfg.omega_c, g=cfg.g,
            theta=cfg.theta, kappa=cfg.kappa, gamma1=cfg.gamma1,
            gamma2=cfg.gamma2, gamma_c=cfg.gamma_c,
        )
        if cfg.calibrate != "none":
            p = calibrate_resonance(p, layout, which=cfg.calibrate)
        for matrix, store in (
            (full_hamiltonian(p, layout).matrix, full_levels),
            (effective_hamiltonian(p, layout, cfg.exchange_flag()).matrix, eff_levels),
        ):
            evals = np.linalg.eigvalsh(matrix)
            store[i] = evals[: cfg.levels] - evals[0]
    out = _out_dir(cfg, out_flag)
    header = _header_lines(cfg, cfg.system_params())
    cols = [("delta", deltas)]
    cols += [(f"full_{k}", full_levels[:, k]) for k in range(cfg.levels)]
    cols += [(f"effective_{k}", eff_levels[:, k]) for k in range(cfg.levels)]
    path = out / f"{cfg.prefix}_spectrum.csv"
    _write_table(path, header, cols)
    return [path]


def _run_records(cfg: ExperimentConfig, p: SystemParams, threads: int):
    """Trajectory records for the configured stochastic solver."""
    system = build_system(
        p, n_fock=cfg.n_fock, hamiltonian=cfg.hamiltonian,
        include_qubit_exchange=cfg.exchange_flag(),
    )
    psi0 = system.initial_state(cfg.initial_state)
    if cfg.solver == "mcwf":
        return system, run_ensemble(
            p, psi0, cfg.t_final, cfg.n_trajectories, dt=cfg.dt,
            master_seed=cfg.master_seed, record_every=cfg.record_every,
            method=cfg.method, threads=threads, system=system,
        )
    monitored = None if cfg.solver == "homodyne" else cfg.homodyne_channels
    records = [
        run_trajectory_homodyne(
            p, psi0, cfg.t_final, dt=cfg.dt, seed=cfg.master_seed,
            traj_index=i, record_every=cfg.record_every,
            homodyne_channels=monitored, drift_mode=cfg.drift_mode,
            system=system,
        )
        for i in range(cfg.n_trajectories)
    ]
    return system, records


def cmd_trajectory(cfg, out_flag, threads, check_truncation) -> list[Path]:
    p = _resolve_params(cfg)
    system, records = _run_records(cfg, p, threads)
    if check_truncation:
        _check_truncation_states([r.final_state for r in records], cfg.n_fock)
    out = _out_dir(cfg, out_flag)
    header = _header_lines(cfg, p)
    written = []
    for rec in records:
        cols = [("time", rec.time_grid)]
        cols += [(label, rec.expectations[label]) for label in cfg.observables]
        path = out / f"{cfg.prefix}_traj{rec.traj_index}.csv"
        _write_table(path, header, cols)
        written.append(path)
    jump_path = out / f"{cfg.prefix}_jumps.csv"
    with open(jump_path, "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("# columns: traj_index,time,channel,"
                 + ",".join(f"dp_{c}" for c in CHANNEL_LABELS) + "\n")
        for rec in records:
            for jump in rec.jumps:
                dp = ",".join(_FLOAT_FMT % v for v in jump.pre_jump_norm_probabilities)
                fh.write(f"{rec.traj_index},{_FLOAT_FMT % jump.time},{jump.channel},{dp}\n")
    written.append(jump_path)
    return written


def _write_histograms(cfg, records, header, out: Path) -> list[Path]:
    written = []
    if cfg.histogram in ("first", "both"):
        hist = first_jump_histogram(records, cfg.first_bin_width)
        path = out / f"{cfg.prefix}_first_jump_hist.csv"
        with open(path, "w") as fh:
            for line in header:
                fh.write(line + "\n")
            write_histogram_csv(hist, fh, mode=cfg.normalization)
        written.append(path)
    if cfg.histogram in ("conditional", "both"):
        hist = conditional_second_jump_histogram(
            records, cfg.trigger_channel, cfg.conditional_bin_width
        )
        path = out / f"{cfg.prefix}_conditional_hist.csv"
        with open(path, "w") as fh:
            for line in header:
                fh.write(line + "\n")
            write_histogram_csv(hist, fh, mode=cfg.normalization)
        written.append(path)
    return written


def cmd_ensemble(cfg, out_flag, threads, check_truncation) -> list[Path]:
    p = _resolve_params(cfg)
    out = _out_dir(cfg, out_flag)
    header = _header_lines(cfg, p)
    if cfg.solver == "lme":
        system = build_system(
            p, n_fock=cfg.n_fock, hamiltonian=cfg.hamiltonian,
            include_qubit_exchange=cfg.exchange_flag(),
        )
        rho0 = density_from_state(system.initial_state(cfg.initial_state), system.layout)
        series = evolve_lme(
            rho0, cfg.t_final, cfg.dt, system.hamiltonian, system.channels,
            record_every=cfg.record_every,
        )
        if check_truncation:
            _check_truncation_matrix(series.final_matrix, cfg.n_fock)
        cols = [("time", series.time_grid)]
        cols += [(label, series.expectations[label]) for label in cfg.observables]
        path = out / f"{cfg.prefix}_lme.csv"
        _write_table(path, header, cols)
        return [path]
    system, records = _run_records(cfg, p, threads)
    if check_truncation:
        _check_truncation_states([r.final_state for r in records], cfg.n_fock)
    avg = ensemble_average(records)
    cols = [("time", avg.time_grid)]
    for label in cfg.observables:
        cols.append((f"{label}_mean", avg.means[label]))
        cols.append((f"{label}_se", avg.standard_errors[label]))
    path = out / f"{cfg.prefix}_mean.csv"
    _write_table(path, header, cols)
    return [path] + _write_histograms(cfg, records, header, out)


def cmd_compare_lme(cfg, out_flag, threads, check_truncation) -> list[Path]:
    p = _resolve_params(cfg)
    system, records = _run_records(cfg, p, threads)
    rho0 = density_from_state(system.initial_state(cfg.initial_state), system.layout)
    series = evolve_lme(
        rho0, cfg.t_final, cfg.dt, system.hamiltonian, system.channels,
        record_every=cfg.record_every,
    )
    if check_truncation:
        _check_truncation_states([r.final_state for r in records], cfg.n_fock)
        _check_truncation_matrix(series.final_matrix, cfg.n_fock)
    avg = ensemble_average(records)
    out = _out_dir(cfg, out_flag)
    header = _header_lines(cfg, p)
    cols = [("time", avg.time_grid)]
    worst = (0.0, "", 0.0)  # (deviation in SE units, observable, time)
    worst_abs = 0.0
    for label in cfg.observables:
        diff = np.abs(avg.means[label] - series.expectations[label])
        se = avg.standard_errors[label]
        worst_abs = max(worst_abs, float(diff.max()))
        if cfg.n_trajectories > 1:
            # Zero SE with sub-floor deviation (e.g. the shared initial
            # state) counts as zero; zero SE with a real deviation is
            # infinite.
            ratio = np.zeros_like(diff)
            pos = (se > 0) & (diff > DEVIATION_FLOOR)
            ratio[pos] = diff[pos] / se[pos]
            ratio[(se == 0) & (diff > DEVIATION_FLOOR)] = np.inf
            i = int(np.argmax(ratio))
            if ratio[i] > worst[0]:
                worst = (float(ratio[i]), label, float(avg.time_grid[i]))
        cols.append((f"{label}_lme", series.expectations[label]))
        cols.append((f"{label}_mcwf", avg.means[label]))
        cols.append((f"{label}_se", se))
    path = out / f"{cfg.prefix}_compare.csv"
    _write_table(path, header, cols)
    if cfg.n_trajectories > 1:
        print(
            f"max deviation {worst[0]:.3f} SE ({worst[1]} at t = {_FLOAT_FMT % worst[2]}); "
            f"max |mcwf - lme| = {worst_abs:.3e}"
        )
    else:
        print(
            "standard errors undefined for a single trajectory; "
            f"max |mcwf - lme| = {worst_abs:.3e}"
        )
    return [path]


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble,
    "compare-lme": cmd_compare_lme,
}


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usctraj",
        description="Quantum-trajectory experiments for two qubits "
        "ultrastrongly coupled to a cavity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="config file path or shipped preset name")
        sp.add_argument("--out", default=None,
                        help="output directory (default: config [output] directory)")
        sp.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
        sp.add_argument("--check-truncation", action="store_true",
                        help="fail if the top Fock level becomes populated")
    return parser


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        threads = _thread_count(args.threads)
        written = _COMMANDS[args.command](cfg, args.out, threads, args.check_truncation)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
