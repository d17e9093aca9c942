"""Monte-Carlo wave-function engine: piecewise-deterministic trajectories with jumps.

Between jumps a normalized state evolves under the non-Hermitian matrix
H - (i/2) sum_m gamma_m S^-_m S^+_m and is renormalized after every step.  At
each step the jump probabilities are dp_m = dt gamma_m <psi|S^-_m S^+_m|psi>;
a uniform draw decides whether a jump fires, a second draw picks the channel
in proportion to dp_m, and the state collapses to S^+_m psi (renormalized).

Propagation is by the exact exponential of the non-Hermitian matrix over one
step (precomputed once; the dimension never exceeds a few dozen), so the
timestep affects only jump-probability discretization, not the oscillation
frequencies.  A first-order Euler mode is available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .dressed import JumpChannel
from .errors import (
    ConfigError,
    DimensionMismatchError,
    NumericalInconsistencyError,
    TimestepError,
)
from .hilbert import OperatorMatrix
from .model import SystemParams
from .rng import PURPOSE_CHANNEL, PURPOSE_JUMP, StreamCursor
from .system import (
    OBSERVABLE_LABELS,
    DissipativeSystem,
    build_system,
    non_hermitian_matrix,
)

MAX_DP_PER_STEP = 0.1
JUMP_NORM_FLOOR = 1e-14

DEFAULT_DT = 0.5

PROPAGATION_MODES = ("exact", "first-order")


@dataclass(frozen=True)
class JumpEvent:
    """One recorded quantum jump."""

    time: float
    channel: str
    pre_jump_norm_probabilities: np.ndarray

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("jump time must be >= 0")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One trajectory: expectation series, jump log, and the final state.

    ``expectations`` maps observable labels (cavity, qubit1, qubit2) to the
    real series <S^- S^+> on ``time_grid``; these use the dressed operators,
    so the cavity series is a photon number an external detector would see.
    """

    params: SystemParams
    seed: int
    traj_index: int
    time_grid: np.ndarray
    expectations: dict[str, np.ndarray]
    jumps: list[JumpEvent]
    final_state: np.ndarray
    states: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class EnsembleAverage:
    """Pointwise mean and standard error of trajectory observables."""

    time_grid: np.ndarray
    means: dict[str, np.ndarray]
    standard_errors: dict[str, np.ndarray]
    n_trajectories: int


@dataclass
class JumpStreams:
    """The two random cursors one trajectory consumes, in a fixed order."""

    threshold: StreamCursor
    channel: StreamCursor

    @classmethod
    def for_trajectory(cls, master_seed: int, traj_index: int) -> "JumpStreams":
        return cls(
            threshold=StreamCursor(master_seed, traj_index, PURPOSE_JUMP),
            channel=StreamCursor(master_seed, traj_index, PURPOSE_CHANNEL),
        )


def non_hermitian_hamiltonian(
    h: OperatorMatrix, channels: list[JumpChannel]
) -> OperatorMatrix:
    """H - (i/2) sum_m gamma_m S^-_m S^+_m, wrapped with basis metadata."""
    for c in channels:
        if c.operator_plus.layout.dimension != h.layout.dimension:
            raise DimensionMismatchError(
                f"channel {c.label} dimension {c.operator_plus.layout.dimension} "
                f"!= Hamiltonian dimension {h.layout.dimension}"
            )
    return OperatorMatrix(
        h.layout,
        non_hermitian_matrix(h.matrix, channels),
        hermitian=False,
        name="H_nh",
    )


def _jump_probabilities(
    psi: np.ndarray, dt: float, plus_stack: np.ndarray, rates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """dp_m vector and the jump amplitudes S^+_m psi (rows)."""
    amps = plus_stack @ psi
    dp = dt * rates * np.einsum("md,md->m", amps.conj(), amps).real
    return dp, amps


def step(
    psi: np.ndarray,
    dt: float,
    channels: list[JumpChannel],
    h_nh: OperatorMatrix | np.ndarray,
    rng: JumpStreams,
    propagator: np.ndarray | None = None,
    time: float = 0.0,
) -> tuple[np.ndarray, JumpEvent | None]:
    """Advance one step; returns the renormalized state and a jump event if one fired.

    ``propagator`` is exp(-i H_nh dt); when omitted, the first-order form
    (1 - i H_nh dt) psi is used.  The threshold draw happens every step, the
    channel draw only on steps where a jump fires.
    """
    h = h_nh.matrix if isinstance(h_nh, OperatorMatrix) else h_nh
    plus_stack = np.stack([c.operator_plus.matrix for c in channels])
    rates = np.array([c.rate for c in channels])
    dp, amps = _jump_probabilities(psi, dt, plus_stack, rates)
    _check_dp(dp)
    eps = rng.threshold.take_one()
    # Strict comparison: a zero-probability step can never fire, even on
    # the measure-zero draw eps = 0.0.
    if dp.sum() <= eps:
        phi = propagator @ psi if propagator is not None else psi - 1j * dt * (h @ psi)
        return phi / np.linalg.norm(phi), None
    m = _select_channel(dp, rng.channel.take_one())
    phi = amps[m]
    norm = np.linalg.norm(phi)
    if norm < JUMP_NORM_FLOOR:
        raise NumericalInconsistencyError(
            f"channel {channels[m].label} selected but ||S^+ psi|| = {norm:.3e}"
        )
    event = JumpEvent(
        time=time, channel=channels[m].label, pre_jump_norm_probabilities=dp
    )
    return phi / norm, event


def _check_dp(dp: np.ndarray) -> None:
    if dp.max(initial=0.0) >= MAX_DP_PER_STEP:
        raise TimestepError(
            f"per-channel jump probability {dp.max():.3g} >= {MAX_DP_PER_STEP}; reduce dt"
        )
    if dp.sum() >= 1.0:
        raise TimestepError(f"total jump probability {dp.sum():.3g} >= 1; reduce dt")


def _select_channel(dp: np.ndarray, eps_prime: float) -> int:
    cum = np.cumsum(dp)
    return int(np.searchsorted(cum / cum[-1], eps_prime, side="right"))


def run_trajectory(
    p: SystemParams,
    psi0: np.ndarray,
    t_final: float,
    dt: float = DEFAULT_DT,
    seed: int = 0,
    hamiltonian: str = "full",
    traj_index: int = 0,
    record_every: int = 1,
    propagation: str = "exact",
    store_states: bool = False,
    system: DissipativeSystem | None = None,
) -> TrajectoryRecord:
    """Run one trajectory; deterministic in (params, psi0, dt, seed, traj_index).

    The jump recorded at time (k+1) dt replaces the coherent propagation of
    step k, so grid samples always show the post-jump state.  Pass ``system``
    to reuse a prebuilt assembly (the Hamiltonian choice must then match).
    """
    if propagation not in PROPAGATION_MODES:
        raise ConfigError(f"propagation must be one of {PROPAGATION_MODES}")
    psi = np.asarray(psi0, dtype=complex)
    if system is None:
        if psi.size % 4 != 0:
            raise DimensionMismatchError(f"state length {psi.size} is not 4 * n_fock")
        system = build_system(p, n_fock=psi.size // 4, hamiltonian=hamiltonian)
    if psi.shape != (system.dimension,):
        raise DimensionMismatchError(
            f"state shape {psi.shape} does not match system dimension {system.dimension}"
        )
    propagator = expm(-1j * system.h_nh * dt) if propagation == "exact" else None
    h = system.h_nh
    plus_stack, rates = system.plus_stack, system.rates
    streams = JumpStreams.for_trajectory(seed, traj_index)

    n_steps = int(round(t_final / dt))
    rec_steps = np.arange(0, n_steps + 1, record_every)
    time_grid = rec_steps * dt
    series = np.empty((3, rec_steps.size))
    snapshots = np.empty((rec_steps.size, psi.size), dtype=complex) if store_states else None
    jumps: list[JumpEvent] = []

    rec_i = 0
    for k in range(n_steps + 1):
        if rec_i < rec_steps.size and k == rec_steps[rec_i]:
            amps3 = plus_stack[:3] @ psi
            series[:, rec_i] = np.einsum("md,md->m", amps3.conj(), amps3).real
            if snapshots is not None:
                snapshots[rec_i] = psi
            rec_i += 1
        if k == n_steps:
            break
        dp, amps = _jump_probabilities(psi, dt, plus_stack, rates)
        _check_dp(dp)
        eps = streams.threshold.take_one()
        if dp.sum() <= eps:
            phi = propagator @ psi if propagator is not None else psi - 1j * dt * (h @ psi)
            psi = phi / np.linalg.norm(phi)
        else:
            m = _select_channel(dp, streams.channel.take_one())
            phi = amps[m]
            norm = np.linalg.norm(phi)
            if norm < JUMP_NORM_FLOOR:
                raise NumericalInconsistencyError(
                    f"channel {system.channels[m].label} selected but ||S^+ psi|| = {norm:.3e}"
                )
            psi = phi / norm
            jumps.append(
                JumpEvent(
                    time=(k + 1) * dt,
                    channel=system.channels[m].label,
                    pre_jump_norm_probabilities=dp,
                )
            )

    return TrajectoryRecord(
        params=p,
        seed=seed,
        traj_index=traj_index,
        time_grid=time_grid,
        expectations=dict(zip(OBSERVABLE_LABELS, series)),
        jumps=jumps,
        final_state=psi,
        states=snapshots,
    )


def ensemble_average(records: list[TrajectoryRecord]) -> EnsembleAverage:
    """Pointwise mean and standard error over trajectories with one shared grid."""
    if not records:
        raise ConfigError("ensemble_average needs at least one record")
    grid = records[0].time_grid
    for r in records[1:]:
        if r.time_grid.shape != grid.shape or not np.array_equal(r.time_grid, grid):
            raise DimensionMismatchError("trajectory time grids differ")
    n = len(records)
    means, errors = {}, {}
    for label in records[0].expectations:
        stack = np.stack([r.expectations[label] for r in records])
        means[label] = stack.mean(axis=0)
        if n > 1:
            errors[label] = stack.std(axis=0, ddof=1) / np.sqrt(n)
        else:
            errors[label] = np.zeros_like(grid)
    return EnsembleAverage(
        time_grid=grid, means=means, standard_errors=errors, n_trajectories=n
    )
