"""Ensemble driver: many trajectories over one system, fast when flows recur.

``run_ensemble`` produces the same records as calling ``run_trajectory``
once per trajectory index, but exploits the structure of
piecewise-deterministic evolution.  Between jumps every trajectory
follows the deterministic no-jump flow fixed by its entry state, so
trajectories sharing an entry state share all per-step jump
probabilities, observables, and jump images.  When post-jump states
recur up to a global phase (they do for the effective-Hamiltonian
subspace cascades: the photon pair feeds |0,g,e>, |0,e,g>, their
symmetric combination, and the dark |0,g,g>), the handful of distinct
flows is propagated once over the horizon and each trajectory reduces
to scanning its own uniform words against precomputed arrays.

Random access makes the scans cheap: the threshold word for step k is
word k of the trajectory's threshold stream regardless of history, and
the channel word for the q-th jump is word q, so a segment draws its
words in bulk without replaying earlier steps.  Flows whose jump
probabilities vanish identically (the dark state) terminate a
trajectory outright: with the strict threshold comparison a
zero-probability step can never fire.

Agreement with the direct engine is exact for the first segment and for
all jump bookkeeping, and up to the arbitrary post-jump global phase
(last-ulp differences in expectations, threshold comparisons on razor
edges) afterwards.  When flows do not recur, for instance with the full
Hamiltonian where jump images carry step-dependent dressing, the driver
falls back to direct per-trajectory integration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, NumericalInconsistencyError, TimestepError
from .mcwf import (
    DEFAULT_DT,
    JUMP_NORM_FLOOR,
    MAX_DP_PER_STEP,
    JumpEvent,
    TrajectoryRecord,
    _jump_probabilities,
    _select_channel,
    run_trajectory,
)
from .model import SystemParams
from .rng import PURPOSE_CHANNEL, PURPOSE_JUMP, uniform_words
from .system import OBSERVABLE_LABELS, DissipativeSystem, build_system

ENSEMBLE_METHODS = ("auto", "grouped", "direct")

# Give up on grouping once this many distinct flows have been seen.
FLOW_CAP = 16

# Two post-jump states count as the same flow when their overlap is this
# close to 1; exact subspace cascades give 0 deviation, full-Hamiltonian
# dressing gives O(g^2), so the gap is many orders of magnitude.
RAY_TOL = 1e-10

# Uniform words are scanned in growing chunks to amortize stream setup.
_CHUNK0, _CHUNK_MAX = 8192, 65536


@dataclass
class _Flow:
    """One no-jump flow over the full horizon, in flow-local age."""

    state0: np.ndarray
    dp: np.ndarray            # (4, n_steps) jump probabilities at age j
    dp_sum: np.ndarray        # (n_steps,)
    obs: np.ndarray           # (3, n_steps + 1) observables at age j
    image_flow: np.ndarray    # (4,) target flow id per channel, -1 if never
    image_state: list         # per channel: canonical post-jump state or None
    first_violation: int      # first age violating the dp guards, or n_steps + 1
    dark: bool = False


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    w = v[pivot]
    return v * (abs(w) / w)


def _build_flow(
    state0: np.ndarray, system: DissipativeSystem, propagator: np.ndarray,
    n_steps: int, dt: float,
) -> _Flow:
    """Propagate the normalized no-jump chain and collect per-age arrays.

    Per-step quantities are computed with the same calls as the direct
    engine, so the root flow's numbers match it bitwise.
    """
    plus_stack, rates = system.plus_stack, system.rates
    n_channels = rates.size
    dp = np.empty((n_channels, n_steps))
    obs = np.empty((3, n_steps + 1))
    refs: list[np.ndarray | None] = [None] * n_channels
    ray_ok = True
    psi = state0
    for k in range(n_steps + 1):
        dp_k, amps = _jump_probabilities(psi, dt, plus_stack, rates)
        obs[:, k] = np.einsum("md,md->m", amps[:3].conj(), amps[:3]).real
        norms = np.linalg.norm(amps, axis=1)
        if k < n_steps:
            dp[:, k] = dp_k
        for m in range(n_channels):
            if rates[m] == 0.0 or norms[m] <= JUMP_NORM_FLOOR:
                continue
            if refs[m] is None:
                refs[m] = amps[m] / norms[m]
            elif abs(abs(np.vdot(refs[m], amps[m])) - norms[m]) > RAY_TOL * norms[m]:
                ray_ok = False
        if not ray_ok or k == n_steps:
            break
        phi = propagator @ psi
        psi = phi / np.linalg.norm(phi)
    if not ray_ok:
        raise _Ungroupable()
    viol = np.flatnonzero((dp.max(axis=0) >= MAX_DP_PER_STEP) | (dp.sum(axis=0) >= 1.0))
    return _Flow(
        state0=state0,
        dp=dp,
        dp_sum=dp.sum(axis=0),
        obs=obs,
        image_flow=np.full(n_channels, -1, dtype=int),
        image_state=[None if r is None else _canonical_phase(r) for r in refs],
        first_violation=int(viol[0]) if viol.size else n_steps + 1,
        dark=bool(dp.max(initial=0.0) == 0.0),
    )


class _Ungroupable(Exception):
    """Raised internally when post-jump states do not form stable rays."""


def _discover_flows(
    psi0: np.ndarray, system: DissipativeSystem, propagator: np.ndarray,
    n_steps: int, dt: float,
) -> list[_Flow]:
    """Breadth-first closure of flows reachable from psi0 through jumps."""
    flows = [_build_flow(psi0, system, propagator, n_steps, dt)]
    pending = [0]
    while pending:
        fid = pending.pop()
        flow = flows[fid]
        for m, image in enumerate(flow.image_state):
            if image is None:
                continue
            for gid, g in enumerate(flows):
                if abs(np.vdot(g.state0, image)) > 1.0 - RAY_TOL:
                    flow.image_flow[m] = gid
                    break
            else:
                if len(flows) >= FLOW_CAP:
                    raise _Ungroupable()
                flows.append(_build_flow(image, system, propagator, n_steps, dt))
                flow.image_flow[m] = len(flows) - 1
                pending.append(len(flows) - 1)
    return flows


def _binary_powers(propagator: np.ndarray, n_steps: int) -> list[np.ndarray]:
    powers = [propagator]
    while (1 << len(powers)) <= n_steps:
        powers.append(powers[-1] @ powers[-1])
    return powers


def _state_at_age(state0: np.ndarray, powers: list[np.ndarray], age: int) -> np.ndarray:
    psi = state0
    bit = 0
    while age:
        if age & 1:
            psi = powers[bit] @ psi
        age >>= 1
        bit += 1
    return psi / np.linalg.norm(psi)


def _sample_grouped(
    traj_index: int,
    flows: list[_Flow],
    system: DissipativeSystem,
    master_seed: int,
    n_steps: int,
    dt: float,
    rec_steps: np.ndarray,
    powers: list[np.ndarray],
) -> tuple[dict, list[JumpEvent], np.ndarray]:
    """Walk one trajectory across flows; returns (expectations, jumps, final)."""
    rates = system.rates
    jumps: list[JumpEvent] = []
    segments_entry = [0]
    segments_flow = [0]
    k, fid = 0, 0
    while k < n_steps:
        flow = flows[fid]
        entry = segments_entry[-1]
        viol_step = entry + flow.first_violation
        if flow.dark:
            if viol_step < n_steps:
                raise TimestepError("per-channel jump probability exceeds guard")
            break
        hit = -1
        chunk = _CHUNK0
        j = k
        while j < n_steps:
            count = min(chunk, n_steps - j)
            u = uniform_words(master_seed, traj_index, PURPOSE_JUMP, j, count)
            cmp = flow.dp_sum[j - entry : j - entry + count] > u
            off = int(np.argmax(cmp))
            if cmp[off]:
                hit = j + off
                break
            j += count
            chunk = min(2 * chunk, _CHUNK_MAX)
        if hit < 0:
            if viol_step < n_steps:
                raise TimestepError("per-channel jump probability exceeds guard")
            break
        if viol_step <= hit:
            raise TimestepError("per-channel jump probability exceeds guard")
        age = hit - entry
        dp_col = flow.dp[:, age]
        eps_prime = uniform_words(
            master_seed, traj_index, PURPOSE_CHANNEL, len(jumps), 1
        )[0]
        m = _select_channel(dp_col, eps_prime)
        if dp_col[m] / (dt * rates[m]) < JUMP_NORM_FLOOR**2:
            raise NumericalInconsistencyError(
                f"channel {system.channels[m].label} selected with vanishing amplitude"
            )
        jumps.append(
            JumpEvent(
                time=(hit + 1) * dt,
                channel=system.channels[m].label,
                pre_jump_norm_probabilities=dp_col.copy(),
            )
        )
        fid = int(flow.image_flow[m])
        k = hit + 1
        segments_entry.append(k)
        segments_flow.append(fid)

    # Stitch observables: for each recorded step, the active segment is the
    # last one entered at or before it.
    entries = np.array(segments_entry)
    seg_of_rec = np.searchsorted(entries, rec_steps, side="right") - 1
    series = np.empty((3, rec_steps.size))
    for s, (entry, fid) in enumerate(zip(segments_entry, segments_flow)):
        sel = seg_of_rec == s
        if np.any(sel):
            series[:, sel] = flows[fid].obs[:, rec_steps[sel] - entry]
    final = _state_at_age(
        flows[segments_flow[-1]].state0, powers, n_steps - segments_entry[-1]
    )
    return dict(zip(OBSERVABLE_LABELS, series)), jumps, final


def run_ensemble(
    p: SystemParams,
    initial_state,
    t_final: float,
    n_trajectories: int,
    dt: float = DEFAULT_DT,
    master_seed: int = 0,
    hamiltonian: str = "full",
    record_every: int = 1,
    method: str = "auto",
    threads: int = 1,
    n_fock: int = 10,
    system: DissipativeSystem | None = None,
) -> list[TrajectoryRecord]:
    """Run trajectories 0..n_trajectories-1 of the seeded family.

    ``initial_state`` is a label accepted by ``DissipativeSystem.initial_state``
    or an explicit state vector.  ``method`` "auto" tries flow grouping and
    falls back to direct integration; "grouped" raises ConfigError when the
    run does not group; "direct" forces per-trajectory integration
    (parallelized over ``threads`` workers when more than one).
    """
    if method not in ENSEMBLE_METHODS:
        raise ConfigError(f"method must be one of {ENSEMBLE_METHODS}")
    if n_trajectories < 1:
        raise ConfigError("n_trajectories must be >= 1")
    if system is None:
        system = build_system(p, n_fock=n_fock, hamiltonian=hamiltonian)
    psi0 = (
        system.initial_state(initial_state)
        if isinstance(initial_state, str)
        else np.asarray(initial_state, dtype=complex)
    )

    flows = None
    if method in ("auto", "grouped"):
        propagator = expm(-1j * system.h_nh * dt)
        n_steps = int(round(t_final / dt))
        try:
            flows = _discover_flows(psi0, system, propagator, n_steps, dt)
        except _Ungroupable:
            if method == "grouped":
                raise ConfigError(
                    "post-jump states do not recur; grouped ensembles need "
                    "stable jump images (try the effective Hamiltonian)"
                ) from None

    if flows is None:
        def one(i: int) -> TrajectoryRecord:
            return run_trajectory(
                p, psi0, t_final, dt=dt, seed=master_seed, traj_index=i,
                record_every=record_every, system=system,
            )
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, range(n_trajectories)))
        return [one(i) for i in range(n_trajectories)]

    rec_steps = np.arange(0, n_steps + 1, record_every)
    time_grid = rec_steps * dt
    powers = _binary_powers(propagator, n_steps)
    records = []
    for i in range(n_trajectories):
        expectations, jumps, final = _sample_grouped(
            i, flows, system, master_seed, n_steps, dt, rec_steps, powers
        )
        records.append(
            TrajectoryRecord(
                params=p,
                seed=master_seed,
                traj_index=i,
                time_grid=time_grid,
                expectations=expectations,
                jumps=jumps,
                final_state=final,
            )
        )
    return records
