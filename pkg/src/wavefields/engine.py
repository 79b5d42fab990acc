"""Simulation engine for interacting indexed wave-fields.

Each quantum system is one wave-field: a set of spatial packets, one
per index branch, plus the record of interactions that produced those
branches.  Packets hold raw coefficient-weighted amplitude, so the
squared norm of a packet's field integrates to the branch probability
once the branch is fully formed.

Interactions either complete instantly (the index spaces re-expand in
place) or run as a crossing: the two fluids pass through a moving
boundary and are re-indexed cell by cell through transfer matrices.
Everything a system knows travels with it; a meet touches only the two
participants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boundary as boundary_mod
from . import memory as memory_mod
from .hilbert import COEFFICIENT_THRESHOLD, Operator
from .memory import ExternalMemory, IndexLabel, InternalMemory
from .spatial import Grid, Propagator, current

NORM_AUDIT_TOL = 1e-8
COMPLETION_THRESHOLD = 1e-10
DARK_MASS_THRESHOLD = 1e-16

PRE = "pre"
POST = "post"


@dataclass
class Packet:
    """One index branch of a wave-field.

    ``field`` is the raw amplitude: branch coefficient times the branch
    wavefunction.  ``coefficient`` tracks the algebraic value from the
    transfer matrices; while a crossing is in flight the field holds
    only the part that has crossed, and the two agree again once the
    crossing completes.  ``region`` is None at rest, otherwise which
    side of an active boundary the branch feeds.
    """

    index: IndexLabel
    coefficient: complex
    field: np.ndarray
    region: str | None = None

    def mass(self, grid: Grid) -> float:
        return float(np.sum(np.abs(self.field) ** 2) * grid.dx)

    def fluid_norm(self, grid: Grid) -> float:
        return float(np.sqrt(self.mass(grid)))


@dataclass
class WaveField:
    system: str
    packets: list[Packet]
    memory: InternalMemory

    def at_rest(self) -> bool:
        return all(p.region is None for p in self.packets)


@dataclass
class ScenarioState:
    """Mutable world state: wave-fields, boundaries, and shared grid."""

    grid: Grid
    time: float = 0.0
    step_count: int = 0
    wavefields: dict[str, WaveField] = field(default_factory=dict)
    links: list[boundary_mod.BoundaryLink] = field(default_factory=list)
    potentials: dict[str, np.ndarray] = field(default_factory=dict)
    index_bases: dict[str, Operator] = field(default_factory=dict)
    _propagators: dict[str, Propagator] = field(default_factory=dict, repr=False)

    def active_links(self) -> list[boundary_mod.BoundaryLink]:
        return [ln for ln in self.links if ln.active]

    def propagator(self, system: str) -> Propagator:
        if system not in self._propagators:
            self._propagators[system] = Propagator(
                self.grid, self.potentials.get(system)
            )
        return self._propagators[system]


def new_state(grid: Grid) -> ScenarioState:
    return ScenarioState(grid)


def set_potential(state: ScenarioState, system: str, potential) -> None:
    state.potentials[system] = np.asarray(potential, dtype=float)
    state._propagators.pop(system, None)


def add_system(state: ScenarioState, system: str, amplitudes, shape) -> WaveField:
    """Create a wave-field with one packet per nonzero index amplitude.

    ``amplitudes`` is the internal state in the computational basis and
    ``shape`` the shared unit-norm wavefunction.  If the scenario uses a
    different index basis for this system, the branches are labeled in
    that basis.
    """
    if system in state.wavefields:
        raise ValueError(f"system {system!r} already exists")
    shape = np.asarray(shape, dtype=np.complex128)
    mass = float(np.sum(np.abs(shape) ** 2) * state.grid.dx)
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"packet shape has squared norm {mass!r}, expected 1")
    amps = np.asarray(amplitudes, dtype=np.complex128)
    if abs(np.linalg.norm(amps) - 1.0) > 1e-6:
        raise ValueError("index amplitudes are not normalized")
    basis = state.index_bases.get(system)
    coeffs = amps if basis is None else basis.matrix.conj().T @ amps
    packets = [
        Packet(IndexLabel(int(i), ()), complex(c), complex(c) * shape)
        for i, c in enumerate(coeffs)
        if abs(c) > COEFFICIENT_THRESHOLD
    ]
    wf = WaveField(system, packets, memory_mod.fresh_memory(system, amps))
    state.wavefields[system] = wf
    return wf


def _packet_lookup(wf: WaveField, region: str | None) -> dict[IndexLabel, Packet]:
    out: dict[IndexLabel, Packet] = {}
    for p in wf.packets:
        if p.region == region:
            if p.index in out:
                raise RuntimeError(
                    f"duplicate branch {p.index.text()!r} on system {wf.system!r}"
                )
            out[p.index] = p
    return out


def _require_at_rest(state: ScenarioState, system: str) -> None:
    for ln in state.active_links():
        if system in (ln.left_system, ln.right_system):
            raise ValueError(f"system {system!r} is mid-crossing")


def _centroid(wf: WaveField, grid: Grid) -> float:
    rho = aggregate_density(wf)
    total = float(rho.sum())
    if total <= 0.0:
        raise ValueError(f"system {wf.system!r} has no fluid")
    return float(np.dot(grid.x, rho) / total)


def aggregate_density(wf: WaveField, region: str | None = "any") -> np.ndarray:
    rho = None
    for p in wf.packets:
        if region != "any" and p.region != region:
            continue
        d = np.abs(p.field) ** 2
        rho = d if rho is None else rho + d
    if rho is None:
        raise ValueError(f"system {wf.system!r} has no packets in region {region!r}")
    return rho


def aggregate_current(wf: WaveField, grid: Grid) -> np.ndarray:
    j = np.zeros(grid.n)
    for p in wf.packets:
        j += current(p.field, grid)
    return j


def total_mass(state: ScenarioState, system: str) -> float:
    return sum(p.mass(state.grid) for p in state.wavefields[system].packets)


def _expand_instant(wf: WaveField, transfer: boundary_mod.TransferMatrix, grid: Grid):
    packets = _packet_lookup(wf, None)
    unknown = set(packets) - set(transfer.in_labels)
    if unknown:
        raise RuntimeError(f"branches {unknown} missing from the transfer matrix")
    n = grid.n
    raw = np.zeros((len(transfer.in_labels), n), dtype=np.complex128)
    coeff = np.zeros(len(transfer.in_labels), dtype=np.complex128)
    for row, label in enumerate(transfer.in_labels):
        p = packets.get(label)
        if p is not None:
            raw[row] = p.field
            coeff[row] = p.coefficient
    raw_out = transfer.matrix @ raw
    coeff_out = transfer.matrix @ coeff
    out = []
    for row, label in enumerate(transfer.out_labels):
        c = complex(coeff_out[row])
        mass = float(np.sum(np.abs(raw_out[row]) ** 2) * grid.dx)
        if abs(c) <= COEFFICIENT_THRESHOLD and mass <= DARK_MASS_THRESHOLD:
            continue
        out.append(Packet(label, c, raw_out[row]))
    wf.packets = out


def _open_crossing(
    state: ScenarioState,
    left: WaveField,
    right: WaveField,
    unitary: Operator,
    op_id: str,
    t_left: boundary_mod.TransferMatrix,
    t_right: boundary_mod.TransferMatrix,
) -> boundary_mod.BoundaryLink:
    grid = state.grid
    if _centroid(left, grid) >= _centroid(right, grid):
        raise ValueError(
            f"crossing expects {left.system!r} to start left of {right.system!r}"
        )
    rho_left = aggregate_density(left)
    rho_right = aggregate_density(right)
    x12 = boundary_mod.find_initial_boundary(rho_left, rho_right, grid)
    for wf, transfer in ((left, t_left), (right, t_right)):
        packets = _packet_lookup(wf, None)
        unknown = set(packets) - set(transfer.in_labels)
        if unknown:
            raise RuntimeError(f"branches {unknown} missing from the transfer matrix")
        coeff = np.array(
            [
                packets[l].coefficient if l in packets else 0.0
                for l in transfer.in_labels
            ],
            dtype=np.complex128,
        )
        coeff_out = transfer.matrix @ coeff
        for label in transfer.in_labels:
            if label in packets:
                packets[label].region = PRE
            else:
                wf.packets.append(
                    Packet(label, 0.0, np.zeros(grid.n, np.complex128), PRE)
                )
        for row, label in enumerate(transfer.out_labels):
            wf.packets.append(
                Packet(
                    label,
                    complex(coeff_out[row]),
                    np.zeros(grid.n, np.complex128),
                    POST,
                )
            )
    link = boundary_mod.BoundaryLink(
        left.system, right.system, unitary, x12, t_left, t_right, op_id
    )
    cum_l = boundary_mod._cumulative(rho_left, grid)
    cum_r = boundary_mod._cumulative(rho_right, grid)
    link.crossed_left = float(cum_l[-1] - np.interp(x12, grid.x, cum_l))
    link.crossed_right = float(np.interp(x12, grid.x, cum_r))
    link.record(state.time)
    state.links.append(link)
    return link


def meet(
    state: ScenarioState,
    a: str,
    b: str | None,
    unitary: Operator,
    op_id: str,
    mode: str = "instant",
) -> boundary_mod.BoundaryLink | None:
    """Interact two systems (or one with a local gate).

    ``instant`` re-expands the participants' branches in place, for
    interactions whose spatial development is not being studied.
    ``crossing`` opens a moving boundary between the two fluids; the
    re-indexing then happens cell by cell as they pass through it
    during subsequent steps.  Only the participants are touched.
    """
    if mode not in ("instant", "crossing"):
        raise ValueError(f"unknown meet mode {mode!r}")
    _require_at_rest(state, a)
    participants = (a,) if b is None else (a, b)
    if b is not None:
        if b == a:
            raise ValueError("a system cannot meet itself")
        _require_at_rest(state, b)
    for s in participants:
        if s not in state.wavefields:
            raise ValueError(f"unknown system {s!r}")
    fields = tuple(state.wavefields[s] for s in participants)
    transfers = boundary_mod.transfer_matrices_synced(
        tuple(wf.memory for wf in fields),
        unitary,
        participants,
        index_bases=state.index_bases or None,
    )
    merged = memory_mod.record_interaction(
        fields[0].memory,
        fields[1].memory if b is not None else None,
        unitary,
        op_id,
    )
    for wf in fields:
        wf.memory = merged

    if mode == "instant":
        for wf, transfer in zip(fields, transfers):
            _expand_instant(wf, transfer, state.grid)
        return None
    if b is None:
        raise ValueError("a crossing needs two systems")
    return _open_crossing(state, fields[0], fields[1], unitary, op_id, *transfers)


def _link_stacks(wf: WaveField, transfer: boundary_mod.TransferMatrix, grid: Grid):
    pre = _packet_lookup(wf, PRE)
    post = _packet_lookup(wf, POST)
    pre_rows = [pre[l] for l in transfer.in_labels]
    post_rows = [post[l] for l in transfer.out_labels]
    pre_stack = np.stack([p.field for p in pre_rows])
    post_stack = np.stack([p.field for p in post_rows])
    return pre_rows, post_rows, pre_stack, post_stack


def _step_link(state: ScenarioState, link: boundary_mod.BoundaryLink) -> None:
    grid = state.grid
    left = state.wavefields[link.left_system]
    right = state.wavefields[link.right_system]

    # The boundary law needs each branch as one coherent wave.  The
    # pre/post split is bookkeeping with a sharp cut, and spectral
    # currents of the cut halves ring at the cut, so undo the split
    # (post rows stay in the transfer's range) before measuring flux.
    stacks = {}
    rho = {}
    flux = {}
    for key, wf, transfer in (("L", left, link.t_left), ("R", right, link.t_right)):
        rows_and_stacks = _link_stacks(wf, transfer, grid)
        stacks[key] = rows_and_stacks
        pre_stack, post_stack = rows_and_stacks[2], rows_and_stacks[3]
        joined = pre_stack + transfer.matrix.conj().T @ post_stack
        rho[key] = np.sum(np.abs(joined) ** 2, axis=0)
        flux[key] = sum(current(row, grid) for row in joined)
    link.x12 = boundary_mod.step_boundary_fields(
        link.x12, rho["L"], flux["L"], rho["R"], flux["R"], grid
    )

    post_side_left = grid.x > link.x12
    for key, wf, transfer, post_side in (
        ("L", left, link.t_left, post_side_left),
        ("R", right, link.t_right, ~post_side_left),
    ):
        pre_rows, post_rows, pre_stack, post_stack = stacks[key]
        boundary_mod.apply_boundary_transfer(
            pre_stack, post_stack, transfer.matrix, post_side
        )
        for p, row in zip(pre_rows, pre_stack):
            p.field = row
        for p, row in zip(post_rows, post_stack):
            p.field = row

    # Crossed fluid is the coherent mass past the boundary, not the
    # cell-granular packet split: the boundary law keeps these two
    # integrals equal, while whole-cell bookkeeping is off by up to
    # one cell of bulk density.
    cum_l = boundary_mod._cumulative(rho["L"], grid)
    cum_r = boundary_mod._cumulative(rho["R"], grid)
    link.crossed_left = float(cum_l[-1] - np.interp(link.x12, grid.x, cum_l))
    link.crossed_right = float(np.interp(link.x12, grid.x, cum_r))
    link.record(state.time + grid.dt)

    pre_left = sum(p.mass(grid) for p in left.packets if p.region == PRE)
    pre_right = sum(p.mass(grid) for p in right.packets if p.region == PRE)
    if pre_left < COMPLETION_THRESHOLD and pre_right < COMPLETION_THRESHOLD:
        _complete_link(state, link)


def _complete_link(state: ScenarioState, link: boundary_mod.BoundaryLink) -> None:
    grid = state.grid
    for sys_id in (link.left_system, link.right_system):
        wf = state.wavefields[sys_id]
        kept = []
        for p in wf.packets:
            if p.region == PRE:
                continue
            if p.region == POST:
                p.region = None
                if (
                    abs(p.coefficient) <= COEFFICIENT_THRESHOLD
                    and p.mass(grid) <= DARK_MASS_THRESHOLD
                ):
                    continue
            kept.append(p)
        wf.packets = kept
    link.active = False


def advance(state: ScenarioState, steps: int = 1) -> ScenarioState:
    """Run the world forward, evolving packets and moving boundaries."""
    grid = state.grid
    for _ in range(steps):
        for wf in state.wavefields.values():
            prop = state.propagator(wf.system)
            for p in wf.packets:
                p.field = prop.step(p.field)
        for link in state.active_links():
            _step_link(state, link)
        state.time += grid.dt
        state.step_count += 1
        for sys_id in state.wavefields:
            m = total_mass(state, sys_id)
            if abs(m - 1.0) > NORM_AUDIT_TOL:
                raise RuntimeError(
                    f"norm audit failed for {sys_id!r} at t={state.time:.6g}: "
                    f"total mass {m!r}"
                )
    return state


def index_distribution(state: ScenarioState, system: str) -> dict[int, float]:
    """Probability of each own index, by fluid mass."""
    wf = state.wavefields[system]
    out: dict[int, float] = {}
    total = 0.0
    for p in wf.packets:
        m = p.mass(state.grid)
        out[p.index.own] = out.get(p.index.own, 0.0) + m
        total += m
    return {k: v / total for k, v in sorted(out.items())}


def correlation_table(
    state: ScenarioState, a: str, b: str
) -> dict[tuple[int, int], float]:
    """Joint index probabilities of two systems that have met.

    Read from system ``a``'s branches: its own index against the
    partner label it carries for ``b``.  Requires both systems at rest
    and sharing the interaction record.
    """
    _require_at_rest(state, a)
    _require_at_rest(state, b)
    wf = state.wavefields[a]
    if b not in memory_mod.systems(wf.memory):
        raise ValueError(f"systems {a!r} and {b!r} have not met")
    out: dict[tuple[int, int], float] = {}
    total = 0.0
    for p in wf.packets:
        partners = p.index.partner_map()
        if b not in partners:
            raise ValueError(
                f"branch {p.index.text()!r} of {a!r} carries no label for {b!r}"
            )
        key = (p.index.own, partners[b])
        m = p.mass(state.grid)
        out[key] = out.get(key, 0.0) + m
        total += m
    return {k: v / total for k, v in sorted(out.items())}


def validate_against_memory(
    state: ScenarioState, system: str, atol: float = 1e-8
) -> float:
    """Dual-route check: packets versus the memory-derived expansion.

    Compares each at-rest branch coefficient, and the fluid norm of its
    field, against the external-memory entry derived from the system's
    interaction record through the reference tensor-product route.
    Returns the largest deviation found; raises if a branch or entry
    has no counterpart.
    """
    wf = state.wavefields[system]
    _require_at_rest(state, system)
    entries = memory_mod.external_memories(
        wf.memory, system, bases=state.index_bases or None
    )
    expected: dict[IndexLabel, ExternalMemory] = {e.index: e for e in entries}
    packets = _packet_lookup(wf, None)
    worst = 0.0
    for label, entry in expected.items():
        p = packets.pop(label, None)
        if p is None:
            raise AssertionError(
                f"memory of {system!r} expects branch {label.text()!r}, "
                "but the wave-field has none"
            )
        worst = max(worst, abs(p.coefficient - entry.coefficient))
        worst = max(worst, abs(p.fluid_norm(state.grid) - abs(entry.coefficient)))
    for label, p in packets.items():
        leftover = max(abs(p.coefficient), p.fluid_norm(state.grid))
        if leftover > atol:
            raise AssertionError(
                f"wave-field {system!r} carries branch {label.text()!r} "
                f"with weight {leftover!r} that its memory does not predict"
            )
    if worst > atol:
        raise AssertionError(
            f"wave-field {system!r} deviates from its memory route by {worst!r}"
        )
    return worst
