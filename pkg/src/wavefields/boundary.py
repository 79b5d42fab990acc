"""Dynamic boundaries between interacting wave-fields.

Two systems meeting head-on share a moving interface: fluid of each
system that crosses it is re-indexed from pre-interaction packets into
post-interaction packets through a transfer matrix built from the
interaction unitary and the partner's state.  The interface starts
where the systems' cumulative masses balance and moves with the common
fluid velocity, which keeps the crossed flux equal and opposite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert, memory
from .hilbert import Ket, Operator
from .memory import IndexLabel, InternalMemory
from .spatial import Grid, current

ISOMETRY_TOL = 1e-12


def _cumulative(rho: np.ndarray, grid: Grid) -> np.ndarray:
    """Trapezoid cumulative mass at each grid point, starting at 0."""
    inner = 0.5 * (rho[:-1] + rho[1:]) * grid.dx
    return np.concatenate([[0.0], np.cumsum(inner)])


def find_initial_boundary(
    rho_left: np.ndarray,
    rho_right: np.ndarray,
    grid: Grid,
    mass_tol: float = 1e-10,
) -> float:
    """Position where left mass below equals right mass above.

    The difference F(x) = int_{-inf}^{x} rho_left - int_{x}^{inf}
    rho_right is nondecreasing, so bisection on its piecewise linear
    interpolant converges.  Between well-separated densities the
    balance is degenerate (|F| < mass_tol over a whole band), in which
    case the center of the band is returned; that choice is what keeps
    a symmetric collision's interface on the symmetry point instead of
    seeding it a fraction of a cell off.
    """
    rho_left = np.asarray(rho_left, float)
    rho_right = np.asarray(rho_right, float)
    cum_left = _cumulative(rho_left, grid)
    cum_right = _cumulative(rho_right, grid)
    total_right = cum_right[-1]

    def f(x: float) -> float:
        below = float(np.interp(x, grid.x, cum_left))
        above = total_right - float(np.interp(x, grid.x, cum_right))
        return below - above

    lo0, hi0 = float(grid.x[0]), float(grid.x[-1])
    if f(lo0) > mass_tol or f(hi0) < -mass_tol:
        raise ValueError("densities do not bracket an equal-mass point")

    def edge(crosses) -> float:
        lo, hi = lo0, hi0
        while hi - lo > 1e-11:
            mid = 0.5 * (lo + hi)
            if crosses(f(mid)):
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    left_edge = edge(lambda v: v > -mass_tol)
    right_edge = edge(lambda v: v >= mass_tol)
    return 0.5 * (left_edge + right_edge)


def step_boundary_fields(
    x12: float,
    rho_left: np.ndarray,
    j_left: np.ndarray,
    rho_right: np.ndarray,
    j_right: np.ndarray,
    grid: Grid,
    density_floor: float = 1e-8,
) -> float:
    """Advance the interface by dt with the common fluid velocity.

    dx12/dt = (j_left + j_right) / (rho_left + rho_right), midpoint RK2
    on linearly interpolated fields.  Where the combined density is
    below the floor (relative to its peak) the interface holds still:
    at that level the current carries no usable velocity signal, only
    ringing from the hard truncation of the fields at the interface.
    """
    rho = rho_left + rho_right
    j = j_left + j_right
    floor = density_floor * max(float(rho.max()), 1e-300)

    def velocity(x: float) -> float:
        d = float(np.interp(x, grid.x, rho))
        if d <= floor:
            return 0.0
        return float(np.interp(x, grid.x, j)) / d

    k1 = velocity(x12)
    mid = x12 + 0.5 * grid.dt * k1
    out = x12 + grid.dt * velocity(mid)
    return float(min(max(out, grid.x[0]), grid.x[-1]))


def step_boundary(x12: float, psi_left, psi_right, grid: Grid) -> float:
    """Interface update computed from two wavefunctions."""
    return step_boundary_fields(
        x12,
        np.abs(psi_left) ** 2,
        current(psi_left, grid),
        np.abs(psi_right) ** 2,
        current(psi_right, grid),
        grid,
    )


def transfer_matrices(
    unitary: Operator, state_left: Ket, state_right: Ket
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary-condition matrices of a two-system interaction.

    Rows run over the joint product basis (left index major); columns
    over the crossing system's own basis.  Each matrix is the unitary
    contracted with the other system's current state, so both are
    isometries.
    """
    if len(unitary.labels) != 2:
        raise ValueError("transfer matrices need a two-system unitary")
    dl, dr = unitary.dims
    if state_left.dims != (dl,) or state_right.dims != (dr,):
        raise ValueError("partner state dimensions do not match the unitary")
    u4 = unitary.matrix.reshape(dl, dr, dl, dr)
    t_left = np.einsum("ijkl,l->ijk", u4, state_right.amplitudes).reshape(dl * dr, dl)
    t_right = np.einsum("ijkl,k->ijl", u4, state_left.amplitudes).reshape(dl * dr, dr)
    return t_left, t_right


def is_isometry(t: np.ndarray, tol: float = ISOMETRY_TOL) -> bool:
    gram = t.conj().T @ t
    return bool(np.allclose(gram, np.eye(t.shape[1]), atol=tol))


@dataclass
class TransferMatrix:
    """Isometry from one system's pre-interaction branches to post ones."""

    system: str
    matrix: np.ndarray
    in_labels: list[IndexLabel]
    out_labels: list[IndexLabel]

    def __post_init__(self):
        n_out, n_in = self.matrix.shape
        if len(self.in_labels) != n_in or len(self.out_labels) != n_out:
            raise ValueError("label lists do not match matrix shape")
        if not is_isometry(self.matrix):
            raise ValueError(f"transfer matrix for {self.system!r} is not an isometry")


def _product_labels(viewpoint: str, order: list[str], dims: list[int]):
    labels = []
    for flat in range(math.prod(dims)):
        idx = np.unravel_index(flat, dims)
        assignment = dict(zip(order, (int(i) for i in idx)))
        own = assignment.pop(viewpoint)
        labels.append(IndexLabel(own, tuple(sorted(assignment.items()))))
    return labels


def _basis_rotation(order, dims, bases) -> np.ndarray:
    mats = []
    for sys_id, d in zip(order, dims):
        b = bases.get(sys_id) if bases else None
        if b is None:
            mats.append(np.eye(d))
        else:
            if b.dims != (d,):
                raise ValueError(f"index basis for {sys_id!r} has wrong dimension")
            if not b.is_unitary(tol=1e-12):
                raise ValueError(f"index basis for {sys_id!r} is not unitary")
            mats.append(b.matrix)
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def _synced_transfer(
    own: InternalMemory,
    merged: InternalMemory,
    unitary: Operator,
    system: str,
    index_bases=None,
) -> TransferMatrix:
    pre_order = memory.systems(own)
    post_order = memory.systems(merged)
    pre_dims = [own.initial_states[s].dims[0] for s in pre_order]
    post_dims = [merged.initial_states[s].dims[0] for s in post_order]
    new_systems = [s for s in post_order if s not in pre_order]
    missing = [
        op_id for op_id in memory.linearize(merged) if op_id not in own.ops
    ]

    n_in = math.prod(pre_dims)
    n_out = math.prod(post_dims)
    t = np.zeros((n_out, n_in), dtype=np.complex128)
    for col in range(n_in):
        idx = np.unravel_index(col, pre_dims)
        ket = None
        for sys_id, i in zip(pre_order, idx):
            factor = hilbert.basis_ket(sys_id, int(i), own.initial_states[sys_id].dims[0])
            ket = factor if ket is None else hilbert.tensor(ket, factor)
        for sys_id in new_systems:
            ket = hilbert.tensor(ket, merged.initial_states[sys_id])
        for op_id in missing:
            op = merged.ops[op_id]
            ket = hilbert.apply(op.unitary, ket, op.participants)
        ket = hilbert.apply(unitary, ket)
        t[:, col] = hilbert.permute_systems(ket, post_order).amplitudes

    if index_bases:
        r_in = _basis_rotation(pre_order, pre_dims, index_bases)
        r_out = _basis_rotation(post_order, post_dims, index_bases)
        t = r_out.conj().T @ t @ r_in

    return TransferMatrix(
        system,
        t,
        _product_labels(system, pre_order, pre_dims),
        _product_labels(system, post_order, post_dims),
    )


def transfer_matrices_synced(
    mem_pair: tuple[InternalMemory, InternalMemory],
    unitary: Operator,
    acting: tuple[str, ...],
    index_bases=None,
) -> tuple[TransferMatrix, ...]:
    """Transfer matrices of an interaction between systems with history.

    ``mem_pair`` holds each acting system's memory as of the moment of
    the interaction.  The matrices fold in the synchronization step:
    branches of the partner's history unknown to a system are expanded
    first (tensoring initial states of newly met systems and applying
    the records it lacks), then the new unitary.  The in-branch space is
    the system's own pre-interaction index space, the out-branch space
    the merged one.
    """
    if len(acting) not in (1, 2) or len(mem_pair) != len(acting):
        raise ValueError("acting systems and memories must pair up, 1 or 2 each")
    if tuple(unitary.labels) != tuple(acting):
        raise ValueError(
            f"unitary acts on {unitary.labels}, expected {tuple(acting)}"
        )
    merged = mem_pair[0]
    for other in mem_pair[1:]:
        merged = memory.synchronize(merged, other)
    for sys_id in acting:
        if sys_id not in merged.initial_states:
            raise ValueError(f"acting system {sys_id!r} unknown to the memories")
    return tuple(
        _synced_transfer(own, merged, unitary, sys_id, index_bases)
        for own, sys_id in zip(mem_pair, acting)
    )


def apply_boundary_transfer(
    pre: np.ndarray, post: np.ndarray, transfer: np.ndarray, post_side: np.ndarray
) -> None:
    """Re-index raw packet amplitude across a hard boundary, in place.

    ``pre`` is (n_in, cells) and ``post`` (n_out, cells) of raw
    coefficient-weighted fields.  On post-side cells, pre amplitude
    moves forward through the transfer matrix; on the remaining cells,
    post amplitude moves back through its adjoint.  Both directions are
    norm-preserving as long as post amplitude stays in the matrix's
    range, which free evolution shared by all branches guarantees.
    """
    if np.any(post_side):
        post[:, post_side] += transfer @ pre[:, post_side]
        pre[:, post_side] = 0.0
    pre_side = ~post_side
    if np.any(pre_side):
        pre[:, pre_side] += transfer.conj().T @ post[:, pre_side]
        post[:, pre_side] = 0.0


@dataclass
class BoundaryLink:
    """Live interface between two wave-fields mid-interaction.

    ``crossed_left`` and ``crossed_right`` track the coherent fluid
    mass of each system already past the boundary; by construction of
    the boundary velocity the two stay equal while the link runs.
    """

    left_system: str
    right_system: str
    unitary: Operator
    x12: float
    t_left: TransferMatrix
    t_right: TransferMatrix
    op_id: str
    active: bool = True
    crossed_left: float = 0.0
    crossed_right: float = 0.0
    trajectory: list[tuple[float, float, float, float]] = field(default_factory=list)

    def record(self, t: float) -> None:
        self.trajectory.append((t, self.x12, self.crossed_left, self.crossed_right))
