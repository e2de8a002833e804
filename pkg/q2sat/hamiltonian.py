"""
Projector Hamiltonian H0 = Delta * sum_j Pi_j, its spin-operator form, and the
rotated family H(t) = R(t) H0 R(t)^dagger.

|0> is spin up (s^z = +1/2) and s^+ = |0><1|; qubit q is bit q of the basis
index. Matrices are CSR with sorted column indices.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from errors import DimensionError, ParameterError
from instance import ClauseParams, Q2SATInstance

logger = logging.getLogger(__name__)

# -------------------------------------------------------------------
# Single-qubit operators
# -------------------------------------------------------------------

SX = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
SY = np.array([[0, -0.5j], [0.5j, 0]], dtype=complex)
SZ = np.array([[0.5, 0], [0, -0.5]], dtype=complex)
SPLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SMINUS = SPLUS.T.copy()
IDENTITY = np.eye(2, dtype=complex)

Y_AXIS = (0.0, 1.0, 0.0)


@dataclass(frozen=True)
class SparseHamiltonian:
    n: int
    matrix: sp.csr_matrix
    sector_map: np.ndarray
    conserves_sz: bool = True
    norm_bound: Optional[float] = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def spectral_bound(self) -> float:
        """Upper bound on ||H||: the stored bound, else the max absolute row sum."""
        if self.norm_bound is not None:
            return self.norm_bound
        if self.matrix.nnz == 0:
            return 0.0
        return float(abs(self.matrix).sum(axis=1).max())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


class RotationSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    total_time: float
    axis: Tuple[float, float, float] = Y_AXIS
    direction: int = 1

    @field_validator("total_time")
    @classmethod
    def _check_time(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"total time T must be positive, got {value!r}")
        return value

    @field_validator("direction")
    @classmethod
    def _check_direction(cls, value: int) -> int:
        if value not in (1, -1):
            raise ValueError(f"direction must be +1 or -1, got {value!r}")
        return value

    @model_validator(mode="after")
    def _check_axis(self):
        norm = math.sqrt(sum(c * c for c in self.axis))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, |axis| = {norm!r}")
        return self

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.total_time

    def angle(self, t: float) -> float:
        return self.direction * self.omega * t


def unit_axis(v: Sequence[float]) -> Tuple[float, float, float]:
    arr = np.asarray(v, dtype=float)
    norm = np.linalg.norm(arr)
    if arr.shape != (3,) or norm == 0:
        raise ParameterError(f"axis must be a non-zero 3-vector, got {v!r}")
    arr = arr / norm
    return float(arr[0]), float(arr[1]), float(arr[2])


def make_schedule(total_time: float, axis: Sequence[float] = Y_AXIS, direction: int = 1) -> RotationSchedule:
    try:
        return RotationSchedule(total_time=total_time, axis=unit_axis(axis), direction=direction)
    except ValueError as e:
        raise ParameterError(str(e)) from e


# -------------------------------------------------------------------
# Assembly helpers
# -------------------------------------------------------------------


def sector_map_for(n: int) -> np.ndarray:
    """Number of 1-bits of every basis index."""
    idx = np.arange(1 << n, dtype=np.int64)
    counts = np.zeros(1 << n, dtype=np.int64)
    for q in range(n):
        counts += (idx >> q) & 1
    return counts


def _finalize(n: int, matrix, conserves_sz: bool = True, norm_bound: Optional[float] = None) -> SparseHamiltonian:
    csr = sp.csr_matrix(matrix, shape=(1 << n, 1 << n), dtype=complex)
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseHamiltonian(n=n, matrix=csr, sector_map=sector_map_for(n),
                             conserves_sz=conserves_sz, norm_bound=norm_bound)


def _projector_triplets(clause: ClauseParams, a: int, b: int, n: int):
    idx = np.arange(1 << n, dtype=np.int64)
    # |1_a 0_b> basis states and their |0_a 1_b> partners
    ten = idx[(((idx >> a) & 1) == 1) & (((idx >> b) & 1) == 0)]
    one = ten ^ (1 << a) ^ (1 << b)
    alpha, beta = clause.alpha, clause.beta
    off = alpha * np.conj(beta)
    rows = np.concatenate([ten, one, ten, one])
    cols = np.concatenate([ten, one, one, ten])
    data = np.concatenate([
        np.full(ten.size, alpha * alpha, dtype=complex),
        np.full(ten.size, abs(beta) ** 2, dtype=complex),
        np.full(ten.size, off, dtype=complex),
        np.full(ten.size, np.conj(off), dtype=complex),
    ])
    return rows, cols, data


def build_projector(clause: ClauseParams, a: int, b: int, n: int) -> SparseHamiltonian:
    """Pi = |Phi><Phi| on qubits (a, b), identity elsewhere."""
    if a == b:
        raise ParameterError(f"projector needs two distinct qubits, got a = b = {a}")
    if not (0 <= a < n and 0 <= b < n):
        raise ParameterError(f"qubits ({a}, {b}) out of range for n = {n}")
    rows, cols, data = _projector_triplets(clause, a, b, n)
    dim = 1 << n
    return _finalize(n, sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)), norm_bound=1.0)


def build_h0_from_bonds(n: int, bonds: Iterable[Tuple[int, int]], clause: ClauseParams) -> SparseHamiltonian:
    """Delta * sum of projectors over oriented bonds (a, b); a may exceed b."""
    bonds = list(bonds)
    dim = 1 << n
    if not bonds:
        return _finalize(n, sp.csr_matrix((dim, dim), dtype=complex), norm_bound=0.0)
    parts = []
    for a, b in bonds:
        if a == b:
            raise ParameterError(f"bond ({a}, {b}) is a self-loop")
        parts.append(_projector_triplets(clause, a, b, n))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    data = np.concatenate([p[2] for p in parts]) * clause.delta
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
    return _finalize(n, matrix, norm_bound=len(bonds) * clause.delta)


def build_h0(inst: Q2SATInstance) -> SparseHamiltonian:
    """Projector form: solutions have energy exactly 0."""
    h0 = build_h0_from_bonds(inst.n, inst.edges, inst.clause)
    logger.debug(f"Built H0 for {inst.digest()}: dim={h0.dimension}, nnz={h0.matrix.nnz}")
    return h0


# -------------------------------------------------------------------
# Spin-operator form
# -------------------------------------------------------------------


class SpinFormCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    zz: float
    field: float
    xy: float
    dm: float
    constant: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.zz, self.field, self.xy, self.dm


def spin_form_coefficients(clause: ClauseParams) -> SpinFormCoefficients:
    """
    Per-clause coefficients of s^z s^z, (s^z_a - s^z_b), (s^x s^x + s^y s^y)
    and (s^x_a s^y_b - s^y_a s^x_b); `constant` is the dropped Delta/4.
    """
    d = clause.delta
    b2 = abs(clause.beta) ** 2
    return SpinFormCoefficients(
        zz=-d,
        field=-(d / 2) * (1 - 2 * b2),
        xy=2 * d * clause.beta.real * clause.alpha,
        dm=2 * d * clause.beta.imag * clause.alpha,
        constant=d / 4,
    )


def site_operator(op: np.ndarray, q: int, n: int) -> sp.csr_matrix:
    """`op` on qubit q (bit q, so the rightmost Kronecker factor is qubit 0)."""
    left = sp.identity(1 << (n - 1 - q), dtype=complex, format="csr")
    right = sp.identity(1 << q, dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def spin_form_h0(inst: Q2SATInstance) -> SparseHamiltonian:
    """H0 assembled from the spin-operator expansion, constant dropped."""
    n = inst.n
    c = spin_form_coefficients(inst.clause)
    dim = 1 << n
    total = sp.csr_matrix((dim, dim), dtype=complex)
    x = [site_operator(SX, q, n) for q in range(n)]
    y = [site_operator(SY, q, n) for q in range(n)]
    z = [site_operator(SZ, q, n) for q in range(n)]
    for a, b in inst.edges:
        total = total + c.zz * (z[a] @ z[b]) + c.field * (z[a] - z[b])
        total = total + c.xy * (x[a] @ x[b] + y[a] @ y[b]) + c.dm * (x[a] @ y[b] - y[a] @ x[b])
    return _finalize(n, total)


def total_spin(n: int, axis: Sequence[float] = Y_AXIS) -> sp.csr_matrix:
    """Sum over qubits of s^n = n_x s^x + n_y s^y + n_z s^z."""
    nx_, ny_, nz_ = axis
    single = nx_ * SX + ny_ * SY + nz_ * SZ
    dim = 1 << n
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for q in range(n):
        total = total + site_operator(single, q, n)
    return total


def total_sz(n: int) -> sp.csr_matrix:
    return total_spin(n, (0.0, 0.0, 1.0))


# -------------------------------------------------------------------
# Rotation
# -------------------------------------------------------------------


def single_qubit_rotation(sched: RotationSchedule, t: float) -> np.ndarray:
    """exp(-i * direction * 2 pi t/T * s^n) as a 2x2 matrix."""
    theta = sched.angle(t)
    nx_, ny_, nz_ = sched.axis
    pauli_n = np.array([[nz_, nx_ - 1j * ny_], [nx_ + 1j * ny_, -nz_]], dtype=complex)
    return math.cos(theta / 2) * IDENTITY - 1j * math.sin(theta / 2) * pauli_n


def rotation_operator(n: int, sched: RotationSchedule, t: float) -> sp.csr_matrix:
    r = sp.csr_matrix(single_qubit_rotation(sched, t))
    full = sp.csr_matrix(np.eye(1, dtype=complex))
    for _ in range(n):
        full = sp.kron(r, full, format="csr")
    return full


def apply_single_qubit(psi: np.ndarray, gate: np.ndarray, n: int) -> np.ndarray:
    """Apply the same 2x2 gate to every qubit of a 2^n state."""
    out = np.asarray(psi, dtype=complex)
    for q in range(n):
        view = out.reshape(1 << (n - 1 - q), 2, 1 << q)
        out = np.einsum("ij,ajb->aib", gate, view).reshape(-1)
    return out


def rotate_state(psi: np.ndarray, n: int, sched: RotationSchedule, t: float, inverse: bool = False) -> np.ndarray:
    """R(t) psi, or R(t)^dagger psi when `inverse`."""
    gate = single_qubit_rotation(sched, t)
    if inverse:
        gate = gate.conj().T
    return apply_single_qubit(psi, gate, n)


def _check_time(sched: RotationSchedule, t: float) -> None:
    if not 0.0 <= t <= sched.total_time:
        raise ParameterError(f"t = {t!r} outside [0, T = {sched.total_time!r}]")


def rotate_hamiltonian(h0: SparseHamiltonian, sched: RotationSchedule, t: float) -> SparseHamiltonian:
    """H(t) = R(t) H0 R(t)^dagger, Hermitian as stored."""
    _check_time(sched, t)
    if t == 0.0 or t == sched.total_time:
        # Identity and full revolution: closed path, H(0) = H(T) = H0
        return h0
    r = rotation_operator(h0.n, sched, t)
    conj = r @ h0.matrix @ r.conj().T
    hermitian = (conj + conj.conj().T) * 0.5
    return _finalize(h0.n, hermitian, conserves_sz=False, norm_bound=h0.norm_bound)


def rotated_apply(h0: SparseHamiltonian, sched: RotationSchedule, t: float, psi: np.ndarray) -> np.ndarray:
    """H(t) psi without forming H(t)."""
    back = rotate_state(psi, h0.n, sched, t, inverse=True)
    return rotate_state(h0.matrix @ back, h0.n, sched, t)


def apply(h: SparseHamiltonian, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape[0] != h.dimension:
        raise DimensionError(f"state has {psi.shape[0]} amplitudes, operator dimension is {h.dimension}")
    return h.matrix @ psi


# -------------------------------------------------------------------
# Sector structure and dumps
# -------------------------------------------------------------------


def sector_indices(h: SparseHamiltonian, k: int) -> np.ndarray:
    return np.flatnonzero(h.sector_map == k)


def sector_block(h: SparseHamiltonian, k: int) -> Tuple[sp.csr_matrix, np.ndarray]:
    idx = sector_indices(h, k)
    block = h.matrix[idx][:, idx].tocsr()
    block.sort_indices()
    return block, idx


def write_coo(h: SparseHamiltonian, path: Union[str, Path]) -> None:
    """One 'row col re im' line per stored entry, sorted by (row, col)."""
    coo = h.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as f:
        for i in order:
            v = coo.data[i]
            f.write(f"{coo.row[i]} {coo.col[i]} {v.real:.17g} {v.imag:.17g}\n")
    logger.info(f"Wrote {coo.nnz} entries to {path}")
