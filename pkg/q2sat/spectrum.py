"""
Ground energy, ground space, degeneracy and gap of projector Hamiltonians.

H0 conserves total S^z, so every magnetization sector is diagonalized on its
own and the results are merged by sector index. Sectors above a size limit go
through a block Lanczos solver with full reorthogonalization; the block grows
until it is wider than the sector's ground multiplicity.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from config import SETTINGS
from errors import ConvergenceError, DimensionError, ZeroGapError
from hamiltonian import SparseHamiltonian, build_h0, sector_block
from instance import Q2SATInstance, connected_components, subinstance

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9
AMBIGUITY_FACTOR = 100.0
ZERO_GAP_TOL = 1e-7
KRYLOV_TOL = 1e-10
DENSE_BLOCK_LIMIT = 400
INITIAL_REQUEST = 4
MAX_BLOCK_STEPS = 400

# -------------------------------------------------------------------
# Ground bases
# -------------------------------------------------------------------


class DenseGroundBasis:
    """Orthonormal ground vectors stored as the columns of a dim x g array."""

    def __init__(self, vectors: np.ndarray):
        self.vectors = np.asarray(vectors, dtype=complex)

    @property
    def degeneracy(self) -> int:
        return self.vectors.shape[1]

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ psi

    def embed(self, coeffs: np.ndarray) -> np.ndarray:
        return self.vectors @ coeffs

    def to_dense(self) -> np.ndarray:
        return self.vectors


class ProductGroundBasis:
    """
    Tensor product of per-component ground bases.

    Each factor is (qubits, local) where `local` has 2^len(qubits) rows indexed
    with qubits[i] as local bit i. Basis members are ordered as the C-order
    multi-index over factors.
    """

    def __init__(self, n: int, factors: Sequence[Tuple[Tuple[int, ...], np.ndarray]]):
        self.n = n
        self.factors = [(tuple(q), np.asarray(b, dtype=complex)) for q, b in factors]
        covered = sorted(q for qs, _ in self.factors for q in qs)
        if covered != list(range(n)):
            raise DimensionError(f"factors must cover qubits 0..{n - 1} exactly once, got {covered}")
        # Tensor axis j of a reshaped state holds qubit n-1-j
        self._perm = [n - 1 - q for qs, _ in self.factors for q in reversed(qs)]
        self._inverse_perm = np.argsort(self._perm)

    @property
    def degeneracy(self) -> int:
        return int(np.prod([b.shape[1] for _, b in self.factors]))

    @property
    def dimension(self) -> int:
        return 1 << self.n

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        tensor = np.asarray(psi, dtype=complex).reshape((2,) * self.n).transpose(self._perm)
        tensor = tensor.reshape([b.shape[0] for _, b in self.factors])
        for _, b in self.factors:
            tensor = np.tensordot(tensor, b.conj(), axes=([0], [0]))
        return tensor.reshape(-1)

    def embed(self, coeffs: np.ndarray) -> np.ndarray:
        tensor = np.asarray(coeffs, dtype=complex).reshape([b.shape[1] for _, b in self.factors])
        for _, b in self.factors:
            tensor = np.tensordot(tensor, b, axes=([0], [1]))
        tensor = tensor.reshape((2,) * self.n).transpose(self._inverse_perm)
        return tensor.reshape(-1)

    def to_dense(self) -> np.ndarray:
        eye = np.eye(self.degeneracy, dtype=complex)
        return np.stack([self.embed(eye[k]) for k in range(self.degeneracy)], axis=1)


GroundBasis = Union[DenseGroundBasis, ProductGroundBasis]


def as_ground_basis(basis) -> GroundBasis:
    if isinstance(basis, (DenseGroundBasis, ProductGroundBasis)):
        return basis
    return DenseGroundBasis(np.asarray(basis))


# -------------------------------------------------------------------
# Results
# -------------------------------------------------------------------


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SpectrumResult:
    ground_energy: float
    gap_delta: Optional[float]
    degeneracy: int
    ground_basis: Optional[GroundBasis]
    method: str
    tolerance: float
    ambiguous: bool = False
    sector_degeneracies: Dict[int, int] = field(default_factory=dict)
    max_residual: float = 0.0
    wall_time_ms: float = 0.0


@dataclass(frozen=True)
class SectorSolution:
    sector: int
    ground_values: np.ndarray
    ground_vectors: np.ndarray
    excited_value: Optional[float]
    method: str
    max_residual: float


# -------------------------------------------------------------------
# Dense path
# -------------------------------------------------------------------


def dense_spectrum(h: SparseHamiltonian, max_qubits: Optional[int] = None) -> DenseSpectrum:
    """All 2^n eigenpairs, ascending. Oracle for the iterative path."""
    limit = SETTINGS.dense_limit_qubits if max_qubits is None else max_qubits
    if h.n > limit:
        raise DimensionError(
            f"dense diagonalization refused for n = {h.n} > {limit} (dimension {h.dimension}); "
            "use ground_and_gap, which works sector by sector with a Krylov solver"
        )
    w, v = np.linalg.eigh(h.to_dense())
    return DenseSpectrum(eigenvalues=w, eigenvectors=v)


def summarize_dense(ds: DenseSpectrum, tol: float = DEGENERACY_TOL) -> SpectrumResult:
    w = ds.eigenvalues
    e0 = float(w[0])
    ground = int(np.count_nonzero(w < e0 + tol))
    excited = float(w[ground]) if ground < len(w) else None
    return SpectrumResult(
        ground_energy=e0,
        gap_delta=None if excited is None else excited - e0,
        degeneracy=ground,
        ground_basis=DenseGroundBasis(ds.eigenvectors[:, :ground]),
        method="dense",
        tolerance=tol,
        ambiguous=excited is not None and excited - e0 < AMBIGUITY_FACTOR * tol,
    )


# -------------------------------------------------------------------
# Block Lanczos
# -------------------------------------------------------------------


def block_lanczos(a: sp.spmatrix, k: int, rng: np.random.Generator, tol: float = KRYLOV_TOL,
                  block_size: Optional[int] = None,
                  max_steps: int = MAX_BLOCK_STEPS) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Lowest k eigenpairs of a Hermitian operator.

    Krylov blocks are orthogonalized twice against the whole basis and the
    Ritz pairs come from the projected matrix. Returns (values, vectors,
    residual norms). Returns None when the basis would cover half the space,
    in which case the caller should diagonalize densely.
    """
    dim = a.shape[0]
    b = min(dim, block_size or k + 2)
    start = rng.standard_normal((dim, b)) + 1j * rng.standard_normal((dim, b))
    q, _ = np.linalg.qr(start)
    basis = [q]
    images = [a @ q]
    residuals = np.full(k, np.inf)
    scale = max(1.0, float(abs(a).sum(axis=1).max())) if a.nnz else 1.0

    for step in range(max_steps):
        v = np.hstack(basis)
        w = np.hstack(images)
        t = v.conj().T @ w
        t = (t + t.conj().T) / 2
        theta, s = np.linalg.eigh(t)
        ritz = v @ s[:, :k]
        residuals = np.linalg.norm(w @ s[:, :k] - ritz * theta[:k], axis=0)
        if residuals.max() <= tol * scale:
            logger.debug(f"Block Lanczos converged: dim={dim}, k={k}, krylov={v.shape[1]}, steps={step + 1}")
            return theta[:k], ritz, residuals

        z = images[-1].copy()
        for _ in range(2):
            z -= v @ (v.conj().T @ z)
        qn, rn = sla.qr(z, mode="economic")
        keep = np.abs(np.diag(rn)) > 1e-12 * scale
        if not keep.any():
            # Invariant subspace: Ritz pairs are exact up to rounding
            return theta[:k], ritz, residuals
        qn = qn[:, keep]
        if v.shape[1] + qn.shape[1] > dim // 2:
            return None
        basis.append(qn)
        images.append(a @ qn)

    raise ConvergenceError(f"block Lanczos did not converge in {max_steps} steps (dim={dim}, k={k})", residuals)


def solve_sector(block: sp.spmatrix, sector: int, tol: float, dense_limit: int = DENSE_BLOCK_LIMIT,
                 seed: int = 0) -> SectorSolution:
    dim = block.shape[0]
    if block.nnz == 0:
        return SectorSolution(sector, np.zeros(dim), np.eye(dim, dtype=complex), None, "dense", 0.0)

    rng = np.random.default_rng(seed + sector)
    k = min(INITIAL_REQUEST, dim)
    while dim > dense_limit and k < dim:
        found = block_lanczos(block, k, rng)
        if found is None:
            break
        values, vectors, residuals = found
        ground = int(np.count_nonzero(values < tol))
        if ground < k:
            return SectorSolution(sector, values[:ground], vectors[:, :ground], float(values[ground]),
                                  "iterative", float(residuals.max()))
        k = min(2 * k, dim)

    w, v = np.linalg.eigh(block.toarray())
    ground = int(np.count_nonzero(w < tol))
    excited = float(w[ground]) if ground < dim else None
    return SectorSolution(sector, w[:ground], v[:, :ground], excited, "dense", 0.0)


def ground_and_gap(h: SparseHamiltonian, tol: Optional[float] = None, dense_limit: int = DENSE_BLOCK_LIMIT,
                   workers: int = 1, seed: int = 0, energy_unit: float = 1.0) -> SpectrumResult:
    """
    E0, degeneracy g, gap delta and an orthonormal ground basis.

    Eigenvalues below `tol` (default 1e-9 * energy_unit) count as ground. An
    eigenvalue inside [tol, 100 tol] cannot be classified and marks the
    result ambiguous instead of being silently assigned.
    """
    started = time.perf_counter()
    tol = DEGENERACY_TOL * energy_unit if tol is None else tol

    if h.conserves_sz:
        sectors = [(k, *sector_block(h, k)) for k in range(h.n + 1)]
    else:
        sectors = [(0, h.matrix, np.arange(h.dimension))]

    def run(item):
        k, block, _ = item
        return solve_sector(block, k, tol, dense_limit=dense_limit, seed=seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solutions = list(pool.map(run, sectors))
    else:
        solutions = [run(item) for item in sectors]

    vectors = []
    degeneracies: Dict[int, int] = {}
    ground_values = []
    excited = []
    for (k, _, idx), sol in zip(sectors, solutions):
        degeneracies[k] = len(sol.ground_values)
        ground_values.extend(sol.ground_values.tolist())
        if sol.excited_value is not None:
            excited.append(sol.excited_value)
        for j in range(sol.ground_vectors.shape[1]):
            full = np.zeros(h.dimension, dtype=complex)
            full[idx] = sol.ground_vectors[:, j]
            vectors.append(full)

    ground_energy = float(min(ground_values)) if ground_values else float(min(excited))
    lowest_excited = min(excited) if excited else None
    gap = None if lowest_excited is None else float(lowest_excited - ground_energy)
    ambiguous = lowest_excited is not None and lowest_excited < AMBIGUITY_FACTOR * tol
    if ambiguous:
        logger.warning(f"Ambiguous degeneracy: eigenvalue {lowest_excited:.3e} lies in [{tol:.1e}, "
                       f"{AMBIGUITY_FACTOR * tol:.1e}]; rerun with a tighter tolerance")

    methods = {sol.method for sol in solutions}
    basis = np.stack(vectors, axis=1) if vectors else np.zeros((h.dimension, 0), dtype=complex)
    return SpectrumResult(
        ground_energy=ground_energy,
        gap_delta=gap,
        degeneracy=len(vectors),
        ground_basis=DenseGroundBasis(basis),
        method="iterative" if "iterative" in methods else "dense",
        tolerance=tol,
        ambiguous=ambiguous,
        sector_degeneracies=degeneracies,
        max_residual=max(sol.max_residual for sol in solutions),
        wall_time_ms=(time.perf_counter() - started) * 1000,
    )


def component_spectrum(inst: Q2SATInstance, with_basis: bool = False, tol: Optional[float] = None,
                       dense_limit: int = DENSE_BLOCK_LIMIT) -> SpectrumResult:
    """
    Exact spectrum data of a possibly disconnected instance from its components.

    H0 is a sum of commuting pieces on disjoint qubits whose ground energies
    are all 0, so g is the product of component degeneracies (2 per isolated
    qubit) and delta is the smallest component gap.
    """
    started = time.perf_counter()
    tol = DEGENERACY_TOL * inst.clause.delta if tol is None else tol
    gaps = []
    degeneracy = 1
    ambiguous = False
    residual = 0.0
    factors = []
    for component in connected_components(inst):
        if len(component) == 1:
            degeneracy *= 2
            factors.append((component, np.eye(2, dtype=complex)))
            continue
        res = ground_and_gap(build_h0(subinstance(inst, component)), tol=tol, dense_limit=dense_limit)
        degeneracy *= res.degeneracy
        ambiguous = ambiguous or res.ambiguous
        residual = max(residual, res.max_residual)
        if res.gap_delta is not None:
            gaps.append(res.gap_delta)
        if with_basis:
            factors.append((component, res.ground_basis.to_dense()))

    return SpectrumResult(
        ground_energy=0.0,
        gap_delta=min(gaps) if gaps else None,
        degeneracy=degeneracy,
        ground_basis=ProductGroundBasis(inst.n, factors) if with_basis else None,
        method="components",
        tolerance=tol,
        ambiguous=ambiguous,
        max_residual=residual,
        wall_time_ms=(time.perf_counter() - started) * 1000,
    )


def inverse_square_gap(res: SpectrumResult, min_gap: float = ZERO_GAP_TOL) -> float:
    if res.gap_delta is None:
        raise ZeroGapError("no excited level: the gap is undefined (every state is a ground state)")
    if res.gap_delta < min_gap:
        raise ZeroGapError(f"gap {res.gap_delta:.3e} below exclusion threshold {min_gap:.1e}")
    return 1.0 / res.gap_delta ** 2


def sector_spectra(h: SparseHamiltonian) -> Dict[int, np.ndarray]:
    """Full eigenvalue list of every sector block (dense; small n only)."""
    return {k: np.linalg.eigvalsh(sector_block(h, k)[0].toarray()) for k in range(h.n + 1)}


def spectrum_report(res: SpectrumResult, digest: str, n: int, m: int, seed: Optional[int] = None,
                    timings: bool = False) -> dict:
    try:
        inv = inverse_square_gap(res)
    except ZeroGapError:
        inv = None
    report = {
        "instance": digest,
        "seed": seed,
        "n": n,
        "m": m,
        "ground_energy": res.ground_energy,
        "gap_delta": res.gap_delta,
        "inv_sq_gap": inv,
        "degeneracy": res.degeneracy,
        "method": res.method,
        "tolerance": res.tolerance,
        "ambiguous": res.ambiguous,
        "sector_degeneracies": {str(k): v for k, v in sorted(res.sector_degeneracies.items())},
        "max_residual": res.max_residual,
    }
    if timings:
        report["wall_time_ms"] = res.wall_time_ms
    return report
