"""
Schrödinger evolution along the closed rotation H(t) = R(t) H0 R(t)^dagger.

evolve_lab integrates i dpsi/dt = H(t) psi with fixed-step RK4 and never
renormalizes; the norm drift is reported and bounded. evolve_rotating solves
the same problem exactly in the co-rotating frame, where the generator
H0 - direction * omega * S is time independent.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from errors import DimensionError, NormDriftError, ParameterError
from hamiltonian import (
    RotationSchedule,
    SparseHamiltonian,
    Y_AXIS,
    make_schedule,
    rotate_state,
    rotated_apply,
    total_spin,
)
from instance import trivial_indices
from spectrum import GroundBasis, as_ground_basis, ground_and_gap

logger = logging.getLogger(__name__)

MIN_STEPS = 2000
DRIFT_LIMIT = 1e-4
NORM_TOL = 1e-8


@dataclass(frozen=True)
class Checkpoint:
    t: float
    norm: float
    energy: float
    ground_fidelity: float


@dataclass(frozen=True)
class Measurement:
    probabilities: np.ndarray
    ground_fidelity: float
    trivial_probability: float
    trivial_members: Tuple[float, float]


@dataclass(frozen=True)
class EvolutionResult:
    final_state: np.ndarray
    ground_fidelity: float
    probabilities: np.ndarray
    trivial_probability: float
    schedule: RotationSchedule
    step_count: int
    frame: str
    norm_drift: float
    wall_time_ms: float = 0.0
    checkpoints: List[Checkpoint] = field(default_factory=list)


def schedule_from_gap(delta: float, multiplier: float = 1.0, axis: Sequence[float] = Y_AXIS,
                      direction: int = 1) -> RotationSchedule:
    """T = multiplier * pi / (50 delta^2)."""
    if not delta > 0:
        raise ParameterError(f"gap delta must be positive, got {delta!r}")
    if not multiplier > 0:
        raise ParameterError(f"T multiplier must be positive, got {multiplier!r}")
    return make_schedule(multiplier * math.pi / (50.0 * delta ** 2), axis=axis, direction=direction)


def default_steps(h0: SparseHamiltonian, sched: RotationSchedule) -> int:
    """ceil(max(2000, 20 T ||H0|| + 20 * 2 pi n)); resolves both the energy scale and the rotation."""
    bound = h0.spectral_bound()
    return int(math.ceil(max(MIN_STEPS, 20.0 * sched.total_time * bound + 20.0 * 2 * math.pi * h0.n)))


def _check_initial(h0: SparseHamiltonian, psi0: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.shape[0] != h0.dimension:
        raise DimensionError(f"initial state has {psi.shape[0]} amplitudes, expected {h0.dimension}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise ParameterError(f"initial state must be normalized, |psi0| = {norm!r}")
    return psi


def measure_against_basis(psi: np.ndarray, basis, trivial: Optional[Tuple[int, int]] = None) -> Measurement:
    """
    |<psi_k|psi>|^2 over an orthonormal ground basis.

    The trivial probability is read off the computational amplitudes of
    |00...0> and |11...1>, which does not depend on how a degenerate
    eigensolver rotated its basis.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    basis = as_ground_basis(basis)
    if trivial is None:
        trivial = trivial_indices(int(round(math.log2(psi.shape[0]))))
    probabilities = np.abs(basis.coefficients(psi)) ** 2
    members = (float(abs(psi[trivial[0]]) ** 2), float(abs(psi[trivial[1]]) ** 2))
    return Measurement(
        probabilities=probabilities,
        ground_fidelity=float(probabilities.sum()),
        trivial_probability=members[0] + members[1],
        trivial_members=members,
    )


def _checkpoint(h0: SparseHamiltonian, sched: RotationSchedule, t: float, psi: np.ndarray,
                basis: GroundBasis) -> Checkpoint:
    # Ground space of H(t) is R(t) times the ground space of H0
    back = rotate_state(psi, h0.n, sched, t, inverse=True)
    energy = float(np.vdot(back, h0.matrix @ back).real)
    fidelity = float(np.sum(np.abs(basis.coefficients(back)) ** 2))
    return Checkpoint(t=t, norm=float(np.linalg.norm(psi)), energy=energy, ground_fidelity=fidelity)


def _checkpoint_steps(steps: int, count: int) -> List[int]:
    return sorted({max(1, int(round(i * steps / count))) for i in range(1, count + 1)}) if count > 0 else []


def _resolve_basis(h0: SparseHamiltonian, basis) -> GroundBasis:
    if basis is not None:
        return as_ground_basis(basis)
    return ground_and_gap(h0).ground_basis


def _finish(h0, sched, psi, basis, steps, frame, started, checkpoints) -> EvolutionResult:
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if not drift <= DRIFT_LIMIT:
        logger.warning(f"Norm drift {drift:.3e} after {steps} steps ({frame} frame)")
        raise NormDriftError(drift, steps)
    # H(T) = H0, so the t = 0 ground basis measures the final state
    m = measure_against_basis(psi, basis, trivial_indices(h0.n))
    result = EvolutionResult(
        final_state=psi,
        ground_fidelity=m.ground_fidelity,
        probabilities=m.probabilities,
        trivial_probability=m.trivial_probability,
        schedule=sched,
        step_count=steps,
        frame=frame,
        norm_drift=drift,
        wall_time_ms=(time.perf_counter() - started) * 1000,
        checkpoints=checkpoints,
    )
    logger.info(f"Evolved n={h0.n} over T={sched.total_time:.6g} ({frame}, {steps} steps): "
                f"fidelity={result.ground_fidelity:.6f}, trivial={result.trivial_probability:.6f}, "
                f"drift={drift:.2e}")
    return result


def evolve_lab(h0: SparseHamiltonian, sched: RotationSchedule, psi0: np.ndarray, steps: Optional[int] = None,
               basis=None, checkpoints: int = 0) -> EvolutionResult:
    """Classical RK4 at fixed step T/steps in the laboratory frame."""
    started = time.perf_counter()
    psi = _check_initial(h0, psi0)
    rule = default_steps(h0, sched)
    if steps is None:
        steps = rule
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps!r}")
    if steps < rule:
        logger.debug(f"Running {steps} RK4 steps, below the step rule of {rule}")
    basis = _resolve_basis(h0, basis)

    dt = sched.total_time / steps
    marks = set(_checkpoint_steps(steps, checkpoints))
    rows: List[Checkpoint] = []

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return -1j * rotated_apply(h0, sched, t, y)

    for j in range(steps):
        t = j * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if j + 1 in marks:
            rows.append(_checkpoint(h0, sched, (j + 1) * dt, psi, basis))

    return _finish(h0, sched, psi, basis, steps, "lab", started, rows)


def rotating_generator(h0: SparseHamiltonian, sched: RotationSchedule) -> sp.csr_matrix:
    """H0 - direction * omega * S^n, the frame-independent generator of phi = R^dagger psi."""
    spin = total_spin(h0.n, sched.axis)
    return (h0.matrix - sched.direction * sched.omega * spin).tocsr()


def evolve_rotating(h0: SparseHamiltonian, sched: RotationSchedule, psi0: np.ndarray, basis=None,
                    checkpoints: int = 0) -> EvolutionResult:
    """Exact propagation via the action of exp(-i G T) on the initial vector."""
    started = time.perf_counter()
    psi = _check_initial(h0, psi0)
    basis = _resolve_basis(h0, basis)
    generator = -1j * rotating_generator(h0, sched)
    rows: List[Checkpoint] = []
    if checkpoints > 0:
        grid = expm_multiply(generator, psi, start=0.0, stop=sched.total_time, num=checkpoints + 1,
                             endpoint=True)
        for i in range(1, checkpoints + 1):
            t = sched.total_time * i / checkpoints
            rows.append(_checkpoint(h0, sched, t, rotate_state(grid[i], h0.n, sched, t), basis))
        phi = grid[-1]
    else:
        phi = expm_multiply(generator * sched.total_time, psi)
    final = rotate_state(phi, h0.n, sched, sched.total_time)
    return _finish(h0, sched, final, basis, 0, "rotating", started, rows)


def evolution_report(result: EvolutionResult, digest: str) -> dict:
    order = np.argsort(-result.probabilities, kind="stable")
    return {
        "instance": digest,
        "T": result.schedule.total_time,
        "steps": result.step_count,
        "frame": result.frame,
        "ground_fidelity": result.ground_fidelity,
        "trivial_probability": result.trivial_probability,
        "probabilities": [{"index": int(k), "p": float(result.probabilities[k])} for k in order],
        "norm_drift": result.norm_drift,
        "wall_time_ms": result.wall_time_ms,
        "checkpoints": [
            {"t": c.t, "norm": c.norm, "energy": c.energy, "ground_fidelity": c.ground_fidelity}
            for c in result.checkpoints
        ],
    }
