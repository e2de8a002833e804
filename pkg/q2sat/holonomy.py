"""
Non-Abelian gauge matrix of the degenerate ground space and its holonomy.

The frame psi_k(t) = R(t) psi_k(0) is generated by a fixed rotation, so
A_kl = i <psi_l| d/dt |psi_k> = direction * omega * <psi_l(0)|S^n|psi_k(0)>
does not depend on t. Coefficients are row vectors: c(T) = c(0) U.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as sla

from errors import GroundSpaceError, ParameterError
from hamiltonian import RotationSchedule, rotate_state, total_spin
from spectrum import ProductGroundBasis, as_ground_basis

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class GaugeHolonomy:
    gauge_matrix: np.ndarray
    holonomy: np.ndarray
    steps: int
    sign: int = 1

    @property
    def degeneracy(self) -> int:
        return self.gauge_matrix.shape[0]

    def unitarity_defect(self) -> float:
        u = self.holonomy
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), ord=2))


def _dense_basis(basis) -> np.ndarray:
    return _orthonormal(as_ground_basis(basis).to_dense())


def _orthonormal(vectors: np.ndarray) -> np.ndarray:
    gram = vectors.conj().T @ vectors
    defect = float(np.abs(gram - np.eye(gram.shape[0])).max()) if gram.size else 0.0
    if defect > ORTHONORMAL_TOL:
        raise GroundSpaceError(f"ground basis is not orthonormal (max |B^H B - I| = {defect:.2e})")
    return vectors


def gauge_matrix(basis, sched: RotationSchedule) -> np.ndarray:
    """g x g Hermitian matrix, units of inverse time."""
    return _gauge_from(_dense_basis(basis), sched)


def _gauge_from(vectors: np.ndarray, sched: RotationSchedule) -> np.ndarray:
    n = int(round(np.log2(vectors.shape[0])))
    spin = total_spin(n, sched.axis)
    # elements[l, k] = <psi_l|S|psi_k>
    elements = vectors.conj().T @ (spin @ vectors)
    a = sched.direction * sched.omega * elements.T
    return (a + a.conj().T) / 2


def holonomy(gauge: Union[np.ndarray, Callable[[float], np.ndarray]], total_time: float, steps: int = 1,
             sign: int = 1) -> np.ndarray:
    """
    Path-ordered exp(i sign int A dt) from midpoint steps.

    `gauge` is a constant matrix or a function of t. Later factors multiply on
    the right, matching row-vector propagation of the coefficients.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps!r}")
    if sign not in (1, -1):
        raise ParameterError(f"sign must be +1 or -1, got {sign!r}")
    dt = total_time / steps
    if not callable(gauge):
        a = np.asarray(gauge, dtype=complex)
        step = sla.expm(1j * sign * a * dt)
        return np.linalg.matrix_power(step, steps)
    u = None
    for j in range(steps):
        factor = sla.expm(1j * sign * np.asarray(gauge((j + 0.5) * dt), dtype=complex) * dt)
        u = factor if u is None else u @ factor
    return u


def compute_holonomy(basis, sched: RotationSchedule, steps: int = 1, sign: int = 1) -> GaugeHolonomy:
    a = gauge_matrix(basis, sched)
    u = holonomy(a, sched.total_time, steps, sign)
    return GaugeHolonomy(gauge_matrix=a, holonomy=u, steps=steps, sign=sign)


def ground_coefficients(psi: np.ndarray, basis) -> np.ndarray:
    """Coefficients of psi over the ground basis; errors if psi leaves the ground space."""
    vectors = _dense_basis(basis)
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    coeffs = vectors.conj().T @ psi
    residual = float(np.linalg.norm(psi - vectors @ coeffs))
    if residual > RESIDUAL_TOL * max(1.0, float(np.linalg.norm(psi))):
        raise GroundSpaceError(f"initial state is outside the ground space (projection residual {residual:.2e})")
    return coeffs


def predict_final_state(u: np.ndarray, psi0_coefficients: np.ndarray, basis,
                        sched: Optional[RotationSchedule] = None) -> np.ndarray:
    """
    sum_kl c_k U_kl psi_l, normalized.

    With a schedule the closing rotation R(T) is applied too; it is a global
    phase (-1)^n on a full revolution.
    """
    vectors = _dense_basis(basis)
    c = np.asarray(psi0_coefficients, dtype=complex).reshape(-1)
    final = vectors @ (c @ u)
    norm = np.linalg.norm(final)
    if norm == 0:
        raise GroundSpaceError("initial coefficients are zero")
    final = final / norm
    if sched is not None:
        n = int(round(np.log2(vectors.shape[0])))
        final = rotate_state(final, n, sched, sched.total_time)
    return final


def predicted_trivial_probability(basis, sched: RotationSchedule, sign: int = 1) -> float:
    """
    Weight on |00...0> and |11...1> once the holonomy has acted on |00...0>.

    A product basis is transported factor by factor: each component carries
    its own all-zero state, so the global amplitudes are products of the
    per-factor ones and the full g x g gauge matrix is never formed.
    """
    basis = as_ground_basis(basis)
    if isinstance(basis, ProductGroundBasis):
        factors = [_orthonormal(local) for _, local in basis.factors]
    else:
        factors = [_dense_basis(basis)]
    zeros, ones = 1.0 + 0j, 1.0 + 0j
    for local in factors:
        u = holonomy(_gauge_from(local, sched), sched.total_time, sign=sign)
        final = local @ (local[0].conj() @ u)
        zeros *= final[0]
        ones *= final[-1]
    return float(abs(zeros) ** 2 + abs(ones) ** 2)


def holonomy_report(result: GaugeHolonomy, predicted: np.ndarray, basis,
                    evolved: Optional[np.ndarray] = None) -> dict:
    vectors = _dense_basis(basis)
    probabilities = np.abs(vectors.conj().T @ predicted) ** 2
    report = {
        "g": result.degeneracy,
        "unitarity_defect": result.unitarity_defect(),
        "steps": result.steps,
        "sign": result.sign,
        "predicted_probabilities": [float(p) for p in probabilities],
        "fidelity_vs_evolution": None,
    }
    if evolved is not None:
        report["fidelity_vs_evolution"] = float(abs(np.vdot(predicted, evolved)) ** 2)
    logger.info(f"Holonomy: g={report['g']}, |U^H U - I|={report['unitarity_defect']:.2e}, "
                f"fidelity={report['fidelity_vs_evolution']}")
    return report
